//! Acceptance suite: one check per criterion, run in order, each printing a
//! single PASS/FAIL line with its runtime. Exits non-zero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use salem_core::dimension::{salem_report, walk_ladder, walk_level_for, SalemOptions, WordSource};
use salem_core::dyadic::{
    cantor_flow, flow_check, frostman_check, hull_check, n_approximation, CantorSpec,
};
use salem_core::rng::{rng_for, Stream};
use salem_core::spectral::{
    char_suite, decay_pipeline, geometric_sum_bound, lemma_suite, moment_double_sum,
    moment_exact_small, moment_mc, tail_mc, GridSpec, DEFAULT_U_LO,
};
use salem_core::walk::{deficiency_proxy, sample_word};

struct Verdict {
    passed: bool,
    detail: String,
}

fn spec(xi: &str, depth: u32) -> CantorSpec {
    CantorSpec::new(CantorSpec::parse_ratio(xi).unwrap(), depth).unwrap()
}

fn theta(xi: &str, n: u32) -> salem_core::dyadic::AtomicMeasure {
    n_approximation(&cantor_flow(&spec(xi, n)).unwrap(), n).unwrap()
}

fn default_grid() -> Vec<f64> {
    GridSpec::Linear {
        lo: DEFAULT_U_LO,
        hi: 2000.0,
        step: 1.0 / 16.0,
    }
    .points()
    .unwrap()
}

fn lemma_identity() -> Verdict {
    let suite = lemma_suite(61, 50, 1e-4).unwrap();
    Verdict {
        passed: suite.passed(1e-9),
        detail: format!(
            "{} cases, max relative error {:.2e}",
            suite.cases.len(),
            suite.max_rel_error
        ),
    }
}

fn characteristic_function() -> Verdict {
    let s = char_suite();
    Verdict {
        passed: s.max_abs_error <= 1e-12,
        detail: format!("{} cases, max error {:.2e}", s.cases, s.max_abs_error),
    }
}

fn moment_oracle() -> Verdict {
    let mut worst_z: f64 = 0.0;
    let mut worst_double: f64 = 0.0;
    let mut passed = true;
    for n in [3u32, 4] {
        let th = theta("1/4", n);
        let steps = 1usize << n;
        for q in [1u32, 2] {
            for (k, u) in [0.5, 1.0, 2.0, 4.0, 8.0].into_iter().enumerate() {
                let est = moment_mc(
                    &th,
                    steps,
                    q,
                    u,
                    0.5,
                    100_000,
                    300 + 10 * n as u64 + 5 * q as u64 + k as u64,
                )
                .unwrap();
                let exact = est.exact.expect("small walks are enumerated");
                worst_z = worst_z.max((est.mean - exact).abs() / est.std_error);
                passed &= est.agrees_with_exact() == Some(true);
                if q == 1 {
                    let d = (moment_exact_small(&th, steps, 1, u).unwrap()
                        - moment_double_sum(&th, steps, u).unwrap())
                    .abs();
                    worst_double = worst_double.max(d);
                }
            }
        }
    }
    passed &= worst_double <= 1e-10;
    Verdict {
        passed,
        detail: format!(
            "20 cells, worst |mean - exact| = {worst_z:.2} SE; double-sum gap {worst_double:.1e}"
        ),
    }
}

fn moment_bound() -> Verdict {
    let mut passed = true;
    let mut worst: f64 = 0.0;
    for n in [12u32, 14] {
        let th = theta("1/4", n);
        for q in [2u32, 3] {
            for u in [n as f64, n as f64 + 0.5, n as f64 + 1.0] {
                let est = moment_mc(
                    &th,
                    1 << n,
                    q,
                    u,
                    0.49,
                    20_000,
                    400 + n as u64 * 10 + q as u64,
                )
                .unwrap();
                worst = worst.max((est.mean - 3.0 * est.std_error) / est.bound);
                passed &= est.bound_holds();
            }
        }
    }
    Verdict {
        passed,
        detail: format!("12 cells, worst (mean - 3σ) / bound = {worst:.3e}"),
    }
}

fn tail_chain() -> Verdict {
    let rep = tail_mc(
        &theta("1/4", 12),
        1 << 12,
        12.0,
        1.0,
        Some(6),
        0.49,
        100_000,
        500,
    )
    .unwrap();
    Verdict {
        passed: rep.holds,
        detail: format!(
            "P̂ = {:.3e} vs chain {:.3e} + 3·{:.1e} (threshold {:.4})",
            rep.p_hat, rep.chain, rep.mc_error, rep.threshold
        ),
    }
}

fn frostman() -> Verdict {
    let mut passed = true;
    let mut parts = Vec::new();
    for xi in ["1/3", "1/4", "1/16"] {
        let s = spec(xi, 14);
        let flow = cantor_flow(&s).unwrap();
        let hull = hull_check(&flow, &s).unwrap();
        let fr = frostman_check(&flow, s.beta(), 1.0, 10_000, 600);
        passed &=
            flow_check(&flow).passed && hull.all_covers_exact() && fr.general_worst_ratio <= 1.0;
        parts.push(format!(
            "{xi}: {}/{} survivor masses exact, general ratio {:.3}",
            hull.cover_exact, hull.survivors, fr.general_worst_ratio
        ));
    }
    Verdict {
        passed,
        detail: parts.join("; "),
    }
}

fn geometric_sum() -> Verdict {
    let xis = ["1/3", "1/4", "1/16"];
    let thetas: Vec<_> = [12u32, 14]
        .iter()
        .flat_map(|&n| xis.iter().map(move |xi| (n, *xi)))
        .map(|(n, xi)| (n, spec(xi, n).beta(), theta(xi, n)))
        .collect();
    let mut rng = rng_for(700, Stream::Intervals);
    let (mut held, mut simplified_held, mut at_14) = (0, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (n, beta, th) = &thetas[rng.random_range(0..thetas.len())];
        let steps = 1usize << n;
        let u_cap = 0.99 * std::f64::consts::FRAC_PI_2 * (steps as f64).sqrt();
        let u = (rng.random::<f64>() * u_cap.ln()).exp();
        let r = rng.random_range(0..=steps);
        let g = geometric_sum_bound(th, steps, r, u, *beta).unwrap();
        worst = worst.max(g.lhs / g.rhs);
        held += g.holds() as usize;
        if *n == 14 {
            at_14 += 1;
            simplified_held += (g.lhs <= g.simplified) as usize;
        }
    }
    Verdict {
        passed: held == 100 && simplified_held == at_14,
        detail: format!(
            "{held}/100 within the bound (worst lhs/rhs {worst:.3}); {simplified_held}/{at_14} within 11/u^(2α) at n = 14"
        ),
    }
}

fn decay_run(xi: &str, n: u32, seed: u64, word: WordSource) -> salem_core::spectral::DecayRun {
    let grid = default_grid();
    let ladder = walk_ladder(seed, walk_level_for(n, 2000.0), word).unwrap();
    let flow = cantor_flow(&spec(xi, n)).unwrap();
    decay_pipeline(&ladder, &flow, n, &grid, DEFAULT_U_LO).unwrap()
}

fn main_decay() -> Verdict {
    let mut passed = true;
    let mut parts = Vec::new();
    for seed in 1..=5u64 {
        let run = decay_run("1/4", 18, seed, WordSource::Random);
        passed &= run.fit.exponent >= 0.40 && run.fit.r_squared >= 0.8;
        parts.push(format!(
            "seed {seed}: {:.3} (r² {:.2})",
            run.fit.exponent, run.fit.r_squared
        ));
    }
    Verdict {
        passed,
        detail: format!("exponent ≥ 0.40 with r² ≥ 0.8 needed; {}", parts.join(", ")),
    }
}

fn negative_control() -> Verdict {
    let run = decay_run("1/3", 18, 42, WordSource::AllOnes);
    let ones = deficiency_proxy(&vec![true; 1 << 16]);
    let randoms: Vec<bool> = (1..=5u64)
        .map(|s| deficiency_proxy(&sample_word(1 << 16, s)).incompressible_like)
        .collect();
    Verdict {
        passed: run.fit.exponent <= 0.05 && !ones.incompressible_like && randoms.iter().all(|&b| b),
        detail: format!(
            "all-ones exponent {:.4}; all-ones deficiency {} ({}); random seeds pass {}/5",
            run.fit.exponent,
            ones.deficiency,
            if ones.incompressible_like {
                "pass"
            } else {
                "fail"
            },
            randoms.iter().filter(|&&b| b).count()
        ),
    }
}

fn salem_consistency() -> Verdict {
    let opts = SalemOptions::default();
    let thin = salem_report(&spec("1/16", 24), 42, 24, &opts).unwrap();
    let fat = salem_report(&spec("1/3", 18), 42, 18, &opts).unwrap();
    let checks = [
        (0.35..=0.65).contains(&thin.box_dim.dimension),
        (0.15..=0.35).contains(&thin.decay.exponent),
        (thin.capacity.crossover - 0.25).abs() <= 0.05,
        thin.fourier_le_box,
        (0.85..=1.0).contains(&fat.box_dim.dimension),
    ];
    Verdict {
        passed: checks.iter().all(|&c| c),
        detail: format!(
            "1/16: box {:.3}, exponent {:.3} (r² {:.2}), capacity {:.3}, Fourier dim {:.3}; 1/3: box {:.3}; checks {:?}",
            thin.box_dim.dimension,
            thin.decay.exponent,
            thin.decay.r_squared,
            thin.capacity.crossover,
            thin.fourier_dim,
            fat.box_dim.dimension,
            checks
        ),
    }
}

const CLI_RUNS: [&[&str]; 9] = [
    &[
        "cantor",
        "--xi",
        "1/3",
        "--n",
        "10",
        "--formats",
        "csv,json",
    ],
    &["walk", "--n", "14", "--formats", "csv,json"],
    &[
        "spectrum",
        "--n",
        "12",
        "--u-grid",
        "range:8:500:0.25",
        "--formats",
        "csv,json,svg",
    ],
    &["moments", "--n", "10", "--q", "2", "--trials", "2000"],
    &[
        "tail",
        "--n",
        "10",
        "--trials",
        "2000",
        "--formats",
        "csv,json",
    ],
    &["lemma", "--formats", "csv,json"],
    &[
        "salem-report",
        "--n",
        "12",
        "--u-grid",
        "range:8:500:0.125",
        "--formats",
        "csv,json,svg",
    ],
    &["dims", "--n", "10", "--formats", "csv,json"],
    &["verify", "--trials", "10"],
];

fn run_cli(args: &[&str], threads: &str, out: &Path) -> Option<i32> {
    Command::new(env!("CARGO_BIN_EXE_salem-lab"))
        .args(args)
        .args(["--seed", "11", "--threads", threads, "--out"])
        .arg(out)
        .env_remove("SALEM_LAB_THREADS")
        .output()
        .expect("binary runs")
        .status
        .code()
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Verdict {
    let one = tempfile::tempdir().unwrap();
    let many = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    for args in CLI_RUNS {
        let a = run_cli(args, "1", one.path());
        let b = run_cli(args, "4", many.path());
        if a != b || !matches!(a, Some(0) | Some(2)) {
            mismatches.push(format!("{} exit {a:?} vs {b:?}", args[0]));
        }
    }
    let (fa, fb) = (read_all(one.path()), read_all(many.path()));
    let names: Vec<&str> = fa.iter().map(|f| f.0.as_str()).collect();
    if names != fb.iter().map(|f| f.0.as_str()).collect::<Vec<_>>() {
        mismatches.push("artifact names differ".into());
    }
    for ((name, x), (_, y)) in fa.iter().zip(&fb) {
        if x != y {
            mismatches.push(format!("{name} differs"));
        }
    }
    Verdict {
        passed: mismatches.is_empty() && fa.len() >= CLI_RUNS.len(),
        detail: if mismatches.is_empty() {
            format!(
                "{} commands, {} artifacts identical under 1 and 4 threads",
                CLI_RUNS.len(),
                fa.len()
            )
        } else {
            mismatches.join("; ")
        },
    }
}

type Criterion = (&'static str, u64, fn() -> Verdict);

fn main() {
    let criteria: [Criterion; 11] = [
        ("summation-by-parts identity", 1, lemma_identity),
        ("characteristic function", 5, characteristic_function),
        ("moment oracle", 30, moment_oracle),
        ("moment bound", 120, moment_bound),
        ("Chebyshev tail chain", 60, tail_chain),
        ("Frostman checks", 30, frostman),
        ("geometric-sum estimate", 30, geometric_sum),
        ("envelope decay, 1/4", 300, main_decay),
        ("negative control", 120, negative_control),
        ("Salem consistency", 600, salem_consistency),
        ("determinism across threads", 600, determinism),
    ];
    let mut failures = 0;
    for (i, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let v = check();
        let elapsed = start.elapsed();
        let in_time = elapsed <= Duration::from_secs(*budget);
        let ok = v.passed && in_time;
        failures += !ok as usize;
        println!(
            "criterion {:>2} {} {name}: {} [{:.2}s of {budget}s{}]",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            if in_time { "" } else { ", over budget" }
        );
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures > 0 {
        std::process::exit(1);
    }
}
