use std::io::Write;

use salem_core::dimension::{
    auto_scales, box_count, capacity_dim, default_alpha_grid, default_capacity_depths,
    salem_report, walk_ladder, walk_level_for, BoxCount, SalemOptions,
};
use salem_core::dyadic::{
    cantor_flow, cantor_intervals, flow_check, frostman_check, hull_check, n_approximation,
    CantorSpec, Rational, TreeFlowMeasure,
};
use salem_core::numeric::fmt17;
use salem_core::spectral::{
    char_suite, decay_fit, decay_fit_with, decay_pipeline, lemma_suite, moment_double_sum,
    moment_exact_small, moment_mc, pushout_measure, tail_mc, transform_grid, FitMethod,
    DEFAULT_U_LO, LEMMA_FUNCTIONS,
};
use salem_core::walk::{deficiency_proxy, modulus_ratio, MAX_LADDER_LEVEL};
use salem_core::Error;
use serde::Serialize;
use serde_json::json;

use crate::config::{Command, RunConfig};
use crate::emit::Emitter;
use crate::{Outcome, UsageError};

/// Relative tolerance of the summation-by-parts identity.
pub const LEMMA_TOLERANCE: f64 = 1e-9;
/// Absolute tolerance of the characteristic-function enumeration.
pub const CHAR_TOLERANCE: f64 = 1e-12;
/// Allowed distance of each dimension estimate from `min(1, 2β)` in a report.
pub const REPORT_TOLERANCE: f64 = 0.15;

pub fn run(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let mut out = Emitter::new(cfg)?;
    let (passed, summary) = match cfg.command {
        Command::Cantor => cantor(cfg, &mut out)?,
        Command::Walk => walk(cfg, &mut out)?,
        Command::Spectrum => spectrum(cfg, &mut out)?,
        Command::Moments => moments(cfg, &mut out)?,
        Command::Tail => tail(cfg, &mut out)?,
        Command::Lemma => lemma(cfg, &mut out)?,
        Command::SalemReport => report(cfg, &mut out)?,
        Command::Dims => dims(cfg, &mut out)?,
        Command::Verify => verify(cfg, &mut out)?,
    };
    Ok(Outcome {
        passed,
        summary,
        artifacts: out.into_paths(),
    })
}

type Step = anyhow::Result<(bool, String)>;

/// Precondition failures inside the library are usage errors, not crashes.
fn core<T>(r: salem_core::Result<T>) -> anyhow::Result<T> {
    r.map_err(|e| match e {
        Error::InvalidSpec(_)
        | Error::InvalidInput(_)
        | Error::Domain(_)
        | Error::OutOfRegime(_)
        | Error::Validity { .. } => UsageError(e.to_string()).into(),
        other => anyhow::Error::new(other),
    })
}

fn cantor(cfg: &RunConfig, out: &mut Emitter) -> Step {
    let spec = &cfg.spec;
    let flow = core(cantor_flow(spec))?;
    let fc = flow_check(&flow);
    let frostman = frostman_check(&flow, spec.beta(), 1.0, cfg.trials as usize, cfg.seed);
    let hull = core(hull_check(&flow, spec))?;
    let theta = core(n_approximation(&flow, cfg.n))?;
    let intervals: Option<Vec<[String; 2]>> = if cfg.n <= 10 {
        Some(
            core(cantor_intervals(spec))?
                .into_iter()
                .map(|iv| [iv.lo.to_string(), iv.hi.to_string()])
                .collect(),
        )
    } else {
        None
    };
    let passed = fc.passed && frostman.general_worst_ratio <= 1.0 && hull.all_covers_exact();
    let summary =
        format!(
        "β = {:.6}, flow {}, dyadic ratio {:.4}, general ratio {:.4}, survivor covers exact {}/{}",
        spec.beta(),
        if fc.passed { "additive" } else { "NOT additive" },
        frostman.dyadic_worst_ratio,
        frostman.general_worst_ratio,
        hull.cover_exact,
        hull.survivors
    );
    out.json(
        passed,
        &json!({
            "xi": cfg.xi,
            "depth": cfg.n,
            "beta": spec.beta(),
            "gamma": spec.gamma(),
            "saturates": spec.saturates(),
            "survivors": 1u64 << cfg.n,
            "intervals": intervals,
            "theta_atoms": theta.len(),
            "theta_mass": theta.total_mass(),
            "flow_check": fc,
            "frostman": frostman,
            "hull": hull,
        }),
    )?;
    out.csv(|w| theta.write_csv(w))?;
    out.extra("flow", flow.to_text().as_bytes())?;
    Ok((passed, summary))
}

fn walk(cfg: &RunConfig, out: &mut Emitter) -> Step {
    let ladder = core(walk_ladder(cfg.seed, cfg.n, cfg.word_source()))?;
    let path = ladder.finest();
    let deficiency = deficiency_proxy(path.bits());
    let (k_lo, k_hi) = (4.min(cfg.n - 1), 12.min(cfg.n - 1));
    let hs: Vec<f64> = (k_lo..=k_hi).map(|k| (-(k as f64)).exp2()).collect();
    let modulus = core(modulus_ratio(path, 1.5, &hs))?;
    let summary = format!(
        "N = 2^{}, compressed {} bits, deficiency {}, verdict {}, modulus ratio {:.4}",
        cfg.n,
        deficiency.compressed_len,
        deficiency.deficiency,
        if deficiency.incompressible_like {
            "pass"
        } else {
            "fail"
        },
        modulus
    );
    out.json(
        true,
        &json!({
            "level": cfg.n,
            "length": path.len(),
            "endpoint": path.grid_value(path.len()),
            "deficiency": deficiency,
            "modulus": { "c": 1.5, "h_log2": [-(k_lo as i64), -(k_hi as i64)], "ratio": modulus },
            "ladder": { "n_min": ladder.n_min(), "n_max": ladder.n_max(), "distances": ladder.distances() },
        }),
    )?;
    let stride = (path.len() >> 16).max(1);
    out.csv(|w| {
        writeln!(w, "t,S")?;
        for j in (0..=path.len()).step_by(stride) {
            writeln!(
                w,
                "{},{}",
                fmt17(j as f64 / path.len() as f64),
                fmt17(path.grid_value(j))
            )?;
        }
        Ok(())
    })?;
    out.extra("hex", path.to_hex().as_bytes())?;
    Ok((true, summary))
}

fn envelope_points(
    blocks: &[salem_core::spectral::EnvelopeBlock],
    lo: f64,
    hi: f64,
) -> Vec<(f64, f64)> {
    blocks
        .iter()
        .filter(|b| b.lo > 0.0 && b.center >= lo && b.center <= hi)
        .map(|b| (b.center, b.sup))
        .collect()
}

fn spectrum(cfg: &RunConfig, out: &mut Emitter) -> Step {
    let grid = core(cfg.grid.points())?;
    let u_max = *grid.last().expect("grid validated non-empty");
    let u_lo = DEFAULT_U_LO.max(grid[0]);
    let level = walk_level_for(cfg.n, u_max);
    if level > MAX_LADDER_LEVEL {
        return Err(UsageError(format!(
            "--u-grid reaches {u_max}, which needs a walk of level {level} > {MAX_LADDER_LEVEL}"
        ))
        .into());
    }
    let ladder = core(walk_ladder(cfg.seed, level, cfg.word_source()))?;
    let flow = core(cantor_flow(&cfg.spec))?;
    let mut warnings = Vec::new();
    let (spectrum, fit, rms_fit, extra) = match decay_pipeline(&ladder, &flow, cfg.n, &grid, u_lo) {
        Ok(run) => {
            let extra = json!({
                "valid_u_max": run.valid_u_max,
                "chain_u_max": run.chain_u_max,
                "limit_error_at_u_max": run.limit_error_at_u_max,
            });
            (run.spectrum, Some(run.fit), run.rms_fit, extra)
        }
        Err(Error::Fit(msg)) => {
            warnings.push(msg);
            let theta = core(n_approximation(&flow, cfg.n))?;
            let nu = core(pushout_measure(ladder.finest(), &theta))?;
            let s = core(transform_grid(&nu, &grid))?;
            let fit = decay_fit(&s, u_lo, u_max).ok();
            let rms = decay_fit_with(&s, u_lo, u_max, FitMethod::BlockRms).ok();
            let extra = json!({ "valid_u_max": std::f64::consts::PI * (ladder.finest().len() as f64).sqrt() / 2.0 });
            (s, fit, rms, extra)
        }
        Err(e) => return core(Err(e)),
    };
    let summary = match &fit {
        Some(f) => format!(
            "walk level {level}, exponent {:.4} (r² {:.3}) on [{u_lo}, {u_max}]",
            f.exponent, f.r_squared
        ),
        None => format!("walk level {level}, no fit: {}", warnings.join("; ")),
    };
    out.json(
        true,
        &json!({
            "walk_level": level,
            "theta_level": cfg.n,
            "total_mass": spectrum.total_mass,
            "max_uncertainty": spectrum.uncertainty.iter().copied().fold(0.0, f64::max),
            "bounds": extra,
            "fit": fit,
            "rms_fit": rms_fit,
            "envelope": spectrum.envelope,
            "ladder_distances": ladder.distances(),
            "warnings": warnings,
        }),
    )?;
    out.csv(|w| spectrum.write_csv(w))?;
    let title = format!("ξ = {}, n = {}, seed {}", cfg.xi, cfg.n, cfg.seed);
    out.svg(
        &title,
        &envelope_points(&spectrum.envelope, u_lo, u_max),
        fit.as_ref(),
    )?;
    Ok((true, summary))
}

fn theta_for(cfg: &RunConfig) -> anyhow::Result<salem_core::dyadic::AtomicMeasure> {
    core(n_approximation(&core(cantor_flow(&cfg.spec))?, cfg.n))
}

fn moments(cfg: &RunConfig, out: &mut Emitter) -> Step {
    let theta = theta_for(cfg)?;
    let est = core(moment_mc(
        &theta,
        1usize << cfg.n,
        cfg.q,
        cfg.u,
        cfg.alpha,
        cfg.trials as usize,
        cfg.seed,
    ))?;
    let passed = est.bound_holds() && est.agrees_with_exact() != Some(false);
    let summary = format!(
        "mean {:.6e} ± {:.2e}, bound {:.6e}{}",
        est.mean,
        est.std_error,
        est.bound,
        est.exact
            .map(|e| format!(", exact {e:.6e}"))
            .unwrap_or_default()
    );
    out.json(passed, &est)?;
    out.csv(|w| {
        writeln!(w, "n_steps,q,u,alpha,trials,mean,std_error,bound,exact")?;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            est.n_steps,
            est.q,
            fmt17(est.u),
            fmt17(est.alpha),
            est.trials,
            fmt17(est.mean),
            fmt17(est.std_error),
            fmt17(est.bound),
            est.exact.map(fmt17).unwrap_or_default()
        )
    })?;
    Ok((passed, summary))
}

fn tail(cfg: &RunConfig, out: &mut Emitter) -> Step {
    let theta = theta_for(cfg)?;
    let rep = core(tail_mc(
        &theta,
        1usize << cfg.n,
        cfg.u,
        cfg.eps,
        Some(cfg.q),
        cfg.alpha,
        cfg.trials as usize,
        cfg.seed,
    ))?;
    let summary = format!(
        "P̂ = {:.6e}, chain {:.6e} + 3·{:.2e}",
        rep.p_hat, rep.chain, rep.mc_error
    );
    out.json(rep.holds, &rep)?;
    out.csv(|w| {
        writeln!(
            w,
            "threshold,p_hat,p_std_error,moment_mean,moment_std_error,chain,mc_error"
        )?;
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            fmt17(rep.threshold),
            fmt17(rep.p_hat),
            fmt17(rep.p_std_error),
            fmt17(rep.moment_mean),
            fmt17(rep.moment_std_error),
            fmt17(rep.chain),
            fmt17(rep.mc_error)
        )
    })?;
    Ok((rep.holds, summary))
}

fn lemma(cfg: &RunConfig, out: &mut Emitter) -> Step {
    let suite = core(lemma_suite(cfg.seed, cfg.trials, 1e-4))?;
    let passed = suite.passed(LEMMA_TOLERANCE);
    let summary = format!(
        "{} measures × {} functions, max relative error {:.3e}",
        cfg.trials,
        LEMMA_FUNCTIONS.len(),
        suite.max_rel_error
    );
    out.json(passed, &suite)?;
    out.csv(|w| {
        writeln!(w, "measure,atoms,function,lhs,rhs,rhs_quadrature,rel_error")?;
        for c in &suite.cases {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                c.measure,
                c.atoms,
                c.function,
                fmt17(c.eval.lhs),
                fmt17(c.eval.rhs),
                fmt17(c.eval.rhs_quadrature),
                fmt17(c.eval.rel_error)
            )?;
        }
        Ok(())
    })?;
    Ok((passed, summary))
}

fn box_csv(w: &mut Vec<u8>, b: &BoxCount) -> std::io::Result<()> {
    writeln!(w, "k,count")?;
    for (k, c) in b.scales.iter().zip(&b.counts) {
        writeln!(w, "{k},{c}")?;
    }
    Ok(())
}

fn report(cfg: &RunConfig, out: &mut Emitter) -> Step {
    let opts = SalemOptions {
        u_lo: DEFAULT_U_LO.max(core(cfg.grid.points())?[0]),
        grid: cfg.grid.clone(),
        word: cfg.word_source(),
    };
    let rep = core(salem_report(&cfg.spec, cfg.seed, cfg.n, &opts))?;
    let gamma = rep.target_gamma;
    let passed = rep.fourier_le_box
        && (rep.box_dim.dimension - gamma).abs() <= REPORT_TOLERANCE
        && (rep.fourier_dim - gamma).abs() <= REPORT_TOLERANCE;
    let summary = format!(
        "target {:.4}: box {:.4}, Fourier {:.4} (exponent {:.4}, r² {:.3}), capacity {:.4} vs β {:.4}",
        gamma,
        rep.box_dim.dimension,
        rep.fourier_dim,
        rep.decay.exponent,
        rep.decay.r_squared,
        rep.capacity.crossover,
        rep.target_beta
    );
    out.json(passed, &rep)?;
    out.csv(|w| box_csv(w, &rep.box_dim))?;
    let title = format!("ξ = {}, n = {}, seed {}", cfg.xi, cfg.n, cfg.seed);
    out.svg(&title, &rep.decay.points, Some(&rep.decay))?;
    Ok((passed, summary))
}

/// Box dimension of the left endpoints of the stage-`n` survivors.
pub fn cantor_box_dim(spec: &CantorSpec, n: u32) -> salem_core::Result<BoxCount> {
    let sv = spec.survivors(n)?;
    let points: Vec<f64> = (0..sv.len()).map(|i| sv.interval(i).to_f64().0).collect();
    let finest = ((n as f64) * -spec.ratio_f64().log2()).floor().min(48.0) as u32;
    box_count(&points, &auto_scales(&points, finest))
}

fn dims(cfg: &RunConfig, out: &mut Emitter) -> Step {
    if cfg.n > salem_core::dyadic::MAX_SURVIVOR_LEVEL {
        return Err(UsageError(format!(
            "--n must be at most {} for dims",
            salem_core::dyadic::MAX_SURVIVOR_LEVEL
        ))
        .into());
    }
    let b = core(cantor_box_dim(&cfg.spec, cfg.n))?;
    let depths = default_capacity_depths(&cfg.spec);
    let flow = core(cantor_flow(
        &cfg.spec.with_depth(*depths.last().expect("depth schedule")),
    ))?;
    let cap = core(capacity_dim(&flow, &depths, &default_alpha_grid()))?;
    let summary = format!(
        "β = {:.4}: box {:.4} (r² {:.3}), capacity {:.4}",
        cfg.spec.beta(),
        b.dimension,
        b.r_squared,
        cap.crossover
    );
    out.json(
        true,
        &json!({ "beta": cfg.spec.beta(), "box": b, "capacity": cap }),
    )?;
    out.csv(|w| box_csv(w, &b))?;
    Ok((true, summary))
}

#[derive(Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

fn flow_checks(xi: &str, depth: u32, seed: u64) -> salem_core::Result<Vec<Check>> {
    let spec = CantorSpec::new(CantorSpec::parse_ratio(xi)?, depth)?;
    let flow: TreeFlowMeasure = cantor_flow(&spec)?;
    let fc = flow_check(&flow);
    let hull = hull_check(&flow, &spec)?;
    let fr = frostman_check(&flow, spec.beta(), 1.0, 10_000, seed);
    Ok(vec![
        Check::at_most(format!("flow {xi}: additivity"), fc.max_violation, 0.0),
        Check::at_most(
            format!("flow {xi}: survivors whose cover mass is not 2^-k"),
            (hull.survivors - hull.cover_exact) as f64,
            0.0,
        ),
        Check::at_most(
            format!("flow {xi}: hull mass / |hull|^β - 1"),
            hull.max_hull_ratio - 1.0,
            1e-9,
        ),
        Check::at_most(
            format!("flow {xi}: general mass / 3|I|^β"),
            fr.general_worst_ratio,
            1.0,
        ),
    ])
}

fn verify(cfg: &RunConfig, out: &mut Emitter) -> Step {
    let mut checks = Vec::new();
    let suite = core(lemma_suite(cfg.seed, cfg.trials, 1e-4))?;
    checks.push(Check::at_most(
        "summation by parts: relative error",
        suite.max_rel_error,
        LEMMA_TOLERANCE,
    ));
    let chars = char_suite();
    checks.push(Check::at_most(
        "characteristic function: absolute error",
        chars.max_abs_error,
        CHAR_TOLERANCE,
    ));
    for xi in ["1/3", "1/4", "1/16"] {
        checks.extend(core(flow_checks(xi, 14, cfg.seed))?);
    }
    let spec = CantorSpec::new(Rational::new(1, 4), 3).expect("valid ratio");
    let theta = core(n_approximation(&core(cantor_flow(&spec))?, 3))?;
    let mut worst: f64 = 0.0;
    for u in [0.5, 2.0, 5.0] {
        let a = core(moment_exact_small(&theta, 8, 1, u))?;
        let b = core(moment_double_sum(&theta, 8, u))?;
        worst = worst.max((a - b).abs());
    }
    checks.push(Check::at_most(
        "first moment: enumeration vs double sum",
        worst,
        1e-10,
    ));

    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name.as_str())
        .collect();
    let passed = failed.is_empty();
    let summary = if passed {
        format!("{} checks passed", checks.len())
    } else {
        format!(
            "{} of {} checks failed: {}",
            failed.len(),
            checks.len(),
            failed.join("; ")
        )
    };
    out.json(passed, &checks)?;
    out.csv(|w| {
        writeln!(w, "name,value,tolerance,passed")?;
        for c in &checks {
            writeln!(
                w,
                "\"{}\",{},{},{}",
                c.name,
                fmt17(c.value),
                fmt17(c.tolerance),
                c.passed
            )?;
        }
        Ok(())
    })?;
    Ok((passed, summary))
}
