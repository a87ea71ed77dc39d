use std::collections::BTreeMap;

use num_complex::Complex64;
use proptest::prelude::*;
use salem_core::dyadic::{
    flow_check, three_cover, Atom, AtomicMeasure, CantorSpec, Interval, Rational, TreeFlowMeasure,
};
use salem_core::spectral::{
    decay_fit, moment_double_sum, moment_exact_small, parts_lemma_eval, pushout_measure,
    transform_at, SpectrumSample,
};
use salem_core::walk::{compress, decode_code, decompress, encode_path, WalkPath};

fn measure() -> impl Strategy<Value = AtomicMeasure> {
    prop::collection::vec((0.0..1.0f64, 1e-6..1.0f64), 1..40).prop_map(|raw| {
        let total: f64 = raw.iter().map(|a| a.1).sum();
        let atoms = raw
            .into_iter()
            .map(|(t, w)| Atom {
                position: t,
                weight: w / total,
            })
            .collect();
        AtomicMeasure::from_unsorted(atoms).unwrap()
    })
}

fn bits(max: usize) -> impl Strategy<Value = Vec<bool>> {
    prop_oneof![
        prop::collection::vec(any::<bool>(), 1..max),
        // long runs exercise the run-length mode
        prop::collection::vec((any::<bool>(), 1..200usize), 1..20).prop_map(|runs| runs
            .into_iter()
            .flat_map(|(b, n)| std::iter::repeat_n(b, n))
            .collect()),
    ]
}

fn cell_bounds(level: u32, j: u64) -> (f64, f64) {
    let w = (-(level as f64)).exp2();
    ((j - 1) as f64 * w, j as f64 * w)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn flows_built_from_leaves_are_additive(
        depth in 1u32..10,
        masses in prop::collection::vec((0u64..1024, 0i128..1000), 1..60),
    ) {
        let cells = 1u64 << depth;
        let total: i128 = masses.iter().map(|m| m.1).sum::<i128>().max(1);
        let mut leaves = BTreeMap::new();
        for (j, m) in masses {
            *leaves.entry(j % cells + 1).or_insert_with(|| Rational::from_integer(0)) += Rational::new(m, total);
        }
        let flow = TreeFlowMeasure::from_leaves(depth, leaves, 1.0, 1.0).unwrap();
        let report = flow_check(&flow);
        prop_assert!(report.passed, "{report:?}");
        prop_assert_eq!(report.max_violation, 0.0);
    }

    #[test]
    fn three_cells_cover_the_interval(lo in 0.0..1.0f64, frac in 1e-6..1.0f64) {
        let hi = (lo + frac * (1.0 - lo)).min(1.0);
        prop_assume!(hi > lo);
        let cover = three_cover(lo, hi).unwrap();
        let len = hi - lo;
        let level = cover[0].level();
        let side = (-(level as f64)).exp2();
        prop_assert!(cover.iter().all(|c| c.level() == level));
        prop_assert!(side <= len && (len < 1.0 && side > len / 2.0 || len >= 1.0), "side {side} for length {len}");
        let (a, _) = cell_bounds(level, cover.iter().map(|c| c.j()).min().unwrap());
        let (_, b) = cell_bounds(level, cover.iter().map(|c| c.j()).max().unwrap());
        prop_assert!(a <= lo && hi <= b, "[{a}, {b}] misses [{lo}, {hi}]");
    }

    #[test]
    fn codes_round_trip(word in bits(3000)) {
        let path = WalkPath::from_bits(word.clone()).unwrap();
        prop_assert_eq!(decode_code(&encode_path(&path)).unwrap(), path.clone());
        prop_assert_eq!(WalkPath::from_hex(&path.to_hex()).unwrap(), path);
    }

    #[test]
    fn compression_round_trips(word in bits(4000)) {
        prop_assert_eq!(decompress(&compress(&word)).unwrap(), word);
    }

    #[test]
    fn pushout_keeps_mass_and_bounds_the_transform(
        word in prop::collection::vec(any::<bool>(), 64..=64),
        mu in measure(),
        u in 0.0..500.0f64,
    ) {
        let path = WalkPath::from_bits(word).unwrap();
        // snap atoms to the walk grid j/64
        let snapped = AtomicMeasure::from_unsorted(
            mu.atoms().iter().map(|a| Atom { position: (a.position * 64.0).round() / 64.0, weight: a.weight }).collect(),
        ).unwrap();
        let nu = pushout_measure(&path, &snapped).unwrap();
        prop_assert!((nu.total_mass() - snapped.total_mass()).abs() < 1e-12);
        prop_assert!(transform_at(&nu, u).unwrap().norm() <= nu.total_mass() * (1.0 + 1e-12));
    }

    #[test]
    fn summation_by_parts(mu in measure(), k in 0i32..6) {
        let f = move |t: f64| t.powi(k);
        let df = move |t: f64| if k == 0 { 0.0 } else { k as f64 * t.powi(k - 1) };
        let e = parts_lemma_eval(&mu, &f, &df, 1e-4).unwrap();
        prop_assert!(e.rel_error <= 1e-9, "{e:?}");
    }

    #[test]
    fn decay_fit_is_scale_equivariant(c in 1e-3..1e3f64, p in 0.0..1.0f64, wobble in 0.0..0.9f64) {
        let grid: Vec<f64> = (0..8000).map(|i| 8.0 + i as f64 * 0.25).collect();
        let make = |scale: f64| {
            let values = grid
                .iter()
                .map(|&u| Complex64::new(scale * u.powf(-p) * (1.0 + wobble * (0.37 * u).sin()), 0.0))
                .collect();
            SpectrumSample::from_values(grid.clone(), values, 1.0)
        };
        let a = decay_fit(&make(1.0), 8.0, 2000.0).unwrap();
        let b = decay_fit(&make(c), 8.0, 2000.0).unwrap();
        prop_assert!((a.exponent - b.exponent).abs() < 1e-9);
        prop_assert!((b.intercept - a.intercept - c.ln()).abs() < 1e-9);
    }

    #[test]
    fn interval_mass_is_monotone_and_additive(mu in measure(), a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64) {
        let mut cuts = [a, b, c];
        cuts.sort_by(f64::total_cmp);
        let [x, y, z] = cuts;
        prop_assume!(x < y && y < z);
        let m = |lo, hi| mu.interval_mass(&Interval::new(lo, hi).unwrap());
        prop_assert!((m(x, y) + m(y, z) - m(x, z)).abs() < 1e-12);
        prop_assert!(m(x, z) <= mu.total_mass() + 1e-12);
        prop_assert!((m(0.0, 1.0) - mu.total_mass()).abs() < 1e-12);
    }

    #[test]
    fn first_moment_is_the_double_sum(mu in measure(), u in 0.1..20.0f64) {
        let snapped = AtomicMeasure::from_unsorted(
            mu.atoms().iter().map(|a| Atom { position: (a.position * 8.0).round() / 8.0, weight: a.weight }).collect(),
        ).unwrap();
        let e = moment_exact_small(&snapped, 8, 1, u).unwrap();
        let d = moment_double_sum(&snapped, 8, u).unwrap();
        prop_assert!((e - d).abs() < 1e-10);
    }

    #[test]
    fn survivors_nest(p in 1i128..6, extra in 3i128..30, k in 0u32..8) {
        let q = 2 * p + extra;
        let spec = CantorSpec::new(Rational::new(p, q), k + 1).unwrap();
        let outer = spec.survivors(k).unwrap();
        let inner = spec.survivors(k + 1).unwrap();
        prop_assert_eq!(outer.len(), 1usize << k);
        prop_assert_eq!(inner.len(), 2 * outer.len());
        for i in 0..inner.len() {
            prop_assert!(outer.interval(i / 2).contains(&inner.interval(i)));
            if i + 1 < inner.len() {
                prop_assert!(inner.interval(i).disjoint(&inner.interval(i + 1)));
            }
        }
    }
}

#[test]
fn every_short_code_round_trips() {
    for len in 1..=12usize {
        for w in 0u32..(1 << len) {
            let word: String = (0..len)
                .map(|i| if w >> i & 1 == 1 { '1' } else { '0' })
                .collect();
            let path = decode_code(&word).unwrap();
            assert_eq!(encode_path(&path), word);
            let sums = path.partial_sums();
            assert_eq!(sums[len], 2 * w.count_ones() as i32 - len as i32);
            assert!(sums.windows(2).all(|s| (s[1] - s[0]).abs() == 1));
        }
    }
}
