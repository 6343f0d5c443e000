use limsup_core::covering::simulate;
use limsup_core::hitting::{hitting_operator, DivergencePolicy, RadiusSchedule};
use limsup_core::measures::{cantor_theta, lebesgue_measure, mu_one, mu_two, BlockSchedule};
use limsup_core::spectra::{lipschitz_hull, predicted_f, tilde_transform, CantorParams, PredictKind};
use limsup_core::{GridSet, SpectrumCurve};
use proptest::prelude::*;

const DEPTH: u32 = 9;

fn gridset() -> impl Strategy<Value = GridSet> {
    proptest::collection::vec(any::<bool>(), 1 << DEPTH).prop_map(|bits| {
        let mut s = GridSet::empty(DEPTH).unwrap();
        for (i, b) in bits.into_iter().enumerate() {
            if b {
                s.insert(i);
            }
        }
        s
    })
}

fn sparse_gridset() -> impl Strategy<Value = GridSet> {
    proptest::collection::vec((0.0..1.0f64, 0.0..0.05f64), 0..6).prop_map(|iv| {
        let iv: Vec<(f64, f64)> = iv.into_iter().map(|(a, w)| (a, (a + w).min(1.0))).collect();
        GridSet::from_parts(&iv, &[], DEPTH).unwrap()
    })
}

fn curve() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0..2.0f64, 2..80)
}

fn relaxation(g: &[f64], dt: f64) -> Vec<f64> {
    let mut h = g.to_vec();
    loop {
        let old = h.clone();
        for i in 0..h.len() {
            if i > 0 {
                h[i] = h[i].max(h[i - 1]);
            }
            if i + 1 < h.len() {
                h[i] = h[i].max(h[i + 1] - dt);
            }
        }
        if h == old {
            return h;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn neighborhood_contains_and_grows(s in gridset(), r1 in 0.0..0.2f64, r2 in 0.0..0.2f64) {
        let (lo, hi) = if r1 <= r2 { (r1, r2) } else { (r2, r1) };
        let a = s.neighborhood(lo);
        let b = s.neighborhood(hi);
        prop_assert!(s.is_subset(&a).unwrap());
        prop_assert!(a.is_subset(&b).unwrap());
    }

    #[test]
    fn lattice_laws(a in gridset(), b in gridset(), c in gridset()) {
        let ab = a.union(&b).unwrap();
        prop_assert_eq!(&ab, &b.union(&a).unwrap());
        prop_assert_eq!(a.intersect(&b).unwrap(), b.intersect(&a).unwrap());
        prop_assert_eq!(a.union(&a.intersect(&b).unwrap()).unwrap(), a.clone());
        prop_assert_eq!(a.intersect(&ab).unwrap(), a.clone());
        let left = a.intersect(&b.union(&c).unwrap()).unwrap();
        let right = a.intersect(&b).unwrap().union(&a.intersect(&c).unwrap()).unwrap();
        prop_assert_eq!(left, right);
        prop_assert!(a.intersect(&b).unwrap().is_subset(&a).unwrap());
        prop_assert_eq!(
            ab.cell_count() + a.intersect(&b).unwrap().cell_count(),
            a.cell_count() + b.cell_count()
        );
    }

    #[test]
    fn coarsen_covers(s in gridset(), d in 1u32..DEPTH) {
        let c = s.coarsen(d).unwrap();
        let shift = DEPTH - d;
        for i in s.iter_cells() {
            prop_assert!(c.contains(i >> shift));
        }
        prop_assert!(c.cell_count() <= s.cell_count().max(1));
    }

    #[test]
    fn serde_roundtrip(s in gridset()) {
        let text = serde_json::to_string(&s).unwrap();
        prop_assert_eq!(serde_json::from_str::<GridSet>(&text).unwrap(), s);
    }

    #[test]
    fn hull_properties(g in curve(), dt in 0.001..0.5f64) {
        let c = SpectrumCurve::new(0.0, dt, g.clone()).unwrap();
        let h = lipschitz_hull(&c);
        let hv = h.values();
        prop_assert!(hv.iter().zip(&g).all(|(h, g)| h >= g));
        prop_assert!(hv.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(hv.windows(2).all(|w| w[1] - w[0] <= dt + 1e-12));
        let again = lipschitz_hull(&h);
        prop_assert_eq!(again.values(), hv);
        let oracle = relaxation(&g, dt);
        for (a, b) in hv.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn tilde_equals_hull_for_monotone(steps in proptest::collection::vec(0.0..0.3f64, 2..60)) {
        let mut acc = 0.0;
        let g: Vec<f64> = steps.into_iter().map(|d| { acc += d; acc }).collect();
        let c = SpectrumCurve::new(0.0, 0.1, g).unwrap();
        let a = tilde_transform(&c);
        let b = lipschitz_hull(&c);
        for (x, y) in a.values().iter().zip(b.values()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn theta_is_additive(x in 0.0..1.0f64, y in 0.0..1.0f64, z in 0.0..1.0f64, a in 0.1..0.45f64) {
        let mut p = [x, y, z];
        p.sort_by(f64::total_cmp);
        let th = cantor_theta(BlockSchedule::constant(a, 30).unwrap());
        let whole = th.mass_interval(p[0], p[2]).unwrap();
        let l = th.mass_interval(p[0], p[1]).unwrap();
        let r = th.mass_interval(p[1], p[2]).unwrap();
        prop_assert!((whole.mass - l.mass - r.mass).abs() <= whole.err + l.err + r.err + 1e-15);
        prop_assert!((th.mass_interval(0.0, 1.0).unwrap().mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn atomic_measures_are_normalized(a in 0.05..0.2f64, b in 0.3..0.45f64, extra in 0.2..2.0f64) {
        let sched = BlockSchedule::with_growth(a, b, 4, 25).unwrap();
        let mu2_beta = sched.u() / sched.s() + extra;
        for m in [mu_one(sched.clone(), 1.0 + extra).unwrap(), mu_two(sched.clone(), mu2_beta).unwrap()] {
            let total = m.mass_interval(0.0, 1.0).unwrap();
            prop_assert!((total.mass - 1.0).abs() <= total.err + 1e-12);
            let mid = m.cdf(0.5).unwrap();
            prop_assert!((0.0..=1.0).contains(&mid));
        }
    }

    #[test]
    fn predictions_are_ordered(alpha in 0.3..20.0f64, s in 0.1..0.45f64, du in 0.05..0.5f64, extra in 0.01..3.0f64) {
        let u = (s + du).min(0.95);
        let x = 1.0 / alpha;
        let kinds = [
            PredictKind::Lebesgue,
            PredictKind::Theta { s, u },
            PredictKind::Mu1(CantorParams::new(s, u, 1.0 + extra)),
            PredictKind::Mu2(CantorParams::new(s, u, u / s + extra)),
        ];
        for k in &kinds {
            let p = predicted_f(k, alpha).unwrap();
            prop_assert!(p.lower <= p.upper + 1e-12, "{:?} {:?}", k, p);
            prop_assert!(p.upper <= x.min(1.0) + 1e-12);
            prop_assert!(p.lower >= -1e-12);
            if let Some(e) = p.exact {
                prop_assert!(p.lower - 1e-12 <= e && e <= p.upper + 1e-12, "{:?} {:?}", k, p);
            }
        }
    }

    #[test]
    fn radii_are_nonincreasing(alpha in 0.2..4.0f64, k in 1u64..100_000) {
        let s = RadiusSchedule::power_law(alpha, 1 << 20).unwrap();
        prop_assert!(s.radius(k + 1) <= s.radius(k));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn operator_stays_inside(s in sparse_gridset()) {
        let sched = RadiusSchedule::power_law(2.0, 1 << 16).unwrap();
        let out = hitting_operator(&lebesgue_measure(), &sched, 0.0, &s, &DivergencePolicy::default(), 1.0 / 32.0).unwrap();
        prop_assert!(out.is_subset(&s).unwrap());
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>()) {
        let sched = RadiusSchedule::power_law(2.0, 1 << 12).unwrap();
        let m = mu_one(BlockSchedule::constant(0.25, 20).unwrap(), 2.0).unwrap();
        let a = simulate(&m, &sched, 12, 4, 8, seed).unwrap();
        let b = simulate(&m, &sched, 12, 4, 8, seed).unwrap();
        prop_assert_eq!(a, b);
    }
}
