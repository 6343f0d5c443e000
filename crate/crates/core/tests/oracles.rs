//! Library results checked against independent computations.

use std::collections::HashMap;

use limsup_core::covering::simulate;
use limsup_core::hitting::{build_ordinal_tower, classify, s2_exponent, series_checkpoints, DivergencePolicy, RadiusSchedule, Verdict};
use limsup_core::measures::{cantor_theta, lebesgue_measure, mu_one, mu_two, BlockSchedule, ConstructionTree};
use limsup_core::{box_dimension, GridSet};

/// Cells `[i/N, (i+1)/N]` (closed) that contain `p`, by scanning the whole grid.
fn cells_containing(p: f64, depth: u32) -> Vec<usize> {
    let n = 1usize << depth;
    let nf = n as f64;
    (0..n).filter(|&i| i as f64 / nf <= p && p <= (i + 1) as f64 / nf).collect()
}

#[test]
fn reciprocal_points_match_enumeration() {
    let pts: Vec<f64> = (1..=100).map(|n| 1.0 / n as f64).collect();
    let s = GridSet::from_parts(&[], &pts, 10).unwrap();
    let mut want: Vec<usize> = pts.iter().flat_map(|&p| cells_containing(p, 10)).collect();
    want.sort_unstable();
    want.dedup();
    assert_eq!(s.iter_cells().collect::<Vec<_>>(), want);
}

#[test]
fn point_dilation_adds_eleven_cells_per_side() {
    let s = GridSet::from_parts(&[], &[0.5], 10).unwrap();
    let base: Vec<usize> = s.iter_cells().collect();
    assert_eq!(base, vec![511, 512]);
    let d = s.neighborhood(0.01);
    let runs: Vec<_> = d.runs().collect();
    assert_eq!(runs, vec![(511 - 11, 2 + 22)]);
}

#[test]
fn tower_one_matches_enumeration() {
    let depth = 10;
    let n = 1usize << depth;
    let s = build_ordinal_tower(1, depth).unwrap();
    // Cell i >= 1 holds some 1/j iff ceil(N/(i+1)) <= floor(N/i).
    let want: Vec<usize> = (0..n)
        .filter(|&i| i == 0 || n.div_ceil(i + 1) <= n / i)
        .collect();
    assert_eq!(s.iter_cells().collect::<Vec<_>>(), want);
}

#[test]
fn quarter_cantor_box_dimension() {
    let tree = ConstructionTree::new(BlockSchedule::constant(0.25, 20).unwrap());
    let mask = tree.mask(24).unwrap();
    let pairs: Vec<(f64, u64)> = (2..=12u32)
        .map(|n| (0.25f64.powi(n as i32), mask.coarsen(2 * n).unwrap().cell_count() as u64))
        .collect();
    let est = box_dimension(&pairs).unwrap();
    assert!((est.value - 0.5).abs() < 0.02, "{est:?}");
}

#[test]
fn theta_balls_are_comparable_to_level_mass() {
    let tree = ConstructionTree::new(BlockSchedule::constant(0.25, 30).unwrap());
    let theta = cantor_theta(BlockSchedule::constant(0.25, 30).unwrap());
    let mut worst = 0u32;
    for n in 1..=10u32 {
        for i in 0..1u64 << n {
            let x = tree.left(n, i);
            let m = theta.mass_ball(x, tree.length(n)).mass;
            let hi = (-(n as f64) + 1.0).exp2();
            assert!(m <= hi, "n={n} i={i} mass={m}");
            let m0 = (-m.log2() - n as f64).ceil().max(0.0) as u32;
            worst = worst.max(m0);
        }
    }
    assert!(worst <= 2, "m0 = {worst}");
}

#[test]
fn theta_construction_intervals_exact() {
    let sched = BlockSchedule::with_growth(0.3, 0.45, 3, 20).unwrap();
    let theta = cantor_theta(sched.clone());
    let tree = ConstructionTree::new(sched);
    for n in 0..=12u32 {
        for i in 0..1u64 << n {
            let (a, b) = tree.interval(n, i);
            let m = theta.mass_interval(a, b).unwrap();
            assert_eq!(m.mass, (-(n as f64)).exp2());
        }
    }
}

fn mu1_level_mass(beta: f64, k: u32) -> f64 {
    (k as f64).exp2() * (1.0 - (1.0 - beta).exp2()) * (-beta * k as f64).exp2()
}

#[test]
fn mu1_neighbourhood_exponent() {
    let (a, beta, levels) = (0.25, 2.5, 30);
    let mu1 = mu_one(BlockSchedule::constant(a, levels).unwrap(), beta).unwrap();
    let mask = mu1.tree().unwrap().mask(24).unwrap();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for n in 3..=8u32 {
        // Level-k gaps have half-width a^k (1 - 2a) / 2, below r exactly for k >= n.
        let r = 0.3 * a.powi(n as i32);
        let lib = mu1.mass_of_gridset(&mask.neighborhood(r)).mass;
        let oracle: f64 = (n..=levels).map(|k| mu1_level_mass(beta, k)).sum();
        assert!((lib - oracle).abs() <= 1e-9 * oracle, "n={n}: {lib} vs {oracle}");
        xs.push(r.log2());
        ys.push(lib.log2());
    }
    let (slope, _) = limsup_core::geometry::linear_fit(&xs, &ys);
    let s = 0.5;
    assert!((slope - (beta * s - s)).abs() < 0.05, "slope {slope}");
}

#[test]
fn mu2_weights_comparable_to_largest() {
    let (s, u, beta) = (0.4f64, 0.8f64, 2.5);
    let sched = BlockSchedule::from_dimensions(s, u, 10, 60).unwrap();
    let mu2 = mu_two(sched, beta).unwrap();
    let q = (1.0 - beta * s / u).exp2();
    let d0 = 1.0 / (1.0 - q);
    for n in 0..=40u32 {
        let lead = (n as f64).exp2() * mu2.level_weight(n);
        let total: f64 = (n..=60).map(|k| (k as f64).exp2() * mu2.level_weight(k)).sum();
        let ratio = total / lead;
        assert!((1.0..=d0 * (1.0 + 1e-12)).contains(&ratio), "n={n}: {ratio} vs {d0}");
    }
}

#[test]
fn lebesgue_samples_follow_uniform_cdf() {
    let mut xs = lebesgue_measure().sample(3, 100_000).unwrap();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let sup = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max((x - (i + 1) as f64 / n).abs()))
        .fold(0.0, f64::max);
    assert!(sup < 0.02, "sup distance {sup}");
}

#[test]
fn mu1_atom_frequencies() {
    let beta = 2.5;
    let mu1 = mu_one(BlockSchedule::constant(0.25, 30).unwrap(), beta).unwrap();
    let tree = mu1.tree().unwrap();
    let mut level_of = HashMap::new();
    for k in 0..=5u32 {
        for i in 0..1u64 << k {
            level_of.insert(tree.gap_midpoint(k, i).to_bits(), k);
        }
    }
    let n = 200_000;
    let xs = mu1.sample(17, n).unwrap();
    let mut counts = [0usize; 6];
    for x in xs {
        if let Some(&k) = level_of.get(&x.to_bits()) {
            counts[k as usize] += 1;
        }
    }
    for (k, &c) in counts.iter().enumerate() {
        let p = mu1_level_mass(beta, k as u32);
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        let dev = (c as f64 - n as f64 * p).abs();
        assert!(dev <= 3.0 * sd + 1.0, "level {k}: {c} vs {}", n as f64 * p);
    }
}

#[test]
fn cdf_is_monotone_and_normalized() {
    let mu1 = mu_one(BlockSchedule::constant(0.3, 25).unwrap(), 2.0).unwrap();
    assert_eq!(mu1.cdf(0.0).unwrap(), 0.0);
    assert!((mu1.cdf(1.0).unwrap() - (1.0 - mu1.tail_bound())).abs() < 1e-12);
    let grid: Vec<f64> = (0..=1 << 12).map(|i| mu1.cdf(i as f64 / 4096.0).unwrap()).collect();
    assert!(grid.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn explicit_cubic_schedule_has_s2_one_third() {
    let values: Vec<f64> = (1..=100_000).map(|k| (k as f64).powi(-3)).collect();
    let s2 = s2_exponent(&RadiusSchedule::explicit(values).unwrap()).unwrap();
    assert!(s2.estimated);
    assert!((s2.value - 1.0 / 3.0).abs() < 0.01, "{s2:?}");
}

#[test]
fn single_point_series_is_bounded() {
    let depth = 16;
    let s = GridSet::from_parts(&[], &[0.5], depth).unwrap();
    let sched = RadiusSchedule::power_law(2.0, 1 << 20).unwrap();
    let policy = DivergencePolicy::default();
    let cp = series_checkpoints(&lebesgue_measure(), &sched, 0.0, &s, 0.5, 1.0 / 64.0, &policy).unwrap();
    // a_k is at most 2 r_k plus the two flagged cells, so the sums stay below
    // 2 zeta(2) + 2^-D (2 + 2 K) over the resolved range.
    let h = (-(depth as f64)).exp2();
    for &(j, sum) in &cp {
        let k = (j as f64).exp2();
        let bound = 2.0 * std::f64::consts::PI.powi(2) / 6.0 + 2.0 * h * (1.0 + k);
        assert!(sum <= bound, "j={j}: {sum} > {bound}");
    }
    assert_eq!(classify(&cp, &policy), Verdict::Convergent);
}

#[test]
fn window_coverage_matches_expectation() {
    let sched = RadiusSchedule::power_law(1.0, 1 << 12).unwrap();
    let field = simulate(&lebesgue_measure(), &sched, 16, 8, 10, 5).unwrap();
    for (w, j) in field.windows.iter().zip(8u32..) {
        let uncovered: f64 = (1u64 << j..1u64 << (j + 1))
            .map(|k| 1.0 - 2.0 * sched.radius(k))
            .product();
        let frac = w.cell_count() as f64 / w.len() as f64;
        assert!((frac - (1.0 - uncovered)).abs() < 0.03, "j={j}: {frac} vs {}", 1.0 - uncovered);
    }
}
