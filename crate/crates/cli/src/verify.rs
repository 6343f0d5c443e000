//! Acceptance criteria A1 to A11.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use limsup_core::covering::{dichotomy_experiment, dimension_estimate, hit_test, stream_rng, DimensionConfig, HitConfig, OperatorConfig};
use limsup_core::hitting::{build_ordinal_tower, hitting_operator, iterate_operator, DivergencePolicy, RadiusSchedule};
use limsup_core::measures::{
    block_exponents, cantor_theta, lebesgue_measure, local_dim_curve, mu_one, mu_two, BlockSchedule, ConstructionTree,
};
use limsup_core::spectra::{analytic_spectra, lipschitz_hull, raw_step, AtomicKind, CantorParams, Which};
use limsup_core::{box_dimension, GridSet, MeasureModel, SpectrumCurve};
use rand::Rng;

use crate::commands::{cmd_covering, cmd_figures, cmd_operator};
use crate::config::{CoveringMode, ExperimentConfig, MeasureConfig, MeasureName, SetSource};
use crate::output::RunDir;
use crate::CliError;

pub const IDS: [&str; 11] = ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9", "A10", "A11"];

/// Deliberate defects used to check that the suite can fail.
#[derive(Clone, Copy, Debug, Default)]
pub struct Faults {
    /// Shift the computed hull one grid step to the right.
    pub hull_shift: bool,
}

pub struct Context {
    pub seed: u64,
    /// Scratch space for criteria that write files.
    pub out: PathBuf,
    pub faults: Faults,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub id: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn outcome(id: &'static str, pass: bool, detail: String) -> Outcome {
    Outcome { id, pass, detail }
}

pub fn run_one(id: &str, ctx: &Context) -> Result<Outcome, CliError> {
    match id {
        "A1" => a1_hull(ctx),
        "A2" => a2_spectra(),
        "A3" => a3_theta(ctx),
        "A4" => a4_local_dims(),
        "A5" => a5_ordinal(),
        "A6" => a6_lebesgue_dim(ctx),
        "A7" => a7_theta_dim(ctx),
        "A8" => a8_gap(ctx),
        "A9" => a9_hitting(ctx),
        "A10" => a10_dichotomy(ctx),
        "A11" => a11_reproducible(ctx),
        _ => Err(CliError::Config(format!("unknown criterion {id}"))),
    }
}

// A1

fn relaxation_hull(g: &[f64], dt: f64) -> Vec<f64> {
    let mut h = g.to_vec();
    loop {
        let mut changed = false;
        for i in 1..h.len() {
            if h[i] < h[i - 1] {
                h[i] = h[i - 1];
                changed = true;
            }
        }
        for i in (0..h.len() - 1).rev() {
            let v = h[i + 1] - dt;
            if h[i] < v {
                h[i] = v;
                changed = true;
            }
        }
        if !changed {
            return h;
        }
    }
}

fn hull_under_test(g: &SpectrumCurve, faults: Faults) -> SpectrumCurve {
    let h = lipschitz_hull(g);
    if !faults.hull_shift {
        return h;
    }
    let v = h.values();
    let shifted: Vec<f64> = (0..v.len()).map(|i| v[i.saturating_sub(1)]).collect();
    SpectrumCurve::new(h.t(0), h.dt(), shifted).expect("same grid")
}

fn a1_hull(ctx: &Context) -> Result<Outcome, CliError> {
    let dt = 0.01;
    let mut rng = stream_rng(ctx.seed, 0xa1);
    let mut worst = 0.0f64;
    let mut broken = BTreeMap::new();
    for _ in 0..1000 {
        let g: Vec<f64> = (0..101).map(|_| rng.gen::<f64>()).collect();
        let curve = SpectrumCurve::new(0.0, dt, g.clone())?;
        let h = hull_under_test(&curve, ctx.faults);
        let hv = h.values();
        let oracle = relaxation_hull(&g, dt);
        for (a, b) in hv.iter().zip(&oracle) {
            worst = worst.max((a - b).abs());
        }
        let mut note = |k: &'static str, bad: bool| {
            if bad {
                *broken.entry(k).or_insert(0) += 1;
            }
        };
        note("majorant", hv.iter().zip(&g).any(|(h, g)| h < g));
        note("monotone", hv.windows(2).any(|w| w[1] < w[0]));
        note("lipschitz", hv.windows(2).any(|w| w[1] - w[0] > dt + 1e-12));
        note("idempotent", hull_under_test(&h, ctx.faults).values() != hv);
    }
    let pass = worst <= 1e-12 && broken.is_empty();
    Ok(outcome(
        "A1",
        pass,
        format!("1000 curves, max oracle gap {worst:.3e}, property violations {broken:?}"),
    ))
}

// A2

fn a2_spectra() -> Result<Outcome, CliError> {
    let triples = [(0.4, 0.8, 2.5), (0.5, 0.7, 1.2), (0.3, 0.6, 2.1)];
    let (t0, dt, n) = (0.0, 0.01, 201);
    let mut worst = 0.0f64;
    let mut cases = 0;
    let mut skipped = Vec::new();
    let mut hbar_regimes = [false; 2];
    for &(s, u, beta) in &triples {
        let p = CantorParams::new(s, u, beta);
        for kind in [AtomicKind::Mu1, AtomicKind::Mu2] {
            if kind == AtomicKind::Mu2 && beta <= u / s {
                skipped.push(format!("mu2{:?}", (s, u, beta)));
                continue;
            }
            if kind == AtomicKind::Mu1 {
                hbar_regimes[usize::from(beta * s > u)] = true;
            }
            for which in [Which::Fbar, Which::Hbar] {
                let raw = SpectrumCurve::sample(t0, dt, n, |t| raw_step(&p, which, t))?;
                let hull = lipschitz_hull(&raw);
                let display = analytic_spectra(kind, &p, which, t0, dt, n)?;
                for (a, b) in hull.values().iter().zip(display.values()) {
                    worst = worst.max((a - b).abs());
                }
                cases += 1;
            }
        }
    }
    let pass = worst <= 1e-12 && hbar_regimes == [true, true];
    Ok(outcome(
        "A2",
        pass,
        format!("{cases} curves, max gap {worst:.3e}, both Hbar regimes {}, skipped {skipped:?} (beta <= u/s)", hbar_regimes == [true, true]),
    ))
}

// A3

fn a3_theta(ctx: &Context) -> Result<Outcome, CliError> {
    let sched = BlockSchedule::new(0.45, 0.48, vec![10, 20, 30], 40)?;
    let theta = cantor_theta(sched);
    let tree = theta.tree().expect("Cantor measure").clone();
    let mut rng = stream_rng(ctx.seed, 0xa3);
    let mut checked = 0u64;
    let mut wrong = 0u64;
    for n in 0..=40u32 {
        let count = 1u64 << n;
        let idx: Vec<u64> = if n <= 16 {
            (0..count).collect()
        } else {
            (0..10_000).map(|_| rng.gen_range(0..count)).collect()
        };
        let want = (-(n as f64)).exp2();
        for i in idx {
            let (a, b) = tree.interval(n, i);
            checked += 1;
            if theta.mass_interval(a, b)?.mass != want {
                wrong += 1;
            }
        }
    }
    let mut fits = Vec::new();
    let mut fits_ok = true;
    for a in [1.0 / 3.0, 0.25, 0.2] {
        let mask = ConstructionTree::new(BlockSchedule::constant(a, 40)?).mask(26)?;
        let pairs = (8..=24u32)
            .map(|d| Ok(((-(d as f64)).exp2(), mask.coarsen(d)?.cell_count() as u64)))
            .collect::<Result<Vec<_>, limsup_core::Error>>()?;
        let est = box_dimension(&pairs)?;
        let truth = 2f64.ln() / -a.ln();
        fits_ok &= (est.value - truth).abs() <= 2.0 * est.stderr;
        fits.push(format!("{:.4}±{:.4} vs {truth:.4}", est.value, est.stderr));
    }
    Ok(outcome(
        "A3",
        wrong == 0 && fits_ok,
        format!("{checked} intervals, {wrong} inexact; box dimensions {}", fits.join(", ")),
    ))
}

// A4

fn a4_local_dims() -> Result<Outcome, CliError> {
    let (s, u, beta) = (0.4, 0.8, 2.5);
    let (bs, bu) = (beta * s, beta * u);
    let sched = BlockSchedule::from_dimensions(s, u, 10, 60)?;
    let mu1 = mu_one(sched.clone(), beta)?;
    let mu2 = mu_two(sched, beta)?;
    let tree = mu1.tree().expect("Cantor measure");
    let near = |v: f64, target: f64| (v - target).abs() <= 0.15 * target;
    let mut pass = true;
    let mut parts = Vec::new();
    for x in [0.0, tree.left(8, 1)] {
        let cap = if x == 0.0 { 200 } else { (-x.log2()) as u32 + 48 };
        let blocks = block_exponents(&mu1, x, 3, cap)?;
        let lo = blocks.iter().map(|b| b.exponent).fold(f64::INFINITY, f64::min);
        let hi = blocks.iter().map(|b| b.exponent).fold(f64::NEG_INFINITY, f64::max);
        pass &= near(lo, bs) && near(hi, bu);

        let curve = local_dim_curve(&mu2, x, 1, cap.min(mu2.effective_depth()), 30)?;
        let (qlo, qhi) = (curve.liminf_estimate(), curve.limsup_estimate());
        pass &= qhi - qlo < 0.1 * bs && near(0.5 * (qlo + qhi), bs);
        parts.push(format!("x={x:.6e}: mu1 block exponents [{lo:.3}, {hi:.3}], mu2 tail [{qlo:.3}, {qhi:.3}]"));
    }
    Ok(outcome("A4", pass, format!("targets {bs} and {bu}; {}", parts.join("; "))))
}

// A5

fn a5_ordinal() -> Result<Outcome, CliError> {
    let m = lebesgue_measure();
    let sched = RadiusSchedule::power_law(2.0, 1 << 20)?;
    let policy = DivergencePolicy::default();
    let (depth, t, r_probe) = (14, 0.0, 1.0 / 64.0);

    let k1 = build_ordinal_tower(1, depth)?;
    let j1 = hitting_operator(&m, &sched, t, &k1, &policy, r_probe)?;
    let near_zero = j1.iter_cells().all(|c| c <= 2);
    let mut zero = GridSet::empty(depth)?;
    zero.insert(0);
    let j0 = hitting_operator(&m, &sched, t, &zero, &policy, r_probe)?;

    let k2 = build_ordinal_tower(2, depth)?;
    let tr = iterate_operator(&m, &sched, t, &k2, &policy, r_probe, 10)?;
    let counts: Vec<usize> = tr.stages.iter().map(|s| s.1).collect();
    let three = counts.len() == 4 && counts[3] == 0 && counts[2] > 0;

    Ok(outcome(
        "A5",
        near_zero && j0.is_empty() && three,
        format!(
            "J(K1) has {} cells (within 2 of 0: {near_zero}); J({{0}}) empty: {}; K2 trace {counts:?}",
            j1.cell_count(),
            j0.is_empty()
        ),
    ))
}

// A6 to A8

fn dim_run(
    m: &MeasureModel,
    alpha: f64,
    j_min: u32,
    j_max: u32,
    seed: u64,
) -> Result<(f64, f64), CliError> {
    let sched = RadiusSchedule::power_law(alpha, 1 << 20)?;
    let cfg = DimensionConfig {
        j_min,
        j_max,
        reps: 5,
        band_factor: 2.0,
    };
    let run = dimension_estimate(m, &sched, &cfg, seed)?;
    Ok((run.estimate.value, run.estimate.stderr))
}

fn a6_lebesgue_dim(ctx: &Context) -> Result<Outcome, CliError> {
    let m = lebesgue_measure();
    let (e2, _) = dim_run(&m, 2.0, 5, 10, ctx.seed)?;
    let (e05, _) = dim_run(&m, 0.5, 4, 9, ctx.seed)?;
    let pass = (0.4..=0.6).contains(&e2) && (0.95..=1.0).contains(&e05);
    Ok(outcome("A6", pass, format!("alpha 2: {e2:.4}; alpha 0.5: {e05:.4}")))
}

fn a7_theta_dim(ctx: &Context) -> Result<Outcome, CliError> {
    let m = cantor_theta(BlockSchedule::from_dimensions(0.5, 0.7, 10, 30)?);
    let (e, se) = dim_run(&m, 4.0, 8, 24, ctx.seed)?;
    Ok(outcome("A7", (0.15..=0.35).contains(&e), format!("estimate {e:.4} ± {se:.4}, predicted 0.25")))
}

fn a8_gap(ctx: &Context) -> Result<Outcome, CliError> {
    let (s, u, beta) = (0.4f64, 0.8f64, 2.5);
    let a = (-1.0 / s).exp2();
    let b = (-1.0 / u).exp2();
    let m = mu_two(BlockSchedule::new(a, b, vec![2, 16], 30)?, beta)?;
    let (e, se) = dim_run(&m, 2.0, 10, 22, ctx.seed)?;
    Ok(outcome(
        "A8",
        (0.15..=0.45).contains(&e),
        format!("estimate {e:.4} ± {se:.4}, predicted 0.3, lower hull value 0"),
    ))
}

// A9, A10

fn cantor_target(dim: f64, depth: u32) -> Result<GridSet, CliError> {
    SetSource::Cantor {
        dimension: dim,
        max_level: 40,
    }
    .build(depth)
}

fn a9_hitting(ctx: &Context) -> Result<Outcome, CliError> {
    let m = lebesgue_measure();
    let sched = RadiusSchedule::power_law(2.0, 1 << 20)?;
    let cfg = HitConfig {
        trials: 100,
        j0: 4,
        j_max: 14,
    };
    let low = hit_test(&cantor_target(0.3, 26)?, &m, &sched, &cfg, ctx.seed)?.hit_rate;
    let high = hit_test(&cantor_target(0.7, 26)?, &m, &sched, &cfg, ctx.seed)?.hit_rate;
    Ok(outcome(
        "A9",
        low <= 0.05 && high >= 0.95,
        format!("dimension 0.3: {low:.2}; dimension 0.7: {high:.2}"),
    ))
}

fn a10_dichotomy(ctx: &Context) -> Result<Outcome, CliError> {
    let depth = 22;
    let m = lebesgue_measure();
    let sched = RadiusSchedule::power_law(2.0, 1 << 20)?;
    let op = OperatorConfig {
        t: 0.0,
        policy: DivergencePolicy::default(),
        r_probe: 1.0 / 64.0,
        max_stages: 10,
    };
    let hit = HitConfig {
        trials: 100,
        j0: 4,
        j_max: 14,
    };
    let mut zero = GridSet::empty(depth)?;
    zero.insert(0);
    let suite = [
        ("K1", build_ordinal_tower(1, depth)?),
        ("{0}", zero),
        ("full", GridSet::full(depth)?),
        ("cantor0.3", cantor_target(0.3, depth)?),
        ("cantor0.7", cantor_target(0.7, depth)?),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, target) in &suite {
        let d = dichotomy_experiment(target, &m, &sched, &op, &hit, ctx.seed)?;
        pass &= d.agrees();
        parts.push(format!(
            "{name}: fixed point {} cells, hit rate {:.2}, agree {}",
            d.trace.fixed_point.cell_count(),
            d.hit_rate,
            d.agrees()
        ));
    }
    Ok(outcome("A10", pass, parts.join("; ")))
}

// A11

/// Small configurations exercised by the reproducibility check.
pub fn reproducibility_configs(seed: u64) -> Vec<(&'static str, ExperimentConfig)> {
    let mut dim = ExperimentConfig {
        seed,
        ..Default::default()
    };
    dim.covering.dimension.j_max = 8;
    dim.covering.dimension.reps = 3;

    let mut hit = dim.clone();
    hit.covering.mode = CoveringMode::Hit;
    hit.covering.depth = 18;
    hit.covering.hit.trials = 20;
    hit.covering.hit.j_max = 10;
    hit.covering.target = SetSource::Cantor {
        dimension: 0.7,
        max_level: 40,
    };

    let mut mu2 = dim.clone();
    mu2.measure = MeasureConfig {
        kind: MeasureName::Mu2,
        a: Some(0.17677669529663687),
        b: Some(0.42044820762685725),
        beta: Some(2.5),
        growth: 10,
        max_level: 30,
        breakpoints: Some(vec![2, 16]),
    };

    let mut op = dim.clone();
    op.operator.depth = 12;
    op.operator.set = SetSource::Tower { n: 1 };

    vec![("dim", dim), ("hit", hit), ("mu2", mu2), ("operator", op)]
}

/// Runs every reproducibility configuration plus the figure data into `root`.
pub fn write_reproducible_tree(root: &Path, seed: u64) -> Result<(), CliError> {
    for (name, mut cfg) in reproducibility_configs(seed) {
        cfg.output.dir = Some(root.join(name));
        if name == "operator" {
            cmd_operator(&cfg, None)?;
        } else {
            cmd_covering(&cfg)?;
        }
    }
    cmd_figures(&root.join("figures"))
}

/// Relative path to file contents, for every file below `root`.
pub fn snapshot(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, CliError> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).expect("below root").to_path_buf();
                out.insert(rel, fs::read(&p)?);
            }
        }
    }
    Ok(out)
}

fn a11_reproducible(ctx: &Context) -> Result<Outcome, CliError> {
    let runs = [ctx.out.join("a11/run1"), ctx.out.join("a11/run2")];
    for r in &runs {
        if r.exists() {
            fs::remove_dir_all(r)?;
        }
        write_reproducible_tree(r, ctx.seed)?;
    }
    let (x, y) = (snapshot(&runs[0])?, snapshot(&runs[1])?);
    Ok(outcome(
        "A11",
        !x.is_empty() && x == y,
        format!("{} files, identical: {}", x.len(), x == y),
    ))
}

/// Runs the selected criteria, printing one line each and writing `verify.csv` under `out`.
pub fn cmd_verify(ids: &[String], seed: u64, out: &Path, faults: Faults) -> Result<Vec<Outcome>, CliError> {
    let dir = RunDir::create(out)?;
    let ctx = Context {
        seed,
        out: out.to_path_buf(),
        faults,
    };
    let mut results = Vec::new();
    for id in ids {
        let start = std::time::Instant::now();
        let o = run_one(id, &ctx)?;
        println!(
            "{} {} ({:.1}s) {}",
            o.id,
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
        results.push(o);
    }
    let rows = results
        .iter()
        .map(|o| vec![o.id.to_string(), o.pass.to_string(), o.detail.clone()]);
    dir.csv("verify.csv", &["criterion", "pass", "detail"], rows)?;
    let failed: Vec<&str> = results.iter().filter(|o| !o.pass).map(|o| o.id).collect();
    if failed.is_empty() {
        Ok(results)
    } else {
        Err(CliError::Acceptance(failed.join(", ")))
    }
}
