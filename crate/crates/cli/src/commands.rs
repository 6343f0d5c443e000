use std::path::Path;

use limsup_core::covering::{dichotomy_experiment, dimension_estimate, hit_test, Dichotomy, DimensionRun, HitReport};
use limsup_core::hitting::{build_ordinal_tower, iterate_operator, s2_exponent, IterationTrace, RadiusSchedule};
use limsup_core::spectra::{fbar, hbar, lipschitz_hull, predicted_f, raw_step, CantorParams, PredictKind, Which};
use limsup_core::{GridSet, SpectrumCurve};
use serde::Serialize;

use crate::config::{CoveringMode, ExperimentConfig, Format};
use crate::output::{float, read_curve, write_csv, RunDir};
use crate::{output_root, CliError};

fn run_dir(cfg: &ExperimentConfig) -> Result<RunDir, CliError> {
    let dir = RunDir::create(&output_root(cfg.output.dir.clone()))?;
    // The copy sits in the output directory, so it leaves the directory out.
    let mut resolved = cfg.clone();
    resolved.output.dir = None;
    dir.json("resolved-config.json", &resolved)?;
    Ok(dir)
}

fn curve_rows(c: &SpectrumCurve) -> impl Iterator<Item = Vec<String>> + '_ {
    c.points().map(|(t, v)| vec![float(t), float(v)])
}

/// Reads a `(t, value)` CSV on a uniform grid and writes its increasing 1-Lipschitz hull.
pub fn cmd_hull(input: &Path, output: &Path) -> Result<SpectrumCurve, CliError> {
    let pts = read_curve(input)?;
    let g = SpectrumCurve::from_points(&pts).map_err(|e| CliError::Input(e.to_string()))?;
    let h = lipschitz_hull(&g);
    if let Some(parent) = output.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    write_csv(output, &["t", "value"], curve_rows(&h))?;
    Ok(h)
}

fn write_trace(dir: &RunDir, cfg: &ExperimentConfig, trace: &IterationTrace) -> Result<(), CliError> {
    if cfg.wants(Format::Csv) {
        let rows = trace.stages.iter().map(|&(s, c)| vec![s.to_string(), c.to_string()]);
        dir.csv("trace.csv", &["stage", "cells"], rows)?;
    }
    if cfg.wants(Format::Json) {
        dir.json("fixed_point.json", &trace.fixed_point)?;
    }
    Ok(())
}

/// Iterates the hitting operator from the configured set, or from the tower `K_n`.
pub fn cmd_operator(cfg: &ExperimentConfig, ordinal_demo: Option<u32>) -> Result<IterationTrace, CliError> {
    let dir = run_dir(cfg)?;
    let m = cfg.measure.build()?;
    let op = cfg.operator.resolve(&cfg.schedule)?;
    let depth = cfg.operator.depth;
    let s0 = match ordinal_demo {
        Some(n) => build_ordinal_tower(n, depth)?,
        None => cfg.operator.set.build(depth)?,
    };
    let trace = iterate_operator(&m, &cfg.schedule, op.t, &s0, &op.policy, op.r_probe, op.max_stages)?;
    write_trace(&dir, cfg, &trace)?;
    if !trace.reached_fixed {
        return Err(CliError::StageOverflow(op.max_stages));
    }
    Ok(trace)
}

#[derive(Serialize)]
struct DimSummary {
    estimate: f64,
    stderr: f64,
    predicted_lower: f64,
    predicted_exact: Option<f64>,
    predicted_upper: f64,
    s2: f64,
}

#[derive(Serialize)]
struct HitSummary {
    trials: usize,
    hit_rate: f64,
    verdict: &'static str,
}

fn hit_verdict(rate: f64) -> &'static str {
    if rate >= 0.95 {
        "hit"
    } else if rate <= 0.05 {
        "miss"
    } else {
        "inconclusive"
    }
}

pub enum CoveringOutcome {
    Dim(DimensionRun),
    Hit(HitReport),
    Dichotomy(Box<Dichotomy>),
}

fn alpha_of(sched: &RadiusSchedule) -> Result<f64, CliError> {
    match sched {
        RadiusSchedule::PowerLaw { alpha, .. } => Ok(*alpha),
        RadiusSchedule::Explicit { .. } => Err(CliError::Config("dimension mode needs a power-law schedule".into())),
    }
}

fn write_hits(dir: &RunDir, cfg: &ExperimentConfig, r: &HitReport) -> Result<(), CliError> {
    if cfg.wants(Format::Csv) {
        let rows = r.verdicts.iter().enumerate().map(|(i, v)| vec![i.to_string(), v.to_string()]);
        dir.csv("verdicts.csv", &["trial", "verdict"], rows)?;
        let rows = r.window_detail.iter().map(|(j, n)| vec![j.to_string(), n.to_string()]);
        dir.csv("windows.csv", &["j", "trials_hit"], rows)?;
    }
    Ok(())
}

pub fn cmd_covering(cfg: &ExperimentConfig) -> Result<CoveringOutcome, CliError> {
    let dir = run_dir(cfg)?;
    let m = cfg.measure.build()?;
    let cov = &cfg.covering;
    match cov.mode {
        CoveringMode::Dim => {
            let alpha = alpha_of(&cfg.schedule)?;
            let run = dimension_estimate(&m, &cfg.schedule, &cov.dimension, cfg.seed)?;
            let pred = predicted_f(&cfg.measure.predict_kind()?, alpha)?;
            if cfg.wants(Format::Csv) {
                let rows = run
                    .raw_counts
                    .iter()
                    .map(|&(rep, d, c)| vec![rep.to_string(), float(d), c.to_string()]);
                dir.csv("counts.csv", &["rep", "delta", "count"], rows)?;
            }
            if cfg.wants(Format::Json) {
                dir.json(
                    "summary.json",
                    &DimSummary {
                        estimate: run.estimate.value,
                        stderr: run.estimate.stderr,
                        predicted_lower: pred.lower,
                        predicted_exact: pred.exact,
                        predicted_upper: pred.upper,
                        s2: s2_exponent(&cfg.schedule)?.value,
                    },
                )?;
            }
            Ok(CoveringOutcome::Dim(run))
        }
        CoveringMode::Hit => {
            let target = cov.target.build(cov.depth)?;
            let r = hit_test(&target, &m, &cfg.schedule, &cov.hit, cfg.seed)?;
            write_hits(&dir, cfg, &r)?;
            if cfg.wants(Format::Json) {
                dir.json(
                    "summary.json",
                    &HitSummary {
                        trials: r.trials,
                        hit_rate: r.hit_rate,
                        verdict: hit_verdict(r.hit_rate),
                    },
                )?;
            }
            Ok(CoveringOutcome::Hit(r))
        }
        CoveringMode::Dichotomy => {
            let target = cov.target.build(cov.depth)?;
            let op = cfg.operator.resolve(&cfg.schedule)?;
            let d = dichotomy_experiment(&target, &m, &cfg.schedule, &op, &cov.hit, cfg.seed)?;
            write_hits(&dir, cfg, &d.report)?;
            write_trace(&dir, cfg, &d.trace)?;
            if cfg.wants(Format::Json) {
                #[derive(Serialize)]
                struct Summary {
                    fixed_point_empty: bool,
                    hit_rate: f64,
                    verdict: &'static str,
                    agrees: bool,
                }
                dir.json(
                    "summary.json",
                    &Summary {
                        fixed_point_empty: d.fixed_point_empty,
                        hit_rate: d.hit_rate,
                        verdict: hit_verdict(d.hit_rate),
                        agrees: d.agrees(),
                    },
                )?;
            }
            Ok(CoveringOutcome::Dichotomy(Box::new(d)))
        }
    }
}

/// Parameters used for the figure data.
pub const FIGURE_PARAMS: CantorParams = CantorParams {
    s: 0.4,
    u: 0.8,
    beta: 2.5,
};

/// Grid sizes of the three figure files.
pub const FIGURE_ROWS: [usize; 3] = [201, 201, 100];

/// Writes `fig1_hull.csv`, `fig2_mu1.csv` and `fig3_mu2.csv`.
pub fn cmd_figures(out: &Path) -> Result<(), CliError> {
    let dir = RunDir::create(out)?;
    let p = FIGURE_PARAMS;
    let raw = SpectrumCurve::sample(0.0, 0.01, FIGURE_ROWS[0], |t| raw_step(&p, Which::Hbar, t))?;
    let hull = lipschitz_hull(&raw);
    let rows = raw
        .points()
        .zip(hull.values())
        .map(|((t, g), h)| vec![float(t), float(g), float(*h)]);
    dir.csv("fig1_hull.csv", &["t", "raw", "hull"], rows)?;

    let rows = (0..FIGURE_ROWS[1]).map(|i| {
        let t = i as f64 * 0.01;
        vec![float(t), float(fbar(&p, t)), float(hbar(&p, t))]
    });
    dir.csv("fig2_mu1.csv", &["t", "fbar", "hbar"], rows)?;

    let kind = PredictKind::Mu2(p);
    let mut rows = Vec::with_capacity(FIGURE_ROWS[2]);
    for i in 1..=FIGURE_ROWS[2] {
        let x = i as f64 * 0.01;
        let pred = predicted_f(&kind, 1.0 / x)?;
        let f = pred.exact.map(float).unwrap_or_default();
        rows.push(vec![float(x), f, float(fbar(&p, x)), float(hbar(&p, x))]);
    }
    dir.csv("fig3_mu2.csv", &["inv_alpha", "f", "fbar", "hbar"], rows)?;
    Ok(())
}

/// Cell count of a mask, for printing.
pub fn describe(s: &GridSet) -> String {
    format!("{} of {} cells at depth {}", s.cell_count(), s.len(), s.depth())
}
