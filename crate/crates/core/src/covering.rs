//! Monte Carlo realizations of the covering set `limsup B(w_k, r_k)`.
//!
//! The limsup is read through dyadic windows of indices `[2^j, 2^(j+1))`: a
//! target is hit when every window contains a ball meeting it, and dimension is
//! estimated from the balls whose radius is comparable to the counting scale.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{box_dimension, DimensionEstimate, GridSet, RankIndex};
use crate::hitting::{iterate_operator, DivergencePolicy, IterationTrace, RadiusSchedule};
use crate::measures::MeasureModel;

/// Independent ChaCha stream for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn window_stream(trial: u64, j: u32) -> u64 {
    (trial << 8) | j as u64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageField {
    pub depth: u32,
    pub j0: u32,
    /// Mask of cells met by some ball with index in `[2^j, 2^(j+1))`, for `j = j0..=J`.
    pub windows: Vec<GridSet>,
    pub seed: u64,
}

fn check_windows(sched: &RadiusSchedule, j0: u32, j_max: u32) -> Result<()> {
    sched.validate()?;
    if j0 > j_max {
        return invalid(format!("empty window range {j0}..={j_max}"));
    }
    let needed = 1u64.checked_shl(j_max + 1).unwrap_or(u64::MAX);
    if j_max >= 63 || needed > sched.k_max() {
        return Err(Error::WindowExceedsSchedule {
            needed,
            k_max: sched.k_max(),
        });
    }
    Ok(())
}

pub fn simulate(
    m: &MeasureModel,
    sched: &RadiusSchedule,
    depth: u32,
    j0: u32,
    j_max: u32,
    seed: u64,
) -> Result<CoverageField> {
    check_windows(sched, j0, j_max)?;
    GridSet::empty(depth)?;
    let windows = (j0..=j_max)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, window_stream(0, j));
            let mut mask = GridSet::empty(depth).expect("depth checked");
            for k in 1u64 << j..1u64 << (j + 1) {
                let w = m.draw(&mut rng);
                let r = sched.radius(k);
                mask.insert_interval((w - r).max(0.0), (w + r).min(1.0));
            }
            mask
        })
        .collect();
    Ok(CoverageField {
        depth,
        j0,
        windows,
        seed,
    })
}

/// Cells at `depth` met by the closed balls `B(c, r)`.
pub fn ball_mask(balls: &[(f64, f64)], depth: u32) -> Result<GridSet> {
    let mut s = GridSet::empty(depth)?;
    for &(c, r) in balls {
        s.insert_interval((c - r).max(0.0), (c + r).min(1.0));
    }
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimensionConfig {
    /// Counting scales are `2^-j` for `j_min <= j <= j_max`.
    pub j_min: u32,
    pub j_max: u32,
    pub reps: usize,
    /// Balls counted at scale `delta` have index in `[k, band_factor k)`, `k = ceil(delta^(-1/alpha))`.
    pub band_factor: f64,
}

impl Default for DimensionConfig {
    fn default() -> Self {
        DimensionConfig {
            j_min: 5,
            j_max: 10,
            reps: 5,
            band_factor: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionRun {
    pub estimate: DimensionEstimate<f64>,
    /// `(rep, delta, count)` for every rep and scale.
    pub raw_counts: Vec<(usize, f64, u64)>,
}

pub fn dimension_estimate(
    m: &MeasureModel,
    sched: &RadiusSchedule,
    cfg: &DimensionConfig,
    seed: u64,
) -> Result<DimensionRun> {
    let alpha = match sched {
        RadiusSchedule::PowerLaw { alpha, .. } => *alpha,
        RadiusSchedule::Explicit { .. } => return invalid("dimension runs need a power-law schedule"),
    };
    sched.validate()?;
    if cfg.reps == 0 || !(cfg.band_factor > 1.0) {
        return invalid("need reps >= 1 and band_factor > 1");
    }
    if cfg.j_max > crate::geometry::MAX_DEPTH || cfg.j_min + 2 > cfg.j_max {
        return invalid(format!("scale range {}..={} needs at least 3 depths up to 26", cfg.j_min, cfg.j_max));
    }
    let bands: Vec<(u32, u64, u64)> = (cfg.j_min..=cfg.j_max)
        .map(|j| {
            let k = (j as f64 / alpha).exp2().ceil() as u64;
            let end = ((k as f64 * cfg.band_factor).ceil() as u64).min(sched.k_max() + 1);
            (j, k, end)
        })
        .collect();
    if let Some(b) = bands.iter().find(|b| b.1 > sched.k_max() || b.2 <= b.1) {
        return Err(Error::WindowExceedsSchedule {
            needed: b.1,
            k_max: sched.k_max(),
        });
    }
    let k_top = bands.iter().map(|b| b.2).max().unwrap();
    let per_rep: Vec<Vec<u64>> = (0..cfg.reps)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(seed, rep as u64);
            let centers: Vec<f64> = (1..k_top).map(|_| m.draw(&mut rng)).collect();
            bands
                .iter()
                .map(|&(j, k0, k1)| {
                    let balls: Vec<(f64, f64)> =
                        (k0..k1).map(|k| (centers[k as usize - 1], sched.radius(k))).collect();
                    ball_mask(&balls, j).expect("depth checked").cell_count() as u64
                })
                .collect()
        })
        .collect();
    let mut slopes = Vec::with_capacity(cfg.reps);
    for counts in &per_rep {
        let pairs: Vec<(f64, u64)> = bands.iter().zip(counts).map(|(b, &c)| ((-(b.0 as f64)).exp2(), c)).collect();
        slopes.push(box_dimension(&pairs)?);
    }
    let n = cfg.reps as f64;
    let value = slopes.iter().map(|e| e.value).sum::<f64>() / n;
    let stderr = if cfg.reps > 1 {
        let var = slopes.iter().map(|e| (e.value - value).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        slopes[0].stderr
    };
    let scale_pairs = bands
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let lg = per_rep.iter().map(|c| (c[i] as f64).ln()).sum::<f64>() / n;
            ((-(b.0 as f64)).exp2(), lg.exp().round().max(1.0) as u64)
        })
        .collect();
    let raw_counts = per_rep
        .iter()
        .enumerate()
        .flat_map(|(rep, counts)| bands.iter().zip(counts).map(move |(b, &c)| (rep, (-(b.0 as f64)).exp2(), c)))
        .collect();
    Ok(DimensionRun {
        estimate: DimensionEstimate {
            value,
            stderr,
            scale_pairs,
        },
        raw_counts,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HitConfig {
    pub trials: usize,
    pub j0: u32,
    pub j_max: u32,
}

impl Default for HitConfig {
    fn default() -> Self {
        HitConfig {
            trials: 100,
            j0: 4,
            j_max: 14,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HitReport {
    pub trials: usize,
    pub verdicts: Vec<bool>,
    pub hit_rate: f64,
    /// `(j, number of trials whose window j met the target)`.
    pub window_detail: Vec<(u32, usize)>,
}

pub fn hit_test(
    target: &GridSet,
    m: &MeasureModel,
    sched: &RadiusSchedule,
    cfg: &HitConfig,
    seed: u64,
) -> Result<HitReport> {
    if target.is_empty() {
        return Err(Error::EmptyTarget);
    }
    if cfg.trials == 0 {
        return invalid("need at least one trial");
    }
    check_windows(sched, cfg.j0, cfg.j_max)?;
    let rank = RankIndex::new(target);
    let n = target.len() as f64;
    let last = target.len() - 1;
    let hits_ball = |c: f64, r: f64| {
        let lo = (((c - r) * n).ceil() - 1.0).max(0.0) as usize;
        let hi = (((c + r) * n).floor() as usize).min(last);
        lo <= hi && rank.count(lo, hi + 1) > 0
    };
    let per_trial: Vec<Vec<bool>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| {
            (cfg.j0..=cfg.j_max)
                .map(|j| {
                    let mut rng = stream_rng(seed, window_stream(trial as u64 + 1, j));
                    (1u64 << j..1u64 << (j + 1)).any(|k| hits_ball(m.draw(&mut rng), sched.radius(k)))
                })
                .collect()
        })
        .collect();
    let verdicts: Vec<bool> = per_trial.iter().map(|w| w.iter().all(|&h| h)).collect();
    let hits = verdicts.iter().filter(|&&v| v).count();
    let window_detail = (cfg.j0..=cfg.j_max)
        .enumerate()
        .map(|(i, j)| (j, per_trial.iter().filter(|w| w[i]).count()))
        .collect();
    Ok(HitReport {
        trials: cfg.trials,
        verdicts,
        hit_rate: hits as f64 / cfg.trials as f64,
        window_detail,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorConfig {
    pub t: f64,
    pub policy: DivergencePolicy,
    pub r_probe: f64,
    pub max_stages: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dichotomy {
    pub fixed_point_empty: bool,
    pub hit_rate: f64,
    pub trace: IterationTrace,
    pub report: HitReport,
}

impl Dichotomy {
    /// Fixed-point emptiness agrees with a hit rate of at most 5% or at least 95%.
    pub fn agrees(&self) -> bool {
        if self.fixed_point_empty {
            self.hit_rate <= 0.05
        } else {
            self.hit_rate >= 0.95
        }
    }
}

pub fn dichotomy_experiment(
    target: &GridSet,
    m: &MeasureModel,
    sched: &RadiusSchedule,
    op: &OperatorConfig,
    hit: &HitConfig,
    seed: u64,
) -> Result<Dichotomy> {
    let trace = iterate_operator(m, sched, op.t, target, &op.policy, op.r_probe, op.max_stages)?;
    let report = hit_test(target, m, sched, hit, seed)?;
    Ok(Dichotomy {
        fixed_point_empty: trace.fixed_point.is_empty(),
        hit_rate: report.hit_rate,
        trace,
        report,
    })
}
