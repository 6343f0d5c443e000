//! Grid version of the hitting operator and its fixed-point iteration.
//!
//! For a cell centre `x` the operator looks at
//! `sum_k mu(B(x, R) ∩ S(r_k)) (2 r_k)^t` and keeps the cell when the partial
//! sums at `K = 2^j` still grow. Terms with `r_k` below the cell width cannot be
//! resolved on the grid: their ball masses are continued as a power law in
//! `r_k`, fitted on the last resolvable dyadic checkpoints.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{linear_fit, GridSet, RankIndex};
use crate::measures::{MeasureKind, MeasureModel};

/// Largest table of exact series weights kept in memory.
const MAX_EXACT_TERMS: u64 = 1 << 26;

/// Radii below this many cell widths are too coarsely rounded to enter the exact sums.
const RESOLVED_CELLS: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RadiusSchedule {
    PowerLaw { alpha: f64, k_max: u64 },
    Explicit { values: Vec<f64> },
}

impl RadiusSchedule {
    pub fn power_law(alpha: f64, k_max: u64) -> Result<Self> {
        let s = RadiusSchedule::PowerLaw { alpha, k_max };
        s.validate()?;
        Ok(s)
    }

    pub fn explicit(values: Vec<f64>) -> Result<Self> {
        let s = RadiusSchedule::Explicit { values };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RadiusSchedule::PowerLaw { alpha, k_max } => {
                if !(*alpha > 0.0 && alpha.is_finite()) {
                    return invalid(format!("alpha must be positive, got {alpha}"));
                }
                if *k_max == 0 {
                    return invalid("k_max must be at least 1");
                }
            }
            RadiusSchedule::Explicit { values } => {
                if values.is_empty() {
                    return invalid("explicit radius list is empty");
                }
                if values.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
                    return invalid("radii must be positive and finite");
                }
                if values.windows(2).any(|w| w[1] > w[0]) {
                    return invalid("radii must be nonincreasing");
                }
            }
        }
        Ok(())
    }

    pub fn k_max(&self) -> u64 {
        match self {
            RadiusSchedule::PowerLaw { k_max, .. } => *k_max,
            RadiusSchedule::Explicit { values } => values.len() as u64,
        }
    }

    /// `r_k` for `k >= 1`.
    pub fn radius(&self, k: u64) -> f64 {
        match self {
            RadiusSchedule::PowerLaw { alpha, .. } => (k as f64).powf(-alpha),
            RadiusSchedule::Explicit { values } => values[(k - 1) as usize],
        }
    }

    /// Largest `k <= k_max` with `r_k >= h`, or 0 when even `r_1 < h`.
    pub fn resolved_index(&self, h: f64) -> u64 {
        match self {
            RadiusSchedule::PowerLaw { alpha, k_max } => {
                let mut k = h.powf(-1.0 / alpha).floor().min(*k_max as f64) as u64;
                while k > 0 && self.radius(k) < h {
                    k -= 1;
                }
                while k < *k_max && self.radius(k + 1) >= h {
                    k += 1;
                }
                k
            }
            RadiusSchedule::Explicit { values } => values.partition_point(|&r| r >= h) as u64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct S2 {
    pub value: f64,
    /// True when the value comes from a regression rather than a closed form.
    pub estimated: bool,
}

/// Convergence exponent of `sum r_k^t`.
pub fn s2_exponent(sched: &RadiusSchedule) -> Result<S2> {
    sched.validate()?;
    match sched {
        RadiusSchedule::PowerLaw { alpha, .. } => Ok(S2 {
            value: 1.0 / alpha,
            estimated: false,
        }),
        RadiusSchedule::Explicit { values } => {
            if values.len() < 3 {
                return Err(Error::InsufficientData("need at least 3 radii to fit s2".into()));
            }
            let n = values.len();
            let start = n / 2;
            let xs: Vec<f64> = (start..n).map(|i| ((i + 1) as f64).ln()).collect();
            let ys: Vec<f64> = values[start..].iter().map(|r| r.ln()).collect();
            let slope = linear_fit(&xs, &ys).0;
            if !(slope < 0.0) {
                return invalid("radii do not decay; s2 is infinite");
            }
            Ok(S2 {
                value: -1.0 / slope,
                estimated: true,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DivergencePolicy {
    /// First checkpoint exponent; checkpoints are `K = 2^j` for `j0 <= j <= log2 K_max`.
    pub j0: u32,
    pub fit_window: usize,
    pub slope_threshold: f64,
    pub borderline_band: f64,
}

impl Default for DivergencePolicy {
    fn default() -> Self {
        DivergencePolicy {
            j0: 4,
            fit_window: 4,
            slope_threshold: 0.05,
            borderline_band: 0.02,
        }
    }
}

impl DivergencePolicy {
    pub fn validate(&self) -> Result<()> {
        if self.j0 < 4 {
            return invalid(format!("j0 must be at least 4, got {}", self.j0));
        }
        if self.fit_window < 4 {
            return invalid(format!("fit window must be at least 4, got {}", self.fit_window));
        }
        if !(self.slope_threshold > 0.0) || !(self.borderline_band >= 0.0) {
            return invalid("slope threshold must be positive and band nonnegative");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Divergent,
    Convergent,
    Borderline,
}

impl Verdict {
    pub fn keeps(self) -> bool {
        self != Verdict::Convergent
    }
}

/// Reads divergence off the log2-slope of the partial sums over the last checkpoints.
pub fn classify(checkpoints: &[(u32, f64)], policy: &DivergencePolicy) -> Verdict {
    if checkpoints.iter().all(|c| c.1 <= 0.0) {
        return Verdict::Convergent;
    }
    let w = policy.fit_window.min(checkpoints.len());
    let tail = &checkpoints[checkpoints.len() - w..];
    if w < 2 || tail.iter().any(|c| c.1 <= 0.0) {
        return Verdict::Borderline;
    }
    let xs: Vec<f64> = tail.iter().map(|c| c.0 as f64).collect();
    let ys: Vec<f64> = tail.iter().map(|c| c.1.log2()).collect();
    let slope = linear_fit(&xs, &ys).0;
    if slope >= policy.slope_threshold + policy.borderline_band {
        Verdict::Divergent
    } else if slope <= policy.slope_threshold - policy.borderline_band {
        Verdict::Convergent
    } else {
        Verdict::Borderline
    }
}

/// Everything about the series that does not depend on the probe centre.
struct SeriesPlan {
    h: f64,
    k_res: u64,
    /// `(k_first, k_last, dilation width)` with a common width on each range.
    groups: Vec<(u64, u64, usize)>,
    /// `prefix[k] = sum_{i <= k} (2 r_i)^t`.
    prefix: Vec<f64>,
    /// Largest `j` with `2^j <= k_res`.
    j_res: u32,
    /// Largest `j` with `2^j <= K_max`.
    j_top: u32,
}

impl SeriesPlan {
    fn new(sched: &RadiusSchedule, t: f64, depth: u32, policy: &DivergencePolicy) -> Result<Self> {
        sched.validate()?;
        policy.validate()?;
        if !(t >= 0.0) {
            return invalid(format!("t must be nonnegative, got {t}"));
        }
        let n = 1usize << depth;
        let h = 1.0 / n as f64;
        let k_res = sched.resolved_index(RESOLVED_CELLS * h).min(MAX_EXACT_TERMS);
        if k_res == 0 {
            return invalid("the first radius is below the grid resolution");
        }
        let j_top = 63 - sched.k_max().leading_zeros();
        if j_top + 1 < policy.j0 + policy.fit_window as u32 {
            return invalid(format!(
                "K_max = {} leaves fewer than {} checkpoints from j0 = {}",
                sched.k_max(),
                policy.fit_window,
                policy.j0
            ));
        }
        let mut prefix = Vec::with_capacity(k_res as usize + 1);
        prefix.push(0.0);
        let mut groups: Vec<(u64, u64, usize)> = Vec::new();
        for k in 1..=k_res {
            let r = sched.radius(k);
            prefix.push(prefix[k as usize - 1] + (2.0 * r).powf(t));
            let w = ((r * n as f64).ceil() as usize).min(n);
            match groups.last_mut() {
                Some(g) if g.2 == w => g.1 = k,
                _ => groups.push((k, k, w)),
            }
        }
        Ok(SeriesPlan {
            h,
            k_res,
            groups,
            prefix,
            j_res: 63 - k_res.leading_zeros(),
            j_top,
        })
    }

    fn ball(&self, x: f64, r_probe: f64) -> (usize, usize) {
        let n = 1.0 / self.h;
        let lo = (((x - r_probe) * n).ceil() - 1.0).max(0.0) as usize;
        let hi = (((x + r_probe) * n).floor()).min(n - 1.0) as usize;
        (lo, hi)
    }
}

#[derive(Clone)]
struct ProbeState {
    ball: (usize, usize),
    running: f64,
    /// Partial sum at `K = 2^j`, `j = 0..=j_res`.
    sums: Vec<f64>,
    /// Ball mass for the width used at `k = 2^j`.
    masses: Vec<f64>,
    last_mass: f64,
}

fn ball_mass(m: &MeasureModel, dil: &GridSet, rank: Option<&RankIndex>, ball: (usize, usize), h: f64) -> f64 {
    let (lo, hi) = ball;
    if let Some(rank) = rank {
        return rank.count(lo, hi + 1) as f64 * h;
    }
    let mut total = 0.0;
    let mut pos = lo;
    while let Some(a) = dil.next_from(pos, true) {
        if a > hi {
            break;
        }
        let b = dil.next_from(a, false).unwrap_or(dil.len()).min(hi + 1);
        total += m.mass_interval_unchecked(a as f64 * h, (b as f64 * h).min(1.0)).mass;
        pos = b;
    }
    total
}

/// Exact partial sums for every probe up to `k_res`.
fn exact_sums(plan: &SeriesPlan, m: &MeasureModel, s: &GridSet, balls: &[(usize, usize)]) -> Vec<ProbeState> {
    let nj = plan.j_res as usize + 1;
    let mut states: Vec<ProbeState> = balls
        .iter()
        .map(|&ball| ProbeState {
            ball,
            running: 0.0,
            sums: vec![0.0; nj],
            masses: vec![0.0; nj],
            last_mass: 0.0,
        })
        .collect();
    let lebesgue = m.kind() == MeasureKind::Lebesgue;
    for &(ka, kb, w) in &plan.groups {
        let dil = s.dilate(w);
        let rank = lebesgue.then(|| RankIndex::new(&dil));
        let base = plan.prefix[ka as usize - 1];
        let marks: Vec<(usize, f64)> = (0..nj)
            .filter(|&j| (ka..=kb).contains(&(1u64 << j)))
            .map(|j| (j, plan.prefix[1usize << j] - base))
            .collect();
        let total = plan.prefix[kb as usize] - base;
        let is_last = kb == plan.k_res;
        states.par_iter_mut().for_each(|st| {
            let mass = ball_mass(m, &dil, rank.as_ref(), st.ball, plan.h);
            for &(j, wgt) in &marks {
                st.sums[j] = st.running + mass * wgt;
                st.masses[j] = mass;
            }
            st.running += mass * total;
            if is_last {
                st.last_mass = mass;
            }
        });
    }
    states
}

/// Power-law exponent of the ball mass in `r`, from the last resolvable dyadic checkpoints.
fn mass_exponent(plan: &SeriesPlan, sched: &RadiusSchedule, st: &ProbeState, window: usize) -> f64 {
    let lo = (plan.j_res as usize + 1).saturating_sub(window);
    let pts: Vec<(f64, f64)> = (lo..=plan.j_res as usize)
        .filter(|&j| st.masses[j] > 0.0)
        .map(|j| (sched.radius(1u64 << j).log2(), st.masses[j].log2()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let g = linear_fit(&xs, &ys).0;
    if g.is_finite() {
        g.max(0.0)
    } else {
        0.0
    }
}

/// `sum_{k=a}^{b} k^(-e)` by the midpoint integral rule.
fn power_block(a: u64, b: u64, e: f64) -> f64 {
    let (lo, hi) = (a as f64 - 0.5, b as f64 + 0.5);
    if (e - 1.0).abs() < 1e-12 {
        (hi / lo).ln()
    } else {
        (hi.powf(1.0 - e) - lo.powf(1.0 - e)) / (1.0 - e)
    }
}

fn checkpoints_for(
    plan: &SeriesPlan,
    sched: &RadiusSchedule,
    t: f64,
    st: &ProbeState,
    policy: &DivergencePolicy,
) -> Vec<(u32, f64)> {
    let mut out: Vec<(u32, f64)> = (policy.j0..=plan.j_res.min(plan.j_top))
        .map(|j| (j, st.sums[j as usize]))
        .collect();
    if plan.j_top <= plan.j_res {
        return out;
    }
    let m0 = st.last_mass;
    let r0 = sched.radius(plan.k_res);
    let gamma = mass_exponent(plan, sched, st, policy.fit_window);
    let mut sum = st.running;
    let mut k = plan.k_res;
    for j in plan.j_res + 1..=plan.j_top {
        let end = 1u64 << j;
        if m0 > 0.0 {
            sum += match sched {
                RadiusSchedule::PowerLaw { alpha, .. } => {
                    m0 * r0.powf(-gamma) * 2f64.powf(t) * power_block(k + 1, end, alpha * (gamma + t))
                }
                RadiusSchedule::Explicit { .. } => (k + 1..=end)
                    .map(|i| {
                        let r = sched.radius(i);
                        m0 * (r / r0).powf(gamma) * (2.0 * r).powf(t)
                    })
                    .sum(),
            };
        }
        k = end;
        if j >= policy.j0 {
            out.push((j, sum));
        }
    }
    out
}

fn check_probe(depth: u32, r_probe: f64) -> Result<()> {
    let h = (-(depth as f64)).exp2();
    if !(r_probe >= 2.0 * h) {
        return invalid(format!(
            "probe radius {r_probe} is below two cell widths ({})",
            2.0 * h
        ));
    }
    Ok(())
}

/// Partial sums at `K = 2^j`, `j0 <= j <= log2 K_max`, for a single centre `x`.
pub fn series_checkpoints(
    m: &MeasureModel,
    sched: &RadiusSchedule,
    t: f64,
    s: &GridSet,
    x: f64,
    r_probe: f64,
    policy: &DivergencePolicy,
) -> Result<Vec<(u32, f64)>> {
    check_probe(s.depth(), r_probe)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange(x));
    }
    let plan = SeriesPlan::new(sched, t, s.depth(), policy)?;
    let st = exact_sums(&plan, m, s, &[plan.ball(x, r_probe)]);
    Ok(checkpoints_for(&plan, sched, t, &st[0], policy))
}

/// Keeps the cells of `s` whose centre classifies as Divergent or Borderline.
pub fn hitting_operator(
    m: &MeasureModel,
    sched: &RadiusSchedule,
    t: f64,
    s: &GridSet,
    policy: &DivergencePolicy,
    r_probe: f64,
) -> Result<GridSet> {
    check_probe(s.depth(), r_probe)?;
    let plan = SeriesPlan::new(sched, t, s.depth(), policy)?;
    let mut out = GridSet::empty(s.depth())?;
    let cells: Vec<usize> = s.iter_cells().collect();
    if cells.is_empty() {
        return Ok(out);
    }
    // A ball lying inside S sees the same mass for every k, so its verdict is
    // that of the bare weight series.
    let rank = RankIndex::new(s);
    let bare = {
        let nj = plan.j_res as usize + 1;
        let st = ProbeState {
            ball: (0, 0),
            running: plan.prefix[plan.k_res as usize],
            sums: (0..nj).map(|j| plan.prefix[1usize << j]).collect(),
            masses: vec![1.0; nj],
            last_mass: 1.0,
        };
        classify(&checkpoints_for(&plan, sched, t, &st, policy), policy)
    };
    let mut probe_cells = Vec::new();
    let mut balls = Vec::new();
    for &c in &cells {
        let ball = plan.ball(s.cell_center(c), r_probe);
        let inside = rank.count(ball.0, ball.1 + 1) as usize == ball.1 - ball.0 + 1;
        if inside {
            let positive = m.mass_ball(s.cell_center(c), r_probe).mass > 0.0;
            if positive && bare.keeps() {
                out.insert(c);
            }
        } else {
            probe_cells.push(c);
            balls.push(ball);
        }
    }
    let states = exact_sums(&plan, m, s, &balls);
    let keep: Vec<bool> = states
        .par_iter()
        .map(|st| classify(&checkpoints_for(&plan, sched, t, st, policy), policy).keeps())
        .collect();
    for (c, k) in probe_cells.into_iter().zip(keep) {
        if k {
            out.insert(c);
        }
    }
    assert!(out.is_subset(s)?, "hitting operator left its input set");
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    /// `(stage, cell_count)`, starting with the input at stage 0.
    pub stages: Vec<(usize, usize)>,
    pub fixed_point: GridSet,
    /// The last stage is a fixed point: it repeats the previous one or is empty.
    pub reached_fixed: bool,
}

pub fn iterate_operator(
    m: &MeasureModel,
    sched: &RadiusSchedule,
    t: f64,
    s0: &GridSet,
    policy: &DivergencePolicy,
    r_probe: f64,
    max_stages: usize,
) -> Result<IterationTrace> {
    if max_stages == 0 {
        return invalid("max_stages must be at least 1");
    }
    let mut cur = s0.clone();
    let mut stages = vec![(0, cur.cell_count())];
    let mut reached = cur.is_empty();
    let mut stage = 0;
    while !reached && stage < max_stages {
        stage += 1;
        let next = hitting_operator(m, sched, t, &cur, policy, r_probe)?;
        stages.push((stage, next.cell_count()));
        reached = next == cur || next.is_empty();
        cur = next;
    }
    Ok(IterationTrace {
        stages,
        fixed_point: cur,
        reached_fixed: reached,
    })
}

/// Grid mask of the compact `K_n`: `K_1 = {0} ∪ {1/j}` and
/// `K_{n+1} = {0} ∪ ⋃_{j>=2} (1/j + K_n / (2j(j-1)))`.
pub fn build_ordinal_tower(n: u32, depth: u32) -> Result<GridSet> {
    if !(1..=3).contains(&n) {
        return invalid(format!("tower level must be 1, 2 or 3, got {n}"));
    }
    let mut s = GridSet::empty(depth)?;
    tower_into(&mut s, n, 0.0, 1.0);
    Ok(s)
}

fn tower_into(s: &mut GridSet, n: u32, offset: f64, scale: f64) {
    let h = s.cell_width();
    s.insert_interval(offset, offset);
    if scale < h {
        s.insert_interval(offset, (offset + scale).min(1.0));
        return;
    }
    let first = if n == 1 { 1 } else { 2 };
    let mut j: u64 = first;
    loop {
        let jf = j as f64;
        let pos = offset + scale / jf;
        if j > first && scale * (1.0 / (jf - 1.0) - 1.0 / jf) < h {
            // The remaining copies are packed tighter than one cell.
            let reach = if n == 1 { scale / jf } else { scale * (1.0 / jf + 1.0 / (2.0 * jf * (jf - 1.0))) };
            s.insert_interval(offset, (offset + reach).min(1.0));
            return;
        }
        if n == 1 {
            s.insert_interval(pos, pos);
        } else {
            tower_into(s, n - 1, pos, scale / (2.0 * jf * (jf - 1.0)));
        }
        j += 1;
    }
}
