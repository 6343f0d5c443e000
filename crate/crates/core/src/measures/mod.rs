//! Lebesgue measure, the Cantor measure and the two atomic measures on `[0,1]`.
//!
//! A [`MeasureModel`] is a cascade part spread evenly over the construction
//! tree plus point masses at gap midpoints, truncated at the tree's last level.
//! The mass of the atoms that were cut off is carried as `tail_bound` and
//! reported as error on every query.

mod local_dim;
mod tree;

pub use local_dim::{block_exponents, fitted_exponent, local_dim_curve, BlockExponent, LocalDimCurve};
pub use tree::{BlockSchedule, ConstructionTree};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::GridSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Lebesgue,
    Theta,
    Mu1,
    Mu2,
    Custom,
}

#[derive(Clone, Debug)]
pub struct MeasureModel {
    kind: MeasureKind,
    tree: Option<ConstructionTree>,
    cascade_mass: f64,
    /// Weight of each individual atom at level `k`.
    level_weights: Vec<f64>,
    tail_bound: f64,
    /// Total mass inside one level-`j` interval, `j = 0..=L`.
    node_mass: Vec<f64>,
    /// Cumulative atom mass by level, used to pick a level when sampling.
    atom_cdf: Vec<f64>,
}

#[derive(Default)]
struct Cumulative {
    mass: f64,
    /// Pro-rating slack at the last level.
    slack: f64,
    /// Last-level intervals lying entirely to the left of `x`.
    leaves: f64,
    inside_leaf: bool,
}

/// Interval mass together with an upper bound on its absolute error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mass {
    pub mass: f64,
    pub err: f64,
}

pub fn lebesgue_measure() -> MeasureModel {
    MeasureModel {
        kind: MeasureKind::Lebesgue,
        tree: None,
        cascade_mass: 1.0,
        level_weights: Vec::new(),
        tail_bound: 0.0,
        node_mass: Vec::new(),
        atom_cdf: Vec::new(),
    }
}

/// Equal split of unit mass over the construction intervals.
pub fn cantor_theta(schedule: BlockSchedule) -> MeasureModel {
    MeasureModel::assemble(MeasureKind::Theta, ConstructionTree::new(schedule), 1.0, Vec::new(), 0.0)
}

/// Atoms with level-`k` weight `(1 - 2^(1-beta)) 2^(-beta k)`.
pub fn mu_one(schedule: BlockSchedule, beta: f64) -> Result<MeasureModel> {
    if !(beta > 1.0) {
        return invalid(format!("mu1 needs beta > 1, got {beta}"));
    }
    let c = 1.0 - (1.0 - beta).exp2();
    let l = schedule.max_level as i32;
    let weights = (0..=l).map(|k| c * (-beta * k as f64).exp2()).collect();
    let tail = ((1.0 - beta) * (l + 1) as f64).exp2();
    Ok(MeasureModel::assemble(
        MeasureKind::Mu1,
        ConstructionTree::new(schedule),
        0.0,
        weights,
        tail,
    ))
}

/// Atoms with level-`k` weight `gamma0 ell_k^(beta s)`.
///
/// The discarded levels are bounded by a geometric series with ratio
/// `2^(1 - beta s / u)`, and `gamma0` normalizes atoms plus that bound to one.
pub fn mu_two(schedule: BlockSchedule, beta: f64) -> Result<MeasureModel> {
    let (s, u) = (schedule.s(), schedule.u());
    if !(beta > u / s) {
        return invalid(format!("mu2 needs beta > u/s = {}, got {beta}", u / s));
    }
    let tree = ConstructionTree::new(schedule);
    let l = tree.max_level();
    let raw: Vec<f64> = (0..=l).map(|k| tree.length(k).powf(beta * s)).collect();
    let partial: f64 = raw.iter().enumerate().map(|(k, w)| w * (k as f64).exp2()).sum();
    let q = (1.0 - beta * s / u).exp2();
    let last = raw[l as usize] * (l as f64).exp2();
    let tail_raw = last * q / (1.0 - q);
    let gamma0 = 1.0 / (partial + tail_raw);
    let weights = raw.iter().map(|w| gamma0 * w).collect();
    Ok(MeasureModel::assemble(
        MeasureKind::Mu2,
        tree,
        0.0,
        weights,
        gamma0 * tail_raw,
    ))
}

/// A cascade of mass `cascade_mass` plus equal per-level atom weights on an arbitrary tree.
pub fn custom_measure(
    schedule: BlockSchedule,
    cascade_mass: f64,
    level_weights: Vec<f64>,
    tail_bound: f64,
) -> Result<MeasureModel> {
    if level_weights.len() != schedule.max_level as usize + 1 {
        return invalid("need one atom weight per level 0..=L");
    }
    if cascade_mass < 0.0 || tail_bound < 0.0 || level_weights.iter().any(|&w| !(w >= 0.0)) {
        return invalid("masses must be nonnegative");
    }
    let m = MeasureModel::assemble(
        MeasureKind::Custom,
        ConstructionTree::new(schedule),
        cascade_mass,
        level_weights,
        tail_bound,
    );
    let total = m.total_mass() + tail_bound;
    if (total - 1.0).abs() > 1e-9 {
        return invalid(format!("masses add up to {total}, not 1"));
    }
    Ok(m)
}

impl MeasureModel {
    fn assemble(
        kind: MeasureKind,
        tree: ConstructionTree,
        cascade_mass: f64,
        level_weights: Vec<f64>,
        tail_bound: f64,
    ) -> Self {
        let l = tree.max_level() as usize;
        let w = |k: usize| level_weights.get(k).copied().unwrap_or(0.0);
        let mut node_mass = vec![0.0; l + 1];
        let mut atoms_below = 0.0;
        for j in (0..=l).rev() {
            atoms_below = w(j) + 2.0 * atoms_below;
            node_mass[j] = cascade_mass * (-(j as f64)).exp2() + atoms_below;
        }
        let mut acc = 0.0;
        let atom_cdf = (0..level_weights.len())
            .map(|k| {
                acc += w(k) * (k as f64).exp2();
                acc
            })
            .collect();
        MeasureModel {
            kind,
            tree: Some(tree),
            cascade_mass,
            level_weights,
            tail_bound,
            node_mass,
            atom_cdf,
        }
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn tree(&self) -> Option<&ConstructionTree> {
        self.tree.as_ref()
    }

    pub fn cascade_mass(&self) -> f64 {
        self.cascade_mass
    }

    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    pub fn level_weight(&self, k: u32) -> f64 {
        self.level_weights.get(k as usize).copied().unwrap_or(0.0)
    }

    pub fn atom_mass(&self) -> f64 {
        self.atom_cdf.last().copied().unwrap_or(0.0)
    }

    /// Materialized mass, i.e. everything except the tail.
    pub fn total_mass(&self) -> f64 {
        match &self.tree {
            None => 1.0,
            Some(_) => self.node_mass[0],
        }
    }

    /// All materialized atoms as `(location, weight)`, level by level.
    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let tree = self.tree.as_ref();
        self.level_weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 0.0)
            .flat_map(move |(k, &w)| {
                let t = tree.expect("atoms need a tree");
                (0..1u64 << k).map(move |i| (t.gap_midpoint(k as u32, i), w))
            })
    }

    /// Deepest dyadic exponent at which ball masses stay meaningful.
    pub fn effective_depth(&self) -> u32 {
        match &self.tree {
            None => 1022,
            Some(t) => (-t.length(t.max_level()).log2()).floor() as u32,
        }
    }

    /// `mu([0, x])` when `inclusive`, `mu([0, x))` otherwise.
    fn cumulative(&self, x: f64, inclusive: bool) -> Cumulative {
        let t = match &self.tree {
            None => {
                return Cumulative {
                    mass: x,
                    ..Cumulative::default()
                }
            }
            Some(t) => t,
        };
        let last = t.max_level();
        let leaves = |j: u32| ((last - j) as f64).exp2();
        let mut c = Cumulative::default();
        let mut l = 0.0;
        for j in 0..=last {
            let len = t.length(j);
            if x >= l + len && x > l {
                c.mass += self.node_mass[j as usize];
                c.leaves += leaves(j);
                return c;
            }
            let mid = l + 0.5 * len;
            let atom = if mid < x || (inclusive && mid == x) {
                self.level_weight(j)
            } else {
                0.0
            };
            if j == last {
                if x > l {
                    let share = self.cascade_mass * (-(j as f64)).exp2();
                    c.mass += share * (x - l) / len + atom;
                    c.slack = share;
                    c.inside_leaf = true;
                }
                return c;
            }
            let child = t.length(j + 1);
            let right = l + t.offset(j);
            if x <= l + child {
                continue;
            }
            c.mass += self.node_mass[j as usize + 1] + atom;
            c.leaves += leaves(j + 1);
            if x < right {
                return c;
            }
            l = right;
        }
        unreachable!("descent always terminates at the last level")
    }

    /// Mass of the closed interval `[x1, x2]`.
    pub fn mass_interval(&self, x1: f64, x2: f64) -> Result<Mass> {
        if !(x1 <= x2) {
            return Err(Error::InvertedInterval(x1, x2));
        }
        if !(0.0..=1.0).contains(&x1) || !(0.0..=1.0).contains(&x2) {
            return Err(Error::OutOfRange(if (0.0..=1.0).contains(&x1) { x2 } else { x1 }));
        }
        Ok(self.mass_interval_unchecked(x1, x2))
    }

    /// The error counts the discarded atoms only in the last-level intervals that meet
    /// `[x1, x2]`; they spread evenly because every level has equal atom weights.
    pub(crate) fn mass_interval_unchecked(&self, x1: f64, x2: f64) -> Mass {
        let hi = self.cumulative(x2, true);
        let lo = self.cumulative(x1, false);
        let tail = match &self.tree {
            Some(t) if self.tail_bound > 0.0 => {
                let met = hi.leaves + f64::from(u8::from(hi.inside_leaf)) - lo.leaves;
                (self.tail_bound * met * (-(t.max_level() as f64)).exp2()).min(self.tail_bound)
            }
            _ => 0.0,
        };
        Mass {
            mass: hi.mass - lo.mass,
            err: tail + lo.slack + hi.slack,
        }
    }

    /// Mass of the closed ball `B(x, r)` clipped to `[0,1]`.
    pub fn mass_ball(&self, x: f64, r: f64) -> Mass {
        self.mass_interval_unchecked((x - r).max(0.0), (x + r).min(1.0))
    }

    /// Sum of interval masses over the maximal runs of `s`.
    pub fn mass_of_gridset(&self, s: &GridSet) -> Mass {
        let h = s.cell_width();
        let mut out = Mass { mass: 0.0, err: 0.0 };
        for (a, n) in s.runs() {
            let m = self.mass_interval_unchecked(a as f64 * h, ((a + n) as f64 * h).min(1.0));
            out.mass += m.mass;
            out.err += m.err;
        }
        out
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(self.mass_interval(0.0, x)?.mass)
    }

    /// Draws `n` points deterministically from `seed`.
    pub fn sample(&self, seed: u64, n: usize) -> Result<Vec<f64>> {
        if n == 0 {
            return invalid("sample size must be at least 1");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..n).map(|_| self.draw(&mut rng)).collect())
    }

    /// One draw. Tail mass is handed to the materialized atoms in proportion to their weight.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let t = match &self.tree {
            None => return rng.gen::<f64>(),
            Some(t) => t,
        };
        let atoms = self.atom_mass();
        if atoms == 0.0 || rng.gen::<f64>() < self.cascade_mass {
            let l = t.max_level();
            let a = random_left(t, l, rng);
            return a + rng.gen::<f64>() * t.length(l);
        }
        let target = rng.gen::<f64>() * atoms;
        let k = self.atom_cdf.partition_point(|&c| c <= target).min(self.atom_cdf.len() - 1) as u32;
        random_left(t, k, rng) + 0.5 * t.length(k)
    }
}

/// Left end of a uniformly chosen level-`n` interval.
fn random_left<R: Rng + ?Sized>(t: &ConstructionTree, n: u32, rng: &mut R) -> f64 {
    let mut l = 0.0;
    let mut bits = 0u64;
    for j in 0..n {
        if j % 64 == 0 {
            bits = rng.gen();
        }
        if bits & 1 == 1 {
            l += t.offset(j);
        }
        bits >>= 1;
    }
    l
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched() -> BlockSchedule {
        BlockSchedule::from_dimensions(0.4, 0.8, 10, 40).unwrap()
    }

    #[test]
    fn lebesgue_masses() {
        let m = lebesgue_measure();
        assert_eq!(m.mass_interval(0.0, 1.0).unwrap().mass, 1.0);
        assert_eq!(m.mass_interval(0.25, 0.75).unwrap().mass, 0.5);
        assert_eq!(m.mass_ball(0.0, 0.3).mass, 0.3);
        assert!(m.mass_interval(0.7, 0.2).is_err());
    }

    #[test]
    fn theta_level_three() {
        let m = cantor_theta(sched());
        let t = m.tree().unwrap();
        for i in 0..8 {
            let (a, b) = t.interval(3, i);
            let q = m.mass_interval(a, b).unwrap();
            assert_eq!(q, Mass { mass: 0.125, err: 0.0 });
        }
    }

    #[test]
    fn mu1_normalization() {
        let m = mu_one(sched(), 2.5).unwrap();
        assert!((m.mass_interval(0.0, 1.0).unwrap().mass + m.tail_bound() - 1.0).abs() < 1e-12);
        assert_eq!(m.level_weight(0), 1.0 - (-1.5f64).exp2());
        assert!(mu_one(sched(), 1.0).is_err());
    }

    #[test]
    fn mu2_normalization() {
        let m = mu_two(sched(), 2.5).unwrap();
        let full = m.mass_interval(0.0, 1.0).unwrap();
        assert!((full.mass + m.tail_bound() - 1.0).abs() < 1e-9);
        assert_eq!(full.err, m.tail_bound());
        assert!(mu_two(sched(), 1.9).is_err());
    }

    #[test]
    fn atom_at_endpoint_is_counted_once() {
        let m = mu_one(sched(), 2.5).unwrap();
        let mid = m.tree().unwrap().gap_midpoint(0, 0);
        let left = m.mass_interval(0.0, mid).unwrap().mass;
        let right = m.mass_interval(mid, 1.0).unwrap().mass;
        let w = m.level_weight(0);
        assert!((left + right - w - m.total_mass()).abs() < 1e-15);
        assert_eq!(m.mass_interval(mid, mid).unwrap().mass, w);
    }

    #[test]
    fn atoms_listing() {
        let m = mu_one(BlockSchedule::constant(0.25, 3).unwrap(), 2.0).unwrap();
        let atoms: Vec<_> = m.atoms().collect();
        assert_eq!(atoms.len(), 15);
        assert_eq!(atoms[0], (0.5, 0.5));
    }

    #[test]
    fn custom_rejects_unnormalized() {
        let s = BlockSchedule::constant(0.25, 2).unwrap();
        assert!(custom_measure(s.clone(), 0.5, vec![0.1, 0.0, 0.0], 0.0).is_err());
        let m = custom_measure(s, 0.5, vec![0.5, 0.0, 0.0], 0.0).unwrap();
        assert_eq!(m.mass_interval(0.0, 0.5).unwrap().mass, 0.75);
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = mu_two(sched(), 2.5).unwrap();
        assert_eq!(m.sample(9, 50).unwrap(), m.sample(9, 50).unwrap());
        assert!(m.sample(9, 0).is_err());
    }
}
