use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::GridSet;

/// Alternating-ratio schedule for a middle-interval Cantor construction.
///
/// Levels in `[N_{2k}, N_{2k+1})` use ratio `a`, levels in `[N_{2k+1}, N_{2k+2})`
/// use ratio `b`, with `N_0 = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSchedule {
    pub a: f64,
    pub b: f64,
    pub breakpoints: Vec<u32>,
    pub max_level: u32,
}

impl BlockSchedule {
    pub fn new(a: f64, b: f64, breakpoints: Vec<u32>, max_level: u32) -> Result<Self> {
        let s = BlockSchedule {
            a,
            b,
            breakpoints,
            max_level,
        };
        s.validate()?;
        Ok(s)
    }

    /// Breakpoints `N_k = k G` for every multiple of `G` up to `max_level`.
    pub fn with_growth(a: f64, b: f64, growth: u32, max_level: u32) -> Result<Self> {
        if growth == 0 {
            return invalid("growth factor must be positive");
        }
        let bp = (1..).map(|k| k * growth).take_while(|&n| n <= max_level).collect();
        Self::new(a, b, bp, max_level)
    }

    /// Every level uses ratio `a`.
    pub fn constant(a: f64, max_level: u32) -> Result<Self> {
        if !(a > 0.0 && a < 0.5) {
            return invalid(format!("ratio a = {a} must lie in (0, 1/2)"));
        }
        Ok(BlockSchedule {
            a,
            b: a,
            breakpoints: Vec::new(),
            max_level,
        })
    }

    /// Schedule with `s = log 2 / -log a` and `u = log 2 / -log b`.
    pub fn from_dimensions(s: f64, u: f64, growth: u32, max_level: u32) -> Result<Self> {
        if !(s > 0.0 && s < u && u < 1.0) {
            return invalid(format!("need 0 < s < u < 1, got s = {s}, u = {u}"));
        }
        Self::with_growth((-1.0 / s).exp2(), (-1.0 / u).exp2(), growth, max_level)
    }

    fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.a < self.b && self.b < 0.5) {
            return invalid(format!(
                "need 0 < a < b < 1/2, got a = {}, b = {}",
                self.a, self.b
            ));
        }
        if self.breakpoints.first() == Some(&0) {
            return invalid("breakpoints must be positive");
        }
        if self.breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return invalid("breakpoints must be strictly increasing");
        }
        Ok(())
    }

    pub fn ratio(&self, n: u32) -> f64 {
        let passed = self.breakpoints.partition_point(|&bp| bp <= n);
        if passed % 2 == 0 {
            self.a
        } else {
            self.b
        }
    }

    pub fn s(&self) -> f64 {
        std::f64::consts::LN_2 / -self.a.ln()
    }

    pub fn u(&self) -> f64 {
        std::f64::consts::LN_2 / -self.b.ln()
    }
}

/// Lengths and offsets of the construction intervals at levels `0..=L`.
#[derive(Clone, Debug)]
pub struct ConstructionTree {
    schedule: BlockSchedule,
    ell: Vec<f64>,
    offset: Vec<f64>,
}

impl ConstructionTree {
    pub fn new(schedule: BlockSchedule) -> Self {
        let l = schedule.max_level as usize;
        let mut ell = Vec::with_capacity(l + 2);
        ell.push(1.0);
        for n in 0..=l {
            ell.push(ell[n] * schedule.ratio(n as u32));
        }
        let offset = (0..=l).map(|n| ell[n] - ell[n + 1]).collect();
        ConstructionTree {
            schedule,
            ell,
            offset,
        }
    }

    pub fn schedule(&self) -> &BlockSchedule {
        &self.schedule
    }

    pub fn max_level(&self) -> u32 {
        self.schedule.max_level
    }

    /// `ell_n`, defined for `n <= L + 1`.
    pub fn length(&self, n: u32) -> f64 {
        self.ell[n as usize]
    }

    /// Distance from a node's left end to its right child's left end.
    pub(crate) fn offset(&self, n: u32) -> f64 {
        self.offset[n as usize]
    }

    /// Left end of the `i`-th level-`n` interval; bits of `i` read from the top.
    pub fn left(&self, n: u32, i: u64) -> f64 {
        let mut l = 0.0;
        for j in 0..n {
            if (i >> (n - 1 - j)) & 1 == 1 {
                l += self.offset[j as usize];
            }
        }
        l
    }

    pub fn interval(&self, n: u32, i: u64) -> (f64, f64) {
        let l = self.left(n, i);
        (l, (l + self.ell[n as usize]).min(1.0))
    }

    /// Midpoint of the gap removed from the `i`-th level-`n` interval.
    pub fn gap_midpoint(&self, n: u32, i: u64) -> f64 {
        self.left(n, i) + 0.5 * self.ell[n as usize]
    }

    /// Deepest level `n <= L` whose intervals are at least `width` long.
    pub fn level_for_width(&self, width: f64) -> u32 {
        (0..=self.max_level())
            .rev()
            .find(|&n| self.length(n) >= width)
            .unwrap_or(0)
    }

    /// Grid mask of `C_n` for the deepest level still resolved by the grid.
    pub fn mask(&self, depth: u32) -> Result<GridSet> {
        let mut s = GridSet::empty(depth)?;
        let n = self.level_for_width(s.cell_width());
        let mut lefts = vec![0.0f64];
        for j in 0..n {
            let off = self.offset[j as usize];
            lefts = lefts.iter().flat_map(|&l| [l, l + off]).collect();
        }
        let w = self.length(n);
        for l in lefts {
            s.insert_interval(l, (l + w).min(1.0));
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_ratios() {
        let s = BlockSchedule::new(0.2, 0.4, vec![3, 5], 8).unwrap();
        let r: Vec<f64> = (0..8).map(|n| s.ratio(n)).collect();
        assert_eq!(r, vec![0.2, 0.2, 0.2, 0.4, 0.4, 0.2, 0.2, 0.2]);
    }

    #[test]
    fn rejects_bad_schedules() {
        assert!(BlockSchedule::new(0.4, 0.3, vec![], 5).is_err());
        assert!(BlockSchedule::new(0.2, 0.6, vec![], 5).is_err());
        assert!(BlockSchedule::new(0.2, 0.3, vec![4, 4], 5).is_err());
        assert!(BlockSchedule::with_growth(0.2, 0.3, 0, 5).is_err());
    }

    #[test]
    fn lengths_within_bounds() {
        let s = BlockSchedule::with_growth(0.2, 0.4, 3, 20).unwrap();
        let t = ConstructionTree::new(s);
        for n in 0..=20 {
            let l = t.length(n);
            assert!(0.2f64.powi(n as i32) <= l * (1.0 + 1e-12));
            assert!(l <= 0.4f64.powi(n as i32) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn children_sit_at_parent_ends() {
        let t = ConstructionTree::new(BlockSchedule::with_growth(0.25, 0.35, 2, 6).unwrap());
        for n in 0..6 {
            for i in 0..(1u64 << n) {
                let (l, r) = t.interval(n, i);
                let (l0, _) = t.interval(n + 1, 2 * i);
                let (_, r1) = t.interval(n + 1, 2 * i + 1);
                assert_eq!(l, l0);
                assert!((r - r1).abs() < 1e-15);
                let m = t.gap_midpoint(n, i);
                assert!(t.interval(n + 1, 2 * i).1 < m && m < t.interval(n + 1, 2 * i + 1).0);
            }
        }
    }

    #[test]
    fn middle_thirds_mask() {
        let t = ConstructionTree::new(BlockSchedule::constant(1.0 / 3.0, 10).unwrap());
        let m = t.mask(3).unwrap();
        assert_eq!(m.iter_cells().collect::<Vec<_>>(), vec![0, 1, 2, 5, 6, 7]);
    }
}
