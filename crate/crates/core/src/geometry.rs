//! Compact subsets of `[0,1]` stored as bitmasks over closed dyadic cells.
//!
//! Cell `i` at depth `D` is the closed interval `[i 2^-D, (i+1) 2^-D]`, so
//! neighbouring cells share an endpoint. Every constructor rounds outward,
//! which makes a mask a superset of the set it was built from.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAX_DEPTH: u32 = 26;

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GridSetRepr", into = "GridSetRepr")]
pub struct GridSet {
    depth: u32,
    words: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridSetRepr {
    depth: u32,
    runs: Vec<[usize; 2]>,
}

impl From<GridSet> for GridSetRepr {
    fn from(s: GridSet) -> Self {
        GridSetRepr {
            depth: s.depth,
            runs: s.runs().map(|(a, n)| [a, n]).collect(),
        }
    }
}

impl TryFrom<GridSetRepr> for GridSet {
    type Error = Error;

    fn try_from(r: GridSetRepr) -> Result<Self> {
        let mut s = GridSet::empty(r.depth)?;
        for [start, len] in r.runs {
            if len == 0 || start + len > s.len() {
                return Err(Error::InvalidParameter(format!(
                    "run [{start}, {len}] does not fit depth {}",
                    r.depth
                )));
            }
            s.set_range(start, start + len - 1);
        }
        Ok(s)
    }
}

impl std::fmt::Debug for GridSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GridSet")
            .field("depth", &self.depth)
            .field("cells", &self.cell_count())
            .finish()
    }
}

fn check_depth(depth: u32) -> Result<()> {
    if depth == 0 {
        return Err(Error::InvalidParameter("grid depth must be at least 1".into()));
    }
    if depth > MAX_DEPTH {
        return Err(Error::DepthTooLarge(depth));
    }
    Ok(())
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::OutOfRange(x))
    }
}

impl GridSet {
    pub fn empty(depth: u32) -> Result<Self> {
        check_depth(depth)?;
        let n = 1usize << depth;
        Ok(GridSet {
            depth,
            words: vec![0; n.div_ceil(64)],
        })
    }

    pub fn full(depth: u32) -> Result<Self> {
        let mut s = Self::empty(depth)?;
        let n = s.len();
        s.set_range(0, n - 1);
        Ok(s)
    }

    /// Flags every cell meeting one of the closed intervals or containing one of the points.
    pub fn from_parts(intervals: &[(f64, f64)], points: &[f64], depth: u32) -> Result<Self> {
        let mut s = Self::empty(depth)?;
        for &(a, b) in intervals {
            check_unit(a)?;
            check_unit(b)?;
            if a > b {
                return Err(Error::InvertedInterval(a, b));
            }
            s.insert_interval(a, b);
        }
        for &p in points {
            check_unit(p)?;
            s.insert_interval(p, p);
        }
        Ok(s)
    }

    pub(crate) fn insert_interval(&mut self, a: f64, b: f64) {
        let n = self.len() as f64;
        let lo = ((a * n).ceil() - 1.0).max(0.0) as usize;
        let hi = ((b * n).floor() as usize).min(self.len() - 1);
        if lo <= hi {
            self.set_range(lo, hi);
        }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Number of cells, `2^depth`.
    pub fn len(&self) -> usize {
        1usize << self.depth
    }

    pub fn cell_width(&self) -> f64 {
        (-(self.depth as f64)).exp2()
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.cell_width()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    pub fn insert(&mut self, i: usize) {
        self.words[i >> 6] |= 1u64 << (i & 63);
    }

    /// Sets cells `lo..=hi`.
    pub fn set_range(&mut self, lo: usize, hi: usize) {
        debug_assert!(lo <= hi && hi < self.len());
        let (wl, wh) = (lo >> 6, hi >> 6);
        let ml = !0u64 << (lo & 63);
        let mh = !0u64 >> (63 - (hi & 63));
        if wl == wh {
            self.words[wl] |= ml & mh;
        } else {
            self.words[wl] |= ml;
            for w in &mut self.words[wl + 1..wh] {
                *w = !0;
            }
            self.words[wh] |= mh;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn cell_count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_cells(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }

    /// Maximal runs of flagged cells as `(start, length)`.
    pub fn runs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.len();
        let mut pos = 0usize;
        std::iter::from_fn(move || {
            let start = self.next_from(pos, true)?;
            let end = self.next_from(start, false).unwrap_or(n);
            pos = end;
            Some((start, end - start))
        })
    }

    /// First index `>= from` whose bit equals `bit`.
    pub(crate) fn next_from(&self, from: usize, bit: bool) -> Option<usize> {
        let n = self.len();
        if from >= n {
            return None;
        }
        let mut wi = from >> 6;
        let flip = if bit { 0 } else { !0u64 };
        let mut w = (self.words[wi] ^ flip) & (!0u64 << (from & 63));
        loop {
            if w != 0 {
                let i = wi * 64 + w.trailing_zeros() as usize;
                return (i < n).then_some(i);
            }
            wi += 1;
            if wi == self.words.len() {
                return None;
            }
            w = self.words[wi] ^ flip;
        }
    }

    /// Dilation by `ceil(r 2^D)` cells on each side, clipped to `[0,1]`.
    pub fn neighborhood(&self, r: f64) -> GridSet {
        assert!(r > 0.0, "neighborhood radius must be positive");
        let w = (r * self.len() as f64).ceil();
        self.dilate(if w >= self.len() as f64 { self.len() } else { w as usize })
    }

    pub fn dilate(&self, w: usize) -> GridSet {
        let mut out = GridSet {
            depth: self.depth,
            words: vec![0; self.words.len()],
        };
        let last = self.len() - 1;
        for (a, n) in self.runs() {
            out.set_range(a.saturating_sub(w), (a + n - 1).saturating_add(w).min(last));
        }
        out
    }

    fn zip_with(&self, other: &GridSet, f: impl Fn(u64, u64) -> u64) -> Result<GridSet> {
        if self.depth != other.depth {
            return Err(Error::ResolutionMismatch(self.depth, other.depth));
        }
        Ok(GridSet {
            depth: self.depth,
            words: self.words.iter().zip(&other.words).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn intersect(&self, other: &GridSet) -> Result<GridSet> {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn union(&self, other: &GridSet) -> Result<GridSet> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn is_subset(&self, other: &GridSet) -> Result<bool> {
        Ok(self.zip_with(other, |a, b| a & !b)?.is_empty())
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Coarsens to `depth`, flagging a coarse cell when any of its fine cells is flagged.
    pub fn coarsen(&self, depth: u32) -> Result<GridSet> {
        if depth > self.depth {
            return Err(Error::InvalidParameter(format!(
                "cannot coarsen depth {} to finer depth {depth}",
                self.depth
            )));
        }
        let mut out = GridSet::empty(depth)?;
        let shift = self.depth - depth;
        for (a, n) in self.runs() {
            out.set_range(a >> shift, (a + n - 1) >> shift);
        }
        Ok(out)
    }
}

/// Prefix popcounts over a mask, answering "how many flagged cells in `lo..hi`" in O(1).
pub struct RankIndex {
    words: Vec<u64>,
    prefix: Vec<u32>,
}

impl RankIndex {
    pub fn new(s: &GridSet) -> Self {
        let mut prefix = Vec::with_capacity(s.words.len() + 1);
        let mut acc = 0u32;
        prefix.push(0);
        for w in &s.words {
            acc += w.count_ones();
            prefix.push(acc);
        }
        RankIndex {
            words: s.words.clone(),
            prefix,
        }
    }

    /// Flagged cells strictly before `i`.
    pub fn rank(&self, i: usize) -> u32 {
        let (wi, b) = (i >> 6, i & 63);
        let mut r = self.prefix[wi];
        if b != 0 {
            r += (self.words[wi] & ((1u64 << b) - 1)).count_ones();
        }
        r
    }

    pub fn count(&self, lo: usize, hi: usize) -> u32 {
        self.rank(hi) - self.rank(lo)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate<T> {
    pub value: T,
    pub stderr: T,
    pub scale_pairs: Vec<(T, u64)>,
}

/// Least-squares slope of `log N` against `log(1/delta)`.
pub fn box_dimension<T: Real>(pairs: &[(T, u64)]) -> Result<DimensionEstimate<T>> {
    if pairs.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "box counting needs at least 3 scales, got {}",
            pairs.len()
        )));
    }
    for w in pairs.windows(2) {
        if !(w[1].0 < w[0].0) {
            return Err(Error::InvalidParameter("scales must be strictly decreasing".into()));
        }
    }
    if let Some(p) = pairs.iter().find(|p| p.1 == 0 || !(p.0 > T::zero())) {
        return Err(Error::InvalidParameter(format!(
            "scale pair ({}, {}) has a zero count or nonpositive delta",
            p.0, p.1
        )));
    }
    let xs: Vec<T> = pairs.iter().map(|p| -p.0.ln()).collect();
    let ys: Vec<T> = pairs.iter().map(|p| T::from_u64(p.1).unwrap().ln()).collect();
    let (slope, stderr) = linear_fit(&xs, &ys);
    Ok(DimensionEstimate {
        value: slope,
        stderr,
        scale_pairs: pairs.to_vec(),
    })
}

/// Ordinary least-squares slope of `ys` on `xs` and its standard error.
pub fn linear_fit<T: Real>(xs: &[T], ys: &[T]) -> (T, T) {
    let n = T::from_usize(xs.len()).unwrap();
    let mx = xs.iter().fold(T::zero(), |a, &b| a + b) / n;
    let my = ys.iter().fold(T::zero(), |a, &b| a + b) / n;
    let mut sxx = T::zero();
    let mut sxy = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        sxx = sxx + (x - mx) * (x - mx);
        sxy = sxy + (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    if xs.len() < 3 {
        return (slope, T::zero());
    }
    let sse = xs
        .iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let e = y - my - slope * (x - mx);
            e * e
        })
        .fold(T::zero(), |a, b| a + b);
    let stderr = (sse / (n - T::lit(2.0)) / sxx).sqrt();
    (slope, stderr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_point_flags_both_cells() {
        let s = GridSet::from_parts(&[], &[0.5], 2).unwrap();
        assert_eq!(s.iter_cells().collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn full_interval() {
        let s = GridSet::from_parts(&[(0.0, 1.0)], &[], 4).unwrap();
        assert_eq!(s.cell_count(), 16);
        assert_eq!(s, GridSet::full(4).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(GridSet::empty(27), Err(Error::DepthTooLarge(27))));
        assert!(GridSet::empty(0).is_err());
        assert!(matches!(
            GridSet::from_parts(&[], &[1.5], 4),
            Err(Error::OutOfRange(_))
        ));
        assert!(GridSet::from_parts(&[(0.6, 0.2)], &[], 4).is_err());
    }

    #[test]
    fn one_cell_dilation_clips() {
        let mut s = GridSet::empty(5).unwrap();
        s.insert(0);
        s.insert(10);
        let d = s.neighborhood(1.0 / 32.0);
        assert_eq!(d.iter_cells().collect::<Vec<_>>(), vec![0, 1, 9, 10, 11]);
    }

    #[test]
    fn runs_span_word_boundaries() {
        let mut s = GridSet::empty(8).unwrap();
        s.set_range(60, 130);
        s.insert(255);
        assert_eq!(s.runs().collect::<Vec<_>>(), vec![(60, 71), (255, 1)]);
    }

    #[test]
    fn rank_counts() {
        let mut s = GridSet::empty(8).unwrap();
        s.set_range(3, 70);
        let r = RankIndex::new(&s);
        assert_eq!(r.count(0, 256), 68);
        assert_eq!(r.count(64, 65), 1);
        assert_eq!(r.count(71, 256), 0);
    }

    #[test]
    fn json_roundtrip() {
        let s = GridSet::from_parts(&[(0.1, 0.2)], &[0.9], 10).unwrap();
        let js = serde_json::to_string(&s).unwrap();
        assert!(js.starts_with("{\"depth\":10,\"runs\":"));
        let back: GridSet = serde_json::from_str(&js).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn coarsen_keeps_cover() {
        let s = GridSet::from_parts(&[], &[0.3], 12).unwrap();
        let c = s.coarsen(4).unwrap();
        assert_eq!(c.iter_cells().collect::<Vec<_>>(), vec![4]);
    }

    #[test]
    fn fit_rejects_short_or_bad_input() {
        assert!(box_dimension(&[(0.5f64, 2), (0.25, 4)]).is_err());
        assert!(box_dimension(&[(0.5f64, 2), (0.25, 0), (0.125, 8)]).is_err());
        assert!(box_dimension(&[(0.25f64, 2), (0.5, 4), (0.125, 8)]).is_err());
    }
}
