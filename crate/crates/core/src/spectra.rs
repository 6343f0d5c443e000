//! Spectrum curves on uniform grids, their increasing 1-Lipschitz hulls, and
//! the closed-form spectra and dimension predictions for the example measures.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Samples `g(t_i)` with `t_i = t0 + i dt`. Undefined values are `-inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumCurve<T> {
    t0: T,
    dt: T,
    values: Vec<T>,
}

impl<T: Real> SpectrumCurve<T> {
    pub fn new(t0: T, dt: T, values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientData("empty spectrum grid".into()));
        }
        if !(dt > T::zero()) {
            return invalid("grid spacing must be positive");
        }
        if values.iter().any(|v| v.is_nan() || *v == T::infinity()) {
            return invalid("spectrum values must be bounded above and not NaN");
        }
        Ok(SpectrumCurve { t0, dt, values })
    }

    /// Builds a curve from explicit `(t, g)` pairs, checking uniform spacing to 1e-12.
    pub fn from_points(points: &[(T, T)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InsufficientData("empty spectrum grid".into()));
        }
        let t0 = points[0].0;
        if points.len() == 1 {
            return Self::new(t0, T::one(), vec![points[0].1]);
        }
        let dt = points[1].0 - t0;
        let tol = T::lit(1e-12);
        for (i, p) in points.iter().enumerate() {
            if (p.0 - (t0 + dt * T::from_usize(i).unwrap())).abs() > tol {
                return invalid(format!("grid is not uniform at row {i}"));
            }
        }
        Self::new(t0, dt, points.iter().map(|p| p.1).collect())
    }

    /// Evaluates `f` on `n` points starting at `t0` with spacing `dt`.
    pub fn sample(t0: T, dt: T, n: usize, f: impl Fn(T) -> T) -> Result<Self> {
        let values = (0..n).map(|i| f(t0 + dt * T::from_usize(i).unwrap())).collect();
        Self::new(t0, dt, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn t(&self, i: usize) -> T {
        self.t0 + self.dt * T::from_usize(i).unwrap()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn points(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.values.iter().enumerate().map(|(i, &v)| (self.t(i), v))
    }

    fn with_values(&self, values: Vec<T>) -> Self {
        SpectrumCurve {
            t0: self.t0,
            dt: self.dt,
            values,
        }
    }
}

/// Smallest nondecreasing 1-Lipschitz majorant on the grid.
///
/// The backward pass computes `max_{j>=i} g_j - (j - i) dt`, i.e. `t + sup_{y>=t}(g(y) - y)`
/// in grid units; the forward pass folds in the running maximum.
pub fn lipschitz_hull<T: Real>(g: &SpectrumCurve<T>) -> SpectrumCurve<T> {
    let n = g.len();
    let mut h = g.values.clone();
    for i in (0..n - 1).rev() {
        h[i] = h[i].max(h[i + 1] - g.dt);
    }
    let mut run = T::neg_infinity();
    for (hi, &gi) in h.iter_mut().zip(&g.values) {
        run = run.max(gi);
        *hi = hi.max(run);
    }
    g.with_values(h)
}

/// `g~(t) = t + sup_{y >= t} (g(y) - y)`.
pub fn tilde_transform<T: Real>(g: &SpectrumCurve<T>) -> SpectrumCurve<T> {
    let n = g.len();
    let mut out = vec![T::zero(); n];
    let mut best = T::neg_infinity();
    for i in (0..n).rev() {
        let t = g.t(i);
        best = best.max(g.values[i] - t);
        out[i] = t + best;
    }
    g.with_values(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomicKind {
    Mu1,
    Mu2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Which {
    Fbar,
    Hbar,
}

/// Parameters `(s, u, beta)` of the block Cantor construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorParams {
    pub s: f64,
    pub u: f64,
    pub beta: f64,
}

impl CantorParams {
    pub fn new(s: f64, u: f64, beta: f64) -> Self {
        CantorParams { s, u, beta }
    }

    fn check_dims(&self) -> Result<()> {
        if !(0.0 < self.s && self.s < self.u && self.u < 1.0) {
            return invalid(format!("need 0 < s < u < 1, got s = {}, u = {}", self.s, self.u));
        }
        Ok(())
    }

    fn check(&self, kind: AtomicKind) -> Result<()> {
        self.check_dims()?;
        let min_beta = match kind {
            AtomicKind::Mu1 => 1.0,
            AtomicKind::Mu2 => self.u / self.s,
        };
        if !(self.beta > min_beta) {
            return invalid(format!("beta = {} must exceed {min_beta}", self.beta));
        }
        Ok(())
    }

    fn bs(&self) -> f64 {
        self.beta * self.s
    }
}

/// Lower Hausdorff spectrum hull; the same display holds for both atomic measures.
pub fn fbar(p: &CantorParams, t: f64) -> f64 {
    let bs = p.bs();
    if t >= bs {
        p.s
    } else {
        (t - (bs - p.s)).max(0.0)
    }
}

/// Packing spectrum hull, covering both orderings of `beta s` and `u`.
pub fn hbar(p: &CantorParams, t: f64) -> f64 {
    let bs = p.bs();
    if t >= bs {
        p.u
    } else {
        (t - (bs - p.u)).max(0.0)
    }
}

/// Raw step spectrum: 0 below `beta s`, then `s` (Hausdorff) or `u` (packing).
pub fn raw_step<T: Real>(p: &CantorParams, which: Which, t: T) -> T {
    let top = match which {
        Which::Fbar => p.s,
        Which::Hbar => p.u,
    };
    // Grid points that hit beta s up to rounding belong to the upper branch.
    if t.to_f64_lossy() + 1e-12 >= p.bs() {
        T::lit(top)
    } else {
        T::zero()
    }
}

pub fn analytic_spectra<T: Real>(
    kind: AtomicKind,
    p: &CantorParams,
    which: Which,
    t0: T,
    dt: T,
    n: usize,
) -> Result<SpectrumCurve<T>> {
    p.check(kind)?;
    SpectrumCurve::sample(t0, dt, n, |t| {
        let t = t.to_f64_lossy();
        T::lit(match which {
            Which::Fbar => fbar(p, t),
            Which::Hbar => hbar(p, t),
        })
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PredictKind {
    Lebesgue,
    Theta { s: f64, u: f64 },
    Mu1(CantorParams),
    Mu2(CantorParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedDimension {
    pub alpha: f64,
    pub lower: f64,
    pub upper: f64,
    pub exact: Option<f64>,
    pub regime_tag: String,
}

/// Bounds `Fbar(1/alpha) <= f(alpha) <= min(1/alpha, Hbar(1/alpha))` plus the exact
/// value wherever one of the regime results applies.
pub fn predicted_f(kind: &PredictKind, alpha: f64) -> Result<PredictedDimension> {
    if !(alpha > 0.0) {
        return invalid(format!("alpha must be positive, got {alpha}"));
    }
    let x = 1.0 / alpha;
    let (lower, hb, exact, tag) = match kind {
        PredictKind::Lebesgue => (x.min(1.0), x.min(1.0), Some(x.min(1.0)), "lebesgue: 1/alpha capped at 1"),
        PredictKind::Theta { s, u } => {
            CantorParams::new(*s, *u, 2.0).check_dims()?;
            let hb = (x + u - s).min(*u);
            (x.min(*s), hb, Some(x.min(*s)), "theta: min(s, 1/alpha)")
        }
        PredictKind::Mu1(p) => {
            p.check(AtomicKind::Mu1)?;
            let f = fbar(p, x);
            let exact = (x < p.bs()).then_some(f);
            (f, hbar(p, x), exact, "mu1: Fbar(1/alpha) below beta s")
        }
        PredictKind::Mu2(p) => {
            p.check(AtomicKind::Mu2)?;
            let h = hbar(p, x);
            let exact = (x > p.bs() - p.u).then_some(p.s.min(h));
            (fbar(p, x), h, exact, "mu2: min(s, Hbar(1/alpha)) above beta s - u")
        }
    };
    let upper = x.min(hb).min(1.0);
    let (exact, tag) = match exact {
        Some(e) => (Some(e), tag.to_string()),
        None if (upper - lower).abs() <= 1e-12 => (Some(lower), "bounds coincide".to_string()),
        None => (None, "bounds only".to_string()),
    };
    Ok(PredictedDimension {
        alpha,
        lower,
        upper,
        exact,
        regime_tag: tag,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(v: &[f64]) -> SpectrumCurve<f64> {
        SpectrumCurve::new(0.0, 0.1, v.to_vec()).unwrap()
    }

    #[test]
    fn constant_and_identity() {
        let c = curve(&[0.3; 7]);
        assert_eq!(lipschitz_hull(&c), c);
        assert_eq!(tilde_transform(&c).values(), c.values());
        let id = SpectrumCurve::sample(0.0, 0.25, 9, |t| t).unwrap();
        assert_eq!(lipschitz_hull(&id), id);
        assert_eq!(tilde_transform(&id), id);
    }

    #[test]
    fn step_becomes_ramp() {
        let p = CantorParams::new(0.4, 0.8, 2.5);
        let g = SpectrumCurve::sample(0.0, 0.01, 201, |t| raw_step(&p, Which::Fbar, t)).unwrap();
        let h = lipschitz_hull(&g);
        for (t, v) in h.points() {
            assert!((v - fbar(&p, t)).abs() < 1e-12, "t = {t}");
        }
        assert!((h.values()[80] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn undefined_values_are_ignored() {
        let g = curve(&[f64::NEG_INFINITY, f64::NEG_INFINITY, 0.5, f64::NEG_INFINITY]);
        let h = lipschitz_hull(&g);
        assert!((h.values()[0] - 0.3).abs() < 1e-12);
        assert_eq!(h.values()[3], 0.5);
    }

    #[test]
    fn rejects_bad_curves() {
        assert!(SpectrumCurve::<f64>::new(0.0, 0.1, vec![]).is_err());
        assert!(SpectrumCurve::new(0.0, 0.1, vec![f64::INFINITY]).is_err());
        assert!(SpectrumCurve::from_points(&[(0.0, 1.0), (0.1, 1.0), (0.3, 1.0)]).is_err());
    }

    #[test]
    fn paper_displays() {
        let p = CantorParams::new(0.4, 0.8, 2.5);
        assert_eq!(fbar(&p, 1.2), 0.4);
        assert_eq!(hbar(&p, 0.1), 0.0);
        let q = CantorParams::new(0.5, 0.7, 1.2);
        assert!((hbar(&q, 0.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn predictions() {
        let leb = predicted_f(&PredictKind::Lebesgue, 2.0).unwrap();
        assert_eq!(leb.exact, Some(0.5));
        let p = CantorParams::new(0.4, 0.8, 2.5);
        let m2 = predicted_f(&PredictKind::Mu2(p), 2.0).unwrap();
        assert!((m2.exact.unwrap() - 0.3).abs() < 1e-12);
        assert_eq!(m2.lower, 0.0);
        let m1 = predicted_f(&PredictKind::Mu1(p), 1.25).unwrap();
        assert!((m1.exact.unwrap() - 0.2).abs() < 1e-12);
        let th = predicted_f(&PredictKind::Theta { s: 0.5, u: 0.7 }, 4.0).unwrap();
        assert_eq!(th.exact, Some(0.25));
        assert!(predicted_f(&PredictKind::Mu2(CantorParams::new(0.4, 0.8, 1.5)), 2.0).is_err());
        assert!(predicted_f(&PredictKind::Lebesgue, 0.0).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let g = SpectrumCurve::<f32>::sample(0.0, 0.125, 9, |t| if t >= 0.5 { 0.25 } else { 0.0 }).unwrap();
        let h = lipschitz_hull(&g);
        assert_eq!(h.values()[3], 0.125);
    }
}
