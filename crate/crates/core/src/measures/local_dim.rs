use serde::{Deserialize, Serialize};

use super::MeasureModel;
use crate::error::{invalid, Error, Result};
use crate::geometry::linear_fit;

/// Samples of `log mu(B(x, 2^-j)) / log 2^-j` at one anchor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalDimCurve {
    pub anchor: f64,
    pub samples: Vec<(u32, f64)>,
    pub window: usize,
}

impl LocalDimCurve {
    fn tail(&self) -> impl Iterator<Item = f64> + '_ {
        let skip = self.samples.len().saturating_sub(self.window);
        self.samples[skip..].iter().map(|s| s.1)
    }

    pub fn liminf_estimate(&self) -> f64 {
        self.tail().fold(f64::INFINITY, f64::min)
    }

    pub fn limsup_estimate(&self) -> f64 {
        self.tail().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_range(m: &MeasureModel, j_min: u32, j_max: u32) -> Result<()> {
    if j_min >= j_max {
        return invalid(format!("need j_min < j_max, got {j_min} and {j_max}"));
    }
    if j_max > m.effective_depth() {
        return invalid(format!(
            "j_max = {j_max} exceeds the effective depth {}",
            m.effective_depth()
        ));
    }
    Ok(())
}

/// Ball masses that dominate their error, as `(j, mass)`.
fn resolved_masses(m: &MeasureModel, x: f64, j_min: u32, j_max: u32) -> Vec<(u32, f64)> {
    (j_min..=j_max)
        .filter_map(|j| {
            let q = m.mass_ball(x, (-(j as f64)).exp2());
            (q.mass > q.err).then_some((j, q.mass))
        })
        .collect()
}

pub fn local_dim_curve(
    m: &MeasureModel,
    x: f64,
    j_min: u32,
    j_max: u32,
    window: usize,
) -> Result<LocalDimCurve> {
    check_range(m, j_min, j_max)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange(x));
    }
    let samples: Vec<(u32, f64)> = resolved_masses(m, x, j_min, j_max)
        .into_iter()
        .map(|(j, mass)| (j, -mass.log2() / j as f64))
        .collect();
    if samples.is_empty() {
        return Err(Error::InsufficientData(format!(
            "every ball around {x} has mass below its error bound"
        )));
    }
    Ok(LocalDimCurve {
        anchor: x,
        samples,
        window,
    })
}

/// Slope of `-log2 mu(B(x, 2^-j))` against `j` over `j_min..=j_max`.
///
/// Inside a block with a constant ratio this removes the additive constant
/// that dominates `q_j` at moderate depth.
pub fn fitted_exponent(m: &MeasureModel, x: f64, j_min: u32, j_max: u32) -> Result<f64> {
    check_range(m, j_min, j_max)?;
    let pts = resolved_masses(m, x, j_min, j_max);
    if pts.len() < 3 {
        return Err(Error::InsufficientData("fewer than 3 resolved ball masses".into()));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0 as f64).collect();
    let ys: Vec<f64> = pts.iter().map(|p| -p.1.log2()).collect();
    Ok(linear_fit(&xs, &ys).0)
}

/// Fitted exponent over the scales of one constant-ratio block of levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockExponent {
    pub first_level: u32,
    /// One past the last level of the block.
    pub end_level: u32,
    pub ratio: f64,
    pub j_lo: u32,
    pub j_hi: u32,
    pub exponent: f64,
}

/// Fits the ball-mass exponent at `x` separately inside every constant-ratio block.
///
/// Scales within `margin` bits of a block boundary are dropped, as are blocks whose
/// scales lie deeper than `j_cap`.
pub fn block_exponents(m: &MeasureModel, x: f64, margin: u32, j_cap: u32) -> Result<Vec<BlockExponent>> {
    let t = m.tree().ok_or_else(|| Error::InvalidParameter("block exponents need a construction tree".into()))?;
    let cap = j_cap.min(m.effective_depth());
    let sched = t.schedule();
    let mut out = Vec::new();
    let mut n1 = 0;
    while n1 < t.max_level() {
        let ratio = sched.ratio(n1);
        let mut n2 = n1 + 1;
        while n2 < t.max_level() && sched.ratio(n2) == ratio {
            n2 += 1;
        }
        let j_lo = (-t.length(n1).log2()).ceil() as u32 + margin;
        let j_hi = ((-t.length(n2).log2()).floor() as u32).saturating_sub(margin).min(cap);
        if j_hi >= j_lo + 2 {
            out.push(BlockExponent {
                first_level: n1,
                end_level: n2,
                ratio,
                j_lo,
                j_hi,
                exponent: fitted_exponent(m, x, j_lo, j_hi)?,
            });
        }
        n1 = n2;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{lebesgue_measure, mu_one, BlockSchedule};

    #[test]
    fn lebesgue_is_one_dimensional() {
        let c = local_dim_curve(&lebesgue_measure(), (-30f64).exp2(), 31, 80, 10).unwrap();
        assert!((c.liminf_estimate() - 1.0).abs() < 0.02);
        assert!((c.limsup_estimate() - 1.0).abs() < 0.02);
    }

    #[test]
    fn atom_has_dimension_zero() {
        let m = mu_one(BlockSchedule::from_dimensions(0.4, 0.8, 10, 40).unwrap(), 2.5).unwrap();
        let x = m.tree().unwrap().gap_midpoint(3, 5);
        let c = local_dim_curve(&m, x, 5, 50, 5).unwrap();
        assert!(c.limsup_estimate() < 0.25);
    }

    #[test]
    fn range_checks() {
        let m = lebesgue_measure();
        assert!(local_dim_curve(&m, 0.3, 10, 10, 3).is_err());
        assert!(local_dim_curve(&m, 1.3, 1, 10, 3).is_err());
    }
}
