//! Desk-scale experiments on random covering sets of `[0,1]`.
//!
//! The crate builds Cantor-type and atomic measures, discretizes the hitting
//! operator on grid masks, computes increasing 1-Lipschitz hulls of spectra and
//! runs Monte Carlo estimates of covering-set dimensions and hitting rates.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod covering;
pub mod error;
pub mod geometry;
pub mod hitting;
pub mod measures;
pub mod scalar;
pub mod spectra;

pub use error::{Error, Result};
pub use geometry::{box_dimension, GridSet, RankIndex};
pub use measures::{MeasureKind, MeasureModel};
pub use scalar::Real;

pub type DimensionEstimate = geometry::DimensionEstimate<f64>;
pub type DimensionEstimate32 = geometry::DimensionEstimate<f32>;
pub type SpectrumCurve = spectra::SpectrumCurve<f64>;
pub type SpectrumCurve32 = spectra::SpectrumCurve<f32>;

