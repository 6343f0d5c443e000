use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating point scalar accepted by the spectrum and regression code.
pub trait Real:
    Float + FromPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
