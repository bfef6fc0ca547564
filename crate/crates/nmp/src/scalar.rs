//! Scalar abstraction for the numeric core.
//!
//! Everything numeric (curve geometry, tensors, losses) is generic over
//! [`Real`] so the same code runs in double precision for gradient checks
//! and single precision for training. Concrete aliases live at the crate
//! root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating-point scalar: f32 or f64.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from f64, for literals and config values.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 -> Real conversion")
    }

    /// Widen to f64 for reporting and mixed-precision math.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("Real -> f64 conversion")
    }
}

impl Real for f32 {}
impl Real for f64 {}
