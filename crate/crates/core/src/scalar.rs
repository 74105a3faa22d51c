//! Floating-point scalar abstraction.
//!
//! The numeric layers (evaluation, grids, flows) are generic over the
//! scalar; `f64` is the concrete type used by the command layer and the
//! built-in fixtures, with `f32` available for cheap smoke checks.

use std::fmt;

use num_traits::{Float, FromPrimitive};

/// Trait bundle for the floating-point types the numeric layers accept.
pub trait Scalar:
    Float + FromPrimitive + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Conversion from `f64`, saturating through the usual `as` semantics.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).unwrap_or_else(Self::nan)
    }

    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f64 {
    fn to_f64_lossy(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn to_f64_lossy(self) -> f64 {
        f64::from(self)
    }
}
