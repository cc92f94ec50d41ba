//! Scalar abstraction so the model and solver run over `f32` or `f64`.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating-point scalar used throughout the crate.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Values here are always representable (possibly rounded).
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Relative tolerance floor below which iterative refinements stop making progress.
    fn tol_floor() -> Self {
        Self::epsilon() * Self::lit(4.0)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Relative closeness with an absolute floor for near-zero magnitudes.
pub(crate) fn within<T: Scalar>(a: T, b: T, rel: T, abs: T) -> bool {
    (a - b).abs() <= abs.max(rel * a.abs().max(b.abs()))
}
