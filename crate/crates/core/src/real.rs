//! Generic scalar trait for the geometric core.
//!
//! The geometry types are generic over [`Real`] so the same code runs in
//! f32 or f64. The rest of the engine works with the f64 aliases exported
//! from the crate root, which also pin the on-disk formats.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Floating point scalar: f32 or f64.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an f64 literal into the generic scalar.
#[inline]
pub fn real<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}
