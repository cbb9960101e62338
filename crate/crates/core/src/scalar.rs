//! Scalar abstraction shared by the simulator and the network layers.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

// Everything numeric is written against `Scalar` so the same code runs in
// f32 or f64. Training and the file formats pin f64.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Allowed drift of Σ|amp|² away from 1.
    const NORM_TOLERANCE: f64;

    /// Converts an f64 literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    const NORM_TOLERANCE: f64 = 1e-5;
}

impl Scalar for f64 {
    const NORM_TOLERANCE: f64 = 1e-12;
}
