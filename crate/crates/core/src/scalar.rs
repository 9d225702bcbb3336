//! Scalar abstraction shared by the field, kernel and overlap layers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps, NumCast, ToPrimitive};

/// Real floating-point scalar: `f32` or `f64`.
///
/// Everything that touches a wavefunction amplitude is generic over this
/// trait. Monte Carlo statistics and I/O are carried out in `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from any primitive number. Panics only if the value is
    /// not representable at all, which never happens for `f64 -> f32`.
    #[inline]
    fn cast<U: ToPrimitive>(x: U) -> Self {
        <Self as NumCast>::from(x).expect("numeric cast")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon as `f64`, used in error estimates.
    fn eps_f64() -> f64 {
        Self::epsilon().to_f64_lossy()
    }
}

impl Real for f32 {}
impl Real for f64 {}
