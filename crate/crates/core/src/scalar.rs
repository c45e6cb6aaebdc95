use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast, ToPrimitive};

/// Floating point scalar the kinematics and capacity math is generic over: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal, panicking only if the value is not representable at all.
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar type")
    }

    fn half() -> Self {
        Self::lit(0.5)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Kilometres per hour to metres per second (exact factor 1/3.6).
pub fn kmh_to_mps<T: Scalar>(kmh: T) -> T {
    kmh / T::lit(3.6)
}

pub fn mps_to_kmh<T: Scalar>(mps: T) -> T {
    mps * T::lit(3.6)
}
