//! Scalar abstraction shared by the probability and fusion math.
//!
//! Everything that touches class scores is written against [`Scalar`] so the
//! pipeline can run in `f32` (what most inference runtimes emit) or `f64`
//! (what the acceptance tolerances are stated in).

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point type usable for probabilities, weights and margins.
pub trait Scalar:
    'static
    + Send
    + Sync
    + Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Default
    + Debug
    + Display
    + LowerExp
{
    /// Lossy conversion from an `f64` constant.
    #[inline]
    fn of(value: f64) -> Self {
        <Self as FromPrimitive>::from_f64(value).expect("f64 constant representable")
    }

    /// Conversion from a count.
    #[inline]
    fn of_usize(value: usize) -> Self {
        <Self as FromPrimitive>::from_usize(value).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Tolerance used when checking that a probability vector sums to one.
    fn sum_tolerance() -> Self;
}

impl Scalar for f32 {
    fn sum_tolerance() -> Self {
        1e-5
    }
}

impl Scalar for f64 {
    fn sum_tolerance() -> Self {
        1e-5
    }
}

#[cfg(test)]
mod tests {
    use super::Scalar;

    #[test]
    fn constants_round_trip() {
        assert_eq!(<f64 as Scalar>::of(0.25), 0.25);
        assert_eq!(<f32 as Scalar>::of(0.25), 0.25f32);
        assert_eq!(<f32 as Scalar>::of_usize(27), 27.0);
        assert_eq!(0.5f32.as_f64(), 0.5);
    }
}
