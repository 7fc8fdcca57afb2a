//! Scalar abstraction for the numerical kernels.
//!
//! Everything in this crate is generic over [`Real`], which is `f32` or `f64`
//! behind the num-traits facade, plus the conversions the quadrature and
//! sampling code needs. Concrete `f64` aliases for the main types live at the
//! crate root; `f32` exists mostly to keep the kernels honest about precision
//! assumptions.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Send
    + Sync
    + std::fmt::Debug
    + std::fmt::Display
    + 'static
{
    /// Conversion from `f64` for literals and configuration values. Panics
    /// only if the value is not representable at all (never the case for the
    /// finite constants used in this crate).
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// 2^n with an exact result for the exponent range used by dyadic levels.
    #[inline]
    fn exp2i(n: i32) -> Self {
        Self::of(2.0).powi(n)
    }
}

impl Real for f32 {}
impl Real for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp2i_exact_for_dyadic_range() {
        for n in -60..=60 {
            assert_eq!(f64::exp2i(n), 2.0f64.powi(n));
        }
        for n in -30..=30 {
            assert_eq!(f32::exp2i(n), 2.0f32.powi(n));
        }
    }

    #[test]
    fn of_round_trips() {
        assert_eq!(f64::of(0.125), 0.125);
        assert_eq!(f32::of(0.5).as_f64(), 0.5);
    }
}
