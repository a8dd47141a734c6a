//! Scalar abstractions.
//!
//! [`Real`] is the floating-point type every simulation routine is generic
//! over; it is implemented for `f32` and `f64`. [`MomentField`] is the weaker
//! arithmetic the exact moment formulas need, and is additionally implemented
//! for [`BigRational`] so closed forms can be evaluated without rounding.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, Num};
use rand::Rng;
use rand_distr::Distribution;

pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// General-parameter Beta sampler backing [`crate::measure::BetaSampler`].
    type BetaDist: Distribution<Self> + Clone + Debug + Send + Sync;

    /// Tolerance used for simplex-membership checks.
    fn simplex_tol() -> Self;

    fn ln_gamma(self) -> Self;

    fn new_beta(alpha: Self, beta: Self) -> Option<Self::BetaDist>;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Uniform on `[0, 1)`.
    fn unit<R: Rng + ?Sized>(rng: &mut R) -> Self;

    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

macro_rules! impl_real {
    ($t:ty, $tol:expr, $lgamma:path) => {
        impl Real for $t {
            type BetaDist = rand_distr::Beta<$t>;

            #[inline]
            fn simplex_tol() -> Self {
                $tol
            }

            #[inline]
            fn ln_gamma(self) -> Self {
                $lgamma(self)
            }

            fn new_beta(alpha: Self, beta: Self) -> Option<Self::BetaDist> {
                rand_distr::Beta::new(alpha, beta).ok()
            }

            #[inline]
            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rand_distr::StandardNormal.sample(rng)
            }

            #[inline]
            fn unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random::<$t>()
            }
        }
    };
}

impl_real!(f64, 1e-12, libm::lgamma);
impl_real!(f32, 1e-5, libm::lgammaf);

/// Arithmetic required by the exact moment machinery.
pub trait MomentField: Clone + PartialEq + PartialOrd + Debug + Num + Send + Sync + 'static {
    fn from_u128(v: u128) -> Self;

    fn from_usize(v: usize) -> Self {
        Self::from_u128(v as u128)
    }
}

impl MomentField for f64 {
    fn from_u128(v: u128) -> Self {
        v as f64
    }
}

impl MomentField for f32 {
    fn from_u128(v: u128) -> Self {
        v as f32
    }
}

impl MomentField for BigRational {
    fn from_u128(v: u128) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        assert!((Real::ln_gamma(5.0f64) - 24f64.ln()).abs() < 1e-13);
        assert!((Real::ln_gamma(0.5f64) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
        assert!((Real::ln_gamma(5.0f32) - 24f32.ln()).abs() < 1e-5);
    }

    #[test]
    fn rational_from_u128_is_exact() {
        let big = u128::MAX;
        let r = <BigRational as MomentField>::from_u128(big);
        assert_eq!(r.to_integer(), BigInt::from(big));
    }
}
