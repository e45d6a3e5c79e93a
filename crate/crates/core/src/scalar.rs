//! Number types the metrics can be computed in.
//!
//! Precision and recall are ratios of counts, so they are exact in a
//! rational type and rounded in a float type. Everything in
//! [`crate::evaluation`] is generic over [`Scalar`].

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Num, ToPrimitive};

pub trait Scalar: Num + Clone + PartialOrd + Debug + Send + Sync {
    fn from_count(n: usize) -> Self;

    fn to_f64(&self) -> f64;

    /// `num / den`.
    fn ratio(num: usize, den: usize) -> Self {
        Self::from_count(num) / Self::from_count(den)
    }
}

impl Scalar for f64 {
    fn from_count(n: usize) -> Self {
        n as f64
    }

    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    fn from_count(n: usize) -> Self {
        n as f32
    }

    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

impl Scalar for Ratio<i64> {
    fn from_count(n: usize) -> Self {
        Ratio::from_integer(i64::try_from(n).expect("count fits i64"))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

impl Scalar for BigRational {
    fn from_count(n: usize) -> Self {
        Ratio::from_integer(BigInt::from(n))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}
