//! Scalar abstraction for the exact-arithmetic parts of the crate.
//!
//! The order-theoretic and combinatorial checks run unchanged over `f32`,
//! `f64` and arbitrary-precision rationals. Floating types compare with a
//! small tolerance; rationals compare exactly.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive};

pub trait Scalar: Num + Clone + PartialOrd + Debug {
    /// Slack used by order comparisons. Zero for exact types.
    fn tolerance() -> Self;

    fn is_exact() -> bool;

    fn from_ratio(num: i64, den: i64) -> Self;

    fn from_f64(x: f64) -> Self;

    fn to_f64(&self) -> f64;

    fn from_usize(n: usize) -> Self {
        Self::from_ratio(n as i64, 1)
    }

    /// `self <= other` up to the type's tolerance.
    fn approx_le(&self, other: &Self) -> bool {
        self.clone() <= other.clone() + Self::tolerance()
    }

    fn approx_eq(&self, other: &Self) -> bool {
        self.approx_le(other) && other.approx_le(self)
    }
}

impl Scalar for f64 {
    fn tolerance() -> Self {
        1e-12
    }
    fn is_exact() -> bool {
        false
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    fn tolerance() -> Self {
        1e-5
    }
    fn is_exact() -> bool {
        false
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        (num as f64 / den as f64) as f32
    }
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

impl Scalar for BigRational {
    fn tolerance() -> Self {
        BigRational::from_integer(BigInt::from(0))
    }
    fn is_exact() -> bool {
        true
    }
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    /// Exact binary expansion of the float.
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("finite float")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

pub fn sum<T: Scalar>(xs: &[T]) -> T {
    xs.iter().fold(T::zero(), |acc, x| acc + x.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_comparisons_are_exact() {
        let third = BigRational::from_ratio(1, 3);
        let sum3 = third.clone() + third.clone() + third;
        assert!(sum3.approx_eq(&BigRational::from_ratio(1, 1)));
        let f = 1.0f64 / 3.0;
        assert!((f + f + f).approx_eq(&1.0));
        assert!(!BigRational::from_ratio(1, 3).approx_eq(&BigRational::from_f64(f)));
    }
}
