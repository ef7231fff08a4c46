//! Scalar abstraction for the analytic indicator code.
//!
//! Overlap distributions and their moments are rational numbers, so the
//! closed forms can be evaluated either exactly (`BigRational`) or in
//! floating point (`f32`/`f64`) through the same generic code path.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, ToPrimitive};

/// A field element usable by the indicator formulas.
pub trait Scalar: Num + Clone + PartialOrd + Debug + Display {
    /// `num / den`; `den` must be nonzero.
    fn from_ratio(num: i64, den: i64) -> Self;

    /// Nearest representable value of `x`. Exact types store the binary
    /// expansion of `x`, so this is only used for inherently approximate
    /// quantities.
    fn from_f64(x: f64) -> Self;

    fn to_f64(&self) -> f64;

    fn from_int(v: i64) -> Self {
        Self::from_ratio(v, 1)
    }

    /// True when arithmetic in this type is exact.
    fn is_exact() -> bool {
        false
    }
}

impl Scalar for f64 {
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
    fn from_ratio(num: i64, den: i64) -> Self {
        (num as f64 / den as f64) as f32
    }

    fn from_f64(x: f64) -> Self {
        x as f32
    }

    fn to_f64(&self) -> f64 {
        f64::from(*self)
    }
}

impl Scalar for BigRational {
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)))
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn is_exact() -> bool {
        true
    }
}

/// Binomial coefficient evaluated in the scalar type, `0` when `k > n`.
pub fn binomial<S: Scalar>(n: u64, k: u64) -> S {
    if k > n {
        return S::zero();
    }
    let k = k.min(n - k);
    let mut c = S::one();
    for i in 0..k {
        c = c * S::from_int((n - i) as i64) / S::from_int((i + 1) as i64);
    }
    c
}
