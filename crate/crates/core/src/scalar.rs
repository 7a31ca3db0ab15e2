//! Scalar abstractions.
//!
//! [`Real`] is what the maps are evaluated in (`f32`, `f64`). [`Field`] is the
//! ordered field used for breakpoints and vertex intervals; it has an exact
//! instance over `BigRational` and approximate instances over the floats.

use std::fmt::{Debug, Display};
use std::ops::Neg;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Floating scalar used for evaluation.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal; panics only for non-representable values,
    /// which cannot happen for the finite constants used here.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize fits")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Rounds an exact rational.
    fn from_rational(q: &BigRational) -> Self {
        Self::lit(rational_to_f64(q))
    }
}

impl Real for f64 {}
impl Real for f32 {}

/// Ordered field for interval endpoints.
pub trait Field: Clone + PartialOrd + Num + Neg<Output = Self> + Debug {
    fn from_ratio(num: i64, den: i64) -> Self;
    fn from_bigint(n: &BigInt) -> Self;
    /// Exact for `BigRational`, correctly rounded for the floats.
    fn from_f64_exact(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// Whether arithmetic in this field is exact.
    fn is_exact() -> bool;

    fn abs_val(&self) -> Self {
        if *self < Self::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }

    fn pow_i(&self, e: i32) -> Self {
        let mut base = if e < 0 {
            Self::one() / self.clone()
        } else {
            self.clone()
        };
        let mut e = e.unsigned_abs();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            base = base.clone() * base;
            e >>= 1;
        }
        acc
    }
}

impl Field for BigRational {
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }
    fn from_bigint(n: &BigInt) -> Self {
        BigRational::from_integer(n.clone())
    }
    fn from_f64_exact(x: f64) -> Self {
        BigRational::from_float(x).expect("finite f64")
    }
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn is_exact() -> bool {
        true
    }
}

macro_rules! float_field {
    ($t:ty) => {
        impl Field for $t {
            fn from_ratio(num: i64, den: i64) -> Self {
                num as $t / den as $t
            }
            fn from_bigint(n: &BigInt) -> Self {
                n.to_f64().unwrap_or(f64::INFINITY) as $t
            }
            fn from_f64_exact(x: f64) -> Self {
                x as $t
            }
            fn to_f64(&self) -> f64 {
                *self as f64
            }
            fn is_exact() -> bool {
                false
            }
        }
    };
}
float_field!(f64);
float_field!(f32);

/// Conversion to `f64` that survives numerators and denominators far outside
/// the `f64` range (at most one extra rounding in the last bit).
pub fn rational_to_f64(q: &BigRational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    if let (Some(n), Some(d)) = (q.numer().to_f64(), q.denom().to_f64()) {
        if n.is_finite() && d.is_finite() && n.abs() < 9.0e15 && d < 9.0e15 {
            return n / d;
        }
    }
    let neg = q.is_negative();
    let num = q.numer().abs();
    let den = q.denom().clone();
    // Scale so that the integer quotient carries 64 significant bits.
    let shift = den.bits() as i64 - num.bits() as i64 + 64;
    let quot = if shift >= 0 {
        (num << shift as usize) / den
    } else {
        num / (den << (-shift) as usize)
    };
    let v = quot.to_f64().unwrap_or(f64::INFINITY);
    let out = scale_pow2(v, -shift);
    if neg {
        -out
    } else {
        out
    }
}

fn scale_pow2(mut v: f64, mut e: i64) -> f64 {
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
    }
    v * 2f64.powi(e as i32)
}

/// Natural log of a positive big rational, without overflow.
pub fn rational_ln(q: &BigRational) -> f64 {
    big_ln(q.numer()) - big_ln(q.denom())
}

/// Natural log of a positive big integer.
pub fn big_ln(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits < 1000 {
        return n.to_f64().expect("finite").ln();
    }
    let shift = bits - 60;
    let top = (n >> shift as usize).to_f64().expect("finite");
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_round_trip_small() {
        let q = BigRational::from_ratio(13, 112);
        assert_eq!(rational_to_f64(&q), 13.0 / 112.0);
    }

    #[test]
    fn rational_to_f64_huge_parts() {
        let big = BigInt::from(14).pow(400u32);
        let q = BigRational::new(big.clone() * 3, big * 7);
        assert_eq!(rational_to_f64(&q), 3.0 / 7.0);
        let tiny = BigRational::new(BigInt::from(1), BigInt::from(14).pow(250u32));
        let want = (-250.0 * 14f64.ln()).exp();
        assert!(((rational_to_f64(&tiny) - want) / want).abs() < 1e-12);
    }

    #[test]
    fn ln_of_big() {
        let n = BigInt::from(14).pow(500u32);
        assert!((big_ln(&n) - 500.0 * 14f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn field_pow() {
        let l = BigRational::from_ratio(14, 1);
        assert_eq!(l.pow_i(-2), BigRational::from_ratio(1, 196));
        assert_eq!(2.0f64.pow_i(10), 1024.0);
    }
}
