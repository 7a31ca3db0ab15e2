use num_bigint::{BigInt, ToBigInt};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{PiecewiseMap, HARD_LEVEL_CAP};
use crate::params::{level_x_y, MapParams, EXACT_LEVEL_CAP};
use crate::scalar::Real;

fn q(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Rationals used on every call of `exact_image`.
#[derive(Clone, Debug)]
pub(crate) struct ExactConsts {
    big_l: BigRational,
    delta: BigRational,
    linear_end: BigRational,
    right_start: BigRational,
}

impl ExactConsts {
    pub(crate) fn new(p: &MapParams) -> Self {
        let delta = p.delta_exact();
        ExactConsts {
            big_l: p.big_lambda_exact(),
            linear_end: q(5, 2) * &delta,
            right_start: q(4, 1) - q(3, 2) * &delta,
            delta,
        }
    }
}

impl<T: Real> PiecewiseMap<T> {
    /// Level `n` with `x ∈ [y_{n+1}, y_n)` for an exact `1 < x < y_1`.
    pub fn level_index_exact(x: &BigRational) -> Option<u32> {
        let e = x - BigRational::one();
        if !e.is_positive() {
            return None;
        }
        let guess = e.recip().floor().to_integer();
        let mut n = guess.to_u64()?.max(1);
        if n > HARD_LEVEL_CAP + 1 {
            return None;
        }
        while n > 1 && *x >= level_x_y(n as u32).1 {
            n -= 1;
        }
        while *x < level_x_y(n as u32 + 1).1 {
            n += 1;
        }
        u32::try_from(n).ok()
    }

    /// `f(x)` in exact arithmetic where the map is affine with rational
    /// coefficients or `x` is a critical abscissa: `[0, (5/2)δ]`, the affine
    /// parts `[y_{n+1}, w_n]`, the affine lap ends near `x_n`, `y_n`, the
    /// points `t_i^n`, `1/2`, `1`, `y_1` and `[4 - (3/2)δ, 4]`. `None` elsewhere.
    pub fn exact_image(&self, x: &BigRational) -> Option<BigRational> {
        let p = &self.params;
        let ExactConsts { big_l, delta: de, linear_end, right_start: right } = &self.exact;
        if x.is_negative() || *x > q(4, 1) {
            return None;
        }
        if x <= linear_end {
            return Some(big_l * x);
        }
        if *x == q(1, 2) {
            return Some(q(4, 1));
        }
        if x.is_one() {
            return Some(BigRational::zero());
        }
        if x >= right {
            return Some(q(4, 1) + big_l * (x - q(4, 1)));
        }
        if *x == q(5, 2) {
            return Some(q(5, 2) / big_l);
        }
        if *x <= BigRational::one() || *x > q(5, 2) {
            return None;
        }
        let n = Self::level_index_exact(x)?;
        let cached = if n <= EXACT_LEVEL_CAP { self.level(n).ok() } else { None };
        let fresh;
        let lc = match &cached {
            Some(l) => &l.consts,
            None => {
                fresh = p.level(n);
                &fresh
            }
        };
        let (_, y_next) = level_x_y(n + 1);
        let s_n = p.scale_exact(n);
        let two = q(2, 1);
        if *x <= lc.w {
            // λ^{-(n+1)r} y_{n+1} + 2λ^{-nr}(x - y_{n+1})
            return Some(&s_n * (&y_next / big_l + &two * (x - &y_next)));
        }
        if *x < lc.x {
            return None;
        }
        let mm = lc.oscillations.as_ref()?.to_bigint()?;
        let width = &lc.y - &lc.x;
        let u = (x - &lc.x) * BigRational::from_integer(mm.clone()) / &width;
        // affine lap ends: s = k_n u on [0, δ], s = 1 + k_n (u - M_n) on [M_n - δ, M_n]
        if u <= *de {
            return Some(&s_n * (&lc.x + &two * big_l * (x - &lc.x)));
        }
        let m_q = BigRational::from_integer(mm);
        if u >= &m_q - de {
            return Some(&s_n * (&lc.y + &two * big_l * (x - &lc.y)));
        }
        if u.is_integer() {
            let i = u.to_integer();
            return Some(if i.is_odd() {
                &s_n * &lc.y
            } else {
                &s_n * &y_next
            });
        }
        None
    }
}
