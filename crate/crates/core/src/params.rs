//! Map parameters and the per-level constants derived from them.

use num_bigint::{BigInt, BigUint, ToBigInt};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scalar::{big_ln, rational_to_f64, Field};

/// Levels above this keep `M_n` only through its logarithm.
pub const EXACT_LEVEL_CAP: u32 = 2048;

/// Adds `extra` monotone laps to one level (the modified map `g` uses
/// `level = 2, extra = 2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExtraOscillations {
    pub level: u32,
    pub extra: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub lambda: f64,
    pub r: u32,
    pub k_max: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<ExtraOscillations>,
}

impl MapParams {
    /// `k_max` defaults to `2r`.
    pub fn new(lambda: f64, r: u32) -> Result<Self, Error> {
        Self::with_k_max(lambda, r, 2 * r)
    }

    pub fn with_k_max(lambda: f64, r: u32, k_max: u32) -> Result<Self, Error> {
        let p = MapParams {
            lambda,
            r,
            k_max,
            extra: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_extra_oscillations(mut self, level: u32, extra: u32) -> Result<Self, Error> {
        self.extra = Some(ExtraOscillations { level, extra });
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !self.lambda.is_finite() || self.lambda < 14.0 {
            return Err(Error::InvalidParams(format!(
                "lambda must be at least 14, got {}",
                self.lambda
            )));
        }
        if self.r < 1 {
            return Err(Error::InvalidParams("r must be at least 1".into()));
        }
        if self.k_max < self.r {
            return Err(Error::InvalidParams(format!(
                "k_max = {} is below r = {}",
                self.k_max, self.r
            )));
        }
        if self.k_max > 12 {
            return Err(Error::InvalidParams("k_max above 12 is not supported".into()));
        }
        if self.lambda.powi(self.r as i32) > 1e12 {
            return Err(Error::InvalidParams("lambda^r too large".into()));
        }
        if let Some(e) = self.extra {
            if e.level == 0 || e.extra % 2 == 1 {
                return Err(Error::InvalidParams(
                    "extra oscillations need a level >= 1 and an even count".into(),
                ));
            }
        }
        Ok(())
    }

    /// Same parameters without the extra-oscillation override.
    pub fn base(&self) -> MapParams {
        MapParams {
            extra: None,
            ..self.clone()
        }
    }

    pub fn lambda_exact(&self) -> BigRational {
        BigRational::from_float(self.lambda).expect("finite lambda")
    }

    /// `Λ = λ^r`, the maximal slope.
    pub fn big_lambda(&self) -> f64 {
        self.lambda.powi(self.r as i32)
    }

    pub fn big_lambda_exact(&self) -> BigRational {
        self.scale_exact_signed(-1)
    }

    /// `λ^{-kr}` built from coprime powers, skipping the gcd.
    fn scale_exact_signed(&self, k: i64) -> BigRational {
        let l = self.lambda_exact();
        let e = (k.unsigned_abs() * self.r as u64) as u32;
        let (num, den) = (l.numer().pow(e), l.denom().pow(e));
        if k >= 0 {
            BigRational::new_raw(den, num)
        } else {
            BigRational::new_raw(num, den)
        }
    }

    /// `δ = λ^{-r}`
    pub fn delta(&self) -> f64 {
        1.0 / self.big_lambda()
    }

    pub fn delta_exact(&self) -> BigRational {
        self.big_lambda_exact().recip()
    }

    /// Cap curvature `C = 1/(4δ²)`.
    pub fn cap_c(&self) -> f64 {
        let l = self.big_lambda();
        l * l / 4.0
    }

    /// `λ^{-kr}` as an exact rational.
    pub fn scale_exact(&self, k: u32) -> BigRational {
        self.scale_exact_signed(k as i64)
    }

    /// Natural log of `λ^{-kr}`.
    pub fn ln_scale(&self, k: u32) -> f64 {
        -(k as f64) * self.r as f64 * self.lambda.ln()
    }

    pub fn ln_lambda(&self) -> f64 {
        self.lambda.ln()
    }

    pub fn level(&self, n: u32) -> LevelConstants {
        LevelConstants::new(self, n)
    }

    pub fn oscillations_exact(&self, n: u32) -> BigUint {
        let base = oscillation_count(&self.lambda_exact(), n);
        match self.extra {
            Some(e) if e.level == n => base + BigUint::from(e.extra),
            _ => base,
        }
    }
}

/// `M_n = 2 floor(λ^n / (2n²)) - 1` in exact integer arithmetic.
pub fn oscillation_count(lambda: &BigRational, n: u32) -> BigUint {
    let pw = lambda.pow_i(n as i32);
    let den = pw.denom() * BigInt::from(2u64 * n as u64 * n as u64);
    let fl: BigInt = pw.numer().div_floor(&den);
    let m: BigInt = fl * 2 - 1;
    m.to_biguint().expect("positive oscillation count")
}

/// Parts (i)-(iii) of the elementary inequalities on `λ^n` and `M_n`,
/// checked exactly: `λ^n/n² ≥ λ`, `λ^n/(2n²) ≤ M_n ≤ λ^n/n²`, `M_n ≥ λ - 3`.
pub fn lambda_n_inequalities(lambda: &BigRational, n: u32) -> [bool; 3] {
    let pw = lambda.pow_i(n as i32);
    let n2 = BigRational::from_integer(BigInt::from(n as u64 * n as u64));
    let m = BigRational::from_integer(oscillation_count(lambda, n).to_bigint().unwrap());
    let two = BigRational::from_integer(BigInt::from(2));
    [
        &pw / &n2 >= *lambda,
        &pw / (&two * &n2) <= m && m <= &pw / &n2,
        m >= lambda - BigRational::from_integer(BigInt::from(3)),
    ]
}

/// Constants attached to level `n` (the interval `[y_{n+1}, y_n]`).
#[derive(Clone, Debug)]
pub struct LevelConstants {
    pub n: u32,
    pub x: BigRational,
    pub y: BigRational,
    /// Exact lap count; `None` beyond [`EXACT_LEVEL_CAP`].
    pub oscillations: Option<BigUint>,
    pub ln_oscillations: f64,
    pub m: BigRational,
    /// End slope `k_n = 2Λ/M_n`, exact when `M_n` is.
    pub k_exact: Option<BigRational>,
    pub k: f64,
    /// Bridge breakpoint `w_n`.
    pub w: BigRational,
    /// Bridge run `l_n = x_n - w_n`.
    pub l: BigRational,
    /// Normalized bridge rise `λ^{nr} h_n`.
    pub h_hat: BigRational,
}

impl LevelConstants {
    pub fn new(params: &MapParams, n: u32) -> Self {
        assert!(n >= 1, "levels start at 1");
        let (x, y) = level_x_y(n);
        let (_, y_next) = level_x_y(n + 1);
        let big_l = params.big_lambda_exact();
        let nn = BigInt::from(n);
        let np1 = BigInt::from(n + 1);
        let m = BigRational::one() - BigRational::new(BigInt::one(), &np1 * &np1);
        let (oscillations, ln_osc) = if n <= EXACT_LEVEL_CAP {
            let mm = params.oscillations_exact(n);
            let ln = big_ln(&mm.to_bigint().unwrap());
            (Some(mm), ln)
        } else {
            // M_n = λ^n/n² up to a relative error below 2n²/λ^n.
            let ln = n as f64 * params.lambda.ln() - 2.0 * (n as f64).ln();
            (None, ln)
        };
        let k_exact = oscillations.as_ref().map(|mm| {
            &big_l * BigRational::from_integer(BigInt::from(2)) / BigRational::from_integer(mm.to_bigint().unwrap())
        });
        let k = match &k_exact {
            Some(q) => rational_to_f64(q),
            None => 2.0 * params.big_lambda() * (-ln_osc).exp(),
        };
        // M_{n+1} k_{n+1} = 2Λ whatever M_{n+1} is, so the offset is (n+2)/(4n(n+1)²Λ).
        let offset = BigRational::new(BigInt::from(n + 2), BigInt::from(4) * &nn * &np1 * &np1) / &big_l;
        let w = &y_next + &offset;
        let l = &x - &w;
        // λ^{nr} h_n = x_n - λ^{-r} y_{n+1} - 2 (w_n - y_{n+1})
        let h_hat = &x - &y_next / &big_l - BigRational::from_integer(BigInt::from(2)) * &offset;
        LevelConstants {
            n,
            x,
            y,
            oscillations,
            ln_oscillations: ln_osc,
            m,
            k_exact,
            k,
            w,
            l,
            h_hat,
        }
    }

    /// `M_n` as a float (exact below 2^53).
    pub fn oscillations_f64(&self) -> f64 {
        match &self.oscillations {
            Some(m) => m.to_f64().unwrap_or(f64::INFINITY),
            None => self.ln_oscillations.exp(),
        }
    }

    pub fn oscillations_u64(&self) -> Option<u64> {
        self.oscillations.as_ref().and_then(|m| m.to_u64())
    }

    /// Critical abscissa `t_i^n = x_n + i (y_n - x_n)/M_n`.
    pub fn t(&self, i: &BigUint) -> BigRational {
        let mm = self
            .oscillations
            .as_ref()
            .expect("exact lap count required for breakpoints");
        // (n+1)/n + i/(2n² M) over the common denominator 2n² M
        let n = BigInt::from(self.n);
        let two_n_m = BigInt::from(2) * &n * mm.to_bigint().unwrap();
        let num = (&n + 1) * &two_n_m + i.to_bigint().unwrap();
        BigRational::new(num, two_n_m * n)
    }

    pub fn t_u64(&self, i: u64) -> BigRational {
        self.t(&BigUint::from(i))
    }

    pub fn width(&self) -> BigRational {
        &self.y - &self.x
    }

    pub fn x_f64(&self) -> f64 {
        rational_to_f64(&self.x)
    }

    pub fn y_f64(&self) -> f64 {
        rational_to_f64(&self.y)
    }

    pub fn m_f64(&self) -> f64 {
        rational_to_f64(&self.m)
    }

    pub fn w_f64(&self) -> f64 {
        rational_to_f64(&self.w)
    }

    pub fn l_f64(&self) -> f64 {
        rational_to_f64(&self.l)
    }

    pub fn h_hat_f64(&self) -> f64 {
        rational_to_f64(&self.h_hat)
    }

    /// `h_n` itself; underflows for deep levels.
    pub fn h_f64(&self, params: &MapParams) -> f64 {
        self.h_hat_f64() * params.ln_scale(self.n).exp()
    }

    /// Bridge end slopes `(2 l_n λ^{-nr}/h_n, 2 l_n λ^{-(n-1)r}/h_n)`.
    pub fn bridge_slopes(&self, params: &MapParams) -> (f64, f64) {
        let a0 = 2.0 * self.l_f64() / self.h_hat_f64();
        (a0, a0 * params.big_lambda())
    }

    pub fn bridge_slopes_exact(&self, params: &MapParams) -> (BigRational, BigRational) {
        let a0 = BigRational::from_integer(BigInt::from(2)) * &self.l / &self.h_hat;
        let a1 = &a0 * params.big_lambda_exact();
        (a0, a1)
    }
}

/// `x_n = 1 + 1/n`, `y_n = x_n + 1/(2n²)`.
pub fn level_x_y(n: u32) -> (BigRational, BigRational) {
    // (n+1)/n and (2n² + 2n + 1)/(2n²) are already in lowest terms
    let nn = BigInt::from(n);
    let two_n2 = BigInt::from(2) * &nn * &nn;
    let x = BigRational::new_raw(&nn + 1, nn.clone());
    let y = BigRational::new_raw(&two_n2 + BigInt::from(2) * &nn + 1, two_n2);
    (x, y)
}
