use num_rational::BigRational;

use crate::error::Error;
use crate::oscillators::{Bridge, Oscillator};
use crate::params::{LevelConstants, MapParams};
use crate::scalar::{rational_ln, rational_to_f64, Field, Real};

/// Float position of `x_n = 1 + 1/n`. Every float comparison against level
/// boundaries goes through this and [`y_of`].
pub fn x_of<T: Real>(n: u64) -> T {
    T::one() + T::one() / T::lit(n as f64)
}

/// Float position of `y_n = 1 + 1/n + 1/(2n²)`.
pub fn y_of<T: Real>(n: u64) -> T {
    let nn = T::lit(n as f64);
    T::one() + (T::one() / nn + T::lit(0.5) / (nn * nn))
}

/// Everything needed to evaluate `f` on `[y_{n+1}, y_n)`:
/// affine on `[y_{n+1}, w_n)`, bridge on `[w_n, x_n)`, oscillator on `[x_n, y_n)`.
#[derive(Clone, Debug)]
pub struct Level<T> {
    pub consts: LevelConstants,
    pub x: T,
    pub y: T,
    pub y_next: T,
    pub w: T,
    pub l: T,
    /// `f(y_{n+1}) = λ^{-(n+1)r} y_{n+1}` and the slope `2λ^{-nr}` of the affine piece.
    pub affine_value: T,
    pub affine_slope: T,
    /// `f(w_n) = λ^{-(n+1)r} x_n` and the bridge rise `h_n`.
    pub f_w: T,
    pub h: T,
    /// `λ^{-nr} x_n` and `λ^{-nr} (y_n - x_n)`.
    pub osc_base: T,
    pub osc_amp: T,
    pub width: T,
    pub bridge: Bridge<T>,
    pub osc: Oscillator<T>,
    /// `bridge_factor[k] = h_n / l_n^k`, `osc_factor[k] = λ^{-nr} M_n^k / (y_n - x_n)^{k-1}`.
    pub bridge_factor: Vec<T>,
    pub osc_factor: Vec<T>,
}

fn small<T: Real>(q: &BigRational) -> T {
    T::lit(rational_to_f64(q))
}

impl<T: Real> Level<T> {
    pub fn build(params: &MapParams, n: u32) -> Result<Self, Error> {
        let lc = params.level(n);
        let osc = Oscillator::build(params, &lc)?;
        let bridge = Bridge::build(params, &lc)?;
        let scale_n = params.scale_exact(n);
        let scale_n1 = params.scale_exact(n + 1);
        let (_, y_next) = crate::params::level_x_y(n + 1);
        let two = BigRational::from_ratio(2, 1);
        let width_q = &lc.y - &lc.x;
        let h_q = &scale_n * &lc.h_hat;

        let ln_scale = params.ln_scale(n);
        let ln_h = ln_scale + rational_ln(&lc.h_hat);
        let ln_l = rational_ln(&lc.l);
        let ln_w = rational_ln(&width_q);
        let k_max = params.k_max as usize;
        let bridge_factor = (0..=k_max)
            .map(|k| T::lit((ln_h - k as f64 * ln_l).exp()))
            .collect();
        let osc_factor = (0..=k_max)
            .map(|k| T::lit((ln_scale + k as f64 * lc.ln_oscillations - (k as f64 - 1.0) * ln_w).exp()))
            .collect();
        let nn = n as u64;
        Ok(Level {
            x: x_of(nn),
            y: y_of(nn),
            y_next: y_of(nn + 1),
            w: small(&lc.w),
            l: small(&lc.l),
            affine_value: small(&(&scale_n1 * &y_next)),
            affine_slope: small(&(&two * &scale_n)),
            f_w: small(&(&scale_n1 * &lc.x)),
            h: small(&h_q),
            osc_base: small(&(&scale_n * &lc.x)),
            osc_amp: small(&(&scale_n * &width_q)),
            width: y_of::<T>(nn) - x_of::<T>(nn),
            bridge,
            osc,
            bridge_factor,
            osc_factor,
            consts: lc,
        })
    }

    pub fn n(&self) -> u32 {
        self.consts.n
    }

    /// Lap coordinate `u = M_n (x - x_n)/(y_n - x_n)`.
    pub fn lap_coordinate(&self, x: T) -> T {
        self.osc.laps * ((x - self.x) / self.width)
    }

    pub fn bridge_coordinate(&self, x: T) -> T {
        (x - self.w) / self.l
    }

    pub fn affine_derivative(&self, k: usize, x: T) -> T {
        match k {
            0 => self.affine_value + self.affine_slope * (x - self.y_next),
            1 => self.affine_slope,
            _ => T::zero(),
        }
    }

    pub fn bridge_derivative(&self, k: usize, x: T) -> T {
        let v = self.bridge_coordinate(x);
        if k == 0 {
            self.f_w + self.h * self.bridge.value(v)
        } else {
            self.bridge_factor[k] * self.bridge.derivative(k, v)
        }
    }

    pub fn osc_derivative(&self, k: usize, x: T) -> T {
        let u = self.lap_coordinate(x);
        if k == 0 {
            self.osc_base + self.osc_amp * self.osc.value(u)
        } else {
            self.osc_factor[k] * self.osc.derivative(k, u)
        }
    }
}
