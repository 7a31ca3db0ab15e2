//! Slope-corridor gluing.
//!
//! On `[a, b]` the derivative is blended from the left neighbour's derivative
//! `P` to a constant `σ`, held at `σ`, then blended to the right neighbour's
//! derivative `Q`:
//!
//! ```text
//! f' = (1 - S) P + S σ    on [a, a + βL]
//! f' = σ                  on [a + βL, b - βR]
//! f' = (1 - S) σ + S Q    on [b - βR, b]
//! ```
//!
//! `S` is a smoothstep whose derivatives of orders `1..=K` vanish at both
//! ends, so the jets of the neighbours are matched up to order `K + 1`.
//! `σ` is fixed by the value change `f(b) - f(a)`. The blend lengths are
//! scaled by a factor `t` found by bisection so that `f'` stays in the
//! corridor on a validation grid.

use crate::error::Error;
use crate::poly::{smoothstep, Poly};
use crate::scalar::Real;

use super::profile::Segment;

/// Grid points per segment for corridor checks.
pub const GRID: usize = 64;
/// Fixed number of bisection steps on the shape factor.
pub const BISECTION_STEPS: usize = 48;

#[derive(Clone, Debug)]
pub struct GlueSpec<T> {
    pub a: T,
    pub b: T,
    pub va: T,
    pub vb: T,
    /// Derivative of the left neighbour as a polynomial in `e = (u - a) / unit`.
    pub left_slope: Poly<T>,
    /// Derivative of the right neighbour as a polynomial in `e = (u - b) / unit`.
    pub right_slope: Poly<T>,
    /// Length scale of the neighbour variable; keeps cap slopes well conditioned.
    pub unit: T,
    pub beta_left: T,
    pub beta_right: T,
    pub corridor: (T, T),
    /// Smoothstep order `K`.
    pub order: usize,
    pub label: &'static str,
}

#[derive(Clone, Debug)]
pub struct Glue<T> {
    pub segments: Vec<Segment<T>>,
    /// Shape factor applied to both maximal blend lengths.
    pub shape: T,
    pub sigma: T,
}

struct Candidate<T> {
    segments: Vec<Segment<T>>,
    sigma: T,
}

impl<T: Real> GlueSpec<T> {
    fn candidate(&self, t: T, s: &Poly<T>) -> Option<Candidate<T>> {
        let one = T::one();
        let bl = self.beta_left * t;
        let br = self.beta_right * t;
        let mid = self.b - self.a - bl - br;
        if mid < T::zero() {
            return None;
        }
        let one_minus_s = Poly::constant(one).add(&s.scale(-one));
        let int_s = s.integral();
        let int_oms = one_minus_s.integral();

        // left blend, value = A_L + σ B_L
        let p = self.left_slope.compose_affine(T::zero(), bl / self.unit);
        let a_l = Poly::constant(self.va).add(&one_minus_s.mul(&p).integral().scale(bl));
        let b_l = int_s.scale(bl);
        // right blend, value = start + σ C_R + D_R
        let q = self.right_slope.compose_affine(-br / self.unit, br / self.unit);
        let c_r = int_oms.scale(br);
        let d_r = s.mul(&q).integral().scale(br);

        let half = T::lit(0.5);
        let denom = bl * half + mid + br * half;
        let sigma = (self.vb - a_l.eval(one) - d_r.eval(one)) / denom;

        let (lo, hi) = self.corridor;
        let tol_lo = T::lit(1e-12) * (T::one() + lo.abs());
        let tol_hi = T::lit(1e-12) * (T::one() + hi.abs());
        if sigma < lo - tol_lo || sigma > hi + tol_hi {
            return None;
        }

        let mut segments = Vec::with_capacity(3);
        let left_poly = a_l.add(&b_l.scale(sigma));
        let v1 = left_poly.eval(one);
        let x1 = self.a + bl;
        if bl > T::zero() {
            segments.push(Segment::new(self.a, x1, left_poly));
        }
        let x2 = self.b - br;
        let v2 = v1 + sigma * mid;
        if mid > T::zero() {
            segments.push(Segment::new(x1, x2, Poly::linear(v1, sigma * mid)));
        }
        if br > T::zero() {
            let right_poly = Poly::constant(v2).add(&c_r.scale(sigma)).add(&d_r);
            segments.push(Segment::new(x2, self.b, right_poly));
        }
        if segments.is_empty() {
            return None;
        }
        for seg in &segments {
            for i in 0..=GRID {
                let d = seg.derivative_at(1, T::of_usize(i) / T::of_usize(GRID));
                if !(d >= lo - tol_lo && d <= hi + tol_hi) {
                    return None;
                }
            }
        }
        Some(Candidate { segments, sigma })
    }

    pub fn build(&self) -> Result<Glue<T>, Error> {
        let s = smoothstep::<T>(self.order);
        if let Some(c) = self.candidate(T::one(), &s) {
            return Ok(Glue {
                segments: c.segments,
                shape: T::one(),
                sigma: c.sigma,
            });
        }
        // find some feasible factor by halving, then bisect towards the largest
        let mut good = None;
        let mut bad = T::one();
        let mut t = T::lit(0.5);
        for _ in 0..BISECTION_STEPS {
            if let Some(c) = self.candidate(t, &s) {
                good = Some((t, c));
                break;
            }
            bad = t;
            t = t * T::lit(0.5);
        }
        let (mut t_good, mut best) = good.ok_or_else(|| {
            Error::Construction(format!(
                "{}: no blend length keeps the slope in [{}, {}]",
                self.label, self.corridor.0, self.corridor.1
            ))
        })?;
        for _ in 0..BISECTION_STEPS {
            let t_mid = (t_good + bad) * T::lit(0.5);
            match self.candidate(t_mid, &s) {
                Some(c) => {
                    t_good = t_mid;
                    best = c;
                }
                None => bad = t_mid,
            }
        }
        log::trace!("{}: shape {} sigma {}", self.label, t_good, best.sigma);
        Ok(Glue {
            segments: best.segments,
            shape: t_good,
            sigma: best.sigma,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oscillators::profile::Profile;

    fn simple_spec(order: usize) -> GlueSpec<f64> {
        GlueSpec {
            a: 0.0,
            b: 1.0,
            va: 0.0,
            vb: 1.0,
            left_slope: Poly::constant(0.4),
            right_slope: Poly::constant(5.0),
            unit: 1.0,
            beta_left: 0.5,
            beta_right: 0.5,
            corridor: (0.4, 14.0),
            order,
            label: "test",
        }
    }

    #[test]
    fn hits_end_value_and_slopes() {
        for order in 1..5 {
            let g = simple_spec(order).build().unwrap();
            let p = Profile::new(g.segments.clone());
            assert!(p.value(0.0).abs() < 1e-15);
            assert!((p.value(1.0 - 1e-12) - 1.0).abs() < 1e-10);
            let last = g.segments.last().unwrap();
            assert!((last.derivative_at(0, 1.0) - 1.0).abs() < 1e-13);
            assert!((p.derivative(1, 0.0) - 0.4).abs() < 1e-13);
            assert!((last.derivative_at(1, 1.0) - 5.0).abs() < 1e-11);
            for k in 2..=order + 1 {
                assert!(p.derivative(k, 0.0).abs() < 1e-8);
                assert!(last.derivative_at(k, 1.0).abs() < 1e-6, "order {order} k {k}");
            }
            assert!(p.max_junction_jump(order + 1) < 1e-7);
            assert!(g.sigma >= 0.4 - 1e-10);
        }
    }

    #[test]
    fn infeasible_corridor_is_reported() {
        let mut s = simple_spec(2);
        s.corridor = (2.0, 3.0);
        assert!(matches!(s.build(), Err(Error::Construction(_))));
    }

    #[test]
    fn polynomial_neighbours_are_matched() {
        // left neighbour u^2 (slope 2u, value 1 at u=1), right neighbour 10 - (u-3)^2
        let spec: GlueSpec<f64> = GlueSpec {
            a: 1.0,
            b: 2.0,
            va: 1.0,
            vb: 9.0,
            left_slope: Poly::new(vec![2.0, 2.0]),
            right_slope: Poly::new(vec![2.0, -2.0]),
            unit: 1.0,
            beta_left: 0.3,
            beta_right: 0.3,
            corridor: (1.0, 14.0),
            order: 3,
            label: "poly",
        };
        let g = spec.build().unwrap();
        let first = &g.segments[0];
        let last = g.segments.last().unwrap();
        assert!((first.derivative_at(1, 0.0) - 2.0).abs() < 1e-12);
        assert!((first.derivative_at(2, 0.0) - 2.0).abs() < 1e-9);
        assert!(first.derivative_at(3, 0.0).abs() < 1e-6);
        assert!((last.derivative_at(0, 1.0) - 9.0).abs() < 1e-12);
        assert!((last.derivative_at(1, 1.0) - 2.0).abs() < 1e-11);
        assert!((last.derivative_at(2, 1.0) + 2.0).abs() < 1e-8);
    }
}
