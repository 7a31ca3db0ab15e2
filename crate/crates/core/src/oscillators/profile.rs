//! Piecewise polynomial profiles on a local coordinate.

use crate::poly::Poly;
use crate::scalar::Real;

/// Polynomial piece on `[lo, hi]`, stored in the normalized variable
/// `v = (u - lo) / (hi - lo)`.
#[derive(Clone, Debug)]
pub struct Segment<T> {
    pub lo: T,
    pub hi: T,
    pub poly: Poly<T>,
}

impl<T: Real> Segment<T> {
    pub fn new(lo: T, hi: T, poly: Poly<T>) -> Self {
        Segment { lo, hi, poly }
    }

    #[inline]
    pub fn width(&self) -> T {
        self.hi - self.lo
    }

    #[inline]
    pub fn value(&self, u: T) -> T {
        self.poly.eval((u - self.lo) / self.width())
    }

    #[inline]
    pub fn derivative(&self, k: usize, u: T) -> T {
        let w = self.width();
        self.poly.eval_derivative(k, (u - self.lo) / w) / w.powi(k as i32)
    }

    /// Sup of `|p^{(k)}|` over `points + 1` equispaced samples.
    pub fn sup_abs(&self, k: usize, points: usize) -> T {
        (0..=points)
            .map(|i| self.derivative_at(k, T::of_usize(i) / T::of_usize(points)).abs())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// A priori float error in the `k`-th derivative: `k`-fold differences of
    /// the Bernstein coefficients, rescaled to `u`.
    pub fn noise(&self, k: usize) -> T {
        let b = self.poly.bernstein();
        let d = b.len() - 1;
        if k > d {
            return T::zero();
        }
        let big = b.iter().fold(T::zero(), |a, &c| a.max(c.abs()));
        let mut f = T::of_usize(d + 1);
        for i in 0..k {
            f = f * T::of_usize(2 * (d - i));
        }
        f * big * T::epsilon() / self.width().powi(k as i32)
    }

    /// Scale against which a `k`-th derivative mismatch of relative size
    /// `tol` is judged: the sup over the segment, padded by rounding noise.
    pub fn jet_scale(&self, k: usize, tol: T) -> T {
        T::one() + self.sup_abs(k, GRID_JUMP) + self.noise(k) / tol
    }

    /// Derivative at the normalized position `v`.
    #[inline]
    pub fn derivative_at(&self, k: usize, v: T) -> T {
        self.poly.eval_derivative(k, v) / self.width().powi(k as i32)
    }
}

/// Contiguous run of segments.
#[derive(Clone, Debug)]
pub struct Profile<T> {
    segs: Vec<Segment<T>>,
}

impl<T: Real> Profile<T> {
    pub fn new(segs: Vec<Segment<T>>) -> Self {
        assert!(!segs.is_empty());
        Profile { segs }
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segs
    }

    pub fn lo(&self) -> T {
        self.segs[0].lo
    }

    pub fn hi(&self) -> T {
        self.segs[self.segs.len() - 1].hi
    }

    /// Index of the segment used at `u`; breakpoints go to the right segment.
    pub fn locate(&self, u: T) -> usize {
        let i = self.segs.partition_point(|s| s.hi <= u);
        i.min(self.segs.len() - 1)
    }

    pub fn value(&self, u: T) -> T {
        self.segs[self.locate(u)].value(u)
    }

    pub fn derivative(&self, k: usize, u: T) -> T {
        if k == 0 {
            return self.value(u);
        }
        self.segs[self.locate(u)].derivative(k, u)
    }

    /// Sup of `|p^{(k)}|` over `points` equispaced samples per segment, endpoints included.
    pub fn sup_derivative(&self, k: usize, points: usize) -> T {
        let mut best = T::zero();
        for s in &self.segs {
            for i in 0..=points {
                let v = T::of_usize(i) / T::of_usize(points);
                let d = if k == 0 {
                    s.poly.eval(v)
                } else {
                    s.derivative_at(k, v)
                };
                best = best.max(d.abs());
            }
        }
        best
    }

    /// `(min, max)` of the first derivative over the same grid.
    pub fn slope_range(&self, points: usize) -> (T, T) {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for s in &self.segs {
            for i in 0..=points {
                let d = s.derivative_at(1, T::of_usize(i) / T::of_usize(points));
                lo = lo.min(d);
                hi = hi.max(d);
            }
        }
        (lo, hi)
    }

    /// Largest jump of a derivative of order `<= k_max` across interior
    /// breakpoints, relative to the larger [`Segment::jet_scale`] of the two sides.
    pub fn max_junction_jump(&self, k_max: usize) -> T {
        let mut worst = T::zero();
        for w in self.segs.windows(2) {
            for k in 0..=k_max {
                let a = w[0].derivative_at(k, T::one());
                let b = w[1].derivative_at(k, T::zero());
                let tol = jet_tol::<T>();
                let scale = w[0].jet_scale(k, tol).max(w[1].jet_scale(k, tol));
                worst = worst.max((a - b).abs() / scale);
            }
        }
        worst
    }
}

const GRID_JUMP: usize = 16;

/// Relative tolerance for jet agreement.
pub fn jet_tol<T: Real>() -> T {
    T::epsilon().cbrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_scales_derivatives() {
        // u^2 on [1, 3]: v = (u-1)/2, value = (1+2v)^2 = 1 + 4v + 4v^2
        let s = Segment::new(1.0, 3.0, Poly::new(vec![1.0, 4.0, 4.0]));
        assert_eq!(s.value(2.0), 4.0);
        assert_eq!(s.derivative(1, 2.0), 4.0);
        assert_eq!(s.derivative(2, 2.5), 2.0);
    }

    #[test]
    fn locate_prefers_right_segment() {
        let p = Profile::new(vec![
            Segment::new(0.0, 1.0, Poly::linear(0.0, 1.0)),
            Segment::new(1.0, 2.0, Poly::linear(1.0, 2.0)),
        ]);
        assert_eq!(p.locate(0.5), 0);
        assert_eq!(p.locate(1.0), 1);
        assert_eq!(p.locate(2.0), 1);
        assert_eq!(p.value(1.5), 2.0);
        assert!(p.max_junction_jump(0) < 1e-15);
        assert!(p.max_junction_jump(1) > 0.3);
    }
}
