//! Univariate polynomials on `[0, 1]` in the Bernstein basis, and the
//! smoothstep family used for blending.
//!
//! Constructors take monomial coefficients. Storage is Bernstein so that
//! high-degree blends evaluate without cancellation and the jets at `0` and
//! `1` depend only on the first and last few coefficients.

use crate::scalar::Real;

/// Polynomial `Σ b[i] B_{i,d}(v)` with `B_{i,d}(v) = C(d,i) v^i (1-v)^{d-i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<T> {
    bern: Vec<T>,
}

fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn falling(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64)
}

impl<T: Real> Poly<T> {
    /// From monomial coefficients `c[0] + c[1] v + ...`.
    pub fn new(coeffs: Vec<T>) -> Self {
        if coeffs.is_empty() {
            return Poly { bern: vec![T::zero()] };
        }
        let d = coeffs.len() - 1;
        let bern = (0..=d)
            .map(|i| {
                (0..=i).fold(T::zero(), |acc, j| {
                    acc + coeffs[j] * T::lit(binom(i, j) / binom(d, j))
                })
            })
            .collect();
        Poly { bern }
    }

    pub fn from_bernstein(mut bern: Vec<T>) -> Self {
        if bern.is_empty() {
            bern.push(T::zero());
        }
        Poly { bern }
    }

    pub fn constant(c: T) -> Self {
        Poly { bern: vec![c] }
    }

    /// `a + b v`
    pub fn linear(a: T, b: T) -> Self {
        Poly { bern: vec![a, a + b] }
    }

    /// `c (v - v0)^k`
    pub fn shifted_power(c: T, v0: T, k: usize) -> Self {
        let base = Poly::linear(-v0, T::one());
        let mut out = Poly::constant(c);
        for _ in 0..k {
            out = out.mul(&base);
        }
        out
    }

    pub fn bernstein(&self) -> &[T] {
        &self.bern
    }

    /// Monomial coefficients (lossy for high degree).
    pub fn monomial(&self) -> Vec<T> {
        let d = self.degree();
        (0..=d)
            .map(|j| {
                let s = (0..=j).fold(T::zero(), |acc, i| {
                    let sign = if (j - i) % 2 == 0 { T::one() } else { -T::one() };
                    acc + sign * T::lit(binom(j, i)) * self.bern[i]
                });
                s * T::lit(binom(d, j))
            })
            .collect()
    }

    /// Storage degree (an upper bound on the true degree).
    pub fn degree(&self) -> usize {
        self.bern.len() - 1
    }

    pub fn eval(&self, v: T) -> T {
        de_casteljau(&self.bern, v)
    }

    /// k-th derivative at `v`.
    pub fn eval_derivative(&self, k: usize, v: T) -> T {
        let d = self.degree();
        if k == 0 {
            return self.eval(v);
        }
        if k > d {
            return T::zero();
        }
        let mut diff = self.bern.clone();
        for level in 0..k {
            for i in 0..diff.len() - 1 - level {
                diff[i] = diff[i + 1] - diff[i];
            }
        }
        diff.truncate(d + 1 - k);
        de_casteljau(&diff, v) * T::lit(falling(d, k))
    }

    pub fn derivative(&self) -> Self {
        let d = self.degree();
        if d == 0 {
            return Poly::constant(T::zero());
        }
        let n = T::of_usize(d);
        Poly {
            bern: self.bern.windows(2).map(|w| (w[1] - w[0]) * n).collect(),
        }
    }

    /// Antiderivative vanishing at 0.
    pub fn integral(&self) -> Self {
        let n = T::of_usize(self.bern.len());
        let mut out = Vec::with_capacity(self.bern.len() + 1);
        let mut acc = T::zero();
        out.push(acc);
        for &b in &self.bern {
            acc = acc + b / n;
            out.push(acc);
        }
        Poly { bern: out }
    }

    /// Same polynomial with storage degree raised to `target`.
    pub fn elevate(&self, target: usize) -> Self {
        let mut cur = self.bern.clone();
        while cur.len() - 1 < target {
            let d = cur.len() - 1;
            let dp1 = T::of_usize(d + 1);
            let mut next = Vec::with_capacity(d + 2);
            next.push(cur[0]);
            for i in 1..=d {
                let a = T::of_usize(i) / dp1;
                next.push(a * cur[i - 1] + (T::one() - a) * cur[i]);
            }
            next.push(cur[d]);
            cur = next;
        }
        Poly { bern: cur }
    }

    pub fn add(&self, o: &Self) -> Self {
        let d = self.degree().max(o.degree());
        let a = self.elevate(d);
        let b = o.elevate(d);
        Poly {
            bern: a.bern.iter().zip(&b.bern).map(|(&x, &y)| x + y).collect(),
        }
    }

    pub fn scale(&self, s: T) -> Self {
        Poly {
            bern: self.bern.iter().map(|&c| c * s).collect(),
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let m = self.degree();
        let n = o.degree();
        let mut c = vec![T::zero(); m + n + 1];
        for (i, &a) in self.bern.iter().enumerate() {
            for (j, &b) in o.bern.iter().enumerate() {
                let w = binom(m, i) * binom(n, j) / binom(m + n, i + j);
                c[i + j] = c[i + j] + a * b * T::lit(w);
            }
        }
        Poly { bern: c }
    }

    /// `v -> p(a + b v)`, by blossoming.
    pub fn compose_affine(&self, a: T, b: T) -> Self {
        let d = self.degree();
        let lo = a;
        let hi = a + b;
        let bern = (0..=d)
            .map(|k| {
                let mut ts = vec![lo; d - k];
                ts.extend(std::iter::repeat_n(hi, k));
                blossom(&self.bern, &ts)
            })
            .collect();
        Poly { bern }
    }

    /// `v -> p(1 - v)`
    pub fn reflect(&self) -> Self {
        let mut bern = self.bern.clone();
        bern.reverse();
        Poly { bern }
    }
}

fn de_casteljau<T: Real>(b: &[T], v: T) -> T {
    let mut w = b.to_vec();
    let s = T::one() - v;
    for level in 1..w.len() {
        for i in 0..w.len() - level {
            w[i] = s * w[i] + v * w[i + 1];
        }
    }
    w[0]
}

fn blossom<T: Real>(b: &[T], ts: &[T]) -> T {
    let mut w = b.to_vec();
    for (level, &t) in ts.iter().enumerate() {
        let s = T::one() - t;
        for i in 0..w.len() - 1 - level {
            w[i] = s * w[i] + t * w[i + 1];
        }
    }
    w[0]
}

/// Smoothstep `S_K` of degree `2K+1`: increasing from `S(0)=0` to `S(1)=1`,
/// derivatives of orders `1..=K` vanish at both ends, and `S(1-v) = 1 - S(v)`.
/// Its Bernstein coefficients are `K+1` zeros followed by `K+1` ones.
pub fn smoothstep<T: Real>(k: usize) -> Poly<T> {
    let mut bern = vec![T::zero(); k + 1];
    bern.extend(std::iter::repeat_n(T::one(), k + 1));
    Poly { bern }
}
