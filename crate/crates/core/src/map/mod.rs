//! The map `f_r : [0, 4] → [0, 4]`.
//!
//! `[0, 1]` and `[y_1, 4]` are covered by a short list of outer pieces
//! (affine pieces, quadratic caps and glued blends). `(1, y_1)` is covered by
//! the levels `n ≥ 1`, built on first use.

mod exact;
mod io;
mod level;
mod probe;
mod verify;

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::oscillators::{jet_tol, GlueSpec, Segment};
use crate::params::{level_x_y, MapParams};
use crate::poly::Poly;
use crate::scalar::{rational_to_f64, Real};

pub use io::{MapSpec, PieceSpec};
pub use level::{x_of, y_of, Level};
pub use probe::{ProbeReport, ProbeStep};
pub use verify::{
    JunctionReport, MonotoneReport, SmoothnessReport, TilingReport, WindowMax, SMOOTHNESS_WINDOWS,
};

/// Levels beyond this are not materialized; `f` and its derivatives up to
/// order `r` are reported as 0 there, higher derivatives as NaN.
pub const HARD_LEVEL_CAP: u64 = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Monotonicity {
    Increasing,
    Decreasing,
}

#[derive(Clone, Debug)]
pub enum PieceEval<T> {
    /// `value + slope (x - anchor)`
    Affine { anchor: T, value: T, slope: T },
    Poly(Segment<T>),
}

#[derive(Clone, Debug)]
pub struct Piece<T> {
    pub lo: BigRational,
    pub hi: BigRational,
    pub lo_t: T,
    pub hi_t: T,
    pub eval: PieceEval<T>,
    pub monotonicity: Monotonicity,
    pub label: &'static str,
}

impl<T: Real> Piece<T> {
    pub fn derivative(&self, k: usize, x: T) -> T {
        match &self.eval {
            PieceEval::Affine { anchor, value, slope } => match k {
                0 => *value + *slope * (x - *anchor),
                1 => *slope,
                _ => T::zero(),
            },
            PieceEval::Poly(s) => {
                if k == 0 {
                    s.value(x)
                } else {
                    s.derivative(k, x)
                }
            }
        }
    }

    /// Scale for judging `k`-th derivative mismatches at an end of this piece.
    pub fn jet_scale(&self, k: usize) -> T {
        match &self.eval {
            PieceEval::Affine { .. } => T::one(),
            PieceEval::Poly(s) => s.jet_scale(k, jet_tol()),
        }
    }
}

/// Where a point falls.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Location {
    /// Index into [`PiecewiseMap::outer`].
    Outer(usize),
    One,
    /// `x` in `(1, y_{HARD_LEVEL_CAP})`.
    Deep,
    Affine(u32),
    Bridge(u32),
    Oscillator { n: u32, lap: Option<u64> },
}

/// `f_r` for one `(λ, r)`, generic over the evaluation scalar.
#[derive(Debug)]
pub struct PiecewiseMap<T = f64> {
    params: MapParams,
    n_max: u32,
    outer: Vec<Piece<T>>,
    /// Number of outer pieces on `[0, 1]`.
    left_len: usize,
    /// Glue shape factors of the three outer blends.
    pub glue_shapes: [T; 3],
    levels: RwLock<BTreeMap<u32, Arc<Level<T>>>>,
    exact: exact::ExactConsts,
}

fn q(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn f64_rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite breakpoint")
}

/// Pieces of a glue whose outer ends are the exact rationals `a` and `b`.
fn glue_pieces<T: Real>(
    spec: GlueSpec<T>,
    a: &BigRational,
    b: &BigRational,
    monotonicity: Monotonicity,
    label: &'static str,
) -> Result<(Vec<Piece<T>>, T), Error> {
    let g = spec.build()?;
    let last = g.segments.len() - 1;
    let pieces = g
        .segments
        .into_iter()
        .enumerate()
        .map(|(i, s)| Piece {
            lo: if i == 0 { a.clone() } else { f64_rational(s.lo.to_f64_lossy()) },
            hi: if i == last { b.clone() } else { f64_rational(s.hi.to_f64_lossy()) },
            lo_t: s.lo,
            hi_t: s.hi,
            eval: PieceEval::Poly(s),
            monotonicity,
            label,
        })
        .collect();
    Ok((pieces, g.shape))
}

pub fn build_map(params: &MapParams, n_max: u32) -> Result<PiecewiseMap<f64>, Error> {
    PiecewiseMap::build(params, n_max)
}

impl<T: Real> PiecewiseMap<T> {
    pub fn build(params: &MapParams, n_max: u32) -> Result<Self, Error> {
        params.validate()?;
        if n_max == 0 {
            return Err(Error::InvalidParams("n_max must be at least 1".into()));
        }
        let r = params.r as usize;
        let order = (params.k_max as usize).saturating_sub(1);
        let big_l = T::lit(params.big_lambda());
        let delta = T::lit(params.delta());
        let de = params.delta_exact();
        let t = |x: &BigRational| T::lit(rational_to_f64(x));
        let lit = T::lit;

        let b0 = q(5, 2) * &de;
        let b1 = q(1, 2) - &de;
        let b2 = q(1, 2);
        let b3 = q(1, 2) + &de;
        let b4 = BigRational::one() - &de;
        let one = BigRational::one();
        let y1 = q(5, 2);
        let b5 = q(4, 1) - q(3, 2) * &de;
        let four = q(4, 1);
        let cap_drop = lit(1.5) * delta;

        let mut outer = vec![Piece {
            lo: BigRational::zero(),
            hi: b0.clone(),
            lo_t: T::zero(),
            hi_t: t(&b0),
            eval: PieceEval::Affine {
                anchor: T::zero(),
                value: T::zero(),
                slope: big_l,
            },
            monotonicity: Monotonicity::Increasing,
            label: "linear",
        }];
        let (rise, s_rise) = glue_pieces(
            GlueSpec {
                a: t(&b0),
                b: t(&b1),
                va: lit(2.5),
                vb: lit(4.0) - cap_drop,
                left_slope: Poly::constant(big_l),
                // cap slope -2C_0(x - 1/2) = 3 - 3e with x = 1/2 - δ + eδ
                right_slope: Poly::linear(lit(3.0), lit(-3.0)),
                unit: delta,
                beta_left: delta * lit(0.5),
                beta_right: delta * lit(0.5),
                corridor: (lit(1.5), big_l),
                order,
                label: "rise to 1/2",
            },
            &b0,
            &b1,
            Monotonicity::Increasing,
            "rise",
        )?;
        outer.extend(rise);
        outer.push(Piece {
            lo: b1.clone(),
            hi: b2.clone(),
            lo_t: t(&b1),
            hi_t: lit(0.5),
            eval: PieceEval::Poly(Segment::new(
                t(&b1),
                lit(0.5),
                Poly::shifted_power(-cap_drop, T::one(), 2).add(&Poly::constant(lit(4.0))),
            )),
            monotonicity: Monotonicity::Increasing,
            label: "cap 1/2",
        });
        outer.push(Piece {
            lo: b2.clone(),
            hi: b3.clone(),
            lo_t: lit(0.5),
            hi_t: t(&b3),
            eval: PieceEval::Poly(Segment::new(
                lit(0.5),
                t(&b3),
                Poly::shifted_power(-cap_drop, T::zero(), 2).add(&Poly::constant(lit(4.0))),
            )),
            monotonicity: Monotonicity::Decreasing,
            label: "cap 1/2",
        });
        let two_r = lit(2.0 * r as f64);
        let (fall, s_fall) = glue_pieces(
            GlueSpec {
                a: t(&b3),
                b: t(&b4),
                va: lit(4.0) - cap_drop,
                vb: delta,
                left_slope: Poly::linear(lit(-3.0), lit(-3.0)),
                // 2r C_1 (x-1)^{2r-1} = 2r (e-1)^{2r-1} with x = 1 - δ + eδ
                right_slope: Poly::shifted_power(two_r, T::one(), 2 * r - 1),
                unit: delta,
                beta_left: delta * lit(0.5),
                beta_right: delta * lit(0.5),
                corridor: (-big_l, lit(-1.5)),
                order,
                label: "fall to 1",
            },
            &b3,
            &b4,
            Monotonicity::Decreasing,
            "fall",
        )?;
        outer.extend(fall);
        outer.push(Piece {
            lo: b4.clone(),
            hi: one.clone(),
            lo_t: t(&b4),
            hi_t: T::one(),
            eval: PieceEval::Poly(Segment::new(
                t(&b4),
                T::one(),
                Poly::shifted_power(delta, T::one(), 2 * r),
            )),
            monotonicity: Monotonicity::Decreasing,
            label: "cap 1",
        });
        let left_len = outer.len();
        let (tail, s_tail) = glue_pieces(
            GlueSpec {
                a: lit(2.5),
                b: t(&b5),
                va: lit(2.5) / big_l,
                vb: lit(2.5),
                left_slope: Poly::constant(lit(2.0)),
                right_slope: Poly::constant(big_l),
                unit: T::one(),
                beta_left: lit(0.25),
                beta_right: delta * lit(0.5),
                corridor: (lit(1.5), big_l),
                order,
                label: "rise to 4",
            },
            &y1,
            &b5,
            Monotonicity::Increasing,
            "tail",
        )?;
        outer.extend(tail);
        outer.push(Piece {
            lo: b5.clone(),
            hi: four,
            lo_t: t(&b5),
            hi_t: lit(4.0),
            eval: PieceEval::Affine {
                anchor: lit(4.0),
                value: lit(4.0),
                slope: big_l,
            },
            monotonicity: Monotonicity::Increasing,
            label: "right",
        });

        let map = PiecewiseMap {
            params: params.clone(),
            n_max,
            outer,
            left_len,
            glue_shapes: [s_rise, s_fall, s_tail],
            levels: RwLock::new(BTreeMap::new()),
            exact: exact::ExactConsts::new(params),
        };
        for n in 1..=n_max {
            map.level(n)?;
        }
        Ok(map)
    }

    pub fn params(&self) -> &MapParams {
        &self.params
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn outer(&self) -> &[Piece<T>] {
        &self.outer
    }

    pub fn left_pieces(&self) -> &[Piece<T>] {
        &self.outer[..self.left_len]
    }

    pub fn right_pieces(&self) -> &[Piece<T>] {
        &self.outer[self.left_len..]
    }

    /// Level `n`, built and cached on first use.
    pub fn level(&self, n: u32) -> Result<Arc<Level<T>>, Error> {
        if n == 0 {
            return Err(Error::InvalidParams("levels start at 1".into()));
        }
        if let Some(l) = self.levels.read().expect("level cache").get(&n) {
            return Ok(l.clone());
        }
        let built = Arc::new(Level::build(&self.params, n)?);
        let mut w = self.levels.write().expect("level cache");
        // first writer wins; builds are deterministic
        Ok(w.entry(n).or_insert(built).clone())
    }

    pub fn materialized_levels(&self) -> Vec<u32> {
        self.levels.read().expect("level cache").keys().copied().collect()
    }

    /// Level `n` with `x ∈ [y_{n+1}, y_n)`, for `1 < x < y_1`; `None` past the hard cap.
    pub fn level_index(x: T) -> Option<u64> {
        let e = x - T::one();
        let guess = (T::one() / e).floor().to_f64_lossy();
        if !(guess <= (HARD_LEVEL_CAP + 1) as f64) {
            return None;
        }
        let mut n = (guess as u64).max(1);
        while n > 1 && x >= y_of::<T>(n) {
            n -= 1;
        }
        while x < y_of::<T>(n + 1) {
            n += 1;
        }
        if n > HARD_LEVEL_CAP {
            None
        } else {
            Some(n)
        }
    }

    pub fn check_domain(x: T) -> Result<(), Error> {
        if x >= T::zero() && x <= T::lit(4.0) {
            Ok(())
        } else {
            Err(Error::Domain(x.to_f64_lossy()))
        }
    }

    fn locate_outer(&self, x: T, range: std::ops::Range<usize>) -> usize {
        let s = &self.outer[range.clone()];
        let i = s.partition_point(|p| p.hi_t <= x).min(s.len() - 1);
        range.start + i
    }

    pub fn locate(&self, x: T) -> Result<Location, Error> {
        Self::check_domain(x)?;
        if x < T::one() {
            return Ok(Location::Outer(self.locate_outer(x, 0..self.left_len)));
        }
        if x == T::one() {
            return Ok(Location::One);
        }
        if x >= T::lit(2.5) {
            return Ok(Location::Outer(self.locate_outer(x, self.left_len..self.outer.len())));
        }
        let Some(n) = Self::level_index(x) else {
            return Ok(Location::Deep);
        };
        let n = n as u32;
        let lv = self.level(n)?;
        Ok(if x < lv.w {
            Location::Affine(n)
        } else if x < lv.x {
            Location::Bridge(n)
        } else {
            Location::Oscillator {
                n,
                lap: lv.osc.lap_index(lv.lap_coordinate(x)),
            }
        })
    }

    /// Short identifier of the piece containing `x`.
    pub fn piece_id(&self, x: T) -> Result<String, Error> {
        Ok(match self.locate(x)? {
            Location::Outer(i) if i < self.left_len => format!("L{i}"),
            Location::Outer(i) => format!("R{}", i - self.left_len),
            Location::One => "one".into(),
            Location::Deep => "deep".into(),
            Location::Affine(n) => format!("A{n}"),
            Location::Bridge(n) => format!("B{n}"),
            Location::Oscillator { n, lap: Some(j) } => format!("O{n}:{}", j + 1),
            Location::Oscillator { n, lap: None } => format!("O{n}"),
        })
    }

    pub fn eval(&self, x: T) -> Result<T, Error> {
        self.derivative_unchecked(0, x)
    }

    /// `k`-th derivative, `0 ≤ k ≤ k_max`. At breakpoints the right-hand
    /// piece is used, except at 4.
    pub fn eval_derivative(&self, x: T, k: u32) -> Result<T, Error> {
        if k > self.params.k_max {
            return Err(Error::DerivativeOrder {
                k,
                k_max: self.params.k_max,
            });
        }
        self.derivative_unchecked(k as usize, x)
    }

    fn derivative_unchecked(&self, k: usize, x: T) -> Result<T, Error> {
        let loc = self.locate(x)?;
        self.eval_at(loc, k, x)
    }

    /// Derivative of order `k` of the formula of piece `loc`, evaluated at `x`
    /// even when `x` is an endpoint of that piece.
    pub fn eval_at(&self, loc: Location, k: usize, x: T) -> Result<T, Error> {
        let r = self.params.r as usize;
        Ok(match loc {
            Location::Outer(i) => self.outer[i].derivative(k, x),
            Location::One | Location::Deep => {
                if k <= r {
                    T::zero()
                } else {
                    T::nan()
                }
            }
            Location::Affine(n) => self.level(n)?.affine_derivative(k, x),
            Location::Bridge(n) => self.level(n)?.bridge_derivative(k, x),
            Location::Oscillator { n, .. } => self.level(n)?.osc_derivative(k, x),
        })
    }

    /// `f^j(x)` by plain float iteration.
    pub fn iterate(&self, x: T, j: usize) -> Result<T, Error> {
        let mut v = x;
        for _ in 0..j {
            v = self.eval(v)?;
        }
        Ok(v)
    }

    /// Write `x, f(x), f'(x), piece_id` rows for the given points.
    pub fn write_samples_csv<W: std::io::Write>(&self, out: W, xs: &[T]) -> Result<(), Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "f(x)", "f'(x)", "piece_id"])?;
        for &x in xs {
            let d = if self.params.k_max >= 1 {
                self.eval_derivative(x, 1)?
            } else {
                T::nan()
            };
            w.write_record([
                format!("{x}"),
                format!("{}", self.eval(x)?),
                format!("{d}"),
                self.piece_id(x)?,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Exact level boundaries `(y_{n+1}, w_n, x_n, y_n)`.
pub fn level_breakpoints(params: &MapParams, n: u32) -> [BigRational; 4] {
    let lc = params.level(n);
    let (_, y_next) = level_x_y(n + 1);
    [y_next, lc.w, lc.x, lc.y]
}

pub type Map = PiecewiseMap<f64>;
pub type Map32 = PiecewiseMap<f32>;

#[cfg(test)]
mod tests {
    use super::*;

    fn m1() -> Map {
        build_map(&MapParams::new(14.0, 1).unwrap(), 4).unwrap()
    }

    #[test]
    fn special_values() {
        for r in 1..=2 {
            let m = build_map(&MapParams::new(14.0, r).unwrap(), 3).unwrap();
            assert_eq!(m.eval(0.0).unwrap(), 0.0);
            assert_eq!(m.eval(1.0).unwrap(), 0.0);
            assert_eq!(m.eval(0.5).unwrap(), 4.0);
            assert_eq!(m.eval(4.0).unwrap(), 4.0);
            let l = m.params().big_lambda();
            for i in 0..=100 {
                let x = 2.5 / l * i as f64 / 100.0;
                assert_eq!(m.eval(x).unwrap(), l * x);
            }
        }
    }

    #[test]
    fn level_one_values() {
        let m = m1();
        assert!((m.eval(2.0).unwrap() - 1.0 / 7.0).abs() < 1e-15);
        assert!((m.eval(2.5).unwrap() - 5.0 / 28.0).abs() < 1e-15);
        assert!((m.eval(2.0 + 1.0 / 26.0).unwrap() - 5.0 / 28.0).abs() < 1e-14);
        assert!((m.eval(2.0 + 2.0 / 26.0).unwrap() - 13.0 / 112.0).abs() < 1e-14);
        // w_1 = 13/8 + 3/224
        let w1 = 13.0 / 8.0 + 3.0 / 224.0;
        assert!((m.eval(w1).unwrap() - 2.0 / 196.0).abs() < 1e-15);
    }

    #[test]
    fn derivative_examples() {
        let m = m1();
        assert_eq!(m.eval_derivative(0.0, 1).unwrap(), 14.0);
        assert_eq!(m.eval_derivative(0.5, 1).unwrap(), 0.0);
        // left of x_n the bridge ends with slope 2λ^{-(n-1)r}
        for n in 1..=4u32 {
            let lv = m.level(n).unwrap();
            let want = 2.0 * 14f64.powi(-(n as i32 - 1));
            let got = lv.bridge_derivative(1, lv.x);
            assert!((got - want).abs() < 1e-9 * want, "n={n} {got} {want}");
            let right = m.eval_derivative(lv.x, 1).unwrap();
            assert!((right - want).abs() < 1e-9 * want);
        }
        assert!(matches!(m.eval_derivative(0.3, 3), Err(Error::DerivativeOrder { .. })));
        assert!(matches!(m.eval(4.5), Err(Error::Domain(_))));
        assert!(m.eval(f64::NAN).is_err());
    }

    #[test]
    fn continuity_across_outer_pieces() {
        for r in 1..=2 {
            let m = build_map(&MapParams::new(14.0, r).unwrap(), 2).unwrap();
            for w in m.outer().windows(2) {
                if w[0].hi != w[1].lo {
                    continue;
                }
                let b = w[0].hi_t;
                for k in 0..=m.params().k_max as usize {
                    let a = w[0].derivative(k, b);
                    let c = w[1].derivative(k, b);
                    let scale = w[0].jet_scale(k).max(w[1].jet_scale(k));
                    assert!((a - c).abs() <= 1e-5 * scale, "{} k={k}: {a} vs {c}", w[0].label);
                }
            }
        }
    }

    #[test]
    fn level_lookup_respects_boundaries() {
        for n in [1u64, 2, 3, 10, 1000, 123456] {
            let y = y_of::<f64>(n);
            let yn1 = y_of::<f64>(n + 1);
            assert_eq!(Map::level_index(yn1), Some(n));
            if n > 1 {
                assert_eq!(Map::level_index(y), Some(n - 1));
            }
            assert_eq!(Map::level_index((y + yn1) / 2.0), Some(n));
        }
        assert_eq!(Map::level_index(1.0 + 1e-12), None);
    }

    #[test]
    fn near_one_is_small() {
        let m = m1();
        for x in [1.0 + 1e-3, 1.0 + 1e-5, 1.0 - 1e-6, 1.0 + 1e-9] {
            let v = m.eval(x).unwrap();
            assert!(v.abs() < 1e-4, "{x} {v}");
        }
        assert_eq!(m.eval_derivative(1.0, 1).unwrap(), 0.0);
        assert!(m.eval_derivative(1.0, 2).unwrap().is_nan());
    }

    #[test]
    fn f32_map_agrees_at_breakpoints() {
        // blend shapes may differ in f32; values pinned by the construction must not
        let p = MapParams::new(14.0, 1).unwrap();
        let m32 = Map32::build(&p, 2).unwrap();
        let m = m1();
        let mut xs = vec![0.0, 0.1, 0.5, 1.0, 2.5, 3.99, 4.0];
        for n in 1..=2 {
            let lc = p.level(n);
            xs.push(rational_to_f64(&lc.w));
            for i in 0..6 {
                xs.push(rational_to_f64(&lc.t_u64(i)));
            }
        }
        for x in xs {
            let a = m.eval(x).unwrap();
            let b = m32.eval(x as f32).unwrap() as f64;
            assert!((a - b).abs() < 1e-5 * (1.0 + a.abs()), "{x}: {a} {b}");
        }
    }

    #[test]
    fn samples_csv() {
        let m = m1();
        let mut buf = Vec::new();
        m.write_samples_csv(&mut buf, &[0.0, 0.5, 2.01, 1.7, 3.0]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("x,f(x),f'(x),piece_id\n"));
        assert!(s.contains(",O1:1\n"));
    }
}
