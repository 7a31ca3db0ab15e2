use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::map::{Monotonicity, PiecewiseMap};
use crate::params::{level_x_y, MapParams};
use crate::scalar::rational_to_f64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Special {
    /// `[λ^{-r} y_1, 1/2]`
    LeftHump,
    /// `[1/2, 1]`
    Hump,
    /// `[y_1, 4]`
    Right,
}

/// An element of the partition. The derived order (family, then `n`, then
/// the second index) is the canonical vertex order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Vertex {
    Special(Special),
    /// `[t_{i-1}^n, t_i^n]`, `1 ≤ i ≤ M_n`
    Osc { n: u32, i: u64 },
    /// `[λ^{-kr} x_n, λ^{-kr} y_n]`, `1 ≤ k ≤ n`
    ScaledOsc { n: u32, k: u32 },
    /// `[λ^{-kr} y_{n+1}, λ^{-kr} x_n]`, `0 ≤ k ≤ n`
    Gap { n: u32, k: u32 },
    /// `[λ^{-nr} y_n, λ^{-(n-1)r}]`, `n ≥ 2`
    Tail { n: u32 },
}

pub const LEFT_HUMP: Vertex = Vertex::Special(Special::LeftHump);
pub const HUMP: Vertex = Vertex::Special(Special::Hump);
pub const RIGHT: Vertex = Vertex::Special(Special::Right);

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Special(s) => write!(f, "S:{s:?}"),
            Vertex::Osc { n, i } => write!(f, "Osc({n},{i})"),
            Vertex::ScaledOsc { n, k } => write!(f, "ScaledOsc({n},{k})"),
            Vertex::Gap { n, k } => write!(f, "Gap({n},{k})"),
            Vertex::Tail { n } => write!(f, "Tail({n})"),
        }
    }
}

impl FromStr for Vertex {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let bad = || Error::InvalidVertex(s.to_string());
        if let Some(name) = s.strip_prefix("S:") {
            return Ok(Vertex::Special(match name {
                "LeftHump" => Special::LeftHump,
                "Hump" => Special::Hump,
                "Right" => Special::Right,
                _ => return Err(bad()),
            }));
        }
        let (family, rest) = s.split_once('(').ok_or_else(bad)?;
        let args: Vec<&str> = rest.strip_suffix(')').ok_or_else(bad)?.split(',').collect();
        let num = |j: usize| -> Result<u64, Error> {
            args.get(j).and_then(|a| a.trim().parse().ok()).ok_or_else(bad)
        };
        let small = |j: usize| -> Result<u32, Error> { u32::try_from(num(j)?).map_err(|_| bad()) };
        let v = match (family, args.len()) {
            ("Osc", 2) => Vertex::Osc { n: small(0)?, i: num(1)? },
            ("ScaledOsc", 2) => Vertex::ScaledOsc { n: small(0)?, k: small(1)? },
            ("Gap", 2) => Vertex::Gap { n: small(0)?, k: small(1)? },
            ("Tail", 1) => Vertex::Tail { n: small(0)? },
            _ => return Err(bad()),
        };
        Ok(v)
    }
}

impl Serialize for Vertex {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Vertex {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `M_n` as a `u64`, or an error when it does not fit.
pub fn laps_u64(params: &MapParams, n: u32) -> Result<u64, Error> {
    params
        .oscillations_exact(n)
        .to_u64()
        .ok_or_else(|| Error::InvalidVertex(format!("M_{n} does not fit in 64 bits")))
}

fn q(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// `t_i^n = x_n + i (y_n - x_n) / M_n`.
pub fn lap_point(params: &MapParams, n: u32, i: u64) -> BigRational {
    let (x, y) = level_x_y(n);
    let m = BigRational::from_integer(params.oscillations_exact(n).into());
    &x + (&y - &x) * BigRational::from_integer(BigInt::from(i)) / m
}

impl Vertex {
    /// `n` for the leveled families, 0 for the three specials.
    pub fn level(&self) -> u32 {
        match *self {
            Vertex::Special(_) => 0,
            Vertex::Osc { n, .. }
            | Vertex::ScaledOsc { n, .. }
            | Vertex::Gap { n, .. }
            | Vertex::Tail { n } => n,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Vertex::Special(_) => "Special",
            Vertex::Osc { .. } => "Osc",
            Vertex::ScaledOsc { .. } => "ScaledOsc",
            Vertex::Gap { .. } => "Gap",
            Vertex::Tail { .. } => "Tail",
        }
    }

    /// Second index (`i` or `k`); for specials the position in [`Special`].
    pub fn index(&self) -> Option<u64> {
        match *self {
            Vertex::Special(s) => Some(s as u64),
            Vertex::Osc { i, .. } => Some(i),
            Vertex::ScaledOsc { k, .. } | Vertex::Gap { k, .. } => Some(k as u64),
            Vertex::Tail { .. } => None,
        }
    }

    pub fn validate(&self, params: &MapParams) -> Result<(), Error> {
        let ok = match *self {
            Vertex::Special(_) => true,
            Vertex::Osc { n, i } => n >= 1 && i >= 1 && i <= laps_u64(params, n)?,
            Vertex::ScaledOsc { n, k } => k >= 1 && k <= n,
            Vertex::Gap { n, k } => n >= 1 && k <= n,
            Vertex::Tail { n } => n >= 2,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidVertex(self.to_string()))
        }
    }

    /// Orientation of `f` on the vertex.
    pub fn monotonicity(&self) -> Monotonicity {
        match *self {
            Vertex::Osc { i, .. } if i % 2 == 0 => Monotonicity::Decreasing,
            Vertex::Special(Special::Hump) => Monotonicity::Decreasing,
            _ => Monotonicity::Increasing,
        }
    }
}

/// Realized closed interval of `v`, exact.
pub fn vertex_interval(v: Vertex, params: &MapParams) -> Result<(BigRational, BigRational), Error> {
    v.validate(params)?;
    let s = |k: u32| params.scale_exact(k);
    Ok(match v {
        Vertex::Special(Special::LeftHump) => (s(1) * q(5, 2), q(1, 2)),
        Vertex::Special(Special::Hump) => (q(1, 2), BigRational::one()),
        Vertex::Special(Special::Right) => (q(5, 2), q(4, 1)),
        Vertex::Osc { n, i } => (lap_point(params, n, i - 1), lap_point(params, n, i)),
        Vertex::ScaledOsc { n, k } => {
            let (x, y) = level_x_y(n);
            (s(k) * x, s(k) * y)
        }
        Vertex::Gap { n, k } => {
            let (x, _) = level_x_y(n);
            let (_, y1) = level_x_y(n + 1);
            (s(k) * y1, s(k) * x)
        }
        Vertex::Tail { n } => {
            let (_, y) = level_x_y(n);
            (s(n) * y, s(n - 1))
        }
    })
}

pub fn vertex_interval_f64(v: Vertex, params: &MapParams) -> Result<(f64, f64), Error> {
    let (a, b) = vertex_interval(v, params)?;
    Ok((rational_to_f64(&a), rational_to_f64(&b)))
}

/// Exact image `f(J)` of a vertex interval, from the exact endpoint images.
pub fn vertex_image<T: crate::scalar::Real>(
    map: &PiecewiseMap<T>,
    v: Vertex,
) -> Result<(BigRational, BigRational), Error> {
    let (a, b) = vertex_interval(v, map.params())?;
    let fa = map
        .exact_image(&a)
        .ok_or_else(|| Error::Construction(format!("no exact image at {a}")))?;
    let fb = map
        .exact_image(&b)
        .ok_or_else(|| Error::Construction(format!("no exact image at {b}")))?;
    Ok(if fa <= fb { (fa, fb) } else { (fb, fa) })
}

/// All vertices containing the exact point `x` (one or two; none at 0 and
/// in `(1, y_{cap})`).
pub fn vertices_containing_exact(params: &MapParams, x: &BigRational) -> Vec<Vertex> {
    let mut out = Vec::new();
    let zero = BigRational::zero();
    let one = BigRational::one();
    if *x <= zero || *x > q(4, 1) {
        return out;
    }
    let big_l = params.big_lambda_exact();
    let mut z = x.clone();
    let mut k = 0u32;
    while z < one {
        z *= &big_l;
        k += 1;
    }
    if k == 0 {
        if z >= q(5, 2) {
            out.push(RIGHT);
            if z == q(5, 2) {
                if let Ok(m) = laps_u64(params, 1) {
                    out.push(Vertex::Osc { n: 1, i: m });
                }
            }
        } else if z == one {
            out.push(HUMP);
        } else if let Some(n) = PiecewiseMap::<f64>::level_index_exact(&z) {
            level_vertices(params, &z, n, &mut out);
        }
        out.sort();
        return out;
    }
    // x = λ^{-kr} z with z in [1, Λ)
    if z == one {
        out.push(Vertex::Tail { n: k + 1 });
        return out;
    }
    let (_, yk) = level_x_y(k);
    if z == yk {
        out.push(Vertex::ScaledOsc { n: k, k });
        out.push(if k == 1 { LEFT_HUMP } else { Vertex::Tail { n: k } });
    } else if z < yk {
        if let Some(n) = PiecewiseMap::<f64>::level_index_exact(&z) {
            let (xn, _) = level_x_y(n);
            let (_, yn1) = level_x_y(n + 1);
            if z < xn {
                out.push(Vertex::Gap { n, k });
                if z == yn1 {
                    out.push(Vertex::ScaledOsc { n: n + 1, k });
                }
            } else {
                out.push(Vertex::ScaledOsc { n, k });
                if z == xn {
                    out.push(Vertex::Gap { n, k });
                }
            }
        }
    } else if k >= 2 {
        out.push(Vertex::Tail { n: k });
    } else if *x <= q(1, 2) {
        out.push(LEFT_HUMP);
        if *x == q(1, 2) {
            out.push(HUMP);
        }
    } else {
        out.push(HUMP);
    }
    out.sort();
    out.dedup();
    out
}

fn level_vertices(params: &MapParams, z: &BigRational, n: u32, out: &mut Vec<Vertex>) {
    let (xn, yn) = level_x_y(n);
    let (_, yn1) = level_x_y(n + 1);
    if *z < xn {
        out.push(Vertex::Gap { n, k: 0 });
        if *z == yn1 {
            if let Ok(m) = laps_u64(params, n + 1) {
                out.push(Vertex::Osc { n: n + 1, i: m });
            }
        }
        return;
    }
    if *z == xn {
        out.push(Vertex::Gap { n, k: 0 });
    }
    let Ok(m) = laps_u64(params, n) else {
        return;
    };
    let mq = BigRational::from_integer(BigInt::from(m));
    let u = (z - &xn) * mq / (&yn - &xn);
    let j = u.floor().to_integer().to_u64().unwrap_or(m - 1).min(m - 1);
    out.push(Vertex::Osc { n, i: j + 1 });
    if u.is_integer() && j >= 1 {
        out.push(Vertex::Osc { n, i: j });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> MapParams {
        MapParams::new(14.0, 1).unwrap()
    }

    #[test]
    fn intervals_of_examples() {
        let p = p1();
        assert_eq!(vertex_interval(HUMP, &p).unwrap(), (q(1, 2), q(1, 1)));
        assert_eq!(
            vertex_interval(Vertex::ScaledOsc { n: 1, k: 1 }, &p).unwrap(),
            (q(2, 14), q(5, 28))
        );
        assert_eq!(vertex_interval(Vertex::Tail { n: 2 }, &p).unwrap(), (q(13, 1568), q(1, 14)));
        assert!(vertex_interval(Vertex::Osc { n: 1, i: 14 }, &p).is_err());
        assert!(vertex_interval(Vertex::Tail { n: 1 }, &p).is_err());
        assert!(vertex_interval(Vertex::ScaledOsc { n: 1, k: 2 }, &p).is_err());
    }

    #[test]
    fn labels_round_trip() {
        for v in [
            HUMP,
            LEFT_HUMP,
            RIGHT,
            Vertex::Osc { n: 2, i: 5 },
            Vertex::ScaledOsc { n: 3, k: 1 },
            Vertex::Gap { n: 1, k: 0 },
            Vertex::Tail { n: 3 },
        ] {
            assert_eq!(v.to_string().parse::<Vertex>().unwrap(), v);
        }
        assert_eq!(Vertex::Osc { n: 2, i: 5 }.to_string(), "Osc(2,5)");
        assert_eq!(HUMP.to_string(), "S:Hump");
        assert!("Osc(1)".parse::<Vertex>().is_err());
        assert!("S:Left".parse::<Vertex>().is_err());
    }

    #[test]
    fn canonical_order() {
        let mut v = vec![
            Vertex::Tail { n: 2 },
            Vertex::Osc { n: 2, i: 1 },
            RIGHT,
            Vertex::Osc { n: 1, i: 3 },
            HUMP,
        ];
        v.sort();
        assert_eq!(v[0], HUMP);
        assert_eq!(v[2], Vertex::Osc { n: 1, i: 3 });
        assert_eq!(v[4], Vertex::Tail { n: 2 });
    }

    #[test]
    fn containing_vertices() {
        let p = p1();
        let (x1, y1) = level_x_y(1);
        assert_eq!(
            vertices_containing_exact(&p, &x1),
            vec![Vertex::Osc { n: 1, i: 1 }, Vertex::Gap { n: 1, k: 0 }]
        );
        assert_eq!(vertices_containing_exact(&p, &y1), vec![RIGHT, Vertex::Osc { n: 1, i: 13 }]);
        assert_eq!(vertices_containing_exact(&p, &q(1, 14)), vec![Vertex::Tail { n: 2 }]);
        assert_eq!(vertices_containing_exact(&p, &q(3, 4)), vec![HUMP]);
        assert_eq!(vertices_containing_exact(&p, &q(1, 2)), vec![LEFT_HUMP, HUMP]);
        assert_eq!(
            vertices_containing_exact(&p, &q(5, 28)),
            vec![LEFT_HUMP, Vertex::ScaledOsc { n: 1, k: 1 }]
        );
        assert!(vertices_containing_exact(&p, &q(0, 1)).is_empty());
        // every vertex contains its own midpoint and nothing else does
        for v in [
            Vertex::Osc { n: 2, i: 7 },
            Vertex::ScaledOsc { n: 3, k: 2 },
            Vertex::Gap { n: 2, k: 1 },
            Vertex::Gap { n: 3, k: 0 },
            Vertex::Tail { n: 3 },
            LEFT_HUMP,
        ] {
            let (a, b) = vertex_interval(v, &p).unwrap();
            let mid = (a + b) / q(2, 1);
            assert_eq!(vertices_containing_exact(&p, &mid), vec![v]);
        }
    }
}
