//! Coding of points by itineraries through the partition and back.

use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::Zero;
use serde::Serialize;
use serde_json::Value;

use crate::error::Error;
use crate::map::PiecewiseMap;
use crate::markov_graph::{
    is_edge, vertex_image, vertex_interval, vertices_containing_exact, Vertex,
};
use crate::params::MapParams;
use crate::scalar::rational_to_f64;

/// Iterates closer than this fraction of their vertex width to an endpoint
/// count as exceptional.
pub const EXCEPTIONAL_TOL: f64 = 1e-12;
/// Longest code unrolled while waiting for a cylinder to shrink.
pub const DEPTH_CAP: usize = 10_000;
/// `preimage_codes` stops branching past this many live codes.
pub const CODE_CAP: usize = 4096;

/// A finite head followed by an optional repeating cycle.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Itinerary {
    pub head: Vec<Vertex>,
    pub cycle: Option<Vec<Vertex>>,
}

impl Itinerary {
    /// Checks every consecutive pair, including the seam of the cycle.
    pub fn new(head: Vec<Vertex>, cycle: Option<Vec<Vertex>>, params: &MapParams) -> Result<Self, Error> {
        let it = Itinerary { head, cycle };
        it.check(params)?;
        Ok(it)
    }

    pub fn finite(head: Vec<Vertex>, params: &MapParams) -> Result<Self, Error> {
        Self::new(head, None, params)
    }

    pub fn periodic(cycle: Vec<Vertex>, params: &MapParams) -> Result<Self, Error> {
        Self::new(vec![], Some(cycle), params)
    }

    pub fn check(&self, params: &MapParams) -> Result<(), Error> {
        let mut seq: Vec<Vertex> = self.head.clone();
        if let Some(c) = &self.cycle {
            if c.is_empty() {
                return Err(Error::Parse("empty cycle".into()));
            }
            seq.extend(c);
            seq.push(c[0]);
        }
        if seq.is_empty() {
            return Err(Error::Parse("empty itinerary".into()));
        }
        for v in &seq {
            v.validate(params)?;
        }
        for w in seq.windows(2) {
            if !is_edge(w[0], w[1], params)? {
                return Err(Error::NotAdmissible {
                    from: w[0].to_string(),
                    to: w[1].to_string(),
                });
            }
        }
        Ok(())
    }

    /// The first `len` symbols, unrolling the cycle.
    pub fn prefix(&self, len: usize) -> Vec<Vertex> {
        let mut out: Vec<Vertex> = self.head.iter().take(len).copied().collect();
        if let Some(c) = &self.cycle {
            out.extend(c.iter().cycle().take(len - out.len()));
        }
        out
    }

    pub fn to_json_value(&self) -> Value {
        let mut a: Vec<Value> = self.head.iter().map(|v| Value::String(v.to_string())).collect();
        if let Some(c) = &self.cycle {
            let c: Vec<Value> = c.iter().map(|v| Value::String(v.to_string())).collect();
            a.push(serde_json::json!({ "cycle": c }));
        }
        Value::Array(a)
    }

    pub fn to_json(&self) -> String {
        self.to_json_value().to_string()
    }

    pub fn from_json(s: &str, params: &MapParams) -> Result<Self, Error> {
        let v: Value = serde_json::from_str(s)?;
        let Value::Array(items) = v else {
            return Err(Error::Parse("an itinerary is a JSON array".into()));
        };
        let label = |x: &Value| -> Result<Vertex, Error> {
            x.as_str()
                .ok_or_else(|| Error::Parse(format!("expected a vertex label, found {x}")))?
                .parse()
        };
        let mut head = Vec::new();
        let mut cycle = None;
        for (j, x) in items.iter().enumerate() {
            if let Some(c) = x.get("cycle") {
                if j + 1 != items.len() {
                    return Err(Error::Parse("the cycle block must come last".into()));
                }
                let c = c
                    .as_array()
                    .ok_or_else(|| Error::Parse("cycle must be an array".into()))?;
                cycle = Some(c.iter().map(label).collect::<Result<Vec<_>, _>>()?);
            } else {
                head.push(label(x)?);
            }
        }
        Self::new(head, cycle, params)
    }
}

impl Serialize for Itinerary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json_value().serialize(s)
    }
}

/// `∩_j f^{-j}(D_j)` for a finite admissible word.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cylinder {
    pub symbols: Vec<Vertex>,
    pub lo: f64,
    pub hi: f64,
}

impl Cylinder {
    pub fn diameter(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

fn interval_f64(v: Vertex, params: &MapParams) -> Result<(f64, f64), Error> {
    let (a, b) = vertex_interval(v, params)?;
    Ok((rational_to_f64(&a), rational_to_f64(&b)))
}

/// Families on which `f(x) = Λx`.
fn is_linear(v: Vertex) -> bool {
    matches!(
        v,
        Vertex::ScaledOsc { .. } | Vertex::Gap { k: 1.., .. } | Vertex::Tail { .. }
    )
}

/// `{x ∈ v : f(x) ∈ [c, d]}` through the monotone branch on `v`.
fn pull_back(map: &PiecewiseMap<f64>, v: Vertex, c: f64, d: f64) -> Result<(f64, f64), Error> {
    let params = map.params();
    let (a, b) = interval_f64(v, params)?;
    let (ia, ib) = vertex_image(map, v)?;
    let (fa, fb) = (rational_to_f64(&ia), rational_to_f64(&ib));
    let c = c.max(fa);
    let d = d.min(fb);
    if c > d {
        return Err(Error::NotAdmissible {
            from: v.to_string(),
            to: format!("[{c}, {d}]"),
        });
    }
    if is_linear(v) {
        let l = params.big_lambda();
        return Ok(((c / l).clamp(a, b), (d / l).clamp(a, b)));
    }
    let increasing = v.monotonicity() == crate::map::Monotonicity::Increasing;
    let solve = |t: f64| -> Result<f64, Error> {
        let (mut lo, mut hi) = (a, b);
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                let closer = (map.eval(lo)? - t).abs() <= (map.eval(hi)? - t).abs();
                return Ok(if closer { lo } else { hi });
            }
            let y = map.eval(mid)?;
            if (y < t) == increasing {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    };
    let (p, q) = (solve(c)?, solve(d)?);
    Ok((p.min(q), p.max(q)))
}

/// Realized interval of a finite admissible word, by backward refinement.
pub fn cylinder(map: &PiecewiseMap<f64>, symbols: &[Vertex]) -> Result<Cylinder, Error> {
    let params = map.params();
    let last = *symbols
        .last()
        .ok_or_else(|| Error::Parse("empty word".into()))?;
    let (mut lo, mut hi) = interval_f64(last, params)?;
    for &v in symbols[..symbols.len() - 1].iter().rev() {
        (lo, hi) = pull_back(map, v, lo, hi)?;
    }
    Ok(Cylinder {
        symbols: symbols.to_vec(),
        lo,
        hi,
    })
}

/// The vertex containing `y`, or the reason there is none.
fn classify(params: &MapParams, y: f64, step: usize, strict_endpoints: bool) -> Result<Vertex, Error> {
    let q = BigRational::from_float(y).ok_or(Error::Domain(y))?;
    let vs = vertices_containing_exact(params, &q);
    let exceptional = || Error::ExceptionalPoint { step, value: y };
    match vs.as_slice() {
        [] if y > 1.0 && y < 2.5 => Err(Error::Unresolved(format!(
            "iterate {step} at {y} lies in a level whose laps are not indexable"
        ))),
        [] => Err(exceptional()),
        [v] => {
            let (a, b) = vertex_interval(*v, params)?;
            let tol = (&b - &a) * BigRational::from_float(EXCEPTIONAL_TOL).unwrap();
            if &q - &a <= tol || &b - &q <= tol {
                return Err(exceptional());
            }
            if strict_endpoints && (rational_to_f64(&a) == y || rational_to_f64(&b) == y) {
                return Err(exceptional());
            }
            Ok(*v)
        }
        _ => Err(exceptional()),
    }
}

/// The first `m` symbols `D_0, …, D_{m-1}` of the code of `x`. Inputs equal
/// to a rounded partition endpoint are rejected as exceptional.
pub fn itinerary_of_point(map: &PiecewiseMap<f64>, x: f64, m: usize) -> Result<Itinerary, Error> {
    PiecewiseMap::<f64>::check_domain(x)?;
    let params = map.params();
    let mut head = Vec::with_capacity(m);
    let mut y = x;
    for step in 0..m {
        head.push(classify(params, y, step, step == 0)?);
        if step + 1 < m {
            y = map.eval(y)?;
        }
    }
    Ok(Itinerary { head, cycle: None })
}

/// Code of an exact point, following the exact orbit.
pub fn itinerary_of_exact(map: &PiecewiseMap<f64>, x: &BigRational, m: usize) -> Result<Itinerary, Error> {
    let params = map.params();
    let mut head = Vec::with_capacity(m);
    let mut y = x.clone();
    for step in 0..m {
        let vs = vertices_containing_exact(params, &y);
        match vs.as_slice() {
            [v] => head.push(*v),
            _ => {
                return Err(Error::ExceptionalPoint {
                    step,
                    value: rational_to_f64(&y),
                })
            }
        }
        if step + 1 < m {
            y = map.exact_image(&y).ok_or_else(|| {
                Error::Unresolved(format!("no exact image at iterate {step}"))
            })?;
        }
    }
    Ok(Itinerary { head, cycle: None })
}

#[derive(Clone, Debug, Serialize)]
pub struct PointEstimate {
    pub x: f64,
    pub diameter: f64,
    /// Number of symbols used.
    pub depth: usize,
}

/// A point realizing `it`: the cylinder midpoint for finite codes; for
/// periodic tails the cycle is unrolled until the diameter drops below `tol`.
pub fn point_of_itinerary(map: &PiecewiseMap<f64>, it: &Itinerary, tol: f64) -> Result<PointEstimate, Error> {
    it.check(map.params())?;
    let Some(cycle) = &it.cycle else {
        let c = cylinder(map, &it.head)?;
        return Ok(PointEstimate {
            x: c.midpoint(),
            diameter: c.diameter(),
            depth: it.head.len(),
        });
    };
    let params = map.params();
    // cyl(c^k c_0), grown one period at a time
    let (mut lo, mut hi) = interval_f64(cycle[0], params)?;
    let mut depth = it.head.len() + 1;
    loop {
        for &v in cycle.iter().rev() {
            (lo, hi) = pull_back(map, v, lo, hi)?;
        }
        depth += cycle.len();
        let (mut a, mut b) = (lo, hi);
        for &v in it.head.iter().rev() {
            (a, b) = pull_back(map, v, a, b)?;
        }
        if b - a < tol {
            return Ok(PointEstimate {
                x: 0.5 * (a + b),
                diameter: b - a,
                depth,
            });
        }
        if depth > DEPTH_CAP {
            return Err(Error::NoConvergence(format!(
                "cylinder diameter {} after {depth} symbols",
                b - a
            )));
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PreimageCodes {
    pub depth: usize,
    /// Codes reaching full depth, or closing a cycle of the exact orbit earlier.
    pub codes: Vec<Itinerary>,
    /// Distinct admissible prefixes of each length `1..=depth`.
    pub counts_by_depth: Vec<usize>,
    /// The count is constant over the second half of the depths.
    pub stabilized: bool,
}

#[derive(Clone)]
enum Orbit {
    Exact(BigRational),
    Float(f64),
}

impl Orbit {
    fn rational(&self) -> Option<BigRational> {
        match self {
            Orbit::Exact(q) => Some(q.clone()),
            Orbit::Float(y) => BigRational::from_float(*y),
        }
    }

    fn image(&self, map: &PiecewiseMap<f64>) -> Result<Orbit, Error> {
        Ok(match self {
            Orbit::Exact(q) => match map.exact_image(q) {
                Some(p) => Orbit::Exact(p),
                None => Orbit::Float(map.eval(rational_to_f64(q))?),
            },
            Orbit::Float(y) => Orbit::Float(map.eval(*y)?),
        })
    }
}

/// All admissible words of length `depth` whose cylinder contains `x`.
/// A word whose exact orbit returns to an earlier (vertex, point) pair is
/// closed into an eventually periodic code.
pub fn preimage_codes(map: &PiecewiseMap<f64>, x: &BigRational, depth: usize) -> Result<PreimageCodes, Error> {
    let params = map.params();
    let mut counts = vec![0usize; depth];
    let mut codes = Vec::new();
    // (word, exact points along the word, current point)
    let mut stack: Vec<(Vec<Vertex>, Vec<Option<BigRational>>, Orbit)> = Vec::new();
    let start = Orbit::Exact(x.clone());
    for v in vertices_containing_exact(params, x) {
        stack.push((vec![v], vec![Some(x.clone())], start.clone()));
    }
    while let Some((word, pts, pt)) = stack.pop() {
        counts[word.len() - 1] += 1;
        if word.len() == depth {
            codes.push(Itinerary { head: word, cycle: None });
            continue;
        }
        let next = pt.image(map)?;
        let Some(nq) = next.rational() else { continue };
        if nq.is_zero() {
            continue;
        }
        for w in vertices_containing_exact(params, &nq) {
            if !is_edge(*word.last().unwrap(), w, params)? {
                continue;
            }
            let exact = matches!(next, Orbit::Exact(_)).then(|| nq.clone());
            if let Some(q) = &exact {
                if let Some(p) = word
                    .iter()
                    .zip(&pts)
                    .position(|(&u, s)| u == w && s.as_ref() == Some(q))
                {
                    for c in counts.iter_mut().skip(word.len()) {
                        *c += 1;
                    }
                    codes.push(Itinerary {
                        head: word[..p].to_vec(),
                        cycle: Some(word[p..].to_vec()),
                    });
                    continue;
                }
            }
            let mut w2 = word.clone();
            w2.push(w);
            let mut p2 = pts.clone();
            p2.push(exact);
            stack.push((w2, p2, next.clone()));
        }
        if stack.len() > CODE_CAP {
            return Err(Error::NoConvergence(format!(
                "more than {CODE_CAP} codes through {x} by depth {}",
                word.len()
            )));
        }
    }
    codes.sort();
    let tail = &counts[depth / 2..];
    let stabilized = tail.windows(2).all(|w| w[0] == w[1]);
    Ok(PreimageCodes {
        depth,
        codes,
        counts_by_depth: counts,
        stabilized,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RoundtripReport {
    pub x: f64,
    pub m: usize,
    pub estimate: f64,
    pub error: f64,
    /// Diameter of the depth-`j` cylinder for `j = 1..=m`.
    pub diameters: Vec<f64>,
    pub passes: bool,
}

/// Code `x` to depth `m`, realize the cylinder and compare.
pub fn roundtrip_check(map: &PiecewiseMap<f64>, x: f64, m: usize, tol: f64) -> Result<RoundtripReport, Error> {
    let it = itinerary_of_point(map, x, m)?;
    let mut diameters = Vec::with_capacity(m);
    for j in 1..=m {
        diameters.push(cylinder(map, &it.head[..j])?.diameter());
    }
    let est = point_of_itinerary(map, &it, tol)?;
    let error = (est.x - x).abs();
    let nested = diameters.windows(2).all(|w| w[1] <= w[0]);
    Ok(RoundtripReport {
        x,
        m,
        estimate: est.x,
        error,
        passes: nested && error <= diameters[m - 1].max(tol),
        diameters,
    })
}

/// Symbols of all codes, deduplicated.
pub fn code_symbols(codes: &[Itinerary]) -> BTreeSet<Vertex> {
    codes
        .iter()
        .flat_map(|c| c.head.iter().chain(c.cycle.iter().flatten()).copied())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::{build_map, x_of, y_of, Map};
    use crate::markov_graph::{HUMP, RIGHT};
    use crate::params::level_x_y;
    use rand::{Rng, SeedableRng};

    fn map() -> Map {
        build_map(&MapParams::new(14.0, 1).unwrap(), 6).unwrap()
    }

    fn gap_cycle(n: u32) -> Vec<Vertex> {
        std::iter::once(Vertex::Gap { n, k: 0 })
            .chain((1..=n).rev().map(|k| Vertex::Gap { n, k }))
            .collect()
    }

    fn osc_cycle(n: u32) -> Vec<Vertex> {
        std::iter::once(Vertex::Osc { n, i: 1 })
            .chain((1..=n).rev().map(|k| Vertex::ScaledOsc { n, k }))
            .collect()
    }

    #[test]
    fn codes_near_four_stay_right() {
        let m = map();
        let it = itinerary_of_point(&m, 4.0 - 1e-6, 4).unwrap();
        assert_eq!(it.head, vec![RIGHT; 4]);
    }

    #[test]
    fn breakpoints_are_exceptional() {
        let m = map();
        for n in 1..=5 {
            assert!(matches!(
                itinerary_of_point(&m, x_of(n), 3),
                Err(Error::ExceptionalPoint { step: 0, .. })
            ));
            let (x, _) = level_x_y(n as u32);
            assert!(itinerary_of_exact(&m, &x, 3).is_err());
        }
    }

    #[test]
    fn codes_are_admissible_and_shift() {
        let m = map();
        let p = m.params().clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut done = 0;
        while done < 30 {
            let x: f64 = rng.random_range(0.0..4.0);
            let Ok(it) = itinerary_of_point(&m, x, 12) else { continue };
            it.check(&p).unwrap();
            let fx = itinerary_of_point(&m, m.eval(x).unwrap(), 11).unwrap();
            assert_eq!(fx.head, it.head[1..]);
            done += 1;
        }
    }

    #[test]
    fn periodic_codes_realize_breakpoints() {
        let m = map();
        let p = m.params().clone();
        let e = point_of_itinerary(&m, &Itinerary::periodic(vec![RIGHT], &p).unwrap(), 1e-12).unwrap();
        assert!((e.x - 4.0).abs() < 1e-12);
        for n in 1..=4u32 {
            for c in [gap_cycle(n), osc_cycle(n)] {
                let it = Itinerary::periodic(c.clone(), &p).unwrap();
                let e = point_of_itinerary(&m, &it, 1e-13).unwrap();
                assert!((e.x - x_of::<f64>(n as u64)).abs() < 1e-12, "n={n} {c:?} {}", e.x);
                // one more period shrinks the cylinder
                let d1 = cylinder(&m, &it.prefix(c.len() + 1)).unwrap().diameter();
                let d2 = cylinder(&m, &it.prefix(2 * c.len() + 1)).unwrap().diameter();
                assert!(d2 < d1);
            }
        }
        let bad = Itinerary::periodic(vec![HUMP, RIGHT, Vertex::Tail { n: 2 }], &p);
        assert!(matches!(bad, Err(Error::NotAdmissible { .. })));
    }

    #[test]
    fn two_codes_at_level_endpoints() {
        let m = map();
        for n in 1..=4u32 {
            let (x, y) = level_x_y(n);
            for (pt, cyc) in [(x, gap_cycle(n)), (y, vec![])] {
                let r = preimage_codes(&m, &pt, 3 * (n as usize + 1) + 2).unwrap();
                assert_eq!(r.codes.len(), 2, "n={n} {:?}", r.codes);
                assert!(r.stabilized);
                assert!(r.codes.iter().all(|c| c.cycle.is_some()));
                if !cyc.is_empty() {
                    assert!(r.codes.contains(&Itinerary { head: vec![], cycle: Some(cyc) }));
                }
            }
            let r = preimage_codes(&m, &level_x_y(n).1, 12).unwrap();
            if n >= 2 {
                assert!(code_symbols(&r.codes).contains(&Vertex::Tail { n }));
            }
        }
        let _ = y_of::<f64>(1);
    }

    #[test]
    fn roundtrip_random_points() {
        let m = map();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut done = 0;
        while done < 20 {
            let x: f64 = rng.random_range(0.0..4.0);
            match roundtrip_check(&m, x, 30, 1e-12) {
                Ok(r) => {
                    assert!(r.passes && r.error < 1e-6, "{r:?}");
                    done += 1;
                }
                Err(Error::Unresolved(_)) | Err(Error::ExceptionalPoint { .. }) => {}
                Err(e) => panic!("{x}: {e}"),
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let p = MapParams::new(14.0, 1).unwrap();
        let o = Vertex::Osc { n: 2, i: 3 };
        let cyc = vec![Vertex::ScaledOsc { n: 2, k: 2 }, Vertex::ScaledOsc { n: 2, k: 1 }, o];
        let it = Itinerary::new(vec![o], Some(cyc), &p).unwrap();
        let s = it.to_json();
        assert_eq!(Itinerary::from_json(&s, &p).unwrap(), it);
        assert!(s.contains("\"cycle\""));
        assert!(Itinerary::from_json("[\"S:LeftHump\", \"Gap(1,1)\"]", &p).is_err());
    }
}
