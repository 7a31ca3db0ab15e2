//! The countable partition `V_r`, the graph `G_r` with `J → K` iff
//! `K ⊆ f(J)`, its finite truncations, the subgraphs `H_n` and the
//! extension graph of the modified map.

mod export;
mod vertex;

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::error::Error;
use crate::map::PiecewiseMap;
use crate::params::{level_x_y, MapParams};
use crate::scalar::Real;

pub use export::{GraphDoc, GraphFormat, VertexDoc};
pub use vertex::{
    lap_point, laps_u64, vertex_image, vertex_interval, vertex_interval_f64,
    vertices_containing_exact, Special, Vertex, HUMP, LEFT_HUMP, RIGHT,
};

/// Explicit vertex lists are refused above this size.
pub const EXPLICIT_VERTEX_CAP: u64 = 1 << 21;

/// One entry of a successor list: a single vertex or the laps
/// `Osc(n, from..=to)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Successor {
    Vertex(Vertex),
    OscRun { n: u32, from: u64, to: u64 },
}

impl Successor {
    fn first(&self) -> Vertex {
        match *self {
            Successor::Vertex(v) => v,
            Successor::OscRun { n, from, .. } => Vertex::Osc { n, i: from },
        }
    }

    pub fn len(&self) -> u64 {
        match *self {
            Successor::Vertex(_) => 1,
            Successor::OscRun { from, to, .. } => to + 1 - from,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        let (v, run) = match *self {
            Successor::Vertex(v) => (Some(v), None),
            Successor::OscRun { n, from, to } => (None, Some((n, from..=to))),
        };
        v.into_iter()
            .chain(run.into_iter().flat_map(|(n, r)| r.map(move |i| Vertex::Osc { n, i })))
    }

    /// Exact hull of the member intervals.
    pub fn interval(&self, params: &MapParams) -> Result<(BigRational, BigRational), Error> {
        match *self {
            Successor::Vertex(v) => vertex_interval(v, params),
            Successor::OscRun { n, from, to } => {
                vertex_interval(Vertex::Osc { n, i: to }, params)?;
                Ok((lap_point(params, n, from - 1), lap_point(params, n, to)))
            }
        }
    }
}

/// Out-neighbours of a vertex, sorted in vertex order.
#[derive(Clone, Debug, PartialEq)]
pub struct Successors {
    pub items: Vec<Successor>,
    /// Set when the true out-neighbourhood is infinite and was cut at the level cap.
    pub truncated: bool,
}

impl Successors {
    pub fn iter(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.items.iter().flat_map(|s| s.vertices())
    }

    pub fn count(&self) -> u64 {
        self.items.iter().map(|s| s.len()).sum()
    }
}

/// With `saturate`, a lap count beyond `u64` becomes `u64::MAX`; only
/// membership tests may use such runs.
fn osc_all(params: &MapParams, n: u32, saturate: bool) -> Result<Successor, Error> {
    let to = match laps_u64(params, n) {
        Err(_) if saturate => u64::MAX,
        r => r?,
    };
    Ok(Successor::OscRun { n, from: 1, to })
}

/// Every vertex of level at most `cap`, as runs.
fn all_vertices(params: &MapParams, cap: u32, saturate: bool) -> Result<Vec<Successor>, Error> {
    let mut v = vec![
        Successor::Vertex(LEFT_HUMP),
        Successor::Vertex(HUMP),
        Successor::Vertex(RIGHT),
    ];
    for n in 1..=cap {
        v.push(osc_all(params, n, saturate)?);
        v.extend((1..=n).map(|k| Successor::Vertex(Vertex::ScaledOsc { n, k })));
        v.extend((0..=n).map(|k| Successor::Vertex(Vertex::Gap { n, k })));
        if n >= 2 {
            v.push(Successor::Vertex(Vertex::Tail { n }));
        }
    }
    v.sort_by_key(|s| s.first());
    Ok(v)
}

/// Out-neighbours of `v` in `G_r` among vertices of level at most `level_cap`,
/// generated from the structure of `f` on each family.
pub fn successors(v: Vertex, params: &MapParams, level_cap: u32) -> Result<Successors, Error> {
    successors_impl(v, params, level_cap, false)
}

fn successors_impl(v: Vertex, params: &MapParams, level_cap: u32, saturate: bool) -> Result<Successors, Error> {
    v.validate(params)?;
    let one = |u: Vertex| Successor::Vertex(u);
    let mut truncated = false;
    let mut items = match v {
        Vertex::Osc { n, i } => {
            if i == 1 {
                vec![one(Vertex::ScaledOsc { n, k: n })]
            } else {
                vec![one(Vertex::ScaledOsc { n, k: n }), one(Vertex::Gap { n, k: n })]
            }
        }
        Vertex::ScaledOsc { n, k } => {
            if k >= 2 {
                vec![one(Vertex::ScaledOsc { n, k: k - 1 })]
            } else if n <= level_cap {
                vec![osc_all(params, n, saturate)?]
            } else {
                truncated = true;
                vec![]
            }
        }
        Vertex::Gap { n, k } if k >= 1 => vec![one(Vertex::Gap { n, k: k - 1 })],
        Vertex::Gap { n, .. } => {
            // [λ^{-(n+1)r} y_{n+1}, λ^{-nr}] ∪ ⋃_{m≥n} ScaledOsc(m+1, n) ∪ Gap(m, n)
            truncated = true;
            let mut s = Vec::new();
            if n < level_cap {
                s.push(one(Vertex::Tail { n: n + 1 }));
            }
            for m in n..=level_cap {
                s.push(one(Vertex::Gap { n: m, k: n }));
                if m < level_cap {
                    s.push(one(Vertex::ScaledOsc { n: m + 1, k: n }));
                }
            }
            s
        }
        Vertex::Tail { n } if n >= 3 => vec![
            one(Vertex::ScaledOsc { n: n - 1, k: n - 1 }),
            one(Vertex::Gap { n: n - 1, k: n - 1 }),
            one(Vertex::Tail { n: n - 1 }),
        ],
        Vertex::Tail { .. } => vec![
            one(LEFT_HUMP),
            one(HUMP),
            one(Vertex::ScaledOsc { n: 1, k: 1 }),
            one(Vertex::Gap { n: 1, k: 1 }),
        ],
        Vertex::Special(Special::LeftHump) => vec![one(RIGHT)],
        Vertex::Special(Special::Hump) => {
            truncated = true;
            all_vertices(params, level_cap, saturate)?
        }
        Vertex::Special(Special::Right) => {
            truncated = true;
            let mut s = vec![one(LEFT_HUMP), one(HUMP), one(RIGHT)];
            for n in 1..=level_cap {
                s.push(osc_all(params, n, saturate)?);
                s.push(one(Vertex::Gap { n, k: 0 }));
            }
            s
        }
    };
    items.retain(|s| s.first().level() <= level_cap);
    items.sort_by_key(|s| s.first());
    Ok(Successors { items, truncated })
}

/// Whether `u → w` is an edge of `G_r`.
pub fn is_edge(u: Vertex, w: Vertex, params: &MapParams) -> Result<bool, Error> {
    w.validate(params)?;
    let cap = u.level().max(w.level());
    Ok(successors_impl(u, params, cap, true)?
        .items
        .iter()
        .any(|s| match (*s, w) {
            (Successor::Vertex(a), b) => a == b,
            (Successor::OscRun { n, from, to }, Vertex::Osc { n: m, i }) => {
                n == m && from <= i && i <= to
            }
            _ => false,
        }))
}

/// Open intervals of `(0, 4]` not covered by vertices of level at most `cap`:
/// `(λ^{-kr}, λ^{-kr} y_{cap+1})` for `0 ≤ k < cap` and `(0, λ^{-cap·r} y_{cap+1})`.
pub fn truncation_holes(params: &MapParams, cap: u32) -> Vec<(BigRational, BigRational)> {
    let (_, y) = level_x_y(cap + 1);
    let mut h: Vec<_> = (0..cap)
        .map(|k| {
            let s = params.scale_exact(k);
            (s.clone(), s * &y)
        })
        .collect();
    h.push((BigRational::zero(), params.scale_exact(cap) * &y));
    h.sort();
    h
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphKind {
    /// All vertices of level at most `N`.
    Truncation,
    /// `H_n`: the laps of level `n` and their scaled copies.
    Subgraph { n: u32 },
}

/// Vertices with identical out-neighbourhoods, stored once.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexClass {
    pub members: Successor,
    /// Target classes; every member has an edge to every member of each target.
    pub targets: Vec<usize>,
    pub truncated: bool,
}

/// A finite window onto `G_r` (or onto a subgraph of it), stored as an
/// equitable partition into vertex classes.
#[derive(Clone, Debug)]
pub struct TruncatedGraph {
    pub params: MapParams,
    pub n_cap: u32,
    pub kind: GraphKind,
    classes: Vec<VertexClass>,
}

impl TruncatedGraph {
    fn from_classes(
        params: &MapParams,
        n_cap: u32,
        kind: GraphKind,
        mut members: Vec<(Successor, bool)>,
        edges: impl Fn(&Successor) -> Result<Vec<Successor>, Error>,
    ) -> Result<Self, Error> {
        members.sort_by_key(|m| m.0.first());
        let index: BTreeMap<Vertex, usize> = members
            .iter()
            .enumerate()
            .map(|(i, m)| (m.0.first(), i))
            .collect();
        let class_of = |v: Vertex| -> Result<usize, Error> {
            let (&first, &i) = index
                .range(..=v)
                .next_back()
                .ok_or_else(|| Error::InvalidVertex(v.to_string()))?;
            let m = members[i].0;
            let inside = match (m, v) {
                (Successor::Vertex(a), b) => a == b,
                (Successor::OscRun { n, to, .. }, Vertex::Osc { n: k, i }) => {
                    n == k && first <= v && i <= to
                }
                _ => false,
            };
            if inside {
                Ok(i)
            } else {
                Err(Error::InvalidVertex(format!("{v} is not in the truncation")))
            }
        };
        let mut classes = Vec::with_capacity(members.len());
        for &(m, truncated) in &members {
            let mut targets = Vec::new();
            for s in edges(&m)? {
                // split runs along class boundaries
                let mut cur = s.first();
                loop {
                    let c = class_of(cur)?;
                    targets.push(c);
                    let end = match (members[c].0, s) {
                        (Successor::OscRun { to, .. }, Successor::OscRun { n, to: sto, .. }) => {
                            if to >= sto {
                                break;
                            }
                            Vertex::Osc { n, i: to + 1 }
                        }
                        (Successor::OscRun { .. }, Successor::Vertex(_)) => {
                            return Err(Error::Construction("class split mismatch".into()));
                        }
                        (Successor::Vertex(_), Successor::OscRun { n, to: sto, .. }) => {
                            let Vertex::Osc { i, .. } = cur else { unreachable!() };
                            if i >= sto {
                                break;
                            }
                            Vertex::Osc { n, i: i + 1 }
                        }
                        (Successor::Vertex(_), Successor::Vertex(_)) => break,
                    };
                    cur = end;
                }
            }
            targets.sort_unstable();
            targets.dedup();
            classes.push(VertexClass {
                members: m,
                targets,
                truncated,
            });
        }
        Ok(TruncatedGraph {
            params: params.clone(),
            n_cap,
            kind,
            classes,
        })
    }

    pub fn classes(&self) -> &[VertexClass] {
        &self.classes
    }

    pub fn vertex_count(&self) -> u64 {
        self.classes.iter().map(|c| c.members.len()).sum()
    }

    pub fn edge_count(&self) -> u64 {
        self.classes
            .iter()
            .map(|c| c.members.len() * c.targets.iter().map(|&t| self.classes[t].members.len()).sum::<u64>())
            .sum()
    }

    /// Number of vertices of each family at each level, for comparisons
    /// between truncations.
    pub fn family_counts(&self) -> BTreeMap<(String, u32), u64> {
        let mut m = BTreeMap::new();
        for c in &self.classes {
            let v = c.members.first();
            *m.entry((v.family().to_string(), v.level())).or_insert(0) += c.members.len();
        }
        m
    }

    /// Class-level graph with edge weights equal to the target class size.
    pub fn class_graph(&self) -> DiGraph<usize, u64> {
        let mut g = DiGraph::new();
        let nodes: Vec<_> = (0..self.classes.len()).map(|i| g.add_node(i)).collect();
        for (i, c) in self.classes.iter().enumerate() {
            for &t in &c.targets {
                g.add_edge(nodes[i], nodes[t], self.classes[t].members.len());
            }
        }
        g
    }

    pub fn class_of(&self, v: Vertex) -> Option<usize> {
        let i = self
            .classes
            .partition_point(|c| c.members.first() <= v)
            .checked_sub(1)?;
        let m = self.classes[i].members;
        let inside = match (m, v) {
            (Successor::Vertex(a), b) => a == b,
            (Successor::OscRun { n, from, to }, Vertex::Osc { n: k, i }) => {
                n == k && from <= i && i <= to
            }
            _ => false,
        };
        inside.then_some(i)
    }

    fn check_explicit(&self) -> Result<(), Error> {
        let n = self.vertex_count();
        if n > EXPLICIT_VERTEX_CAP {
            return Err(Error::InvalidParams(format!(
                "{n} vertices is too many to list explicitly (cap {EXPLICIT_VERTEX_CAP})"
            )));
        }
        Ok(())
    }

    /// All vertices in canonical order.
    pub fn vertices(&self) -> Result<Vec<Vertex>, Error> {
        self.check_explicit()?;
        Ok(self.classes.iter().flat_map(|c| c.members.vertices()).collect())
    }

    /// All edges `(u, w)` sorted by `u` then `w`.
    pub fn edges(&self) -> Result<Vec<(Vertex, Vertex)>, Error> {
        self.check_explicit()?;
        let mut out = Vec::new();
        for c in &self.classes {
            for u in c.members.vertices() {
                for &t in &c.targets {
                    out.extend(self.classes[t].members.vertices().map(|w| (u, w)));
                }
            }
        }
        Ok(out)
    }

    /// Vertices whose out-edges were cut by the truncation.
    pub fn truncated_out(&self) -> Result<Vec<Vertex>, Error> {
        self.check_explicit()?;
        Ok(self
            .classes
            .iter()
            .filter(|c| c.truncated)
            .flat_map(|c| c.members.vertices())
            .collect())
    }

    pub fn to_petgraph(&self) -> Result<DiGraph<Vertex, ()>, Error> {
        let vs = self.vertices()?;
        let mut g = DiGraph::with_capacity(vs.len(), 0);
        let idx: BTreeMap<Vertex, _> = vs.iter().map(|&v| (v, g.add_node(v))).collect();
        for (u, w) in self.edges()? {
            g.add_edge(idx[&u], idx[&w], ());
        }
        Ok(g)
    }

    /// Checks every class edge exactly: each target interval lies inside the
    /// image of the source. Returns the offending pairs.
    pub fn validate_edges<T: Real>(&self, map: &PiecewiseMap<T>) -> Result<Vec<(Vertex, Vertex)>, Error> {
        let mut bad = Vec::new();
        for c in &self.classes {
            let reps: Vec<Vertex> = match c.members {
                Successor::Vertex(v) => vec![v],
                Successor::OscRun { n, from, to } => {
                    let mut r = vec![Vertex::Osc { n, i: from }, Vertex::Osc { n, i: to }];
                    if to > from + 1 {
                        r.push(Vertex::Osc { n, i: from + 1 });
                    }
                    r
                }
            };
            for u in reps {
                let (lo, hi) = vertex_image(map, u)?;
                for &t in &c.targets {
                    let m = self.classes[t].members;
                    let (a, b) = m.interval(&self.params)?;
                    if a < lo || b > hi {
                        bad.push((u, m.first()));
                    }
                }
            }
        }
        Ok(bad)
    }
}

/// `G_r` restricted to vertices of level at most `n_cap`.
pub fn build_truncated_graph(params: &MapParams, n_cap: u32) -> Result<TruncatedGraph, Error> {
    let mut members = Vec::new();
    for s in all_vertices(params, n_cap, false)? {
        match s {
            Successor::OscRun { n, from: 1, to } => {
                members.push((Successor::Vertex(Vertex::Osc { n, i: 1 }), false));
                if to >= 2 {
                    members.push((Successor::OscRun { n, from: 2, to }, false));
                }
            }
            other => members.push((other, false)),
        }
    }
    // mark classes whose out-neighbourhood is cut
    for m in members.iter_mut() {
        m.1 = successors(m.0.first(), params, n_cap)?.truncated;
    }
    let p = params.clone();
    TruncatedGraph::from_classes(params, n_cap, GraphKind::Truncation, members, move |m| {
        Ok(successors(m.first(), &p, n_cap)?.items)
    })
}

/// `H_n`: `Osc(n, i) → ScaledOsc(n, n)`, `ScaledOsc(n, k) → ScaledOsc(n, k-1)`,
/// `ScaledOsc(n, 1) → Osc(n, i)`.
pub fn subgraph_hn(params: &MapParams, n: u32) -> Result<TruncatedGraph, Error> {
    if n == 0 {
        return Err(Error::InvalidParams("H_n needs n ≥ 1".into()));
    }
    let laps = osc_all(params, n, false)?;
    let mut members = vec![(laps, false)];
    members.extend((1..=n).map(|k| (Successor::Vertex(Vertex::ScaledOsc { n, k }), false)));
    TruncatedGraph::from_classes(params, n, GraphKind::Subgraph { n }, members, move |m| {
        Ok(match m.first() {
            Vertex::Osc { .. } => vec![Successor::Vertex(Vertex::ScaledOsc { n, k: n })],
            Vertex::ScaledOsc { k: 1, .. } => vec![laps],
            Vertex::ScaledOsc { k, .. } => vec![Successor::Vertex(Vertex::ScaledOsc { n, k: k - 1 })],
            _ => unreachable!(),
        })
    })
}

/// Graph `H` of the modified map `g`: as `G_1` but with `M_2 + 2` laps at level 2.
#[derive(Clone, Debug)]
pub struct ExtensionGraph {
    pub base: MapParams,
    pub params: MapParams,
}

pub const EXTENSION_LEVEL: u32 = 2;
pub const EXTENSION_LAPS: u32 = 2;

pub fn extension_graph(params: &MapParams) -> Result<ExtensionGraph, Error> {
    let base = params.base();
    Ok(ExtensionGraph {
        params: base.clone().with_extra_oscillations(EXTENSION_LEVEL, EXTENSION_LAPS)?,
        base,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingReport {
    pub n_cap: u32,
    pub base_vertices: u64,
    pub extension_vertices: u64,
    pub extra_vertices: Vec<String>,
    /// Removing the extra vertices (and their edges) gives the base truncation.
    pub recovers_base: bool,
    pub strict: bool,
}

impl ExtensionGraph {
    pub fn successors(&self, v: Vertex, level_cap: u32) -> Result<Successors, Error> {
        successors(v, &self.params, level_cap)
    }

    pub fn truncation(&self, n_cap: u32) -> Result<TruncatedGraph, Error> {
        build_truncated_graph(&self.params, n_cap)
    }

    /// The laps `Osc(2, M_2 + 1)`, `Osc(2, M_2 + 2)` absent from the base graph.
    pub fn extra_vertices(&self) -> Result<Vec<Vertex>, Error> {
        let m = laps_u64(&self.base, EXTENSION_LEVEL)?;
        Ok((1..=EXTENSION_LAPS as u64)
            .map(|j| Vertex::Osc { n: EXTENSION_LEVEL, i: m + j })
            .collect())
    }

    /// Compare truncations at `n_cap`. Explicit edge lists are compared when
    /// small enough; otherwise the class structures are.
    pub fn embedding(&self, n_cap: u32) -> Result<EmbeddingReport, Error> {
        let g = build_truncated_graph(&self.base, n_cap)?;
        let h = self.truncation(n_cap)?;
        let extra = if n_cap >= EXTENSION_LEVEL { self.extra_vertices()? } else { vec![] };
        let recovers_base = if h.vertex_count() <= 1 << 16 {
            let hv: Vec<Vertex> = h.vertices()?.into_iter().filter(|v| !extra.contains(v)).collect();
            let he: Vec<(Vertex, Vertex)> = h
                .edges()?
                .into_iter()
                .filter(|(u, w)| !extra.contains(u) && !extra.contains(w))
                .collect();
            hv == g.vertices()? && he == g.edges()?
        } else {
            g.classes.len() == h.classes.len()
                && g.classes.iter().zip(&h.classes).all(|(a, b)| {
                    a.targets == b.targets
                        && a.truncated == b.truncated
                        && match (a.members, b.members) {
                            (
                                Successor::OscRun { n, from, to },
                                Successor::OscRun { n: m, from: f2, to: t2 },
                            ) if n == EXTENSION_LEVEL => {
                                n == m && from == f2 && t2 == to + EXTENSION_LAPS as u64
                            }
                            (x, y) => x == y,
                        }
                })
        };
        Ok(EmbeddingReport {
            n_cap,
            base_vertices: g.vertex_count(),
            extension_vertices: h.vertex_count(),
            extra_vertices: extra.iter().map(|v| v.to_string()).collect(),
            strict: h.vertex_count() > g.vertex_count(),
            recovers_base,
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MarkovFailure {
    pub vertex: String,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct MarkovReport {
    pub max_level: u32,
    pub level_cap: u32,
    pub vertices_checked: u64,
    pub failures: Vec<MarkovFailure>,
    pub passes: bool,
}

/// Covers `[lo, hi]` by closed intervals; true iff the union is all of it.
fn covers(mut parts: Vec<(BigRational, BigRational)>, lo: &BigRational, hi: &BigRational) -> bool {
    parts.sort();
    let mut reach = lo.clone();
    for (a, b) in parts {
        if a > reach {
            return false;
        }
        if b > reach {
            reach = b;
        }
    }
    reach >= *hi
}

/// For every vertex up to `max_level`: `f(J)` is monotone onto the union of
/// its successors (cut at `level_cap ≥ max_level`) together with the
/// truncation holes and possibly `{0}`, all in exact arithmetic.
pub fn markov_check<T: Real>(
    map: &PiecewiseMap<T>,
    max_level: u32,
    level_cap: u32,
) -> Result<MarkovReport, Error> {
    let params = map.params();
    let level_cap = level_cap.max(max_level);
    let holes = truncation_holes(params, level_cap);
    let mut failures = Vec::new();
    let mut checked = 0u64;
    let intervals = |succ: &Successors| -> Result<Vec<(BigRational, BigRational)>, Error> {
        succ.items.iter().map(|s| s.interval(params)).collect()
    };
    let mut check = |v: Vertex,
                     succ: &Successors,
                     succ_iv: &[(BigRational, BigRational)],
                     (lo, hi): (BigRational, BigRational)| {
        checked += 1;
        let mut parts = Vec::with_capacity(succ_iv.len() + 1);
        for (s, (a, b)) in succ.items.iter().zip(succ_iv) {
            if a < &lo || b > &hi {
                failures.push(MarkovFailure {
                    vertex: v.to_string(),
                    reason: format!("successor {:?} leaves the image", s.first().to_string()),
                });
            }
            parts.push((a.clone(), b.clone()));
        }
        for (a, b) in &holes {
            if a < &hi && b > &lo {
                if !succ.truncated {
                    failures.push(MarkovFailure {
                        vertex: v.to_string(),
                        reason: format!("image meets the hole ({a}, {b}) without a truncation marker"),
                    });
                }
                parts.push((a.max(&lo).clone(), b.min(&hi).clone()));
            }
        }
        if !covers(parts, &lo, &hi) {
            failures.push(MarkovFailure {
                vertex: v.to_string(),
                reason: format!("image [{lo}, {hi}] is not a union of successors"),
            });
        }
    };
    let image_at = |x: &BigRational| {
        map.exact_image(x)
            .ok_or_else(|| Error::Construction(format!("no exact image at {x}")))
    };
    for s in all_vertices(params, max_level, false)? {
        match s {
            Successor::OscRun { n, from, to } => {
                let lc = params.level(n);
                let s1 = successors(Vertex::Osc { n, i: 1 }, params, level_cap)?;
                let s2 = successors(Vertex::Osc { n, i: 2.min(to) }, params, level_cap)?;
                let (iv1, iv2) = (intervals(&s1)?, intervals(&s2)?);
                // adjacent laps share an endpoint
                let mut f_prev = image_at(&lc.t_u64(from - 1))?;
                for i in from..=to {
                    let f_next = image_at(&lc.t_u64(i))?;
                    let image = if f_prev <= f_next {
                        (f_prev, f_next.clone())
                    } else {
                        (f_next.clone(), f_prev)
                    };
                    let v = Vertex::Osc { n, i };
                    if i == 1 {
                        check(v, &s1, &iv1, image);
                    } else {
                        check(v, &s2, &iv2, image);
                    }
                    f_prev = f_next;
                }
            }
            Successor::Vertex(v) => {
                let succ = successors(v, params, level_cap)?;
                let iv = intervals(&succ)?;
                check(v, &succ, &iv, vertex_image(map, v)?);
            }
        }
    }
    Ok(MarkovReport {
        max_level,
        level_cap,
        vertices_checked: checked,
        passes: failures.is_empty(),
        failures,
    })
}

/// Exact check that the vertex intervals of level at most `cap` have disjoint
/// interiors and tile `(0, 4]` apart from the truncation holes.
pub fn partition_check(params: &MapParams, cap: u32) -> Result<bool, Error> {
    let mut parts = Vec::new();
    for s in all_vertices(params, cap, false)? {
        parts.push(s.interval(params)?);
    }
    parts.sort();
    for w in parts.windows(2) {
        if w[1].0 < w[0].1 {
            return Ok(false);
        }
    }
    parts.extend(truncation_holes(params, cap));
    Ok(covers(parts, &BigRational::zero(), &BigRational::from_integer(BigInt::from(4))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::build_map;

    fn p1() -> MapParams {
        MapParams::new(14.0, 1).unwrap()
    }

    #[test]
    fn successor_examples() {
        let p = p1();
        let s = |v| successors(v, &p, 3).unwrap().iter().collect::<Vec<_>>();
        assert_eq!(s(Vertex::Osc { n: 2, i: 1 }), vec![Vertex::ScaledOsc { n: 2, k: 2 }]);
        assert_eq!(
            s(Vertex::Osc { n: 2, i: 5 }),
            vec![Vertex::ScaledOsc { n: 2, k: 2 }, Vertex::Gap { n: 2, k: 2 }]
        );
        assert_eq!(s(LEFT_HUMP), vec![RIGHT]);
        let g = successors(Vertex::Gap { n: 1, k: 0 }, &p, 3).unwrap();
        assert!(g.truncated);
        assert_eq!(
            g.iter().collect::<Vec<_>>(),
            vec![
                Vertex::ScaledOsc { n: 2, k: 1 },
                Vertex::ScaledOsc { n: 3, k: 1 },
                Vertex::Gap { n: 1, k: 1 },
                Vertex::Gap { n: 2, k: 1 },
                Vertex::Gap { n: 3, k: 1 },
                Vertex::Tail { n: 2 },
            ]
        );
        let hump = successors(HUMP, &p, 2).unwrap();
        assert!(hump.truncated);
        assert_eq!(hump.count(), 3 + 13 + 1 + 2 + 47 + 2 + 3 + 1);
        assert_eq!(s(Vertex::Gap { n: 1, k: 1 }), vec![Vertex::Gap { n: 1, k: 0 }]);
    }

    #[test]
    fn truncation_sizes() {
        let p = p1();
        let g1 = build_truncated_graph(&p, 1).unwrap();
        assert_eq!(g1.vertex_count(), 19);
        let g2 = build_truncated_graph(&p, 2).unwrap();
        assert_eq!(g2.vertex_count() - g1.vertex_count(), 53);
        let g0 = build_truncated_graph(&p, 0).unwrap();
        assert_eq!(g0.vertices().unwrap(), vec![LEFT_HUMP, HUMP, RIGHT]);
        assert!(g1
            .edges()
            .unwrap()
            .contains(&(Vertex::Gap { n: 1, k: 1 }, Vertex::Gap { n: 1, k: 0 })));
        let g8 = build_truncated_graph(&p, 8).unwrap();
        assert_eq!(
            g8.vertex_count(),
            (1..=8u32).map(|n| laps_u64(&p, n).unwrap() + 2 * n as u64 + 1 + (n >= 2) as u64).sum::<u64>() + 3
        );
    }

    #[test]
    fn hn_counts() {
        let p = p1();
        let h1 = subgraph_hn(&p, 1).unwrap();
        assert_eq!(h1.vertex_count(), 14);
        assert_eq!(h1.edge_count(), 26);
        let g = build_truncated_graph(&p, 3).unwrap();
        let ge = g.edges().unwrap();
        for n in 1..=3 {
            for e in subgraph_hn(&p, n).unwrap().edges().unwrap() {
                assert!(ge.binary_search(&e).is_ok(), "{e:?}");
            }
        }
        assert_eq!(h1.edges().unwrap().len() as u64, h1.edge_count());
    }

    #[test]
    fn edges_are_image_inclusions() {
        let p = p1();
        let m = build_map(&p, 3).unwrap();
        for n in 0..=3 {
            assert!(build_truncated_graph(&p, n).unwrap().validate_edges(&m).unwrap().is_empty());
        }
        // non-edges among retained vertices fail the inclusion
        let g = build_truncated_graph(&p, 2).unwrap();
        let vs = g.vertices().unwrap();
        let es = g.edges().unwrap();
        let ivs: Vec<_> = vs.iter().map(|&v| vertex_interval(v, &p).unwrap()).collect();
        for (a, &u) in vs.iter().enumerate() {
            let (lo, hi) = vertex_image(&m, u).unwrap();
            for (b, &w) in vs.iter().enumerate() {
                let inside = ivs[b].0 >= lo && ivs[b].1 <= hi;
                assert_eq!(inside, es.binary_search(&(u, w)).is_ok(), "{u} -> {w} ({a},{b})");
            }
        }
    }

    #[test]
    fn markov_property_low_levels() {
        for r in 1..=2 {
            let p = MapParams::new(14.0, r).unwrap();
            let m = build_map(&p, 3).unwrap();
            let rep = markov_check(&m, 3, 3).unwrap();
            assert!(rep.passes, "{:?}", &rep.failures[..rep.failures.len().min(5)]);
            assert!(partition_check(&p, 4).unwrap());
        }
    }

    #[test]
    fn extension_embeds_strictly() {
        let e = extension_graph(&p1()).unwrap();
        for n in [1, 2, 3] {
            let rep = e.embedding(n).unwrap();
            assert!(rep.recovers_base);
            assert_eq!(rep.extension_vertices - rep.base_vertices, if n >= 2 { 2 } else { 0 });
        }
        let h = e.truncation(2).unwrap();
        assert_eq!(h.family_counts()[&("Osc".to_string(), 2)], 49);
        let rep = e.embedding(6).unwrap();
        assert!(rep.recovers_base && rep.strict);
    }

    #[test]
    fn edge_predicate() {
        let p = p1();
        assert!(is_edge(HUMP, Vertex::Osc { n: 4, i: 9 }, &p).unwrap());
        assert!(is_edge(Vertex::ScaledOsc { n: 2, k: 1 }, Vertex::Osc { n: 2, i: 47 }, &p).unwrap());
        assert!(!is_edge(Vertex::ScaledOsc { n: 2, k: 2 }, Vertex::Osc { n: 2, i: 1 }, &p).unwrap());
        assert!(is_edge(RIGHT, RIGHT, &p).unwrap());
        // deep levels whose lap counts overflow u64
        assert!(is_edge(RIGHT, Vertex::Gap { n: 39, k: 0 }, &p).unwrap());
        assert!(is_edge(HUMP, Vertex::Tail { n: 30 }, &p).unwrap());
        assert!(!is_edge(Vertex::Gap { n: 39, k: 0 }, Vertex::Tail { n: 39 }, &p).unwrap());
    }
}
