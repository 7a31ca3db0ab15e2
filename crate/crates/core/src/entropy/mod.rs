//! Entropy estimates for the map and its graph, nats throughout.

mod measure;
mod separated;

use std::collections::BTreeMap;

use num_bigint::ToBigInt;
use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Error;
use crate::markov_graph::{build_truncated_graph, extension_graph, TruncatedGraph, HUMP};
use crate::params::MapParams;
use crate::scalar::big_ln;

pub use measure::{measure_mu_n, LevelMeasure, MassBounds};
pub use separated::{
    greedy_separated_count, local_entropy_lower, separated_upper_bound,
    spectral_radius_of_derivative, DerivativeRadius, SeparatedSet,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SubgraphExact,
    SpectralTruncated,
    LoopCount,
    SeparatedUpper,
    SeparatedLocalLower,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Units {
    Nats,
    Bits,
}

impl Units {
    fn scale(self) -> f64 {
        match self {
            Units::Nats => 1.0,
            Units::Bits => std::f64::consts::LOG2_E,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EntropyReport {
    pub method: Method,
    pub params: BTreeMap<String, Value>,
    pub value_nats: f64,
    /// `(parameter, value)` pairs, e.g. `n ↦ log M_n/(n+1)`.
    pub trace: Vec<(f64, f64)>,
    /// Method-specific diagnostics (residuals, counts, flags).
    pub details: BTreeMap<String, Value>,
}

impl EntropyReport {
    fn new(method: Method, params: &MapParams, value: f64) -> Self {
        let mut p = BTreeMap::new();
        p.insert("lambda".into(), json!(params.lambda));
        p.insert("r".into(), json!(params.r));
        EntropyReport {
            method,
            params: p,
            value_nats: value,
            trace: Vec::new(),
            details: BTreeMap::new(),
        }
    }

    fn param(mut self, k: &str, v: impl Serialize) -> Self {
        self.params.insert(k.into(), json!(v));
        self
    }

    fn detail(mut self, k: &str, v: impl Serialize) -> Self {
        self.details.insert(k.into(), json!(v));
        self
    }

    pub fn to_json(&self, units: Units) -> Result<String, Error> {
        let mut v = serde_json::to_value(self)?;
        if units == Units::Bits {
            let s = units.scale();
            v["value_bits"] = json!(self.value_nats * s);
            v["trace"] = json!(self.trace.iter().map(|&(p, x)| (p, x * s)).collect::<Vec<_>>());
            v["units"] = json!("bits");
        } else {
            v["units"] = json!("nats");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }

    pub fn trace_csv(&self, units: Units) -> Result<String, Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["param", "value"])?;
        for &(p, x) in &self.trace {
            w.serialize((p, x * units.scale()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn ln_laps(params: &MapParams, n: u32) -> f64 {
    params.level(n).ln_oscillations
}

/// `log M_n / (n + 1)`, the entropy of `H_n`, with the trace over `1..=n`.
pub fn entropy_subgraph_exact(params: &MapParams, n: u32) -> Result<EntropyReport, Error> {
    if n == 0 {
        return Err(Error::InvalidParams("n must be at least 1".into()));
    }
    let value = |k: u32| ln_laps(params, k) / (k + 1) as f64;
    let mut r = EntropyReport::new(Method::SubgraphExact, params, value(n))
        .param("n", n)
        .detail("log_lambda", params.ln_lambda());
    if n <= crate::params::EXACT_LEVEL_CAP {
        let m = params.oscillations_exact(n);
        r = r.detail("M_n", m.to_string());
        debug_assert_eq!(big_ln(&m.to_bigint().unwrap()), ln_laps(params, n));
    }
    r.trace = (1..=n).map(|k| (k as f64, value(k))).collect();
    Ok(r)
}

/// Perron root of a nonnegative weighted digraph restricted to one strongly
/// connected component, by power iteration on `B + I`.
#[derive(Clone, Debug, Serialize)]
pub struct PerronEstimate {
    pub rho: f64,
    pub residual: f64,
    pub iterations: usize,
    pub component_size: usize,
}

pub fn perron_root(
    g: &DiGraph<usize, u64>,
    root: Option<NodeIndex>,
    max_iter: usize,
    tol: f64,
) -> Result<PerronEstimate, Error> {
    if g.node_count() == 0 {
        return Err(Error::InvalidParams("empty graph".into()));
    }
    let sccs = tarjan_scc(g);
    let comp = match root {
        Some(r) => sccs.iter().find(|c| c.contains(&r)).unwrap(),
        None => sccs.iter().max_by_key(|c| c.len()).unwrap(),
    };
    let local: BTreeMap<NodeIndex, usize> = comp.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); comp.len()];
    for e in g.raw_edges() {
        if let (Some(&a), Some(&b)) = (local.get(&e.source()), local.get(&e.target())) {
            rows[a].push((b, e.weight as f64));
        }
    }
    if comp.len() == 1 && rows[0].is_empty() {
        // a single vertex without a loop carries no growth
        return Ok(PerronEstimate {
            rho: 0.0,
            residual: 0.0,
            iterations: 0,
            component_size: 1,
        });
    }
    // iterate the transpose action v ↦ v (B + I) (left Perron vector)
    let n = comp.len();
    let mut v = vec![1.0 / n as f64; n];
    let mut rho = 0.0;
    for it in 1..=max_iter {
        let mut w = v.clone();
        for (a, row) in rows.iter().enumerate() {
            for &(b, x) in row {
                w[b] += v[a] * x;
            }
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        let residual = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum::<f64>();
        v = w;
        let new = s - 1.0;
        let done = residual < tol && (new - rho).abs() <= tol * new.abs().max(1.0);
        rho = new;
        if done {
            return Ok(PerronEstimate {
                rho,
                residual,
                iterations: it,
                component_size: n,
            });
        }
    }
    Err(Error::NoConvergence(format!(
        "power iteration did not settle in {max_iter} steps (ρ ≈ {rho})"
    )))
}

/// `log ρ` of the component carrying `S:Hump` (or the largest component).
pub fn entropy_spectral(g: &TruncatedGraph, max_iter: usize, tol: f64) -> Result<EntropyReport, Error> {
    let cg = g.class_graph();
    let root = g.class_of(HUMP).map(NodeIndex::new);
    let est = perron_root(&cg, root, max_iter, tol)?;
    let value = if est.rho > 0.0 { est.rho.ln() } else { f64::NEG_INFINITY };
    // the top level never returns to S:Hump inside the truncation, so the
    // largest eigenvalue over all components can exceed the Hump value
    let mut largest = est.rho;
    for c in tarjan_scc(&cg) {
        if c.len() > 1 || cg.contains_edge(c[0], c[0]) {
            largest = largest.max(perron_root(&cg, Some(c[0]), max_iter, tol)?.rho);
        }
    }
    Ok(EntropyReport::new(Method::SpectralTruncated, &g.params, value)
        .detail("largest_component_value", largest.ln())
        .param("N", g.n_cap)
        .param("kind", g.kind)
        .detail("rho", est.rho)
        .detail("residual", est.residual)
        .detail("iterations", est.iterations)
        .detail("component_classes", est.component_size)
        .detail("vertices", g.vertex_count()))
}

/// Loop growth at `S:Hump`: `(1/k) log #{closed paths of length k}`, traced
/// over `k ≤ max_len`.
pub fn entropy_loop_count(g: &TruncatedGraph, max_len: usize) -> Result<EntropyReport, Error> {
    let h = g
        .class_of(HUMP)
        .ok_or_else(|| Error::InvalidVertex("S:Hump is not in the graph".into()))?;
    let cg = g.class_graph();
    // walks from S:Hump, counted per target class; log-scaled to avoid overflow
    let mut v = vec![0.0; cg.node_count()];
    v[h] = 1.0;
    let mut log_scale = 0.0;
    let mut trace = Vec::new();
    for k in 1..=max_len {
        let mut w = vec![0.0; v.len()];
        for e in cg.raw_edges() {
            w[e.target().index()] += v[e.source().index()] * e.weight as f64;
        }
        let s: f64 = w.iter().cloned().fold(0.0, f64::max);
        if s == 0.0 {
            break;
        }
        w.iter_mut().for_each(|x| *x /= s);
        log_scale += s.ln();
        v = w;
        if v[h] > 0.0 {
            trace.push((k as f64, (log_scale + v[h].ln()) / k as f64));
        }
    }
    let value = trace.last().map_or(f64::NEG_INFINITY, |t| t.1);
    let mut r = EntropyReport::new(Method::LoopCount, &g.params, value)
        .param("N", g.n_cap)
        .param("max_len", max_len);
    r.trace = trace;
    Ok(r)
}

#[derive(Clone, Debug, Serialize)]
pub struct TransienceRow {
    #[serde(rename = "N")]
    pub n_cap: u32,
    pub h_base: f64,
    pub h_extension: f64,
    pub gap: f64,
    pub base_vertices: u64,
    pub extension_vertices: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransienceReport {
    pub log_lambda: f64,
    pub rows: Vec<TransienceRow>,
    pub extra_vertices: Vec<String>,
    /// Every extension truncation has exactly the two extra laps and
    /// contains the base truncation.
    pub strict_inclusion: bool,
    pub bounded: bool,
    /// Gaps strictly decrease along the requested `N`.
    pub gaps_decreasing: bool,
    pub passes: bool,
}

/// Spectral entropies of truncations of `G_r` and of the extension graph at
/// the same `N`, their gaps, and the strict-inclusion witness.
pub fn transience_evidence(params: &MapParams, ns: &[u32]) -> Result<TransienceReport, Error> {
    if ns.iter().any(|&n| n < 3) {
        return Err(Error::InvalidParams("transience evidence needs N ≥ 3".into()));
    }
    let ext = extension_graph(params)?;
    let ll = params.ln_lambda();
    let mut rows = Vec::new();
    let mut strict = true;
    for &n in ns {
        let g = build_truncated_graph(&ext.base, n)?;
        let h = ext.truncation(n)?;
        let emb = ext.embedding(n)?;
        strict &= emb.recovers_base && emb.extension_vertices == emb.base_vertices + 2;
        let hg = entropy_spectral(&g, 1_000_000, 1e-15)?.value_nats;
        let hh = entropy_spectral(&h, 1_000_000, 1e-15)?.value_nats;
        rows.push(TransienceRow {
            n_cap: n,
            h_base: hg,
            h_extension: hh,
            gap: (hh - hg).abs(),
            base_vertices: g.vertex_count(),
            extension_vertices: h.vertex_count(),
        });
    }
    let bounded = rows
        .iter()
        .all(|r| r.h_base <= ll + 1e-9 && r.h_extension <= ll + 1e-9);
    let gaps_decreasing = rows.windows(2).all(|w| w[1].gap < w[0].gap);
    Ok(TransienceReport {
        log_lambda: ll,
        extra_vertices: ext.extra_vertices()?.iter().map(|v| v.to_string()).collect(),
        strict_inclusion: strict,
        bounded,
        gaps_decreasing,
        passes: strict && bounded && gaps_decreasing,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov_graph::subgraph_hn;

    fn p1() -> MapParams {
        MapParams::new(14.0, 1).unwrap()
    }

    #[test]
    fn subgraph_values() {
        let r = entropy_subgraph_exact(&p1(), 2).unwrap();
        assert!((r.trace[0].1 - 13f64.ln() / 2.0).abs() < 1e-15);
        assert!((r.value_nats - 47f64.ln() / 3.0).abs() < 1e-15);
    }

    #[test]
    fn spectral_matches_hn() {
        let p = p1();
        for n in 1..=3 {
            let h = subgraph_hn(&p, n).unwrap();
            let s = entropy_spectral(&h, 100_000, 1e-14).unwrap();
            // independent value: M_n^{1/(n+1)} from the lap count
            let m = p.oscillations_exact(n).to_string().parse::<f64>().unwrap();
            assert!((s.value_nats - m.ln() / (n + 1) as f64).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn self_loop_has_nonnegative_entropy() {
        let mut g = DiGraph::new();
        let a = g.add_node(0);
        g.add_edge(a, a, 1u64);
        let e = perron_root(&g, Some(a), 100, 1e-12).unwrap();
        assert!((e.rho - 1.0).abs() < 1e-12);
    }

    #[test]
    fn truncations_increase_and_stay_below_log_lambda() {
        let p = p1();
        let mut last = f64::NEG_INFINITY;
        for n in 1..=5 {
            let g = build_truncated_graph(&p, n).unwrap();
            let v = entropy_spectral(&g, 1_000_000, 1e-13).unwrap().value_nats;
            assert!(v >= last - 1e-12 && v <= p.ln_lambda() + 1e-9, "N={n} {v}");
            let sub = |k| entropy_subgraph_exact(&p, k).unwrap().value_nats;
            if n >= 2 {
                assert!(v >= sub(n - 1) - 1e-9);
            }
            let r = entropy_spectral(&g, 1_000_000, 1e-13).unwrap();
            let top = r.details["largest_component_value"].as_f64().unwrap();
            assert!(top >= sub(n) - 1e-9 && top <= p.ln_lambda());
            last = v;
        }
    }

    #[test]
    fn loop_count_approaches_spectral() {
        let p = p1();
        let g = build_truncated_graph(&p, 3).unwrap();
        let s = entropy_spectral(&g, 1_000_000, 1e-13).unwrap().value_nats;
        let l = entropy_loop_count(&g, 400).unwrap();
        assert!(l.value_nats <= s + 1e-9);
        assert!(s - l.value_nats < 0.05, "{s} {}", l.value_nats);
    }

    #[test]
    fn report_exports() {
        let r = entropy_subgraph_exact(&p1(), 3).unwrap();
        let j: Value = serde_json::from_str(&r.to_json(Units::Nats).unwrap()).unwrap();
        assert_eq!(j["method"], "subgraph_exact");
        assert_eq!(j["trace"].as_array().unwrap().len(), 3);
        let b: Value = serde_json::from_str(&r.to_json(Units::Bits).unwrap()).unwrap();
        assert!((b["value_bits"].as_f64().unwrap() - r.value_nats / std::f64::consts::LN_2).abs() < 1e-12);
        let c = r.trace_csv(Units::Nats).unwrap();
        assert_eq!(c.lines().count(), 4);
    }
}
