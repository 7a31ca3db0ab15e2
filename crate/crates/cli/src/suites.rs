use mixmap::entropy::{entropy_spectral, entropy_subgraph_exact, separated_upper_bound};
use mixmap::markov_graph::{build_truncated_graph, markov_check};
use mixmap::params::level_x_y;
use mixmap::symbolic::{preimage_codes, roundtrip_check};
use mixmap::{Error, PiecewiseMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

pub struct SuiteResult {
    pub passes: bool,
    pub report: Value,
    pub failures: Vec<String>,
}

impl SuiteResult {
    fn new(report: Value, failures: Vec<String>) -> Self {
        SuiteResult { passes: failures.is_empty(), report, failures }
    }
}

pub fn smoothness(m: &PiecewiseMap<f64>) -> Result<SuiteResult, Error> {
    let p = m.params();
    let mut failures = Vec::new();
    let mut shells = Vec::new();
    for k in 0..=p.r {
        let r = m.verify_smoothness_at_one(k, 200)?;
        if !r.passes {
            failures.push(format!("derivative {k} does not decay towards 1"));
        }
        shells.push(serde_json::to_value(&r)?);
    }
    let torus = m.torus_compatibility(p.r);
    if !torus {
        failures.push("oscillator jets differ at the lap ends".into());
    }
    let tiling = m.tiling_report();
    failures.extend(tiling.defects.iter().map(|d| format!("tiling defect at {d}")));
    let junctions = m.junction_report()?;
    if !junctions.passes {
        failures.push(format!("junction mismatch {:.3e}", junctions.worst));
    }
    let report = json!({
        "derivatives": shells,
        "torus_compatible": torus,
        "tiling": tiling,
        "junctions": junctions,
    });
    Ok(SuiteResult::new(report, failures))
}

pub fn monotone(m: &PiecewiseMap<f64>, n_max: u32) -> Result<SuiteResult, Error> {
    let mut failures = Vec::new();
    let mut levels = Vec::new();
    for n in 1..=n_max {
        let r = m.verify_monotone_pieces(n)?;
        if !r.passes {
            failures.push(format!("level {n}"));
        }
        levels.push(serde_json::to_value(&r)?);
    }
    Ok(SuiteResult::new(Value::Array(levels), failures))
}

pub fn markov(m: &PiecewiseMap<f64>, big_n: u32) -> Result<SuiteResult, Error> {
    let r = markov_check(m, big_n, big_n + 1)?;
    let failures = r.failures.iter().map(|f| format!("{}: {}", f.vertex, f.reason)).collect();
    Ok(SuiteResult::new(serde_json::to_value(&r)?, failures))
}

pub const MIXING_STEP_CAP: usize = 500;

/// Seeded probe intervals of length at least `1e-3`.
pub fn probe_intervals(trials: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..trials)
        .map(|_| {
            let len = 1e-3 * 10f64.powf(rng.random_range(0.0..2.0));
            let a = rng.random_range(0.0..4.0 - len);
            (a, a + len)
        })
        .collect()
}

pub fn mixing(m: &PiecewiseMap<f64>, trials: usize, seed: u64) -> Result<SuiteResult, Error> {
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for (a, b) in probe_intervals(trials, seed) {
        let r = m.mixing_probe(a, b, MIXING_STEP_CAP)?;
        if r.covering_step.is_none() {
            failures.push(format!("[{a}, {b}] not covered in {MIXING_STEP_CAP} steps"));
        }
        rows.push(json!({ "interval": [a, b], "covering_step": r.covering_step, "witnessed": r.witnessed }));
    }
    Ok(SuiteResult::new(json!({ "step_cap": MIXING_STEP_CAP, "trials": rows }), failures))
}

pub fn coding(m: &PiecewiseMap<f64>, trials: usize, seed: u64) -> Result<SuiteResult, Error> {
    let mut failures = Vec::new();
    let mut endpoints = Vec::new();
    for n in 1..=4u32 {
        let (x, y) = level_x_y(n);
        for (name, pt) in [("x", x), ("y", y)] {
            let r = preimage_codes(m, &pt, 3 * (n as usize + 1) + 2)?;
            if r.codes.len() != 2 || !r.stabilized {
                failures.push(format!("{name}_{n} has {} codes", r.codes.len()));
            }
            endpoints.push(json!({ "point": format!("{name}_{n}"), "codes": r.codes.len(), "stabilized": r.stabilized }));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut checked, mut skipped, mut worst) = (0usize, 0usize, 0f64);
    while checked < trials {
        let x: f64 = rng.random_range(0.0..4.0);
        match roundtrip_check(m, x, 30, 1e-12) {
            Ok(r) => {
                checked += 1;
                worst = worst.max(r.error);
                if !r.passes {
                    failures.push(format!("roundtrip at {x}: error {:.3e}", r.error));
                }
            }
            Err(Error::Unresolved(_)) | Err(Error::ExceptionalPoint { .. }) => skipped += 1,
            Err(e) => return Err(e),
        }
    }
    let report = json!({
        "endpoint_codes": endpoints,
        "roundtrip": { "depth": 30, "checked": checked, "skipped": skipped, "worst_error": worst },
    });
    Ok(SuiteResult::new(report, failures))
}

/// `sub(n) ≤ spectral(n + 1) ≤ log λ ≤ upper(1, n)` for each level. With
/// `N = n` only the largest-component value reaches `sub(n)`; it is reported
/// alongside.
pub fn entropy_chain(m: &PiecewiseMap<f64>, levels: &[u32]) -> Result<SuiteResult, Error> {
    let p = m.params();
    let log_l = p.ln_lambda();
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for &n in levels {
        let sub = entropy_subgraph_exact(p, n)?.value_nats;
        let next = entropy_spectral(&build_truncated_graph(p, n + 1)?, 1_000_000, 1e-13)?;
        let same = entropy_spectral(&build_truncated_graph(p, n)?, 1_000_000, 1e-13)?;
        let upper = separated_upper_bound(p, n, 1.0)?.value_nats;
        let spec = next.value_nats;
        let tol = 1e-9;
        let holds = sub <= spec + tol && spec <= log_l + tol && log_l <= upper + tol;
        if !holds {
            failures.push(format!("n={n}: {sub} ≤ {spec} ≤ {log_l} ≤ {upper} fails"));
        }
        rows.push(json!({
            "n": n,
            "subgraph_exact": sub,
            "spectral_next": spec,
            "spectral_same": same.value_nats,
            "largest_component_same": same.details["largest_component_value"],
            "log_lambda": log_l,
            "separated_upper": upper,
            "holds": holds,
        }));
    }
    Ok(SuiteResult::new(Value::Array(rows), failures))
}
