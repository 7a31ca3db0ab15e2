use rayon::prelude::*;
use serde::Serialize;

use super::{EntropyReport, Method};
use crate::error::Error;
use crate::map::PiecewiseMap;
use crate::markov_graph::{laps_u64, Vertex};
use crate::params::{level_x_y, MapParams};
use crate::scalar::rational_to_f64;
use crate::symbolic::cylinder;

/// Realized point sets above this size are refused.
pub const MAX_SEPARATED_POINTS: u64 = 100_000;

/// `(1/n) log(Λ^n/ε + 1)`, the Lipschitz bound on `(n, ε)`-separated sets.
/// Flags the regime where the `ε` term dominates.
pub fn separated_upper_bound(params: &MapParams, n: u32, eps: f64) -> Result<EntropyReport, Error> {
    if !(eps > 0.0) || n == 0 {
        return Err(Error::InvalidParams("need ε > 0 and n ≥ 1".into()));
    }
    let nf = n as f64;
    let ll = params.r as f64 * params.ln_lambda();
    // log(Λ^n/ε + 1) = n log Λ − log ε + log(1 + ε Λ^{-n})
    let value = (nf * ll - eps.ln() + (eps * (-nf * ll).exp()).ln_1p()) / nf;
    let dominated = (1.0 / eps).ln() / nf >= ll;
    let mut r = EntropyReport::new(Method::SeparatedUpper, params, value)
        .param("n", n)
        .param("epsilon", eps)
        .detail("lipschitz", params.big_lambda())
        .detail("epsilon_dominated", dominated);
    r.trace = (1..=n)
        .map(|k| {
            let k = k as f64;
            (k, (k * ll - eps.ln() + (eps * (-k * ll).exp()).ln_1p()) / k)
        })
        .collect();
    Ok(r)
}

/// Size of a greedy `(n, ε)`-separated subset of `grid` evenly spaced points
/// of `[0, 4]`, scanned left to right.
pub fn greedy_separated_count(map: &PiecewiseMap<f64>, n: u32, eps: f64, grid: usize) -> Result<usize, Error> {
    let n = n as usize;
    let xs: Vec<f64> = (0..grid).map(|i| 4.0 * i as f64 / (grid - 1) as f64).collect();
    let orbits: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| {
            let mut o = Vec::with_capacity(n);
            let mut y = x;
            for _ in 0..n {
                o.push(y);
                y = map.eval(y)?;
            }
            Ok(o)
        })
        .collect::<Result<_, Error>>()?;
    let mut kept: Vec<usize> = Vec::new();
    let mut window_start = 0;
    for (i, o) in orbits.iter().enumerate() {
        // kept points further than ε at time 0 are separated already
        while window_start < kept.len() && xs[kept[window_start]] < xs[i] - eps {
            window_start += 1;
        }
        let separated = kept[window_start..].iter().all(|&j| {
            orbits[j]
                .iter()
                .zip(o)
                .any(|(a, b)| (a - b).abs() > eps)
        });
        if separated {
            kept.push(i);
        }
    }
    Ok(kept.len())
}

#[derive(Clone, Debug, Serialize)]
pub struct SeparatedSet {
    pub n: u32,
    pub p: u32,
    /// Realized points in word order.
    pub points: Vec<f64>,
    /// One lap width `(y_n − x_n)/M_n`.
    pub delta0: f64,
    pub delta: f64,
    /// Bowen-ball radius used for the closeness check, `1/(2n²)`.
    pub epsilon: f64,
    pub max_orbit_distance: f64,
    pub in_bowen_ball: bool,
    pub min_separation: f64,
    pub pairwise_separated: bool,
}

fn block(n: u32, i: u64) -> impl Iterator<Item = Vertex> {
    std::iter::once(Vertex::Osc { n, i }).chain((1..=n).rev().map(move |k| Vertex::ScaledOsc { n, k }))
}

fn orbit(map: &PiecewiseMap<f64>, x: f64, len: usize) -> Result<Vec<f64>, Error> {
    let mut o = Vec::with_capacity(len);
    let mut y = x;
    for _ in 0..len {
        o.push(y);
        y = map.eval(y)?;
    }
    Ok(o)
}

/// Realize `E_{n,p}`: one point per word of `p` odd lap indices, following
/// `Osc(n, i) → ScaledOsc(n, n) → … → ScaledOsc(n, 1)` for each letter.
/// The points must lie in the Bowen ball of `x_n` and be pairwise
/// `((n+1)p, δ)`-separated, both checked along computed orbits.
pub fn local_entropy_lower(
    map: &PiecewiseMap<f64>,
    n: u32,
    p: u32,
    delta: f64,
) -> Result<(EntropyReport, SeparatedSet), Error> {
    let params = map.params();
    if n == 0 || p == 0 {
        return Err(Error::InvalidParams("need n ≥ 1 and p ≥ 1".into()));
    }
    let m = laps_u64(params, n)?;
    let odd = m.div_ceil(2);
    let count = (odd as u128).checked_pow(p).unwrap_or(u128::MAX);
    if count > MAX_SEPARATED_POINTS as u128 {
        return Err(Error::InvalidParams(format!(
            "{count} points exceeds the cap of {MAX_SEPARATED_POINTS}"
        )));
    }
    let (x, y) = level_x_y(n);
    let width = &y - &x;
    let delta0 = rational_to_f64(&width) / m as f64;
    if !(delta > 0.0 && delta < delta0) {
        return Err(Error::InvalidParams(format!("need 0 < δ < δ_0 = {delta0}")));
    }
    let eps = rational_to_f64(&width);
    let len = ((n + 1) * p) as usize;
    let words: Vec<Vec<u64>> = (0..count as u64)
        .map(|mut c| {
            (0..p)
                .map(|_| {
                    let d = c % odd;
                    c /= odd;
                    2 * d + 1
                })
                .collect::<Vec<_>>()
                .into_iter()
                .rev()
                .collect()
        })
        .collect();
    let points: Vec<f64> = words
        .par_iter()
        .map(|w| {
            let syms: Vec<Vertex> = w.iter().flat_map(|&i| block(n, i)).collect();
            Ok(cylinder(map, &syms)?.midpoint())
        })
        .collect::<Result<_, Error>>()?;
    let orbits: Vec<Vec<f64>> = points
        .par_iter()
        .map(|&x| orbit(map, x, len))
        .collect::<Result<_, Error>>()?;
    let base = orbit(map, rational_to_f64(&x), len)?;
    let max_dist = orbits
        .iter()
        .flat_map(|o| o.iter().zip(&base).map(|(a, b)| (a - b).abs()))
        .fold(0.0, f64::max);
    let in_ball = max_dist <= eps + 1e-10;
    let min_sep = (0..orbits.len())
        .into_par_iter()
        .map(|i| {
            orbits[i + 1..]
                .iter()
                .map(|o| {
                    o.iter()
                        .zip(&orbits[i])
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    let separated = min_sep > delta + 1e-10;
    let value = (odd as f64).ln() / (n + 1) as f64;
    let mut r = EntropyReport::new(Method::SeparatedLocalLower, params, value)
        .param("n", n)
        .param("p", p)
        .param("delta", delta)
        .detail("cardinality", count as u64)
        .detail("in_bowen_ball", in_ball)
        .detail("pairwise_separated", separated)
        .detail("realized_value", (count as f64).ln() / len as f64);
    r.trace = vec![(p as f64, (count as f64).ln() / len as f64)];
    let set = SeparatedSet {
        n,
        p,
        points,
        delta0,
        delta,
        epsilon: eps,
        max_orbit_distance: max_dist,
        in_bowen_ball: in_ball,
        min_separation: min_sep,
        pairwise_separated: separated,
    };
    Ok((r, set))
}

#[derive(Clone, Debug, Serialize)]
pub struct DerivativeRadius {
    /// `λ^r`, attained at the fixed point 0 and bounding `|f'|`.
    pub exact: f64,
    pub derivative_at_zero: f64,
    pub sampled_sup_derivative: f64,
    /// `min_{k ≤ K} (sup_x |(f^k)'(x)|)^{1/k}` over sampled `x` (0 included).
    pub sampled_inf: f64,
    pub trace: Vec<(u32, f64)>,
}

pub fn spectral_radius_of_derivative(
    map: &PiecewiseMap<f64>,
    k_max_iter: u32,
    samples: usize,
) -> Result<DerivativeRadius, Error> {
    let params = map.params();
    let mut xs = vec![0.0];
    // Weyl points in (0, 4)
    let g = 0.618_033_988_749_894_9;
    xs.extend((1..samples).map(|i| 4.0 * ((i as f64 * g).fract())));
    let d0 = map.eval_derivative(0.0, 1)?;
    let mut sup1 = 0.0f64;
    let mut best = vec![0.0f64; k_max_iter as usize];
    for &x in &xs {
        let mut y = x;
        let mut log_d = 0.0;
        for k in 0..k_max_iter as usize {
            let d = map.eval_derivative(y, 1)?.abs();
            if k == 0 {
                sup1 = sup1.max(d);
            }
            log_d += d.ln();
            best[k] = best[k].max(log_d);
            y = map.eval(y)?;
        }
    }
    let trace: Vec<(u32, f64)> = best
        .iter()
        .enumerate()
        .map(|(k, &l)| (k as u32 + 1, (l / (k + 1) as f64).exp()))
        .collect();
    let sampled_inf = trace.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    Ok(DerivativeRadius {
        exact: params.big_lambda(),
        derivative_at_zero: d0,
        sampled_sup_derivative: sup1,
        sampled_inf,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map::build_map;

    #[test]
    fn upper_bound_formula() {
        let p = MapParams::new(14.0, 1).unwrap();
        let r = separated_upper_bound(&p, 10, 0.1).unwrap();
        let direct = (14f64.powi(10) * 10.0 + 1.0).ln() / 10.0;
        assert!((r.value_nats - direct).abs() < 1e-12);
        assert!((r.value_nats - (14f64.ln() + 10f64.ln() / 10.0)).abs() < 1e-9);
        assert_eq!(r.details["epsilon_dominated"], false);
        let r = separated_upper_bound(&p, 2, 1e-9).unwrap();
        assert_eq!(r.details["epsilon_dominated"], true);
    }

    #[test]
    fn greedy_packing_below_bound() {
        let p = MapParams::new(14.0, 1).unwrap();
        let m = build_map(&p, 8).unwrap();
        for n in 1..=3 {
            let c = greedy_separated_count(&m, n, 0.05, 20_000).unwrap();
            let b = separated_upper_bound(&p, n, 0.05).unwrap().value_nats;
            assert!((c as f64).ln() / n as f64 <= b, "n={n} c={c}");
            assert!(c >= 80);
        }
    }

    #[test]
    fn local_sets() {
        let p = MapParams::new(14.0, 1).unwrap();
        let m = build_map(&p, 3).unwrap();
        let d0 = (0.5) / 13.0;
        let (r, s) = local_entropy_lower(&m, 1, 2, d0 / 2.0).unwrap();
        assert_eq!(s.points.len(), 49);
        assert!((r.value_nats - 7f64.ln() / 2.0).abs() < 1e-15);
        assert!(s.in_bowen_ball && s.pairwise_separated, "{s:?}");
        assert!(local_entropy_lower(&m, 1, 2, d0 * 1.01).is_err());
    }

    #[test]
    fn derivative_radius() {
        for r in 1..=2 {
            let p = MapParams::new(14.0, r).unwrap();
            let m = build_map(&p, 4).unwrap();
            let d = spectral_radius_of_derivative(&m, 5, 2000).unwrap();
            assert_eq!(d.exact, 14f64.powi(r as i32));
            assert_eq!(d.derivative_at_zero, d.exact);
            assert!(d.sampled_sup_derivative <= d.exact * (1.0 + 1e-12));
            assert!(d.sampled_inf >= d.exact - 1e-9);
        }
    }
}
