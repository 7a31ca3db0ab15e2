use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::Error;
use crate::markov_graph::{subgraph_hn, vertex_interval, Successor, Vertex};
use crate::params::{level_x_y, MapParams};
use crate::scalar::{big_ln, rational_to_f64};

/// Lower and upper bounds on `μ_n([a, b])` from the vertex intervals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MassBounds {
    #[serde(serialize_with = "ser_q")]
    pub lower: BigRational,
    #[serde(serialize_with = "ser_q")]
    pub upper: BigRational,
}

fn ser_q<S: serde::Serializer>(q: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(q)
}

/// The maximal-entropy Markov measure on `H_n`: uniform `1/M_n` transitions
/// out of `ScaledOsc(n, 1)`, deterministic elsewhere.
#[derive(Clone, Debug, Serialize)]
pub struct LevelMeasure {
    pub n: u32,
    #[serde(skip)]
    params: MapParams,
    #[serde(serialize_with = "ser_q")]
    pub laps: BigRational,
    /// Weight of each `Osc(n, i)`.
    #[serde(serialize_with = "ser_q")]
    pub lap_weight: BigRational,
    /// Weight of each `ScaledOsc(n, k)`.
    #[serde(serialize_with = "ser_q")]
    pub scaled_weight: BigRational,
    pub total_weight_is_one: bool,
    /// Inflow equals weight at every vertex (exact).
    pub stationary: bool,
    /// `h(μ_n) = c · log M_n` with this exact `c`.
    #[serde(serialize_with = "ser_q")]
    pub entropy_coefficient: BigRational,
    pub entropy: f64,
    pub bins: usize,
    /// Mass per bin of width `4/bins`, each vertex placed at its midpoint.
    pub histogram: Vec<f64>,
}

/// Exact weights, stationarity check, entropy and histogram of `μ_n`.
pub fn measure_mu_n(params: &MapParams, n: u32, bins: usize) -> Result<LevelMeasure, Error> {
    if n == 0 || bins < 2 {
        return Err(Error::InvalidParams("need n ≥ 1 and bins ≥ 2".into()));
    }
    let h = subgraph_hn(params, n)?;
    let m = BigRational::from_integer(params.oscillations_exact(n).into());
    let np1 = BigRational::from_integer(BigInt::from(n + 1));
    let lap_w = (&np1 * &m).recip();
    let sc_w = np1.recip();
    let weight = |v: Vertex| match v {
        Vertex::Osc { .. } => lap_w.clone(),
        _ => sc_w.clone(),
    };
    // class-level transition probabilities: uniform over the target vertices
    let classes = h.classes();
    let mut inflow = vec![BigRational::zero(); classes.len()];
    let mut entropy_coeff = BigRational::zero();
    let mut total = BigRational::zero();
    for c in classes {
        let size = BigRational::from_integer(BigInt::from(c.members.len()));
        let w = weight(c.members.vertices().next().unwrap());
        total += &size * &w;
        let outdeg: u64 = c.targets.iter().map(|&t| classes[t].members.len()).sum();
        let prob = BigRational::from_integer(BigInt::from(outdeg)).recip();
        for &t in &c.targets {
            // each member of t receives size · w · prob
            inflow[t] += &size * &w * &prob;
        }
        if outdeg > 1 {
            // entropy contribution w · log(outdeg); outdeg = M_n here
            if BigRational::from_integer(BigInt::from(outdeg)) != m {
                return Err(Error::Construction("unexpected branching in H_n".into()));
            }
            entropy_coeff += &size * &w;
        }
    }
    let stationary = classes
        .iter()
        .zip(&inflow)
        .all(|(c, f)| *f == weight(c.members.vertices().next().unwrap()));
    let ln_m = big_ln(m.numer());
    let entropy = rational_to_f64(&entropy_coeff) * ln_m;

    let mut histogram = vec![0.0; bins];
    let binw = BigRational::new(BigInt::from(4), BigInt::from(bins as u64));
    let bin_of = |x: &BigRational| -> usize {
        (x / &binw).floor().to_integer().to_usize().unwrap_or(bins).min(bins - 1)
    };
    for c in classes {
        match c.members {
            Successor::Vertex(v) => {
                let (a, b) = vertex_interval(v, params)?;
                let mid = (a + b) / BigRational::from_integer(2.into());
                histogram[bin_of(&mid)] += rational_to_f64(&weight(v));
            }
            Successor::OscRun { from, to, .. } => {
                // lap i has midpoint x_n + (i − 1/2) w/M_n; count laps per bin
                let (x, y) = level_x_y(n);
                let wid = &y - &x;
                let lap_of = |z: BigRational| -> BigInt {
                    // number of laps with midpoint < z
                    let u = (z - &x) * &m / &wid + BigRational::new(1.into(), 2.into());
                    (u.ceil().to_integer() - BigInt::one()).clamp(BigInt::zero(), m.to_integer())
                };
                let (from, to) = (BigInt::from(from), BigInt::from(to));
                let (b0, b1) = (bin_of(&x), bin_of(&y));
                for b in b0..=b1 {
                    let lo = lap_of(&binw * BigRational::from_integer(BigInt::from(b as u64)));
                    let hi = lap_of(&binw * BigRational::from_integer(BigInt::from(b as u64 + 1)));
                    // laps are 1-based; count those in (lo, hi] within [from, to]
                    let lo = lo.max(&from - BigInt::one());
                    let hi = hi.min(to.clone());
                    if hi > lo {
                        let cnt = BigRational::from_integer(hi - lo);
                        histogram[b] += rational_to_f64(&(cnt * &lap_w));
                    }
                }
            }
        }
    }
    Ok(LevelMeasure {
        n,
        params: params.clone(),
        laps: m,
        lap_weight: lap_w,
        scaled_weight: sc_w,
        total_weight_is_one: total.is_one(),
        stationary,
        entropy_coefficient: entropy_coeff,
        entropy,
        bins,
        histogram,
    })
}

impl LevelMeasure {
    /// Bounds on `μ_n([a, b])`: vertices inside count fully, vertices meeting
    /// `[a, b]` count towards the upper bound.
    pub fn mass_in(&self, a: &BigRational, b: &BigRational) -> Result<MassBounds, Error> {
        let n = self.n;
        let mut lower = BigRational::zero();
        let mut upper = BigRational::zero();
        for k in 1..=n {
            let v = Vertex::ScaledOsc { n, k };
            let (lo, hi) = vertex_interval(v, &self.params)?;
            if &lo >= a && &hi <= b {
                lower += &self.scaled_weight;
            }
            if &hi >= a && &lo <= b {
                upper += &self.scaled_weight;
            }
        }
        // laps t_{i−1} ≥ a and t_i ≤ b
        let (x, y) = level_x_y(n);
        let wid = &y - &x;
        let m = self.laps.to_integer();
        let idx = |z: &BigRational| (z - &x) * &self.laps / &wid;
        let clamp = |q: BigInt| q.clamp(BigInt::zero(), m.clone());
        let first_inside = clamp(idx(a).ceil().to_integer()) + BigInt::one();
        let last_inside = clamp(idx(b).floor().to_integer());
        if last_inside >= first_inside {
            lower += BigRational::from_integer(&last_inside - &first_inside + 1) * &self.lap_weight;
        }
        let first_meet = clamp(idx(a).floor().to_integer()) + BigInt::one();
        let last_meet = clamp(idx(b).ceil().to_integer());
        if last_meet >= first_meet && !(b < &x || a > &y) {
            upper += BigRational::from_integer(&last_meet - &first_meet + 1) * &self.lap_weight;
        }
        Ok(MassBounds { lower, upper })
    }

    pub fn histogram_csv(&self) -> Result<String, Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["bin_lo", "bin_hi", "mass"])?;
        let bw = 4.0 / self.bins as f64;
        for (i, &m) in self.histogram.iter().enumerate() {
            w.serialize((i as f64 * bw, (i + 1) as f64 * bw, m))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    #[test]
    fn weights_and_entropy() {
        let p = MapParams::new(14.0, 1).unwrap();
        for n in 1..=4 {
            let mu = measure_mu_n(&p, n, 100).unwrap();
            assert!(mu.total_weight_is_one && mu.stationary);
            assert_eq!(mu.entropy_coefficient, q(1, n as i64 + 1));
            let hist: f64 = mu.histogram.iter().sum();
            assert!((hist - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mass_near_zero() {
        let p = MapParams::new(14.0, 1).unwrap();
        for n in 2..=6 {
            let mu = measure_mu_n(&p, n, 40).unwrap();
            let m = mu.mass_in(&q(0, 1), &q(1, 5)).unwrap();
            assert_eq!(m.lower, q(n as i64, n as i64 + 1));
            assert_eq!(m.upper, m.lower);
            let all = mu.mass_in(&q(0, 1), &q(4, 1)).unwrap();
            assert!(all.lower.is_one());
        }
        let mu = measure_mu_n(&p, 1, 10).unwrap();
        // Osc(1, i) all lie in [2, 5/2]
        let m = mu.mass_in(&q(2, 1), &q(5, 2)).unwrap();
        assert_eq!(m.lower, q(1, 2));
    }
}
