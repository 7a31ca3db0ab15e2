use serde::Serialize;

use super::{level::x_of, level::y_of, PiecewiseMap, HARD_LEVEL_CAP};
use crate::error::Error;
use crate::params::EXACT_LEVEL_CAP;
use crate::scalar::{rational_to_f64, Real};

#[derive(Clone, Debug, Serialize)]
pub struct ProbeStep {
    pub step: usize,
    pub lo: f64,
    pub hi: f64,
    /// `|f^k(J)| / |f^{k-1}(J)|`
    pub growth: f64,
    /// Growth factor at least 4/3.
    pub expanding: bool,
    /// The image contains 0 or some `x_n`, `y_n` in its interior.
    pub meets_partition: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub start: (f64, f64),
    pub covering_step: Option<usize>,
    pub trace: Vec<ProbeStep>,
    /// Every step before covering is expanding or meets the partition.
    pub witnessed: bool,
}

struct Hull<T> {
    lo: T,
    hi: T,
}

impl<T: Real> Hull<T> {
    fn new() -> Self {
        Hull {
            lo: T::infinity(),
            hi: T::neg_infinity(),
        }
    }
    fn add(&mut self, v: T) {
        self.lo = self.lo.min(v);
        self.hi = self.hi.max(v);
    }
}

impl<T: Real> PiecewiseMap<T> {
    /// `λ^{-nr} y_n`, the largest value of `f` on level `n`.
    fn level_top(&self, n: u64) -> T {
        if n <= EXACT_LEVEL_CAP as u64 {
            let (_, y) = crate::params::level_x_y(n as u32);
            T::lit(rational_to_f64(&(self.params.scale_exact(n as u32) * y)))
        } else {
            T::lit((self.params.ln_scale(n as u32)).exp())
        }
    }

    /// Image of `[c, d] ⊆ [y_{n+1}, y_n]`.
    fn level_image(&self, n: u32, c: T, d: T, hull: &mut Hull<T>) -> Result<(), Error> {
        let lv = self.level(n)?;
        let ev = |x: T| -> T {
            if x < lv.w {
                lv.affine_derivative(0, x)
            } else if x < lv.x {
                lv.bridge_derivative(0, x)
            } else {
                lv.osc_derivative(0, x)
            }
        };
        hull.add(ev(c));
        // the last lap ends at the top value
        hull.add(if d >= lv.y { lv.osc_base + lv.osc_amp } else { ev(d) });
        if d <= lv.x {
            return Ok(());
        }
        let uc = lv.lap_coordinate(c.max(lv.x));
        let ud = lv.lap_coordinate(d.min(lv.y));
        let top = lv.osc_base + lv.osc_amp;
        let bottom = lv.osc_base - lv.osc_amp * lv.osc.m;
        if !(lv.osc.laps * T::epsilon() < T::one()) {
            if ud > uc {
                hull.add(top);
                hull.add(bottom);
            }
            return Ok(());
        }
        // interior extrema are the integers strictly inside (uc, ud)
        let first = uc.floor() + T::one();
        let last = ud.ceil() - T::one();
        if first <= last {
            let two = T::lit(2.0);
            let parity = |j: T| j - (j / two).floor() * two;
            if last > first || parity(first) == T::one() {
                hull.add(top);
            }
            if last > first || parity(first) == T::zero() {
                hull.add(bottom);
            }
        }
        Ok(())
    }

    /// `f([a, b])`, assembled from the monotone pieces and lap extrema.
    pub fn interval_image(&self, a: T, b: T) -> Result<(T, T), Error> {
        Self::check_domain(a)?;
        Self::check_domain(b)?;
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let mut hull = Hull::new();
        let one = T::one();
        let y1 = T::lit(2.5);
        for p in self.left_pieces().iter().chain(self.right_pieces()) {
            let lo = a.max(p.lo_t);
            let hi = b.min(p.hi_t);
            if lo <= hi {
                hull.add(p.derivative(0, lo));
                hull.add(p.derivative(0, hi));
            }
        }
        if a <= one && b >= one {
            hull.add(T::zero());
        }
        let lo = a.max(one);
        let hi = b.min(y1);
        if lo < hi {
            // level of each end; None means deeper than the hard cap
            let top_level = Self::level_index(hi).or(if hi > one { Some(HARD_LEVEL_CAP) } else { None });
            let bottom_level = if lo > one { Self::level_index(lo) } else { None };
            match (top_level, bottom_level) {
                (Some(nt), Some(nb)) if nt == nb => {
                    self.level_image(nt as u32, lo, hi, &mut hull)?;
                }
                (Some(nt), bottom) => {
                    self.level_image(nt as u32, y_of::<T>(nt + 1), hi, &mut hull)?;
                    match bottom {
                        Some(nb) => {
                            self.level_image(nb as u32, lo, y_of::<T>(nb), &mut hull)?;
                            if nb > nt + 1 {
                                // full levels nt+1..nb-1 span [f(y_nb), λ^{-(nt+1)r} y_{nt+1}]
                                hull.add(self.level_top(nt + 1));
                            }
                        }
                        None => {
                            hull.add(T::zero());
                            hull.add(self.level_top(nt + 1));
                        }
                    }
                }
                (None, _) => hull.add(T::zero()),
            }
        }
        let tol = T::lit(1e-9);
        if hull.lo < -tol || hull.hi > T::lit(4.0) + tol {
            return Err(Error::Construction(format!(
                "image [{}, {}] leaves [0, 4]",
                hull.lo, hull.hi
            )));
        }
        Ok((hull.lo.max(T::zero()), hull.hi.min(T::lit(4.0))))
    }

    /// Whether the interior of `[lo, hi]` contains some `x_n` or `y_n`, or `lo = 0`.
    pub fn meets_partition(lo: T, hi: T) -> bool {
        let one = T::one();
        if lo == T::zero() || (lo < one && hi > one) || (lo == one && hi > one) {
            return true;
        }
        if lo < one || lo >= T::lit(2.5) {
            return false;
        }
        match Self::level_index(lo) {
            None => hi > lo,
            Some(n) => {
                let next = if lo < x_of::<T>(n) { x_of::<T>(n) } else { y_of::<T>(n) };
                next > lo && next < hi
            }
        }
    }

    /// Iterate exact interval images from `[a, b]` until `[0, 4]` is covered.
    pub fn mixing_probe(&self, a: T, b: T, max_steps: usize) -> Result<ProbeReport, Error> {
        if !(a < b) {
            return Err(Error::InvalidParams("probe interval must be nondegenerate".into()));
        }
        let mut trace = Vec::new();
        let (mut lo, mut hi) = (a, b);
        let mut covering_step = None;
        for step in 1..=max_steps {
            let (nlo, nhi) = self.interval_image(lo, hi)?;
            let growth = (nhi - nlo) / (hi - lo);
            trace.push(ProbeStep {
                step,
                lo: nlo.to_f64_lossy(),
                hi: nhi.to_f64_lossy(),
                growth: growth.to_f64_lossy(),
                expanding: growth >= T::lit(4.0 / 3.0),
                meets_partition: Self::meets_partition(nlo, nhi),
            });
            lo = nlo;
            hi = nhi;
            if lo == T::zero() && hi == T::lit(4.0) {
                covering_step = Some(step);
                break;
            }
            if !(hi > lo) {
                break;
            }
        }
        let last = covering_step.map_or(trace.len(), |k| k - 1);
        let witnessed = trace[..last]
            .iter()
            .all(|s| s.expanding || s.meets_partition);
        Ok(ProbeReport {
            start: (a.to_f64_lossy(), b.to_f64_lossy()),
            covering_step,
            trace,
            witnessed,
        })
    }
}

#[cfg(test)]
mod tests {
    use crate::map::{build_map, Map};
    use crate::params::MapParams;

    #[test]
    fn images_of_simple_intervals() {
        let m = build_map(&MapParams::new(14.0, 1).unwrap(), 4).unwrap();
        assert_eq!(m.interval_image(0.0, 1.0 / 14.0).unwrap(), (0.0, 1.0));
        assert_eq!(m.interval_image(0.0, 1.0).unwrap(), (0.0, 4.0));
        let (lo, hi) = m.interval_image(2.0, 2.5).unwrap();
        assert!((lo - 13.0 / 112.0).abs() < 1e-15 && (hi - 5.0 / 28.0).abs() < 1e-15);
        let (lo, hi) = m.interval_image(1.0, 1.1).unwrap();
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 1e-9);
    }

    #[test]
    fn image_matches_dense_sampling() {
        let m = build_map(&MapParams::new(14.0, 1).unwrap(), 4).unwrap();
        for (a, b) in [(0.1, 0.7), (1.9, 1.95), (2.01, 2.08), (1.3, 1.6), (2.4, 3.9)] {
            let (lo, hi) = m.interval_image(a, b).unwrap();
            let mut slo = f64::INFINITY;
            let mut shi = f64::NEG_INFINITY;
            for i in 0..=200_000 {
                let v = m.eval(a + (b - a) * i as f64 / 200_000.0).unwrap();
                slo = slo.min(v);
                shi = shi.max(v);
            }
            assert!(lo <= slo + 1e-15 && hi >= shi - 1e-15, "[{a},{b}]");
            assert!(slo - lo < 1e-4 && hi - shi < 1e-4, "[{a},{b}] {lo} {slo} {hi} {shi}");
        }
    }

    #[test]
    fn covering_times() {
        for r in 1..=2 {
            let p = MapParams::new(14.0, r).unwrap();
            let m = build_map(&p, 4).unwrap();
            let rep = m.mixing_probe(0.0, p.delta(), 10).unwrap();
            assert_eq!(rep.covering_step, Some(2));
            for n in 1..=4u64 {
                let rep = m
                    .mixing_probe(crate::map::x_of(n), crate::map::y_of(n), 100)
                    .unwrap();
                assert_eq!(rep.covering_step, Some(2 * (n as usize + 1) + 1), "r={r} n={n}");
            }
        }
    }

    #[test]
    fn partition_meeting() {
        assert!(Map::meets_partition(0.0, 0.1));
        assert!(Map::meets_partition(0.9, 1.1));
        assert!(Map::meets_partition(1.9, 2.1));
        assert!(!Map::meets_partition(2.01, 2.02));
        assert!(!Map::meets_partition(0.2, 0.3));
    }
}
