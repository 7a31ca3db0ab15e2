use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use super::{level_breakpoints, Location, PiecewiseMap};
use crate::error::Error;
use crate::oscillators::jet_tol;
use crate::params::level_x_y;
use crate::scalar::{rational_to_f64, Real};

/// Number of windows `[1 - 2^-j, 1 + 2^-j]` used by the smoothness check.
pub const SMOOTHNESS_WINDOWS: u32 = 12;

/// Relative jet mismatch tolerated at a junction.
pub const JUNCTION_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct WindowMax {
    pub j: u32,
    pub left_max: f64,
    pub right_max: f64,
    pub max: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothnessReport {
    pub k: u32,
    pub samples_per_shell: usize,
    pub windows: Vec<WindowMax>,
    /// First window (1-based) where the decay schedule is enforced.
    pub fitted_from: u32,
    pub passes: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MonotoneReport {
    pub n: u32,
    /// `M_n` in decimal.
    pub laps: String,
    pub laps_checked: u64,
    /// Laps whose sampled slope sign disagrees with the expected orientation.
    pub orientation_failures: Vec<u64>,
    pub gap_increasing: bool,
    pub endpoint_mismatches: Vec<u64>,
    /// Largest relative error of float `f(t_i)` against the exact table.
    pub endpoint_float_error: f64,
    pub minimum_identity: bool,
    pub gap_slope: (f64, f64),
    pub gap_slope_ok: bool,
    pub first_lap_image: (f64, f64),
    pub period_exact: bool,
    pub period_float_error: f64,
    pub passes: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TiledPiece {
    pub label: String,
    pub lo: String,
    pub hi: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct TilingReport {
    pub pieces: Vec<TiledPiece>,
    /// Breakpoints where consecutive pieces fail to meet.
    pub defects: Vec<String>,
    /// `(1, y_{n_max+1})`, covered by levels built on demand.
    pub unmaterialized: (String, String),
    pub passes: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct JunctionEntry {
    pub at: f64,
    pub left: String,
    pub right: String,
    pub k: usize,
    pub left_value: f64,
    pub right_value: f64,
    /// `|left - right| / scale`
    pub mismatch: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct JunctionReport {
    pub entries: Vec<JunctionEntry>,
    pub worst: f64,
    pub passes: bool,
}

fn rstr(q: &BigRational) -> String {
    format!("{q}")
}

/// Weyl sequence in `[0, 1)`.
fn weyl(i: usize) -> f64 {
    const PHI: f64 = 0.618_033_988_749_894_9;
    ((i as f64 + 0.5) * PHI).fract()
}

impl<T: Real> PiecewiseMap<T> {
    /// Maxima of `|f^(k)|` over nested windows around 1, sampled from the
    /// left in `[1 - 2^-j, 1 - 2^-(j+1))` and from the right on levels
    /// `2^j + 1 ..= 2^j + 4`.
    pub fn verify_smoothness_at_one(
        &self,
        k: u32,
        sample_count: usize,
    ) -> Result<SmoothnessReport, Error> {
        if k > self.params.k_max {
            return Err(Error::DerivativeOrder {
                k,
                k_max: self.params.k_max,
            });
        }
        let r = self.params.r;
        let ku = k as usize;
        let one = T::one();
        let mut shells = Vec::new();
        for j in 1..=SMOOTHNESS_WINDOWS {
            let outer = T::lit(0.5f64.powi(j as i32));
            let inner = if j == SMOOTHNESS_WINDOWS {
                T::zero()
            } else {
                T::lit(0.5f64.powi(j as i32 + 1))
            };
            let mut left = 0.0f64;
            for i in 0..sample_count {
                let x = one - outer + (outer - inner) * T::lit(weyl(i));
                if x >= one {
                    continue;
                }
                left = left.max(self.eval_derivative(x, k)?.abs().to_f64_lossy());
            }
            let mut right = 0.0f64;
            let per_level = sample_count.div_ceil(4).max(1);
            for n in (1u64 << j) + 1..=(1u64 << j) + 4 {
                let lv = self.level(n as u32)?;
                for i in 0..per_level {
                    let x = lv.y_next + (lv.y - lv.y_next) * T::lit(weyl(i));
                    let loc = if x < lv.w {
                        Location::Affine(n as u32)
                    } else if x < lv.x {
                        Location::Bridge(n as u32)
                    } else {
                        Location::Oscillator { n: n as u32, lap: None }
                    };
                    right = right.max(self.eval_at(loc, ku, x)?.abs().to_f64_lossy());
                }
            }
            shells.push((j, left, right));
        }
        let mut windows: Vec<WindowMax> = Vec::new();
        let (mut lmax, mut rmax) = (0.0f64, 0.0f64);
        for &(j, l, rr) in shells.iter().rev() {
            lmax = lmax.max(l);
            rmax = rmax.max(rr);
            windows.push(WindowMax {
                j,
                left_max: lmax,
                right_max: rmax,
                max: lmax.max(rmax),
                bound: 0.0,
            });
        }
        windows.reverse();
        let rate = if k <= r {
            (r - k) as f64 / (r + 1) as f64
        } else {
            0.0
        };
        let ln_l = self.params.ln_lambda();
        // the schedule constant is fitted on the first window inside [1 - δ, 1 + δ]
        let j0 = windows
            .iter()
            .position(|w| 0.5f64.powi(w.j as i32) <= self.params.delta())
            .unwrap_or(windows.len() - 1);
        let c = windows[j0].max * (windows[j0].j as f64 * rate * ln_l).exp();
        let mut passes = k <= r;
        for (i, w) in windows.iter_mut().enumerate() {
            w.bound = c * (-(w.j as f64) * rate * ln_l).exp() * (1.0 + 1e-9);
            if i >= j0 {
                passes &= w.max <= w.bound;
            }
        }
        passes &= windows[j0..].windows(2).all(|p| p[1].max < p[0].max);
        passes &= windows.last().unwrap().max < windows[0].max;
        Ok(SmoothnessReport {
            k,
            samples_per_shell: sample_count,
            fitted_from: windows[j0].j,
            windows,
            passes,
        })
    }

    fn sampled_laps(m: u64) -> Vec<u64> {
        const ALL: u64 = 1 << 20;
        const BLOCK: u64 = 4096;
        if m <= ALL {
            return (0..m).collect();
        }
        let mut v: Vec<u64> = (0..BLOCK).collect();
        v.extend((0..BLOCK).map(|i| BLOCK + i * ((m - 2 * BLOCK) / BLOCK)));
        v.extend(m - BLOCK..m);
        v
    }

    /// Monotone structure of level `n`: lap orientations, the exact image
    /// table at the `t_i^n`, slopes on `[y_{n+1}, x_n]` and the period of `x_n`, `y_n`.
    pub fn verify_monotone_pieces(&self, n: u32) -> Result<MonotoneReport, Error> {
        if n == 0 || n > self.n_max {
            return Err(Error::InvalidParams(format!(
                "level {n} is not materialized (n_max = {})",
                self.n_max
            )));
        }
        let lv = self.level(n)?;
        let lc = &lv.consts;
        let mm = lc
            .oscillations
            .as_ref()
            .and_then(|m| m.to_u64())
            .ok_or_else(|| Error::InvalidParams(format!("M_{n} is too large to enumerate")))?;
        let laps = Self::sampled_laps(mm);
        let mf = T::lit(mm as f64);

        let mut orientation_failures = Vec::new();
        for &j in &laps {
            let want_up = j % 2 == 0;
            for i in 0..8 {
                let u = T::lit(j as f64 + (i as f64 + 0.5) / 8.0);
                let x = lv.x + lv.width * (u / mf);
                let d = self.eval_derivative(x, 1)?;
                if (want_up && !(d > T::zero())) || (!want_up && !(d < T::zero())) {
                    orientation_failures.push(j);
                    break;
                }
            }
        }

        // [y_{n+1}, x_n]: increasing with slope in [(4/3) λ^{-nr}, Λ]
        let big_l = T::lit(self.params.big_lambda());
        let lower = T::lit(4.0 / 3.0 * self.params.ln_scale(n).exp());
        let (mut smin, mut smax) = (T::infinity(), T::neg_infinity());
        const GAP_GRID: usize = 2000;
        for i in 0..GAP_GRID {
            let x = lv.y_next + (lv.x - lv.y_next) * T::lit(i as f64 / GAP_GRID as f64);
            let d = self.eval_derivative(x, 1)?;
            smin = smin.min(d);
            smax = smax.max(d);
        }
        let slack = T::lit(1e-9);
        let gap_slope_ok = smin >= lower * (T::one() - slack) && smax <= big_l * (T::one() + slack);
        let gap_increasing = smin > T::zero();

        // exact image table
        let s_n = self.params.scale_exact(n);
        let (_, y_next) = level_x_y(n + 1);
        let mut endpoint_mismatches = Vec::new();
        let mut endpoint_float_error = 0.0f64;
        let mut idx: Vec<u64> = laps.iter().flat_map(|&j| [j, j + 1]).collect();
        idx.dedup();
        for &i in &idx {
            let t = lc.t_u64(i);
            let want = if i == 0 {
                &s_n * &lc.x
            } else if i % 2 == 1 || i == mm {
                &s_n * &lc.y
            } else {
                &s_n * &y_next
            };
            if self.exact_image(&t) != Some(want.clone()) {
                endpoint_mismatches.push(i);
            }
            let wf = rational_to_f64(&want);
            let got = self.eval(T::lit(rational_to_f64(&t)))?.to_f64_lossy();
            endpoint_float_error = endpoint_float_error.max((got - wf).abs() / wf.abs());
        }
        let minimum_identity = &lc.x - (&lc.y - &lc.x) * &lc.m == y_next;
        let im = |i: u64| self.exact_image(&lc.t_u64(i)).map(|q| rational_to_f64(&q));
        let first_lap_image = (im(0).unwrap_or(f64::NAN), im(1).unwrap_or(f64::NAN));

        // x_n, y_n have period n+1
        let mut period_exact = true;
        let mut period_float_error = 0.0f64;
        for p in [&lc.x, &lc.y] {
            let mut z = Some(p.clone());
            for _ in 0..=n {
                z = z.and_then(|v| self.exact_image(&v));
            }
            period_exact &= z.as_ref() == Some(p);
            let pf = rational_to_f64(p);
            let e = (self.iterate(T::lit(pf), n as usize + 1)?.to_f64_lossy() - pf).abs();
            period_float_error = period_float_error.max(e);
        }

        let passes = orientation_failures.is_empty()
            && gap_increasing
            && endpoint_mismatches.is_empty()
            && endpoint_float_error <= 1e-9
            && minimum_identity
            && gap_slope_ok
            && period_exact
            && period_float_error <= 1e-9;
        Ok(MonotoneReport {
            n,
            laps: mm.to_string(),
            laps_checked: laps.len() as u64,
            orientation_failures,
            gap_increasing,
            endpoint_mismatches,
            endpoint_float_error,
            minimum_identity,
            gap_slope: (smin.to_f64_lossy(), smax.to_f64_lossy()),
            gap_slope_ok,
            first_lap_image,
            period_exact,
            period_float_error,
            passes,
        })
    }

    /// `f^(j)(0+) = f^(j)(4-)` for `1 ≤ j ≤ k`, and `f(0) ≡ f(4) mod 4`.
    pub fn torus_compatibility(&self, k: u32) -> bool {
        let first = &self.outer[0];
        let last = self.outer.last().expect("outer pieces");
        let four = T::lit(4.0);
        let v0 = first.derivative(0, T::zero());
        let v4 = last.derivative(0, four);
        let wrap = |v: T| v - (v / four).floor() * four;
        if wrap(v0) != wrap(v4) {
            return false;
        }
        (1..=k as usize).all(|j| first.derivative(j, T::zero()) == last.derivative(j, four))
    }

    /// Exact check that outer pieces and levels `1..=n_max` tile `[0, 4]`
    /// apart from `(1, y_{n_max+1})`.
    pub fn tiling_report(&self) -> TilingReport {
        let mut seq: Vec<(String, BigRational, BigRational)> = Vec::new();
        for (i, p) in self.left_pieces().iter().enumerate() {
            seq.push((format!("L{i} {}", p.label), p.lo.clone(), p.hi.clone()));
        }
        let (_, deep_hi) = level_x_y(self.n_max + 1);
        for n in (1..=self.n_max).rev() {
            let [yn1, w, x, y] = level_breakpoints(&self.params, n);
            seq.push((format!("A{n}"), yn1, w.clone()));
            seq.push((format!("B{n}"), w, x.clone()));
            seq.push((format!("O{n}"), x, y));
        }
        for (i, p) in self.right_pieces().iter().enumerate() {
            seq.push((format!("R{i} {}", p.label), p.lo.clone(), p.hi.clone()));
        }
        let mut defects = Vec::new();
        if !seq[0].1.is_zero() {
            defects.push(format!("{} starts at {}", seq[0].0, seq[0].1));
        }
        let four = BigRational::from_integer(BigInt::from(4));
        if seq.last().unwrap().2 != four {
            defects.push("last piece does not end at 4".into());
        }
        let one = BigRational::one();
        for (lbl, lo, hi) in &seq {
            if lo >= hi {
                defects.push(format!("{lbl} is empty"));
            }
        }
        for w in seq.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            // the deep gap (1, y_{n_max+1})
            if a.2 == one && b.1 == deep_hi {
                continue;
            }
            if a.2 != b.1 {
                defects.push(format!("{} ends at {} but {} starts at {}", a.0, a.2, b.0, b.1));
            }
        }
        TilingReport {
            pieces: seq
                .iter()
                .map(|(l, a, b)| TiledPiece {
                    label: l.clone(),
                    lo: rstr(a),
                    hi: rstr(b),
                })
                .collect(),
            passes: defects.is_empty(),
            defects,
            unmaterialized: (rstr(&one), rstr(&deep_hi)),
        }
    }

    fn location_scale(&self, loc: Location, k: usize, at_hi: bool) -> Result<T, Error> {
        let tol = jet_tol::<T>();
        Ok(match loc {
            Location::Outer(i) => self.outer[i].jet_scale(k),
            Location::One | Location::Deep => T::one(),
            Location::Affine(n) => {
                let lv = self.level(n)?;
                lv.affine_value.abs() + lv.affine_slope.abs()
            }
            Location::Bridge(n) => {
                let lv = self.level(n)?;
                let segs = lv.bridge.profile.segments();
                let s = if at_hi { segs.last() } else { segs.first() };
                let base = if k == 0 { lv.f_w.abs() + lv.h } else { lv.bridge_factor[k] };
                base * s.expect("bridge segments").jet_scale(k, tol)
            }
            Location::Oscillator { n, .. } => {
                let lv = self.level(n)?;
                let prof = if at_hi { &lv.osc.last } else { &lv.osc.first };
                let segs = prof.segments();
                let s = if at_hi { segs.last() } else { segs.first() };
                let base = if k == 0 {
                    lv.osc_base.abs() + lv.osc_amp
                } else {
                    lv.osc_factor[k]
                };
                base * s.expect("lap segments").jet_scale(k, tol)
            }
        })
    }

    /// Jets of the two formulas meeting at every breakpoint up to level
    /// `n_max`, orders `0..=k_max` (only `0..=r` at 1).
    pub fn junction_report(&self) -> Result<JunctionReport, Error> {
        let mut joints: Vec<(T, Location, Location, String, String, usize)> = Vec::new();
        let k_max = self.params.k_max as usize;
        let r = self.params.r as usize;
        let ll = self.left_len;
        for i in 0..self.outer.len() - 1 {
            if i + 1 == ll {
                continue;
            }
            joints.push((
                self.outer[i].hi_t,
                Location::Outer(i),
                Location::Outer(i + 1),
                format!("{} #{i}", self.outer[i].label),
                format!("{} #{}", self.outer[i + 1].label, i + 1),
                k_max,
            ));
        }
        joints.push((
            T::one(),
            Location::Outer(ll - 1),
            Location::One,
            "cap 1".into(),
            "one".into(),
            r,
        ));
        for n in 1..=self.n_max {
            let lv = self.level(n)?;
            let osc = Location::Oscillator { n, lap: None };
            joints.push((lv.w, Location::Affine(n), Location::Bridge(n), format!("A{n}"), format!("B{n}"), k_max));
            joints.push((lv.x, Location::Bridge(n), osc, format!("B{n}"), format!("O{n}"), k_max));
            let (right, rl) = if n == 1 {
                (Location::Outer(ll), "R0".to_string())
            } else {
                (Location::Affine(n - 1), format!("A{}", n - 1))
            };
            joints.push((lv.y, osc, right, format!("O{n}"), rl, k_max));
        }
        let mut entries = Vec::new();
        let mut worst = 0.0f64;
        for (x, a, b, la, lb, kk) in joints {
            for k in 0..=kk {
                let va = self.eval_at(a, k, x)?;
                let vb = self.eval_at(b, k, x)?;
                let scale = self
                    .location_scale(a, k, true)?
                    .max(self.location_scale(b, k, false)?);
                let mismatch = ((va - vb).abs() / scale).to_f64_lossy();
                worst = worst.max(mismatch);
                entries.push(JunctionEntry {
                    at: x.to_f64_lossy(),
                    left: la.clone(),
                    right: lb.clone(),
                    k,
                    left_value: va.to_f64_lossy(),
                    right_value: vb.to_f64_lossy(),
                    mismatch,
                });
            }
        }
        Ok(JunctionReport {
            entries,
            worst,
            passes: worst <= JUNCTION_TOL,
        })
    }
}

#[cfg(test)]
mod tests {
    use crate::map::{build_map, Map};
    use crate::params::MapParams;

    fn map(r: u32, n_max: u32) -> Map {
        build_map(&MapParams::new(14.0, r).unwrap(), n_max).unwrap()
    }

    #[test]
    fn smoothness_windows_decay() {
        for r in 1..=2 {
            let m = map(r, 2);
            for k in 0..=r {
                let rep = m.verify_smoothness_at_one(k, 200).unwrap();
                assert!(rep.passes, "r={r} k={k}: {:?}", rep.windows);
                // for r = 2 windows up to j = 7 still contain the blend next to 1 - δ
                if k == r && r == 1 {
                    assert!(rep.windows[5].max < rep.windows[2].max, "{:?}", rep.windows);
                }
                let j0 = rep.fitted_from as usize - 1;
                assert!(rep.windows[j0 + 3].max < rep.windows[j0].max);
            }
            assert!(!m.verify_smoothness_at_one(r + 1, 50).unwrap().passes);
        }
    }

    #[test]
    fn monotone_levels() {
        let m = map(1, 3);
        for n in 1..=3 {
            let rep = m.verify_monotone_pieces(n).unwrap();
            assert!(rep.passes, "{rep:?}");
        }
        let rep = m.verify_monotone_pieces(1).unwrap();
        assert!((rep.first_lap_image.0 - 1.0 / 7.0).abs() < 1e-16);
        assert!((rep.first_lap_image.1 - 5.0 / 28.0).abs() < 1e-16);
        assert_eq!(m.verify_monotone_pieces(2).unwrap().laps, "47");
        assert!(m.verify_monotone_pieces(4).is_err());
    }

    #[test]
    fn torus() {
        for r in 1..=2 {
            let m = map(r, 1);
            for k in 0..=2 * r {
                assert!(m.torus_compatibility(k));
            }
        }
    }

    #[test]
    fn tiling_and_junctions() {
        for r in 1..=2 {
            let m = map(r, 5);
            let t = m.tiling_report();
            assert!(t.passes, "{:?}", t.defects);
            let j = m.junction_report().unwrap();
            let bad: Vec<_> = j.entries.iter().filter(|e| e.mismatch > 1e-6).collect();
            assert!(j.passes, "{bad:?}");
        }
    }
}
