//! Normalized oscillation profiles `s_n : [0, M_n] → [-m_n, 1]` and bridges
//! `φ_n : [0, 1] → [0, 1]`.
//!
//! Every lap of `s_n` is one of four templates on the lap-local coordinate
//! `w ∈ [0, 1]`: the first lap (affine start), interior increasing laps,
//! interior decreasing laps (the mirror image of the increasing template) and
//! the last lap (affine end). Interior laps are exactly congruent, so `s_n`
//! is evaluated through `floor(u)` without materializing the `M_n` laps.

mod glue;
mod profile;

use std::io::Write;

use num_bigint::BigUint;

use crate::error::Error;
use crate::params::{LevelConstants, MapParams};
use crate::poly::Poly;
use crate::scalar::{rational_to_f64, Real};

pub use glue::{Glue, GlueSpec, BISECTION_STEPS, GRID};
pub use profile::{jet_tol, Profile, Segment};

/// Which template a lap uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LapKind {
    First,
    Increasing,
    Decreasing,
    Last,
    /// Lap narrower than the float spacing; evaluated at a mid-lap point.
    Unresolved,
}

#[derive(Clone, Debug)]
pub struct Oscillator<T> {
    pub n: u32,
    pub oscillations: Option<BigUint>,
    /// `M_n` in `T`; may be infinite for very deep levels.
    pub laps: T,
    pub m: T,
    pub k: T,
    pub delta: T,
    pub c: T,
    pub first: Profile<T>,
    pub increasing: Profile<T>,
    pub last: Profile<T>,
    /// Shape factors of the first, interior and last glue.
    pub shapes: [T; 3],
    /// `derivative_bounds[k]` = observed sup of `|s_n^{(k)}|`.
    pub derivative_bounds: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct Bridge<T> {
    pub n: u32,
    pub endpoint_slopes: (T, T),
    pub shape_parameter: T,
    pub profile: Profile<T>,
}

fn check_tol<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(64.0))
}

fn smooth_order(params: &MapParams) -> usize {
    (params.k_max as usize).saturating_sub(1)
}

/// Cap pieces in the lap-local coordinate. `Cδ² = 1/4` makes them independent of δ.
fn cap_min_right<T: Real>(m: T, delta: T) -> Segment<T> {
    // -m + C w^2 on [0, δ]
    Segment::new(T::zero(), delta, Poly::new(vec![-m, T::zero(), T::lit(0.25)]))
}

fn cap_max_left<T: Real>(delta: T) -> Segment<T> {
    // 1 - C (w-1)^2 on [1-δ, 1], v = (w - 1 + δ)/δ
    Segment::new(
        T::one() - delta,
        T::one(),
        Poly::shifted_power(T::lit(-0.25), T::one(), 2).add(&Poly::constant(T::one())),
    )
}

impl<T: Real> Oscillator<T> {
    pub fn build(params: &MapParams, lc: &LevelConstants) -> Result<Self, Error> {
        let big_l = T::lit(params.big_lambda());
        let delta = T::lit(params.delta());
        let c = T::lit(params.cap_c());
        let m = T::lit(lc.m_f64());
        let k = T::lit(lc.k);
        let half = T::lit(0.5);
        let order = smooth_order(params);
        let lo_slope = half.min(k);
        let corridor = (lo_slope, big_l);
        // cap derivatives continued past the cap boundary, in units of δ (2Cδ = Λ/2)
        let min_cap_slope = Poly::linear(big_l * half, big_l * half);
        let max_cap_slope = Poly::linear(big_l * half, -big_l * half);
        let quarter = T::lit(0.25);
        let one = T::one();

        let interior = GlueSpec {
            a: delta,
            b: one - delta,
            va: -m + quarter,
            vb: one - quarter,
            left_slope: min_cap_slope.clone(),
            right_slope: max_cap_slope.clone(),
            unit: delta,
            beta_left: delta * half,
            beta_right: delta * half,
            corridor,
            order,
            label: "oscillator interior lap",
        }
        .build()?;
        let first = GlueSpec {
            a: delta,
            b: one - delta,
            va: k * delta,
            vb: one - quarter,
            left_slope: Poly::constant(k),
            right_slope: max_cap_slope,
            unit: delta,
            beta_left: quarter,
            beta_right: delta * half,
            corridor,
            order,
            label: "oscillator first lap",
        }
        .build()?;
        let last = GlueSpec {
            a: delta,
            b: one - delta,
            va: -m + quarter,
            vb: one - k * delta,
            left_slope: min_cap_slope,
            right_slope: Poly::constant(k),
            unit: delta,
            beta_left: delta * half,
            beta_right: quarter,
            corridor,
            order,
            label: "oscillator last lap",
        }
        .build()?;

        let mut inc = vec![cap_min_right(m, delta)];
        inc.extend(interior.segments);
        inc.push(cap_max_left(delta));

        let mut fst = vec![Segment::new(T::zero(), delta, Poly::linear(T::zero(), k * delta))];
        fst.extend(first.segments);
        fst.push(cap_max_left(delta));

        let mut lst = vec![cap_min_right(m, delta)];
        lst.extend(last.segments);
        lst.push(Segment::new(
            one - delta,
            one,
            Poly::linear(one - k * delta, k * delta),
        ));

        let laps = match &lc.oscillations {
            Some(mm) => T::lit(num_traits::ToPrimitive::to_f64(mm).unwrap_or(f64::INFINITY)),
            None => T::lit(lc.ln_oscillations.exp()),
        };
        let mut osc = Oscillator {
            n: lc.n,
            oscillations: lc.oscillations.clone(),
            laps,
            m,
            k,
            delta,
            c,
            first: Profile::new(fst),
            increasing: Profile::new(inc),
            last: Profile::new(lst),
            shapes: [first.shape, interior.shape, last.shape],
            derivative_bounds: Vec::new(),
        };
        osc.derivative_bounds = (0..=params.k_max as usize)
            .map(|kk| {
                osc.templates()
                    .iter()
                    .map(|p| p.sup_derivative(kk, GRID))
                    .fold(T::zero(), |a, b| a.max(b))
            })
            .collect();
        let failures = osc.property_failures(params);
        if !failures.is_empty() {
            return Err(Error::Construction(format!(
                "oscillator n={}: {}",
                lc.n,
                failures.join("; ")
            )));
        }
        Ok(osc)
    }

    pub fn templates(&self) -> [&Profile<T>; 3] {
        [&self.first, &self.increasing, &self.last]
    }

    /// Lap kind and lap-local coordinate of `u ∈ [0, M_n]`.
    pub fn lap(&self, u: T) -> (LapKind, T) {
        if !(self.laps * T::epsilon() < T::one()) {
            return (LapKind::Unresolved, T::lit(0.5));
        }
        let u = u.max(T::zero()).min(self.laps);
        let mut j = u.floor();
        if j >= self.laps {
            j = self.laps - T::one();
        }
        let local = u - j;
        let kind = if j == T::zero() {
            LapKind::First
        } else if j == self.laps - T::one() {
            LapKind::Last
        } else if (j * T::lit(0.5)).floor() * T::lit(2.0) == j {
            LapKind::Increasing
        } else {
            LapKind::Decreasing
        };
        (kind, local)
    }

    /// Zero-based lap index of `u`, when representable.
    pub fn lap_index(&self, u: T) -> Option<u64> {
        if !(self.laps * T::epsilon() < T::one()) {
            return None;
        }
        let j = u.max(T::zero()).floor().min(self.laps - T::one());
        j.to_u64()
    }

    pub fn value(&self, u: T) -> T {
        self.derivative(0, u)
    }

    pub fn derivative(&self, k: usize, u: T) -> T {
        let (kind, w) = self.lap(u);
        match kind {
            LapKind::First => self.first.derivative(k, w),
            LapKind::Last => self.last.derivative(k, w),
            LapKind::Increasing | LapKind::Unresolved => self.increasing.derivative(k, w),
            LapKind::Decreasing => {
                let d = self.increasing.derivative(k, T::one() - w);
                if k % 2 == 1 {
                    -d
                } else {
                    d
                }
            }
        }
    }

    /// Checks of the profile properties on the validation grid; empty when all hold.
    pub fn property_failures(&self, params: &MapParams) -> Vec<String> {
        let mut out = Vec::new();
        let tol = check_tol::<T>();
        let big_l = T::lit(params.big_lambda());
        let one = T::one();
        let quarter = T::lit(0.25);
        let lo_slope = T::lit(0.5).min(self.k);
        for (name, p, from, to) in [
            ("first", &self.first, T::zero(), one),
            ("interior", &self.increasing, -self.m, one),
            ("last", &self.last, -self.m, one),
        ] {
            if (p.value(T::zero()) - from).abs() > tol {
                out.push(format!("{name} lap starts at {}", p.value(T::zero())));
            }
            let end = p.segments().last().unwrap().derivative_at(0, one);
            if (end - to).abs() > tol {
                out.push(format!("{name} lap ends at {end}"));
            }
            let (smin, smax) = p.slope_range(GRID);
            if smin < -tol {
                out.push(format!("{name} lap is not increasing (min slope {smin})"));
            }
            if smax > big_l * (one + tol) {
                out.push(format!("{name} lap slope {smax} exceeds the bound"));
            }
            let segs = p.segments();
            // glue segments sit strictly between the two end pieces
            for s in &segs[1..segs.len() - 1] {
                for i in 0..=GRID {
                    let d = s.derivative_at(1, T::of_usize(i) / T::of_usize(GRID));
                    if d < lo_slope - tol * (one + lo_slope) {
                        out.push(format!("{name} lap slope {d} below min(1/2, k_n)"));
                        break;
                    }
                }
            }
            if p.max_junction_jump(params.k_max as usize) > jet_tol::<T>() {
                out.push(format!(
                    "{name} lap jets disagree at a junction ({})",
                    p.max_junction_jump(params.k_max as usize)
                ));
            }
            for s in segs {
                for i in 0..=GRID {
                    let v = s.poly.eval(T::of_usize(i) / T::of_usize(GRID));
                    if v < -self.m - tol || v > one + tol {
                        out.push(format!("{name} lap leaves [-m_n, 1] ({v})"));
                        break;
                    }
                }
            }
        }
        // cap values at distance δ from the extrema
        let inner = self.increasing.value(self.delta);
        if (inner - (-self.m + quarter)).abs() > tol {
            out.push(format!("min cap value {inner}"));
        }
        let outer = self.increasing.value(one - self.delta);
        if (outer - (one - quarter)).abs() > tol {
            out.push(format!("max cap value {outer}"));
        }
        out
    }

    /// CSV with columns `u, s_n(u), s_n'(u), lap_index`, `points` samples per lap.
    pub fn write_csv<W: Write>(&self, out: W, points: usize, max_laps: u64) -> Result<(), Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["u", "s_n(u)", "s_n'(u)", "lap_index"])?;
        let laps = self.laps.to_u64().unwrap_or(u64::MAX).min(max_laps);
        for j in 0..laps {
            for i in 0..points {
                let u = T::lit(j as f64) + T::of_usize(i) / T::of_usize(points);
                w.write_record([
                    format!("{}", u),
                    format!("{}", self.value(u)),
                    format!("{}", self.derivative(1, u)),
                    j.to_string(),
                ])?;
            }
        }
        let end = self.laps;
        if laps as f64 == end.to_f64_lossy() {
            w.write_record([
                format!("{}", end),
                format!("{}", self.value(end)),
                format!("{}", self.derivative(1, end)),
                (laps.saturating_sub(1)).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

impl<T: Real> Bridge<T> {
    pub fn build(params: &MapParams, lc: &LevelConstants) -> Result<Self, Error> {
        let (a0, a1) = lc.bridge_slopes(params);
        let (a0, a1) = (T::lit(a0), T::lit(a1));
        let big_l = T::lit(params.big_lambda());
        let half = T::lit(0.5);
        // σ >= φ'(0) keeps φ' >= φ'(0) > (2/3)φ'(0) everywhere
        let g = GlueSpec {
            a: T::zero(),
            b: T::one(),
            va: T::zero(),
            vb: T::one(),
            left_slope: Poly::constant(a0),
            right_slope: Poly::constant(a1),
            unit: T::one(),
            beta_left: half,
            beta_right: half,
            corridor: (a0, big_l),
            order: smooth_order(params),
            label: "bridge",
        }
        .build()?;
        let b = Bridge {
            n: lc.n,
            endpoint_slopes: (a0, a1),
            shape_parameter: g.shape,
            profile: Profile::new(g.segments),
        };
        let failures = b.property_failures(params);
        if !failures.is_empty() {
            return Err(Error::Construction(format!(
                "bridge n={}: {}",
                lc.n,
                failures.join("; ")
            )));
        }
        Ok(b)
    }

    pub fn value(&self, x: T) -> T {
        self.profile.value(x)
    }

    pub fn derivative(&self, k: usize, x: T) -> T {
        self.profile.derivative(k, x)
    }

    fn end_derivative(&self, k: usize) -> T {
        self.profile
            .segments()
            .last()
            .unwrap()
            .derivative_at(k, T::one())
    }

    pub fn property_failures(&self, params: &MapParams) -> Vec<String> {
        let mut out = Vec::new();
        let one = T::one();
        let tol = check_tol::<T>();
        let (a0, a1) = self.endpoint_slopes;
        if self.value(T::zero()).abs() > tol {
            out.push("phi(0) != 0".into());
        }
        if (self.end_derivative(0) - one).abs() > tol {
            out.push(format!("phi(1) = {}", self.end_derivative(0)));
        }
        let segs = self.profile.segments();
        let (first, last) = (&segs[0], &segs[segs.len() - 1]);
        if (self.derivative(1, T::zero()) - a0).abs() > tol * a0 + first.noise(1) {
            out.push("phi'(0) mismatch".into());
        }
        if (self.end_derivative(1) - a1).abs() > tol * a1 + last.noise(1) {
            out.push("phi'(1) mismatch".into());
        }
        let (smin, smax) = self.profile.slope_range(GRID);
        if smin < T::lit(2.0 / 3.0) * a0 {
            out.push(format!("min slope {smin} below (2/3) phi'(0)"));
        }
        if smax > T::lit(params.big_lambda()) * (one + tol) {
            out.push(format!("max slope {smax} above the bound"));
        }
        for k in 2..=params.k_max as usize {
            let jt = jet_tol::<T>();
            let at0 = first.derivative_at(k, T::zero()).abs() / first.jet_scale(k, jt);
            let at1 = last.derivative_at(k, one).abs() / last.jet_scale(k, jt);
            if at0.max(at1) > jt {
                out.push(format!("derivative of order {k} does not vanish at the ends"));
            }
        }
        out
    }
}

pub fn build_oscillator<T: Real>(params: &MapParams, n: u32) -> Result<Oscillator<T>, Error> {
    params.validate()?;
    Oscillator::build(params, &params.level(n))
}

pub fn build_bridge<T: Real>(params: &MapParams, n: u32) -> Result<Bridge<T>, Error> {
    params.validate()?;
    Bridge::build(params, &params.level(n))
}

#[derive(Clone, Debug)]
pub struct UniformBoundReport {
    pub order: usize,
    pub per_level: Vec<(u32, f64)>,
    pub sup: f64,
    /// Least-squares slope of the observed bound against `n`.
    pub trend: f64,
    pub passes: bool,
}

/// Sup over the given levels of the observed `k`-th derivative bound. Passes
/// when the fitted linear trend over the level range moves the bound by at
/// most 10% of its sup.
pub fn validate_uniform_bounds<T: Real>(oscillators: &[Oscillator<T>], k: usize) -> UniformBoundReport {
    let per_level: Vec<(u32, f64)> = oscillators
        .iter()
        .filter_map(|o| o.derivative_bounds.get(k).map(|b| (o.n, b.to_f64_lossy())))
        .collect();
    let sup = per_level.iter().map(|p| p.1).fold(0.0, f64::max);
    let trend = linear_slope(&per_level);
    let span = match (per_level.first(), per_level.last()) {
        (Some(a), Some(b)) => (b.0 as f64 - a.0 as f64).abs(),
        _ => 0.0,
    };
    UniformBoundReport {
        order: k,
        passes: sup.is_finite() && trend * span <= 0.1 * sup,
        per_level,
        sup,
        trend,
    }
}

fn linear_slope(pts: &[(u32, f64)]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 as f64 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 as f64 - mx).powi(2)).sum();
    sxy / sxx
}

/// Exact slopes at the bridge ends (for table output).
pub fn bridge_slopes_f64(params: &MapParams, lc: &LevelConstants) -> (f64, f64) {
    let (a, b) = lc.bridge_slopes_exact(params);
    (rational_to_f64(&a), rational_to_f64(&b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p1() -> MapParams {
        MapParams::new(14.0, 1).unwrap()
    }

    #[test]
    fn level_one_shape() {
        let o: Oscillator<f64> = build_oscillator(&p1(), 1).unwrap();
        assert_eq!(o.laps, 13.0);
        assert_eq!(o.m, 0.75);
        let d = o.delta;
        assert!((o.value(d) - o.k * d).abs() < 1e-15);
        assert_eq!(o.value(0.0), 0.0);
        assert!((o.value(13.0) - 1.0).abs() < 1e-15);
        // interior max at u = 1, min at u = 2
        assert_eq!(o.value(1.0), 1.0);
        assert!((o.value(1.0 - d) - 0.75).abs() < 1e-14);
        assert!((o.value(1.0 + d) - 0.75).abs() < 1e-14);
        assert_eq!(o.value(2.0), -0.75);
        assert!((o.value(2.0 + d) - (-0.5)).abs() < 1e-14);
    }

    #[test]
    fn laps_alternate() {
        let o: Oscillator<f64> = build_oscillator(&p1(), 2).unwrap();
        for j in 0..47u32 {
            let a = o.value(j as f64 + 0.25);
            let b = o.value(j as f64 + 0.75);
            if j % 2 == 0 {
                assert!(b > a, "lap {j}");
            } else {
                assert!(b < a, "lap {j}");
            }
        }
    }

    #[test]
    fn caps_match_quadratic_formula() {
        for r in 1..=2 {
            let p = MapParams::new(14.0, r).unwrap();
            let o: Oscillator<f64> = build_oscillator(&p, 3).unwrap();
            let c = p.cap_c();
            let d = p.delta();
            for i in 0..=32 {
                let t = d * (i as f64 / 32.0);
                for a in [1.0, 3.0, 5.0] {
                    assert!((o.value(a + t) - (1.0 - c * t * t)).abs() < 1e-12);
                    assert!((o.value(a - t) - (1.0 - c * t * t)).abs() < 1e-12);
                }
                for b in [2.0, 4.0] {
                    assert!((o.value(b + t) - (-o.m + c * t * t)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cap_boundary_slope_is_half_lambda() {
        let p = MapParams::new(14.0, 2).unwrap();
        let o: Oscillator<f64> = build_oscillator(&p, 2).unwrap();
        let half = p.big_lambda() / 2.0;
        let d = o.delta;
        // right of a minimum, left of a maximum, both sides of the same lap
        let seg0 = &o.increasing.segments()[0];
        assert!((seg0.derivative_at(1, 1.0) - half).abs() < 1e-10);
        let segs = o.increasing.segments();
        assert!((segs[segs.len() - 1].derivative_at(1, 0.0) - half).abs() < 1e-10);
        assert!((o.derivative(1, 3.0 - d) - half).abs() < 1e-9);
        assert!((o.derivative(1, 3.0 + d) + half).abs() < 1e-9);
    }

    #[test]
    fn affine_ends() {
        let o: Oscillator<f64> = build_oscillator(&p1(), 4).unwrap();
        let mm = o.laps;
        for i in 0..=10 {
            let t = o.delta * i as f64 / 10.0;
            assert!((o.value(t) - o.k * t).abs() < 1e-15);
            assert!((o.value(mm - t) - (1.0 - o.k * t)).abs() < 1e-12);
        }
    }

    #[test]
    fn chord_slopes_between_extrema() {
        for n in 1..=6 {
            let o: Oscillator<f64> = build_oscillator(&p1(), n).unwrap();
            let chord = 1.0 + o.m;
            assert!(chord > 0.5 && chord <= 2.0);
            let min_avg = (o.m + 0.5) / (1.0 - 2.0 * o.delta);
            // glue part of an interior lap rises from -m+1/4 to 3/4 over 1-2δ
            assert!(((o.m + 0.5) / (1.0 - 2.0 * o.delta) - min_avg).abs() < 1e-15);
            assert!(o.derivative_bounds[1] <= 14.0);
        }
    }

    #[test]
    fn uniform_bounds_levels_one_to_eight() {
        let oscs: Vec<Oscillator<f64>> = (1..=8).map(|n| build_oscillator(&p1(), n).unwrap()).collect();
        let r0 = validate_uniform_bounds(&oscs, 0);
        assert!(r0.sup <= 1.0 + 1e-12 && r0.passes);
        let r1 = validate_uniform_bounds(&oscs, 1);
        assert!(r1.sup <= 14.0 && r1.passes);
        let r2 = validate_uniform_bounds(&oscs, 2);
        assert!(r2.passes, "{r2:?}");
        // caps alone force 2C = Λ²/2 = 98
        assert!(r2.sup >= 98.0 - 1e-9);
    }

    #[test]
    fn bridge_level_one() {
        let p = p1();
        let b: Bridge<f64> = build_bridge(&p, 1).unwrap();
        let (a0, a1) = b.endpoint_slopes;
        assert!((a0 - 2.0 * (81.0 / 224.0) / (13.0 / 7.0)).abs() < 1e-15);
        assert!((a1 / a0 - 14.0).abs() < 1e-12);
        assert!(a1 <= 7.0 / 8.0 * 14.0);
        let (smin, _) = b.profile.slope_range(GRID);
        assert!(smin >= 2.0 / 3.0 * a0);
        assert_eq!(b.value(0.0), 0.0);
    }

    #[test]
    fn bridges_for_several_levels_and_orders() {
        for r in 1..=2 {
            let p = MapParams::new(14.0, r).unwrap();
            for n in [1, 2, 5, 12, 40] {
                let b: Bridge<f64> = build_bridge(&p, n).unwrap();
                assert!(b.endpoint_slopes.1 <= 7.0 / 8.0 * p.big_lambda());
                assert!(b.shape_parameter > 0.0);
            }
        }
    }

    #[test]
    fn f32_oscillator_builds() {
        let o: Oscillator<f32> = build_oscillator(&p1(), 2).unwrap();
        assert_eq!(o.value(0.0f32), 0.0);
        assert!((o.value(1.0f32) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn csv_dump_columns() {
        let o: Oscillator<f64> = build_oscillator(&p1(), 1).unwrap();
        let mut buf = Vec::new();
        o.write_csv(&mut buf, 4, 100).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "u,s_n(u),s_n'(u),lap_index");
        assert_eq!(text.lines().count(), 1 + 13 * 4 + 1);
    }

    #[test]
    fn deep_level_is_unresolved_but_finite() {
        let o: Oscillator<f64> = build_oscillator(&p1(), 400).unwrap();
        assert_eq!(o.lap(3.0).0, LapKind::Unresolved);
        assert!(o.value(1e10).is_finite());
    }

    #[test]
    fn builds_across_parameter_grid() {
        for lam in [14.0, 15.5, 20.0, 100.0] {
            for r in 1..=3u32 {
                for km in [r, 2 * r, 12.min(4 * r)] {
                    let p = MapParams::with_k_max(lam, r, km).unwrap();
                    for n in [1u32, 2, 3, 8, 40, 400, 3000] {
                        build_oscillator::<f64>(&p, n).unwrap();
                        build_bridge::<f64>(&p, n).unwrap();
                    }
                }
            }
        }
    }
}
