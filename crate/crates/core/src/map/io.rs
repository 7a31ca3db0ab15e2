use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{level_breakpoints, PieceEval, PiecewiseMap};
use crate::error::Error;
use crate::oscillators::{Profile, Segment};
use crate::params::{ExtraOscillations, MapParams};

/// Serialized map: parameters plus every materialized piece.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub lambda: f64,
    pub r: u32,
    pub k_max: u32,
    pub n_max: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<ExtraOscillations>,
    pub pieces: Vec<PieceSpec>,
}

/// `domain` is `[a_num, a_den, b_num, b_den]` in decimal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PieceSpec {
    pub domain: [String; 4],
    pub kind: String,
    pub coefficients: Value,
}

fn domain(a: &BigRational, b: &BigRational) -> [String; 4] {
    [
        a.numer().to_string(),
        a.denom().to_string(),
        b.numer().to_string(),
        b.denom().to_string(),
    ]
}

fn parse_domain(d: &[String; 4]) -> Result<(BigRational, BigRational), Error> {
    let p = |s: &String| {
        s.parse::<BigInt>()
            .map_err(|e| Error::Parse(format!("domain entry {s:?}: {e}")))
    };
    let (an, ad, bn, bd) = (p(&d[0])?, p(&d[1])?, p(&d[2])?, p(&d[3])?);
    if ad == BigInt::from(0) || bd == BigInt::from(0) {
        return Err(Error::Parse("zero denominator in domain".into()));
    }
    Ok((BigRational::new(an, ad), BigRational::new(bn, bd)))
}

fn segment_json(s: &Segment<f64>) -> Value {
    json!({ "lo": s.lo, "hi": s.hi, "bernstein": s.poly.bernstein() })
}

fn profile_json(p: &Profile<f64>) -> Value {
    Value::Array(p.segments().iter().map(segment_json).collect())
}

impl PiecewiseMap<f64> {
    pub fn to_spec(&self) -> Result<MapSpec, Error> {
        let mut pieces = Vec::new();
        let outer_spec = |p: &super::Piece<f64>| {
            let (kind, coefficients) = match &p.eval {
                PieceEval::Affine { anchor, value, slope } => (
                    "affine",
                    json!({ "anchor": anchor, "value": value, "slope": slope }),
                ),
                PieceEval::Poly(s) => ("bernstein", segment_json(s)),
            };
            PieceSpec {
                domain: domain(&p.lo, &p.hi),
                kind: kind.into(),
                coefficients,
            }
        };
        pieces.extend(self.left_pieces().iter().map(outer_spec));
        for n in (1..=self.n_max).rev() {
            let lv = self.level(n)?;
            let [yn1, w, x, y] = level_breakpoints(&self.params, n);
            pieces.push(PieceSpec {
                domain: domain(&yn1, &w),
                kind: "affine".into(),
                coefficients: json!({
                    "anchor": lv.y_next, "value": lv.affine_value, "slope": lv.affine_slope
                }),
            });
            pieces.push(PieceSpec {
                domain: domain(&w, &x),
                kind: "bridge".into(),
                coefficients: json!({
                    "level": n,
                    "base": lv.f_w,
                    "rise": lv.h,
                    "segments": profile_json(&lv.bridge.profile),
                }),
            });
            let laps = lv
                .consts
                .oscillations
                .as_ref()
                .map(|m| m.to_string())
                .unwrap_or_else(|| format!("exp({})", lv.consts.ln_oscillations));
            pieces.push(PieceSpec {
                domain: domain(&x, &y),
                kind: "oscillator".into(),
                coefficients: json!({
                    "level": n,
                    "laps": laps,
                    "base": lv.osc_base,
                    "amplitude": lv.osc_amp,
                    "m": lv.osc.m,
                    "first": profile_json(&lv.osc.first),
                    "increasing": profile_json(&lv.osc.increasing),
                    "last": profile_json(&lv.osc.last),
                }),
            });
        }
        pieces.extend(self.right_pieces().iter().map(outer_spec));
        Ok(MapSpec {
            lambda: self.params.lambda,
            r: self.params.r,
            k_max: self.params.k_max,
            n_max: self.n_max,
            extra: self.params.extra,
            pieces,
        })
    }

    pub fn to_json(&self) -> Result<String, Error> {
        Ok(serde_json::to_string_pretty(&self.to_spec()?)?)
    }

    /// Rebuild from the parameters in `spec` and require the pieces to match.
    pub fn from_spec(spec: &MapSpec) -> Result<Self, Error> {
        let params = MapParams {
            lambda: spec.lambda,
            r: spec.r,
            k_max: spec.k_max,
            extra: spec.extra,
        };
        params.validate()?;
        for p in &spec.pieces {
            let (a, b) = parse_domain(&p.domain)?;
            if a >= b {
                return Err(Error::Parse(format!("empty domain {a}..{b}")));
            }
        }
        let map = Self::build(&params, spec.n_max)?;
        let rebuilt = map.to_spec()?;
        if rebuilt.pieces.len() != spec.pieces.len() {
            return Err(Error::Parse(format!(
                "expected {} pieces, found {}",
                rebuilt.pieces.len(),
                spec.pieces.len()
            )));
        }
        for (i, (want, got)) in rebuilt.pieces.iter().zip(&spec.pieces).enumerate() {
            if want != got {
                return Err(Error::Parse(format!(
                    "piece {i} ({}) does not match the construction for these parameters",
                    got.kind
                )));
            }
        }
        Ok(map)
    }

    pub fn from_json(s: &str) -> Result<Self, Error> {
        let spec: MapSpec = serde_json::from_str(s)?;
        Self::from_spec(&spec)
    }
}

#[cfg(test)]
mod tests {
    use crate::map::{build_map, Map};
    use crate::params::MapParams;

    #[test]
    fn json_roundtrip() {
        let m = build_map(&MapParams::new(14.0, 1).unwrap(), 3).unwrap();
        let s = m.to_json().unwrap();
        let back = Map::from_json(&s).unwrap();
        assert_eq!(back.to_json().unwrap(), s);
        let spec = m.to_spec().unwrap();
        assert_eq!(spec.pieces[0].kind, "affine");
        assert_eq!(spec.pieces[0].domain, ["0", "1", "5", "28"].map(String::from));
        assert!(spec.pieces.iter().any(|p| p.kind == "oscillator"));
    }

    #[test]
    fn tampered_spec_is_rejected() {
        let m = build_map(&MapParams::new(14.0, 1).unwrap(), 2).unwrap();
        let mut spec = m.to_spec().unwrap();
        spec.pieces[0].coefficients["slope"] = serde_json::json!(13.0);
        assert!(Map::from_spec(&spec).is_err());
        let mut spec = m.to_spec().unwrap();
        spec.pieces[1].domain[1] = "0".into();
        assert!(Map::from_spec(&spec).is_err());
        assert!(Map::from_json("{").is_err());
    }
}
