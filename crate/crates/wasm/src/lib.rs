//! Browser demo bindings: classification reports, membership verdicts, and
//! metric-ball enumeration for interactive exploration on a static page.
//!
//! Every function takes spec strings in the same grammars as the CLI and
//! returns a JSON string. Exact rationals stay exact (`"a/b"`); the ball
//! endpoint additionally carries float positions, for drawing only.

use charsub::aseq::ArithSeq;
use charsub::circle::PointSpec;
use charsub::membership::{member_rational, member_stream};
use charsub::metric::{ball_points, rho_interval, rho_rational, RhoResult};
use charsub::{fmt_rat, parse_rat, Caps, Rat};
use serde_json::json;
use std::sync::Arc;
use wasm_bindgen::prelude::*;

fn parse_seq(spec: &str) -> Result<Arc<ArithSeq>, String> {
    Ok(Arc::new(
        ArithSeq::from_spec(spec).map_err(|e| e.to_string())?,
    ))
}

fn err_json(msg: String) -> String {
    json!({ "error": msg }).to_string()
}

/// Classification report for a sequence spec, as JSON. Errors come back as
/// `{"error": ...}` objects, same as the CLI.
#[wasm_bindgen]
pub fn classify_json(seq_spec: &str) -> String {
    let (_code, out) = charsub::cli::run_to_string(&["classify", "--seq", seq_spec]);
    out
}

/// Membership verdict for a point spec, with certificate and a digit
/// preview, as JSON.
#[wasm_bindgen]
pub fn member_json(seq_spec: &str, point_spec: &str) -> String {
    let inner = || -> Result<String, String> {
        let seq = parse_seq(seq_spec)?;
        let point = PointSpec::parse(point_spec).map_err(|e| e.to_string())?;
        let (verdict, digits, rho) = match &point {
            PointSpec::Rational(x) => {
                let v = member_rational(x, &seq).map_err(|e| e.to_string())?;
                let rho =
                    match rho_rational(x, &seq, &Caps::default()).map_err(|e| e.to_string())? {
                        RhoResult::Exact(r) => json!({ "exact": fmt_rat(&r) }),
                        RhoResult::Enclosure(iv) => json!({
                            "lo": fmt_rat(iv.lo()),
                            "hi": fmt_rat(iv.hi()),
                        }),
                    };
                (v, Vec::new(), rho)
            }
            PointSpec::Digits(_) => {
                let rep = point.resolve(&seq).map_err(|e| e.to_string())?;
                let v = member_stream(&rep).map_err(|e| e.to_string())?;
                let digits: Vec<String> = (1..=24)
                    .map(|n| rep.digit(n).map(|d| d.to_string()))
                    .collect::<charsub::Result<_>>()
                    .map_err(|e| e.to_string())?;
                let iv = rho_interval(&rep, 32).map_err(|e| e.to_string())?;
                (
                    v,
                    digits,
                    json!({
                        "lo": fmt_rat(iv.lo()),
                        "hi": fmt_rat(iv.hi()),
                    }),
                )
            }
        };
        let decision = match verdict.decision {
            charsub::membership::Decision::In => "in",
            charsub::membership::Decision::Out => "out",
            charsub::membership::Decision::Unknown => "unknown",
        };
        Ok(json!({
            "sequence": seq_spec,
            "point": point_spec,
            "decision": decision,
            "certificate": format!("{:?}", verdict.certificate),
            "digit_preview": digits,
            "rho": rho,
        })
        .to_string())
    };
    inner().unwrap_or_else(err_json)
}

/// Grid ball enumeration, as JSON. Exact points as `"k/u_N"` strings plus
/// float unit-circle angles for rendering (display only).
#[wasm_bindgen]
pub fn ball_json(seq_spec: &str, resolution: u32, eps: &str, closed: bool) -> String {
    let inner = || -> Result<String, String> {
        let seq = parse_seq(seq_spec)?;
        let eps = parse_rat(eps).map_err(|e| e.to_string())?;
        let caps = Caps {
            enum_cap: 1 << 20,
            ..Caps::default()
        };
        let pts =
            ball_points(&seq, resolution as u64, &eps, closed, &caps).map_err(|e| e.to_string())?;
        let grid = seq.term(resolution as u64).map_err(|e| e.to_string())?;
        let grid_f = grid.to_string().parse::<f64>().unwrap_or(f64::INFINITY);
        let exact: Vec<String> = pts.iter().map(|p| fmt_rat(p.value())).collect();
        let angles: Vec<f64> = pts
            .iter()
            .map(|p| {
                let num = p.numer().to_string().parse::<f64>().unwrap_or(0.0);
                let den = p.denom().to_string().parse::<f64>().unwrap_or(1.0);
                num / den
            })
            .collect();
        Ok(json!({
            "sequence": seq_spec,
            "resolution": resolution,
            "radius": fmt_rat(&eps),
            "closed": closed,
            "grid_size": grid.to_string(),
            "grid_size_float": grid_f,
            "count": exact.len(),
            "points": exact,
            "angles_approx": angles,
        })
        .to_string())
    };
    inner().unwrap_or_else(err_json)
}

/// The trivial-ball radius 1/(2 sup q_n) for bounded sequences, for the demo
/// slider presets.
#[wasm_bindgen]
pub fn trivial_radius_json(seq_spec: &str) -> String {
    let inner = || -> Result<String, String> {
        let seq = parse_seq(seq_spec)?;
        match seq.bounded_sup() {
            Some(sup) => Ok(json!({
                "bounded": true,
                "sup": sup,
                "trivial_radius": fmt_rat(&Rat::new(1.into(), (2 * sup as i64).into())),
                "sphere_radius": fmt_rat(&Rat::new(1.into(), (seq.bounded_limsup().unwrap_or(sup) as i64).into())),
            })
            .to_string()),
            None => Ok(json!({ "bounded": false }).to_string()),
        }
    };
    inner().unwrap_or_else(err_json)
}
