//! Browser bindings for the demo page in `www/`.
//!
//! Each export returns a JSON string; the `*_json` functions hold the logic
//! so they can be tested natively.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use robust_fps::divergence::{self, DivergenceOrder, GaussianSpec};
use robust_fps::model::{self, PopulationFrame, Unit};
use robust_fps::risk;
use robust_fps::robust::{self, RobustConfig};

fn grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

fn finite_or_null(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

/// Clipping-penalty factor `g(C)` next to the uncorrected expression.
pub fn g_curve_json(c_max: f64, points: usize) -> Result<String, String> {
    if !(c_max.is_finite() && c_max > 0.0) {
        return Err(format!("C range must be positive, got {c_max}"));
    }
    let c = grid(0.0, c_max, points);
    let g: Vec<f64> = c.iter().map(|&c| risk::g(c).unwrap_or(f64::NAN)).collect();
    let printed: Vec<f64> = c.iter().map(|&c| risk::g_as_printed(c)).collect();
    Ok(json!({ "c": c, "g": g, "printed": printed }).to_string())
}

/// `D_λ(N(m1, v1) ‖ N(m2, v2))` across a λ grid; `null` where the integral
/// diverges.
pub fn divergence_curve_json(
    m1: f64,
    v1: f64,
    m2: f64,
    v2: f64,
    lambda_lo: f64,
    lambda_hi: f64,
    points: usize,
) -> Result<String, String> {
    let f1 = GaussianSpec::univariate(m1, v1).map_err(|e| e.to_string())?;
    let f2 = GaussianSpec::univariate(m2, v2).map_err(|e| e.to_string())?;
    if lambda_lo.is_nan() || lambda_hi.is_nan() || lambda_lo >= lambda_hi {
        return Err("lambda range is empty".into());
    }
    let lambda = grid(lambda_lo, lambda_hi, points);
    let d: Vec<Value> = lambda
        .iter()
        .map(|&l| {
            DivergenceOrder::new(l)
                .and_then(|o| divergence::divergence(&f1, &f2, o))
                .map_or(Value::Null, finite_or_null)
        })
        .collect();
    Ok(json!({ "lambda": lambda, "d": d }).to_string())
}

/// Parses `x,y` lines (ratio model, unit residual scale). A blank or `NA`
/// `y` marks an unsampled unit; a header line is skipped.
fn parse_frame(text: &str) -> Result<PopulationFrame, String> {
    let mut units = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cells = line.split(',').map(str::trim);
        let x_cell = cells.next().unwrap_or("");
        let y_cell = cells.next().unwrap_or("");
        let Ok(x) = x_cell.parse::<f64>() else {
            if i == 0 {
                continue;
            }
            return Err(format!("line {}: cannot parse x `{x_cell}`", i + 1));
        };
        let y = match y_cell {
            "" | "NA" => None,
            s => Some(
                s.parse::<f64>()
                    .map_err(|_| format!("line {}: cannot parse y `{s}`", i + 1))?,
            ),
        };
        units.push(Unit {
            unit_id: format!("{}", units.len() + 1),
            a: x,
            sigma2: x,
            y,
        });
    }
    PopulationFrame::new(units).map_err(|e| e.to_string())
}

/// Classical and clipped estimates of the population mean, with residuals.
pub fn estimate_json(frame_text: &str, c: f64) -> Result<String, String> {
    let frame = parse_frame(frame_text)?;
    let err = |e: robust_fps::Error| e.to_string();
    let classical = model::classical_estimate(&frame).map_err(err)?;
    let est = robust::robust_estimate(&frame, &RobustConfig::fixed(c)).map_err(err)?;
    let stats = model::sufficient_stats(&frame).map_err(err)?;
    let risk = risk::mse_theorem2(&frame, c).map_err(err)?;
    let units: Vec<Value> = frame
        .sampled()
        .zip(stats.r.as_deref().unwrap_or(&[]))
        .map(|((u, y), r)| {
            json!({
                "id": u.unit_id,
                "x": u.a,
                "y": y,
                "r": r,
                "clipped": r.abs() > c,
            })
        })
        .collect();
    Ok(json!({
        "classical": classical,
        "robust": est.ybar_p_r,
        "theta_pooled": stats.ybar_w,
        "theta_robust": est.theta_hat_r,
        "mse_baseline": risk.mse_baseline,
        "mse_robust": risk.mse_robust,
        "units": units,
        "N": frame.population_size(),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn g_curve(c_max: f64, points: usize) -> Result<String, JsError> {
    g_curve_json(c_max, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn divergence_curve(
    m1: f64,
    v1: f64,
    m2: f64,
    v2: f64,
    lambda_lo: f64,
    lambda_hi: f64,
    points: usize,
) -> Result<String, JsError> {
    divergence_curve_json(m1, v1, m2, v2, lambda_lo, lambda_hi, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn estimate(frame_text: &str, c: f64) -> Result<String, JsError> {
    estimate_json(frame_text, c).map_err(|e| JsError::new(&e))
}
