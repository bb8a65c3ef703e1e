//! Browser bindings: the ROC curve `φ_λ`, the envelope chain through a
//! clicked point, and the low-degree norm as a function of `D`.
//!
//! Each export returns a JSON string. The `*_json` functions behind them are
//! plain Rust so they can be tested natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use swrl_core::lowdeg::{ldr_norm_exact_rademacher, ldr_norm_limit, Degree};
use swrl_core::roc::{
    envelope_chain, phi_eval, val_closed_form, val_numeric, PhiCurve, RocPoint,
    DEFAULT_GAMMA_DISCRETIZE, DEFAULT_GAMMA_PERTURB,
};

const MAX_CURVE_POINTS: usize = 10_000;
const MAX_PROFILE_DEGREE: u32 = 200;
const MAX_PROFILE_N: usize = 100_000;

#[derive(Debug, Serialize)]
struct CurveReport {
    lambda: f64,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    val_numeric: f64,
    val_closed_form: f64,
}

/// `φ_λ` on a uniform grid of `points` values of `α`, with `val`.
pub fn phi_curve_json(lambda: f64, points: usize) -> Result<String, String> {
    if !(2..=MAX_CURVE_POINTS).contains(&points) {
        return Err(format!("points must lie in [2, {MAX_CURVE_POINTS}]"));
    }
    let curve = PhiCurve::new(lambda).map_err(|e| e.to_string())?;
    let alpha: Vec<f64> = (0..points)
        .map(|i| i as f64 / (points - 1) as f64)
        .collect();
    let beta = alpha.iter().map(|&a| phi_eval(lambda, a)).collect();
    let report = CurveReport {
        lambda,
        alpha,
        beta,
        val_numeric: val_numeric(&curve).map_err(|e| e.to_string())?,
        val_closed_form: val_closed_form(lambda),
    };
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

/// The full chain `φ → ψ → u → v` through `(alpha, beta)`.
pub fn envelope_json(lambda: f64, alpha: f64, beta: f64) -> Result<String, String> {
    let chain = envelope_chain(
        lambda,
        RocPoint::new(alpha, beta),
        DEFAULT_GAMMA_DISCRETIZE,
        DEFAULT_GAMMA_PERTURB,
    )
    .map_err(|e| e.to_string())?;
    serde_json::to_string(&chain).map_err(|e| e.to_string())
}

#[derive(Debug, Serialize)]
struct ProfileReport {
    lambda: f64,
    n: usize,
    degrees: Vec<u32>,
    values: Vec<f64>,
    full: f64,
    limit: f64,
}

/// Exact Rademacher `‖L^{≤D}‖²` for `D = 0, …, max_degree` and `D = ∞`.
pub fn lowdeg_profile_json(lambda: f64, n: usize, max_degree: u32) -> Result<String, String> {
    if !(0.0..1.0).contains(&lambda) {
        return Err("lambda must lie in [0, 1)".into());
    }
    if n == 0 || n > MAX_PROFILE_N {
        return Err(format!("n must lie in [1, {MAX_PROFILE_N}]"));
    }
    if max_degree > MAX_PROFILE_DEGREE {
        return Err(format!("max_degree must be at most {MAX_PROFILE_DEGREE}"));
    }
    let norm = |d| {
        ldr_norm_exact_rademacher(n, lambda, d)
            .map(|e| e.value)
            .map_err(|e| e.to_string())
    };
    let degrees: Vec<u32> = (0..=max_degree).collect();
    let values = degrees
        .iter()
        .map(|&d| norm(Degree::Finite(d)))
        .collect::<Result<Vec<_>, _>>()?;
    let report = ProfileReport {
        lambda,
        n,
        full: norm(Degree::Infinite)?,
        limit: ldr_norm_limit(lambda).powi(2),
        degrees,
        values,
    };
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn phi_curve(lambda: f64, points: usize) -> Result<String, JsError> {
    phi_curve_json(lambda, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn envelope(lambda: f64, alpha: f64, beta: f64) -> Result<String, JsError> {
    envelope_json(lambda, alpha, beta).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn lowdeg_profile(lambda: f64, n: usize, max_degree: u32) -> Result<String, JsError> {
    lowdeg_profile_json(lambda, n, max_degree).map_err(|e| JsError::new(&e))
}
