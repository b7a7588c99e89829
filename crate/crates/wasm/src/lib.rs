//! Browser bindings: optimal design, curvature summary and live next-point queries.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use oadlab::fod::{curvature_report, solve_fod, HessianMethod};
use oadlab::session::{recommend, SessionFile};
use oadlab::{Criterion, ErrorModel, FodOptions, ModelSpec};

#[derive(Serialize)]
struct DesignView {
    model: String,
    criterion: String,
    p: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    criterion_value: f64,
    get_violation: f64,
}

#[derive(Serialize)]
struct CurvatureView {
    d: usize,
    r_star: f64,
    gamma_sq: f64,
    mu: f64,
    h: f64,
    s_star: f64,
    saving: f64,
}

fn json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

pub fn design_json(model: &str, criterion: &str) -> Result<String, String> {
    let spec = ModelSpec::parse(model).map_err(|e| e.to_string())?;
    let crit = Criterion::parse(criterion).map_err(|e| e.to_string())?;
    let fod = solve_fod(&spec, &crit, None, &FodOptions::default()).map_err(|e| e.to_string())?;
    json(&DesignView {
        model: spec.name().to_string(),
        criterion: crit.to_string(),
        p: spec.p(),
        points: fod.design.support.iter().map(|&i| spec.candidate(i).to_vec()).collect(),
        weights: fod.design.weights.clone(),
        criterion_value: fod.criterion_value,
        get_violation: fod.get_violation,
    })
}

pub fn curvature_json(model: &str, criterion: &str, error_model: &str, n: usize) -> Result<String, String> {
    let spec = ModelSpec::parse(model).map_err(|e| e.to_string())?;
    let crit = Criterion::parse(criterion).map_err(|e| e.to_string())?;
    let err = ErrorModel::parse(error_model).map_err(|e| e.to_string())?;
    let fod = solve_fod(&spec, &crit, None, &FodOptions::default()).map_err(|e| e.to_string())?;
    let r = curvature_report(&spec, &crit, &fod, &err, n, HessianMethod::Auto).map_err(|e| e.to_string())?;
    json(&CurvatureView {
        d: r.d,
        r_star: r.r_star,
        gamma_sq: r.gamma_sq,
        mu: r.moments.mu,
        h: r.h,
        s_star: r.s_star,
        saving: r.gamma_sq * r.r_star,
    })
}

pub fn next_point_json(session: &str) -> Result<String, String> {
    let s = SessionFile::from_json(session).map_err(|e| e.to_string())?;
    json(&recommend(&s).map_err(|e| e.to_string())?)
}

#[wasm_bindgen]
pub fn optimal_design(model: &str, criterion: &str) -> Result<String, JsValue> {
    design_json(model, criterion).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn curvature_summary(model: &str, criterion: &str, error_model: &str, n: usize) -> Result<String, JsValue> {
    curvature_json(model, criterion, error_model, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn road_next(session: &str) -> Result<String, JsValue> {
    next_point_json(session).map_err(|e| JsValue::from_str(&e))
}
