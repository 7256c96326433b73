//! Browser bindings for the synthesis library.
//!
//! Every export takes plain numbers and returns a JSON string, so the page
//! needs no generated type glue. Angles cross the boundary in degrees.

use fourbar_synth::dynamics::torque_profile;
use fourbar_synth::kinematics::kinematic_transform;
use fourbar_synth::optimizer::run_optimization;
use fourbar_synth::oracle::{feasibility_slice, grid_axes, CellClass};
use fourbar_synth::{evaluate_design, DesignParams, Error, ProblemConfig, Vec2};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_SLICE_RESOLUTION: usize = 61;
const MAX_BUDGET: usize = 80;

fn problem(delta_i_deg: f64, delta_e_deg: f64) -> Result<ProblemConfig, Error> {
    let mut cfg = ProblemConfig::canonical();
    cfg.task.delta_i = delta_i_deg.to_radians();
    cfg.task.delta_e = delta_e_deg.to_radians();
    cfg.validate()?;
    Ok(cfg)
}

fn point(p: Vec2) -> Value {
    json!([p.x, p.y])
}

/// Record, drawable postures and torque curve of one design.
pub fn evaluate_json(l_oa: f64, l_ab: f64, l_bc: f64, delta_i_deg: f64, delta_e_deg: f64) -> Result<Value, Error> {
    let cfg = problem(delta_i_deg, delta_e_deg)?;
    let design = DesignParams::new(l_oa, l_ab, l_bc)?;
    let record = evaluate_design(&design, &cfg.mechanism, &cfg.task)?;
    let mut out = json!({
        "record": record,
        "pivot_c": point(cfg.mechanism.pivot_c),
        "postures": [],
        "torque": [],
    });
    if let Ok(tr) = kinematic_transform(&design, &cfg.mechanism, &cfg.task) {
        out["postures"] = tr
            .postures
            .iter()
            .map(|p| json!({ "a": point(p.point_a), "b": point(p.point_b), "delta": p.delta }))
            .collect();
        if let Ok(profile) = torque_profile(&design, &cfg.mechanism, &cfg.task, &tr) {
            out["torque"] = profile.samples.iter().map(|&(t, q)| json!([t, q])).collect();
        }
    }
    Ok(out)
}

/// Feasibility classes over the l_oa x l_ab plane at a fixed rocker length.
pub fn slice_json(l_bc: f64, resolution: usize, delta_i_deg: f64, delta_e_deg: f64) -> Result<Value, Error> {
    let cfg = problem(delta_i_deg, delta_e_deg)?;
    if !(2..=MAX_SLICE_RESOLUTION).contains(&resolution) {
        return Err(Error::validation("resolution", format!("must be between 2 and {MAX_SLICE_RESOLUTION}")));
    }
    let axes = grid_axes(&cfg.optimizer.bounds, resolution);
    let slice = feasibility_slice(&cfg.mechanism, &cfg.task, &axes[0], &axes[1], l_bc)?;
    let cells: Vec<String> = slice
        .cells
        .iter()
        .map(|row| row.iter().map(|&c| CellClass::symbol(c)).collect())
        .collect();
    Ok(json!({ "l_oa": slice.l_oa, "l_ab": slice.l_ab, "l_bc": l_bc, "cells": cells }))
}

/// Runs a short optimization and returns every evaluated design.
pub fn optimize_json(seed: u64, budget: usize, delta_i_deg: f64, delta_e_deg: f64) -> Result<Value, Error> {
    let mut cfg = problem(delta_i_deg, delta_e_deg)?;
    if budget > MAX_BUDGET {
        return Err(Error::validation("budget", format!("at most {MAX_BUDGET} in the browser")));
    }
    cfg.optimizer.seed = seed;
    cfg.optimizer.n_max = budget;
    cfg.optimizer.validate()?;
    let trace = run_optimization(&cfg.mechanism, &cfg.task, &cfg.optimizer)?;
    let best = trace.best_feasible.as_ref().map(|(x, f)| json!({ "design": x, "t_rms": f }));
    Ok(json!({ "records": trace.records(), "best": best }))
}

fn respond(result: Result<Value, Error>) -> Result<String, JsValue> {
    result.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn evaluate(l_oa: f64, l_ab: f64, l_bc: f64, delta_i_deg: f64, delta_e_deg: f64) -> Result<String, JsValue> {
    respond(evaluate_json(l_oa, l_ab, l_bc, delta_i_deg, delta_e_deg))
}

#[wasm_bindgen]
pub fn slice(l_bc: f64, resolution: usize, delta_i_deg: f64, delta_e_deg: f64) -> Result<String, JsValue> {
    respond(slice_json(l_bc, resolution, delta_i_deg, delta_e_deg))
}

#[wasm_bindgen]
pub fn optimize(seed: u32, budget: usize, delta_i_deg: f64, delta_e_deg: f64) -> Result<String, JsValue> {
    respond(optimize_json(u64::from(seed), budget, delta_i_deg, delta_e_deg))
}
