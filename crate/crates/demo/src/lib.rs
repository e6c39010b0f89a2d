//! Three operations for the static demo page. Each returns JSON for the
//! page to plot; the `wasm_bindgen` wrappers only convert errors.

use serde::Serialize;
use valleyfill::decomp::{stl_values, StlConfig};
use valleyfill::engine::{two_stage, CostBreakdown, Diagnostics, EngineConfig};
use valleyfill::instance::load_instance;
use valleyfill::motif::{discover_values, MotifConfig};
use wasm_bindgen::prelude::*;

pub const DEMO_INSTANCE: &str = include_str!("../../cli/demo/instance.json");

#[derive(Serialize)]
struct ActivityPlot {
    id: String,
    start: usize,
    duration: usize,
    rooms: Vec<String>,
}

#[derive(Serialize)]
struct SchedulePlot {
    baseload: Vec<f64>,
    p_sched: Vec<f64>,
    price: Vec<f64>,
    cap_kw: f64,
    activities: Vec<ActivityPlot>,
    battery: Vec<String>,
    cost: CostBreakdown,
    diagnostics: Diagnostics,
}

/// Schedule an instance document at factor `mf`. The search is bounded by
/// nodes because browsers give wasm no monotonic clock.
pub fn schedule_plot(instance_json: &str, mf: f64, node_limit: usize) -> Result<String, String> {
    let inst = load_instance(instance_json, None).map_err(|e| e.to_string())?;
    let mut cfg = EngineConfig {
        mf,
        ..EngineConfig::default()
    };
    cfg.stage2.rel_gap = 1e-3;
    cfg.stage2.node_limit = Some(node_limit);
    let out = two_stage(&inst, &cfg).map_err(|e| e.to_string())?;
    let plot = SchedulePlot {
        baseload: inst.baseload_kw.clone(),
        p_sched: out.profile,
        price: inst.cost.price_per_mwh.clone(),
        cap_kw: out.diagnostics.cap_kw,
        activities: inst
            .activities
            .iter()
            .zip(&out.schedule.starts)
            .zip(&out.schedule.rooms)
            .map(|((a, &start), rooms)| ActivityPlot {
                id: a.id.clone(),
                start,
                duration: a.duration,
                rooms: rooms.clone(),
            })
            .collect(),
        battery: out
            .schedule
            .battery
            .iter()
            .map(|seq| seq.iter().map(|d| d.code()).collect())
            .collect(),
        cost: out.cost,
        diagnostics: out.diagnostics,
    };
    serde_json::to_string(&plot).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct DecompPlot {
    trend: Vec<f64>,
    seasonal: Vec<f64>,
    remainder: Vec<f64>,
}

pub fn decompose_plot(values: &[f64], period: usize, robust: bool) -> Result<String, String> {
    let cfg = StlConfig {
        outer_iterations: if robust { 15 } else { 0 },
        ..StlConfig::with_period(period)
    };
    let r = stl_values(values, &cfg).map_err(|e| e.to_string())?;
    serde_json::to_string(&DecompPlot {
        trend: r.trend,
        seasonal: r.seasonal,
        remainder: r.remainder,
    })
    .map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct MotifPlot {
    profile: Vec<f64>,
    seed: usize,
    members: Vec<usize>,
    total_dissimilarity: f64,
}

pub fn motif_plot(values: &[f64], window: usize, neighbors: usize) -> Result<String, String> {
    let cfg = MotifConfig {
        window_length: window,
        neighbor_count: neighbors,
        ..MotifConfig::default()
    };
    let rm = discover_values(values, &cfg).map_err(|e| e.to_string())?;
    serde_json::to_string(&MotifPlot {
        profile: rm.profile,
        seed: rm.seed_index,
        members: rm.member_indices,
        total_dissimilarity: rm.total_dissimilarity,
    })
    .map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn demo_instance() -> String {
    DEMO_INSTANCE.to_string()
}

#[wasm_bindgen]
pub fn schedule(instance_json: &str, mf: f64, node_limit: usize) -> Result<String, JsValue> {
    schedule_plot(instance_json, mf, node_limit).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn decompose(values: Vec<f64>, period: usize, robust: bool) -> Result<String, JsValue> {
    decompose_plot(&values, period, robust).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn motif(values: Vec<f64>, window: usize, neighbors: usize) -> Result<String, JsValue> {
    motif_plot(&values, window, neighbors).map_err(|e| JsValue::from_str(&e))
}
