//! Browser bindings: simulate a system, score an expression, run a small search.

use odesr::dataset::{self, Split};
use odesr::feynman::{self, FeynmanConfig};
use odesr::harness;
use odesr::{BenchConfig, IntegratorConfig, SystemSpec};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Largest brute-force size exposed to the page.
pub const MAX_SEARCH_NODES: usize = 5;

#[derive(Debug, Serialize)]
pub struct SystemInfo {
    pub name: String,
    pub variables: Vec<String>,
    pub target: String,
    pub truth: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct Simulation {
    pub variables: Vec<String>,
    pub target_dim: usize,
    pub train_t: Vec<f64>,
    pub train_x: Vec<Vec<f64>>,
    pub test_t: Vec<f64>,
    pub test_x: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize)]
pub struct Evaluation {
    pub expression: String,
    pub test_error: f64,
    pub variables: Vec<String>,
    pub target_dim: usize,
    pub t: Vec<f64>,
    pub truth: Vec<Vec<f64>>,
    pub hybrid: Vec<Vec<f64>>,
    pub divergence_time: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct FrontPoint {
    pub complexity: usize,
    pub train_rmse: f64,
    pub test_error: f64,
    pub expression: String,
}

#[derive(Debug, Serialize)]
pub struct Search {
    pub best: String,
    pub front: Vec<FrontPoint>,
    pub warnings: Vec<String>,
}

fn system(name: &str) -> Result<SystemSpec, String> {
    BenchConfig::default().system_spec(name).map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("serializable")
}

pub fn system_list() -> Vec<SystemInfo> {
    odesr::dynamics::SYSTEM_NAMES
        .iter()
        .filter_map(|n| odesr::dynamics::by_name(n).ok())
        .map(|s| SystemInfo {
            variables: s.variable_names.names().to_vec(),
            target: s.variable_names.names()[s.target_dim].clone(),
            truth: s.target_expr().map(|e| s.variable_names.print(e)),
            name: s.name,
        })
        .collect()
}

pub fn simulate_system(name: &str, dt: f64) -> Result<Simulation, String> {
    let spec = system(name)?;
    let cfg = IntegratorConfig {
        sample_dt: dt,
        ..IntegratorConfig::default()
    };
    cfg.validate().map_err(|e| e.to_string())?;
    let (train, test) = dataset::simulate(&spec, &cfg).map_err(|e| e.to_string())?;
    Ok(Simulation {
        variables: spec.variable_names.names().to_vec(),
        target_dim: spec.target_dim,
        train_t: train.times,
        train_x: train.states,
        test_t: test.times,
        test_x: test.states,
    })
}

pub fn evaluate_expression(name: &str, text: &str) -> Result<Evaluation, String> {
    let spec = system(name)?;
    let expr = spec.variable_names.parse(text).map_err(|e| e.to_string())?;
    let cfg = IntegratorConfig::default();
    let test_error = harness::test_error(&expr, &spec, &cfg).map_err(|e| e.to_string())?;
    let span = (spec.train_span.0, spec.test_span.1);
    let r = harness::rollout_with_estimate(&expr, &spec, span, &cfg).map_err(|e| e.to_string())?;
    Ok(Evaluation {
        expression: spec.variable_names.print(&expr),
        test_error,
        variables: spec.variable_names.names().to_vec(),
        target_dim: spec.target_dim,
        t: r.truth.times,
        truth: r.truth.states,
        hybrid: r.hybrid.states,
        divergence_time: r.divergence_time,
    })
}

pub fn search_system(name: &str, max_nodes: usize) -> Result<Search, String> {
    if max_nodes == 0 || max_nodes > MAX_SEARCH_NODES {
        return Err(format!("max_nodes must be in 1..={MAX_SEARCH_NODES}"));
    }
    let spec = system(name)?;
    let cfg = IntegratorConfig::default();
    let train = dataset::make_dataset(&spec, Split::Train, &cfg).map_err(|e| e.to_string())?;
    let test = harness::test_dataset(&spec, &cfg).map_err(|e| e.to_string())?;
    let fcfg = FeynmanConfig {
        max_brute_nodes: max_nodes,
        ..FeynmanConfig::default()
    };
    let out = feynman::run_pipeline(&train, &fcfg).map_err(|e| e.to_string())?;
    let names = &spec.variable_names;
    Ok(Search {
        best: names.print(&out.best.expr),
        front: out
            .front
            .candidates
            .iter()
            .map(|c| FrontPoint {
                complexity: c.complexity,
                train_rmse: c.train_rmse,
                test_error: harness::test_error_on(&c.expr, &test),
                expression: names.print(&c.expr),
            })
            .collect(),
        warnings: out.warnings,
    })
}

/// JSON array of the built-in systems.
#[wasm_bindgen]
pub fn systems() -> String {
    to_json(&system_list())
}

/// JSON train/test trajectories sampled every `dt`.
#[wasm_bindgen]
pub fn simulate(system: &str, dt: f64) -> Result<String, JsError> {
    simulate_system(system, dt).map(|s| to_json(&s)).map_err(|e| JsError::new(&e))
}

/// JSON test error and hybrid rollout of `expr`.
#[wasm_bindgen]
pub fn evaluate(system: &str, expr: &str) -> Result<String, JsError> {
    evaluate_expression(system, expr)
        .map(|s| to_json(&s))
        .map_err(|e| JsError::new(&e))
}

/// JSON Pareto front of a brute-force search up to `max_nodes` nodes.
#[wasm_bindgen]
pub fn search(system: &str, max_nodes: usize) -> Result<String, JsError> {
    search_system(system, max_nodes)
        .map(|s| to_json(&s))
        .map_err(|e| JsError::new(&e))
}
