//! Browser bindings. Every exported function takes plain numbers or a JSON
//! parameter string and returns a JSON string for the page to plot.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use sirid::estimation::{fit_growth_rate, predicted_reported_final_size, DEFAULT_GROWTH_THRESHOLD};
use sirid::identifiability::{self, Pin};
use sirid::ode::{integrate_full, TimeGrid};
use sirid::stochastic::{final_reported_fraction, simulate};
use sirid::{InitialConditions, ModelParams, Scenario, SeededRng};

/// Longest series handed to the page.
const MAX_POINTS: usize = 1500;

#[derive(Serialize, Default)]
struct Series {
    t: Vec<f64>,
    s: Vec<f64>,
    ir: Vec<f64>,
    iu: Vec<f64>,
}

#[derive(Serialize)]
struct Epidemic {
    stochastic: Series,
    deterministic: Series,
    reported_final_size: f64,
    predicted_final_size: f64,
    rho_hat: Option<f64>,
    rho: f64,
    events: usize,
}

fn scenario(params_json: &str) -> Result<(ModelParams, InitialConditions), String> {
    let s = if params_json.trim().is_empty() {
        Scenario::reference()
    } else {
        Scenario::from_json(params_json).map_err(|e| e.to_string())?
    };
    s.split().map_err(|e| e.to_string())
}

fn to_json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

fn deterministic_series(params: &ModelParams, init: &InitialConditions, t_end: f64) -> Result<Series, String> {
    let steps = ((t_end / 0.01).ceil() as usize).max(1);
    let grid = TimeGrid::with_steps(0.0, t_end, steps).map_err(|e| e.to_string())?;
    let path = integrate_full(params, init, &grid).map_err(|e| e.to_string())?;
    let stride = steps.div_ceil(MAX_POINTS).max(1);
    let mut out = Series::default();
    for (i, st) in path.states.iter().enumerate() {
        if i % stride == 0 || i == steps {
            out.t.push(grid.time(i));
            out.s.push(st.s);
            out.ir.push(st.ir);
            out.iu.push(st.iu);
        }
    }
    Ok(out)
}

/// One stochastic epidemic with the deterministic path on the same axes.
pub fn simulate_epidemic_json(params_json: &str, seed: u32) -> Result<String, String> {
    let (params, init) = scenario(params_json)?;
    let log = simulate(&params, &init, f64::INFINITY, &mut SeededRng::new(seed as u64)).map_err(|e| e.to_string())?;
    let mut stochastic = Series::default();
    let stride = log.events.len().div_ceil(MAX_POINTS).max(1);
    let first = log.initial_state;
    stochastic.t.push(0.0);
    stochastic.s.push(first.s as f64);
    stochastic.ir.push(first.ir as f64);
    stochastic.iu.push(first.iu as f64);
    for (i, e) in log.events.iter().enumerate() {
        if (i + 1) % stride == 0 || i + 1 == log.events.len() {
            stochastic.t.push(e.time);
            stochastic.s.push(e.state_after.s as f64);
            stochastic.ir.push(e.state_after.ir as f64);
            stochastic.iu.push(e.state_after.iu as f64);
        }
    }
    let t_end = log.end_time().max(30.0);
    let response = Epidemic {
        deterministic: deterministic_series(&params, &init, t_end)?,
        stochastic,
        reported_final_size: final_reported_fraction(&log).map_err(|e| e.to_string())?,
        predicted_final_size: predicted_reported_final_size(&params),
        rho_hat: fit_growth_rate(&log, DEFAULT_GROWTH_THRESHOLD).ok().map(|f| f.rho_hat),
        rho: params.derived_rates().rho,
        events: log.events.len(),
    };
    to_json(&response)
}

#[derive(Serialize)]
struct Equivalent {
    base: Scenario,
    equivalent: Scenario,
    base_path: Series,
    equivalent_path: Series,
    max_abs_diff_ir: f64,
    max_abs_diff_s: f64,
}

/// The base set and its class member with `kind` ("p", "pi" or "beta")
/// pinned to `value`, integrated side by side.
pub fn equivalent_trajectories_json(params_json: &str, kind: &str, value: f64, t_end: f64) -> Result<String, String> {
    let (base, init) = scenario(params_json)?;
    let pin = match kind {
        "p" => Pin::ReportingFraction(value),
        "pi" => Pin::ImmuneFraction(value),
        "beta" => Pin::EffectiveBeta(value),
        other => return Err(format!("unknown pin {other:?}; use p, pi or beta")),
    };
    let other = identifiability::equivalent_params(&base, pin).map_err(|e| e.to_string())?;
    let a = deterministic_series(&base, &init, t_end)?;
    let b = deterministic_series(&other, &init, t_end)?;
    let sup = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    to_json(&Equivalent {
        base: Scenario::from_parts(&base, &init),
        equivalent: Scenario::from_parts(&other, &init),
        max_abs_diff_ir: sup(&a.ir, &b.ir),
        max_abs_diff_s: sup(&a.s, &b.s),
        base_path: a,
        equivalent_path: b,
    })
}

/// Parameter sets reproducing a growth rate and reported final size.
pub fn manifold_json(rho: f64, z_r: f64, gamma: f64, points: usize) -> Result<String, String> {
    let grid = identifiability::default_pi_grid(rho, gamma, points);
    let scan = identifiability::manifold_scan(rho, z_r, gamma, &grid).map_err(|e| e.to_string())?;
    to_json(&scan)
}

#[wasm_bindgen]
pub fn simulate_epidemic(params_json: &str, seed: u32) -> Result<String, JsValue> {
    simulate_epidemic_json(params_json, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn equivalent_trajectories(params_json: &str, kind: &str, value: f64, t_end: f64) -> Result<String, JsValue> {
    equivalent_trajectories_json(params_json, kind, value, t_end).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn manifold(rho: f64, z_r: f64, gamma: f64, points: usize) -> Result<String, JsValue> {
    manifold_json(rho, z_r, gamma, points).map_err(|e| JsValue::from_str(&e))
}
