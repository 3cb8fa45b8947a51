//! wasm-bindgen bindings for the browser demo in `www/`.
//!
//! Every export takes plain numbers and returns a JSON string; failures are
//! thrown as JS errors carrying the library message.

use std::sync::Arc;

use pike_core::config::Config;
use pike_core::control::{self, ControlSet};
use pike_core::experiments;
use pike_core::{EmbeddingMode, FittedEmbedding, KernelSpec, PikeError, PriorModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn js_err(e: PikeError) -> JsError {
    JsError::new(&e.to_string())
}

fn to_json<T: Serialize>(v: &T) -> Result<String, JsError> {
    serde_json::to_string(v).map_err(|e| JsError::new(&e.to_string()))
}

fn parse_mode(mode: &str) -> Result<EmbeddingMode, JsError> {
    match mode {
        "pi" => Ok(EmbeddingMode::PhysicsInformed),
        "dd" => Ok(EmbeddingMode::DataDriven),
        _ => Err(JsError::new("mode must be `pi` or `dd`")),
    }
}

#[derive(Serialize)]
struct Curve {
    label: &'static str,
    states: Vec<Vec<f64>>,
    error: Option<f64>,
}

#[derive(Serialize)]
struct PhaseResult {
    curves: Vec<Curve>,
    samples: Vec<Vec<f64>>,
}

/// Spring-mass-damper rollouts from `(x0, v0)`: truth, prior, and both
/// estimators fitted on `samples` transitions from the limited or full region.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn smd_phase(
    samples: usize,
    sigma: f64,
    lambda: f64,
    limited: bool,
    seed: u32,
    x0: f64,
    v0: f64,
    steps: usize,
) -> Result<String, JsError> {
    let cfg = Config {
        seed: seed.into(),
        smd_sigma: sigma,
        smd_lambda: lambda,
        smd_x0: vec![x0, v0],
        smd_steps: steps,
        ..Config::default()
    };
    cfg.validate().map_err(js_err)?;
    let system = cfg.smd_system();
    let bounds = if limited {
        cfg.smd_limited_region
    } else {
        cfg.smd_full_region
    };
    let region = Config::smd_region(bounds).map_err(js_err)?;
    let data = pike_core::dynamics::sample_transitions(
        &system,
        &region,
        None,
        samples,
        &mut ChaCha8Rng::seed_from_u64(seed.into()),
    )
    .map_err(js_err)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut truth = vec![cfg.smd_x0.clone()];
    let mut prior = vec![cfg.smd_x0.clone()];
    let f = system.prior();
    for t in 0..steps {
        truth.push(system.true_step(&truth[t], &[], &mut rng));
        prior.push(f.predict(&prior[t], &[]));
    }

    let spec_x = KernelSpec::gaussian(sigma).map_err(js_err)?;
    let spec_u = KernelSpec::constant_one();
    let mut curves = vec![
        Curve {
            label: "truth",
            states: truth.clone(),
            error: None,
        },
        Curve {
            label: "prior",
            error: Some(experiments::cumulative_prediction_error(&prior, &truth).map_err(js_err)?),
            states: prior,
        },
    ];
    for (label, mode) in [
        ("physics_informed", EmbeddingMode::PhysicsInformed),
        ("data_driven", EmbeddingMode::DataDriven),
    ] {
        let emb = experiments::fit_mode(&data, &system, spec_x, spec_u, lambda, mode).map_err(js_err)?;
        let states = emb.rollout(&cfg.smd_x0, None, steps).map_err(js_err)?;
        let error = experiments::cumulative_prediction_error(&states, &truth).map_err(js_err)?;
        curves.push(Curve {
            label,
            states,
            error: Some(error),
        });
    }
    to_json(&PhaseResult {
        curves,
        samples: data.states().to_rows(),
    })
}

#[derive(Serialize)]
struct TrackingResult {
    mode: EmbeddingMode,
    samples: usize,
    targets: Vec<Vec<f64>>,
    trajectory: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    mean_squared_error: f64,
    wall_clock_ms: f64,
}

/// Closed-loop unicycle tracking of the default moving target.
#[wasm_bindgen]
pub fn tracking(mode: &str, samples: usize, seed: u32, noise_gain: f64) -> Result<String, JsError> {
    let cfg = Config {
        seed: seed.into(),
        tracking_samples: samples,
        noise_gain,
        mode: parse_mode(mode)?,
        ..Config::default()
    };
    cfg.validate().map_err(js_err)?;
    let (record, result) = experiments::tracking_arm(&cfg, cfg.mode, samples, 0).map_err(js_err)?;
    to_json(&TrackingResult {
        mode: cfg.mode,
        samples,
        targets: cfg.target_track().map_err(js_err)?.waypoints().to_rows(),
        actions: result.steps.iter().map(|s| s.action.clone()).collect(),
        trajectory: result.trajectory(),
        mean_squared_error: record.error,
        wall_clock_ms: record.runtime_ms,
    })
}

#[derive(Serialize)]
struct CostMap {
    /// Grid shape: speeds along rows, turn rates along columns.
    shape: Vec<usize>,
    actions: Vec<Vec<f64>>,
    costs: Vec<f64>,
    chosen_index: usize,
    predicted_next: Vec<f64>,
}

/// Estimated one-step cost `E‖x₊ - z‖²` for every action of the default
/// control grid at state `(px, py, heading)`, and the resulting policy.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn expected_cost_map(
    mode: &str,
    samples: usize,
    seed: u32,
    px: f64,
    py: f64,
    heading: f64,
    tx: f64,
    ty: f64,
) -> Result<String, JsError> {
    let cfg = Config {
        seed: seed.into(),
        tracking_samples: samples,
        ..Config::default()
    };
    cfg.validate().map_err(js_err)?;
    let mode = parse_mode(mode)?;
    let (data, _) = experiments::tracking_dataset(&cfg, samples, 0).map_err(js_err)?;
    let system = cfg.unicycle_system();
    let prior: Option<Arc<dyn PriorModel>> = match mode {
        EmbeddingMode::PhysicsInformed => Some(Arc::new(system.prior())),
        EmbeddingMode::DataDriven => None,
    };
    let emb = FittedEmbedding::fit(
        data,
        prior,
        KernelSpec::gaussian(cfg.tracking_sigma).map_err(js_err)?,
        KernelSpec::gaussian(cfg.tracking_sigma_u).map_err(js_err)?,
        cfg.tracking_lambda,
        mode,
    )
    .map_err(js_err)?;
    let set: ControlSet = cfg.control_set().map_err(js_err)?;
    let x = [px, py, heading];
    let target = [tx, ty];
    let cost = |y: &[f64]| control::squared_distance(y, &target);
    let costs = control::expected_costs(&emb, &x, &set, &cost).map_err(js_err)?;
    let policy = control::solve_policy(&costs).map_err(js_err)?;
    let predicted_next = emb.predict_state(&x, set.action(policy.chosen_index)).map_err(js_err)?;
    to_json(&CostMap {
        shape: cfg.control_grid.clone(),
        actions: set.actions().to_rows(),
        costs,
        chosen_index: policy.chosen_index,
        predicted_next,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_returns_four_curves() {
        let json = smd_phase(50, 0.2, 1e-7, false, 1, 0.1, 0.1, 20).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let curves = v["curves"].as_array().unwrap();
        assert_eq!(curves.len(), 4);
        for c in curves {
            assert_eq!(c["states"].as_array().unwrap().len(), 21);
        }
    }

    #[test]
    fn tracking_and_cost_map() {
        let json = tracking("pi", 80, 2, 0.001).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["trajectory"].as_array().unwrap().len(), 61);

        let json = expected_cost_map("dd", 80, 2, -1.0, 0.0, 1.57, -0.95, 0.0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["costs"].as_array().unwrap().len(), 210);
        let chosen = v["chosen_index"].as_u64().unwrap() as usize;
        let costs: Vec<f64> = v["costs"]
            .as_array()
            .unwrap()
            .iter()
            .map(|c| c.as_f64().unwrap())
            .collect();
        assert!(costs.iter().all(|c| *c >= costs[chosen]));
    }
}
