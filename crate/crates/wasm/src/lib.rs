//! Browser bindings. Every export returns a JSON string; failures come back as
//! `{"error": "..."}` so the page never has to catch exceptions.

use serde::Serialize;
use spillfree_core::config::Config;
use spillfree_core::pendulum::{
    rod_length_for_validity, step_rk4, total_energy, validity_error, PendulumParams, PendulumState, PivotInput,
};
use spillfree_core::pipeline::{metrics, optimize, simulate, step_desired, MetricsReport, SolveReport};
use wasm_bindgen::prelude::*;

const OBJECT_HEIGHT: f64 = 0.1;

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())) {
        Ok(s) => s,
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

#[derive(Serialize)]
pub struct StepPlan {
    pub rod_length: f64,
    pub solve: SolveReport,
    pub metrics: MetricsReport,
    pub t: Vec<f64>,
    pub pivot_x: Vec<f64>,
    pub mass_x: Vec<f64>,
    pub tilt: Vec<f64>,
    pub replay_tilt: Vec<f64>,
    /// Input rate along x between consecutive samples (m/s^3).
    pub jerk: Vec<f64>,
}

/// Plans the 0.3 m rest-to-rest step for a rod of `ratio` object heights.
pub fn step_plan(ratio: f64, jerk_limit: f64, tilt_limit: f64) -> Result<StepPlan, String> {
    if !(jerk_limit > 0.0 && tilt_limit > 0.0) {
        return Err("limits must be positive".into());
    }
    let mut c = Config::default().for_step(ratio);
    c.bounds.jerk_lower = [-jerk_limit; 3];
    c.bounds.jerk_upper = [jerk_limit; 3];
    for i in [3, 4] {
        c.bounds.state_lower[i] = -tilt_limit;
        c.bounds.state_upper[i] = tilt_limit;
    }
    let err = |e: spillfree_core::error::Error| e.to_string();
    let desired = step_desired(c.ts, c.step.distance, c.step.horizon).map_err(err)?;
    let plan = optimize(&c, desired).map_err(err)?;
    let rows = simulate(&plan.states, &plan.inputs, plan.ts, c.max_sim_dt, &plan.params).map_err(err)?;
    let report = metrics(&rows, plan.ts, &plan.params).map_err(err)?;
    let jerk = plan.inputs.windows(2).map(|w| (w[1].0.x - w[0].0.x) / plan.ts).collect();
    Ok(StepPlan {
        rod_length: plan.params.rod_length,
        solve: plan.report,
        metrics: report,
        t: rows.iter().map(|r| r.t).collect(),
        pivot_x: rows.iter().map(|r| r.state.pivot.x).collect(),
        mass_x: rows.iter().map(|r| r.mass_position.x).collect(),
        tilt: rows.iter().map(|r| r.state.theta).collect(),
        replay_tilt: rows.iter().map(|r| r.replay_state.theta).collect(),
        jerk,
    })
}

#[derive(Serialize)]
pub struct Swing {
    pub t: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Largest `|E - E0| / |E0|` over the run.
    pub energy_drift: f64,
    pub small_angle_period: f64,
}

/// Free swing of a pendulum with a fixed pivot, released from `(theta0, phi0)` rad.
pub fn swing(rod_length: f64, theta0: f64, phi0: f64, duration: f64) -> Result<Swing, String> {
    if !(duration > 0.0 && duration <= 60.0) {
        return Err("duration must be in (0, 60] s".into());
    }
    if !(theta0.abs() < 1.5 && phi0.abs() < 1.5) {
        return Err("release angles must stay below 1.5 rad".into());
    }
    let err = |e: spillfree_core::error::Error| e.to_string();
    let params = PendulumParams::new(rod_length, 9.81, 1.0).map_err(err)?;
    let mut x = [0.0; 10];
    x[3] = theta0;
    x[4] = phi0;
    let mut s = PendulumState::from_slice(&x).map_err(err)?;
    let energy = |s: &PendulumState| total_energy(s, &params).map(|(k, u)| k + u).map_err(err);
    // Potential is measured from the pivot, so E0 < 0 below the horizontal.
    let e0 = energy(&s)?;
    let dt = 1e-3;
    let every = 10;
    let steps = (duration / dt).round() as usize;
    let mut out = Swing {
        t: vec![0.0],
        theta: vec![theta0],
        phi: vec![phi0],
        energy_drift: 0.0,
        small_angle_period: 2.0 * std::f64::consts::PI * (rod_length / params.gravity).sqrt(),
    };
    for k in 1..=steps {
        s = step_rk4(&s, &PivotInput::zero(), dt, &params).map_err(err)?;
        out.energy_drift = out.energy_drift.max(((energy(&s)? - e0) / e0).abs());
        if k % every == 0 {
            out.t.push(k as f64 * dt);
            out.theta.push(s.theta);
            out.phi.push(s.phi);
        }
    }
    Ok(out)
}

#[derive(Serialize)]
pub struct Validity {
    pub rod_length: f64,
    /// Point-mass approximation error in percent.
    pub error_percent: f64,
}

/// Point-mass error for a rod `ratio` times the 0.1 m object height.
pub fn validity(ratio: f64) -> Result<Validity, String> {
    let l = ratio * OBJECT_HEIGHT;
    let p = validity_error(l, OBJECT_HEIGHT).map_err(|e| e.to_string())?;
    Ok(Validity { rod_length: l, error_percent: 100.0 * p })
}

/// Ratio needed to keep the point-mass error below `percent`.
pub fn ratio_for_error(percent: f64) -> Result<f64, String> {
    rod_length_for_validity(percent / 100.0, OBJECT_HEIGHT).map(|l| l / OBJECT_HEIGHT).map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = planStep)]
pub fn plan_step_js(ratio: f64, jerk_limit: f64, tilt_limit: f64) -> String {
    to_json(step_plan(ratio, jerk_limit, tilt_limit))
}

#[wasm_bindgen(js_name = freeSwing)]
pub fn free_swing_js(rod_length: f64, theta0: f64, phi0: f64, duration: f64) -> String {
    to_json(swing(rod_length, theta0, phi0, duration))
}

#[wasm_bindgen(js_name = pointMassValidity)]
pub fn validity_js(ratio: f64) -> String {
    to_json(validity(ratio))
}

#[wasm_bindgen(js_name = ratioForError)]
pub fn ratio_for_error_js(percent: f64) -> String {
    to_json(ratio_for_error(percent))
}
