use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use spillfree_core::config::Config;
use spillfree_core::manipulator::{JointTrajectory, RobotModel};
use spillfree_core::pendulum::{validity_error, PendulumParams, PendulumState, PivotInput};
use spillfree_core::pipeline::{
    metrics, optimize, simulate, square_desired, step_desired, track, MetricsReport, Plan, SolveReport,
    TrackReport,
};
use spillfree_core::solver::Status;

use crate::io;
use crate::CliError;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SOLVE_FILE: &str = "solve.json";
pub const ROLLOUT_FILE: &str = "rollout.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const JOINTS_FILE: &str = "joints.csv";
pub const IK_FILE: &str = "ik.json";
pub const DESIRED_FILE: &str = "desired.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const SUMMARY_FILE: &str = "summary.json";

/// Writes the plan and its solve report; fails for any status other than `Optimal`.
///
/// Infeasible problems produce only the report; `MaxIter` also writes the last iterate.
pub fn write_plan(plan: &Plan, out: &Path) -> Result<(), CliError> {
    io::write_json(&out.join(SOLVE_FILE), &plan.report)?;
    match plan.report.status {
        Status::PrimalInfeasible => Err(CliError::Infeasible(
            "primal infeasibility certificate found; check pins and bounds".into(),
        )),
        Status::DualInfeasible => Err(CliError::Infeasible("problem is unbounded (dual infeasible)".into())),
        status => {
            io::write_text(&out.join(TRAJECTORY_FILE), &io::trajectory_csv(&plan.states, &plan.inputs, plan.ts)?)?;
            if status == Status::MaxIter {
                return Err(CliError::Numerical(format!(
                    "iteration limit reached after {} iterations",
                    plan.report.iterations
                )));
            }
            Ok(())
        }
    }
}

pub fn cmd_optimize(config: &Config, desired: &Path, out: &Path) -> Result<SolveReport, CliError> {
    let rows = io::parse_desired(&io::read_text(desired)?, config.ts, &desired.display().to_string())?;
    let plan = optimize(config, rows)?;
    info!("optimize: {:?} after {} iterations", plan.report.status, plan.report.iterations);
    write_plan(&plan, out)?;
    Ok(plan.report)
}

fn load_trajectory(path: &Path) -> Result<io::TrajectoryFile, CliError> {
    io::parse_trajectory(&io::read_text(path)?, &path.display().to_string())
}

fn replay(
    config: &Config,
    states: &[PendulumState],
    inputs: &[PivotInput],
    ts: f64,
    params: &PendulumParams,
    out: &Path,
) -> Result<MetricsReport, CliError> {
    let rows = simulate(states, inputs, ts, config.max_sim_dt, params)?;
    io::write_text(&out.join(ROLLOUT_FILE), &io::rollout_csv(&rows)?)?;
    let report = metrics(&rows, ts, params)?;
    io::write_json(&out.join(METRICS_FILE), &report)?;
    Ok(report)
}

pub fn cmd_simulate(config: &Config, trajectory: &Path, out: &Path) -> Result<(), CliError> {
    let traj = load_trajectory(trajectory)?;
    let params = config.params()?;
    let rows = simulate(&traj.states, &traj.inputs, traj.ts, config.max_sim_dt, &params)?;
    io::write_text(&out.join(ROLLOUT_FILE), &io::rollout_csv(&rows)?)
}

/// Gravity and mass for evaluating a rollout; the rod length does not enter the metrics.
fn metrics_params(config: &Config) -> Result<PendulumParams, CliError> {
    match config.params() {
        Ok(p) => Ok(p),
        Err(_) => Ok(PendulumParams::new(1.0, config.gravity, config.mass)?),
    }
}

pub fn cmd_metrics(config: &Config, rollout: &Path, out: &Path) -> Result<MetricsReport, CliError> {
    let (ts, rows) = io::parse_rollout(&io::read_text(rollout)?, &rollout.display().to_string())?;
    let report = metrics(&rows, ts, &metrics_params(config)?)?;
    io::write_json(&out.join(METRICS_FILE), &report)?;
    Ok(report)
}

pub fn load_robot(config: &Config, path: Option<&Path>) -> Result<RobotModel, CliError> {
    let path = path.map(Path::to_path_buf).or_else(|| config.robot.as_ref().map(PathBuf::from));
    match path {
        None => Ok(RobotModel::panda()),
        Some(p) => RobotModel::from_json(&io::read_text(&p)?)
            .map_err(|e| CliError::Parse(format!("{}: {e}", p.display()))),
    }
}

fn write_tracking(jt: &JointTrajectory, report: &TrackReport, out: &Path, strict: bool) -> Result<(), CliError> {
    io::write_text(&out.join(JOINTS_FILE), &io::joints_csv(jt)?)?;
    io::write_json(&out.join(IK_FILE), report)?;
    if report.q0_source == "solved" {
        info!("ik: initial configuration solved from the model seed");
    }
    if strict && report.limits.violated() {
        let names: Vec<&str> =
            report.limits.quantities.iter().filter(|q| q.violated()).map(|q| q.quantity.as_str()).collect();
        return Err(CliError::Strict(format!("joint limits exceeded: {}", names.join(", "))));
    }
    Ok(())
}

pub fn cmd_ik(
    config: &Config,
    trajectory: &Path,
    robot: &RobotModel,
    out: &Path,
    strict: bool,
) -> Result<TrackReport, CliError> {
    let traj = load_trajectory(trajectory)?;
    let params = config.params()?;
    let (jt, report) = track(config, &traj.states, &traj.inputs, traj.ts, &params, robot)?;
    write_tracking(&jt, &report, out, strict)?;
    Ok(report)
}

/// Per-scenario line of a step sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSummary {
    pub ratio: f64,
    pub rod_length: f64,
    pub validity_error: f64,
    pub solve: SolveReport,
    pub metrics: MetricsReport,
}

fn write_config(config: &Config, out: &Path) -> Result<(), CliError> {
    io::write_text(&out.join(CONFIG_FILE), &io::config_to_toml(config)?)
}

/// Step scenario for ratio `r`: desired targets, optimized plan, replay and metrics.
pub fn cmd_demo_step(config: &Config, r: f64, out: &Path) -> Result<StepSummary, CliError> {
    let c = config.for_step(r);
    let params = c.params()?;
    let desired = step_desired(c.ts, c.step.distance, c.step.horizon)?;
    write_config(&c, out)?;
    io::write_text(&out.join(DESIRED_FILE), &io::desired_csv(&desired, c.ts)?)?;
    let plan = optimize(&c, desired)?;
    write_plan(&plan, out)?;
    let report = replay(&c, &plan.states, &plan.inputs, plan.ts, &params, out)?;
    Ok(StepSummary {
        ratio: r,
        rod_length: params.rod_length,
        validity_error: validity_error(params.rod_length, params.object_height.unwrap_or(0.1))?,
        solve: plan.report,
        metrics: report,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SquareSummary {
    pub solve: SolveReport,
    pub metrics: MetricsReport,
    pub ik: TrackReport,
}

/// Square-path scenario through joint space on `robot`.
pub fn cmd_demo_square(
    config: &Config,
    robot: &RobotModel,
    out: &Path,
    strict: bool,
) -> Result<SquareSummary, CliError> {
    let c = config.for_square();
    let params = c.params()?;
    let desired = square_desired(c.ts, &c.square)?;
    write_config(&c, out)?;
    io::write_text(&out.join(DESIRED_FILE), &io::desired_csv(&desired, c.ts)?)?;
    let plan = optimize(&c, desired)?;
    write_plan(&plan, out)?;
    let report = replay(&c, &plan.states, &plan.inputs, plan.ts, &params, out)?;
    let (jt, ik) = track(&c, &plan.states, &plan.inputs, plan.ts, &params, robot)?;
    write_tracking(&jt, &ik, out, strict)?;
    Ok(SquareSummary { solve: plan.report, metrics: report, ik })
}

/// `KEY=V1,V2,...`
#[derive(Clone, Debug, PartialEq)]
pub struct Sweep {
    pub key: String,
    pub values: Vec<f64>,
}

impl std::str::FromStr for Sweep {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (key, list) = s.split_once('=').ok_or("expected KEY=V1,V2,...")?;
        let values = list
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| format!("bad sweep value {v:?}")))
            .collect::<Result<Vec<_>, _>>()?;
        if values.is_empty() {
            return Err("sweep needs at least one value".into());
        }
        Ok(Self { key: key.trim().to_string(), values })
    }
}

/// Applies one swept value; `r` is handled by the step scenario itself.
pub fn apply_override(config: &Config, key: &str, value: f64) -> Result<Config, CliError> {
    let mut c = config.clone();
    match key {
        "ts" => c.ts = value,
        "jerk" => {
            c.bounds.jerk_lower = [-value; 3];
            c.bounds.jerk_upper = [value; 3];
        }
        "jerk_weight" => c.jerk_weight = value,
        "tilt" => {
            for i in [3, 4] {
                c.bounds.state_lower[i] = -value;
                c.bounds.state_upper[i] = value;
            }
        }
        "rod_length" => {
            c.rod_length = Some(value);
            c.ratio = None;
        }
        "horizon" => c.step.horizon = value,
        "yaw" => c.yaw = value,
        _ => return Err(CliError::Parse(format!("unknown sweep key {key:?}"))),
    }
    Ok(c)
}

/// Directory name of one sweep point, e.g. `r6` or `jerk2.5`.
pub fn sweep_dir(key: &str, value: f64) -> String {
    format!("{key}{value}")
}

/// Runs `job` for every value on its own thread; results keep the input order.
pub fn run_parallel<T, F>(values: &[f64], job: F) -> Vec<Result<T, CliError>>
where
    T: Send,
    F: Fn(f64) -> Result<T, CliError> + Sync,
{
    std::thread::scope(|s| {
        let handles: Vec<_> = values.iter().map(|&v| { let job = &job; s.spawn(move || job(v)) }).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(CliError::Numerical("worker panicked".into()))))
            .collect()
    })
}

/// Step scenarios over a sweep; writes one directory per value and a summary.
pub fn demo_step_sweep(config: &Config, sweep: &Sweep, out: &Path) -> Result<Vec<StepSummary>, CliError> {
    let default_r = config.ratio.unwrap_or(config.step.ratio);
    let results = run_parallel(&sweep.values, |v| {
        let dir = out.join(sweep_dir(&sweep.key, v));
        if sweep.key == "r" {
            cmd_demo_step(config, v, &dir)
        } else {
            cmd_demo_step(&apply_override(config, &sweep.key, v)?, default_r, &dir)
        }
    });
    let summaries = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    io::write_json(&out.join(SUMMARY_FILE), &summaries)?;
    Ok(summaries)
}
