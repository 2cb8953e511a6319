//! End-to-end steps: optimize, replay, evaluate and map to joint space.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::config::{Config, SquareScenario};
use crate::error::{Error, Result};
use crate::linear_model::{discrete_model, OUTPUT_DIM};
use crate::manipulator::dynamics::joint_torques;
use crate::manipulator::ik::solve_pose;
use crate::manipulator::{
    differential_ik, forward_kinematics, limits_report, pose_from_state, JointTrajectory, LimitsReport,
    RobotModel, UnitDualQuaternion,
};
use crate::pendulum::{node_slosh, PendulumParams, PendulumState, PivotInput, SloshMetrics};
use crate::qp::{assemble, dropped_constant, tracking_cost, unstack};
use crate::solver::{kkt_residuals, solve, Status};
use crate::trajectory::{rollout, Trajectory};

/// Desired mass targets for a step of `distance` along x, held for `horizon` seconds.
///
/// The first node sits at the origin and every later node at the goal; the
/// velocity targets are zero.
pub fn step_desired(ts: f64, distance: f64, horizon: f64) -> Result<Vec<[f64; OUTPUT_DIM]>> {
    let n = node_count(horizon, ts)?;
    Ok((0..=n).map(|k| [if k == 0 { 0.0 } else { distance }, 0.0, 0.0, 0.0, 0.0, 0.0]).collect())
}

/// Desired mass targets tracing a closed square, starting and ending at the origin.
pub fn square_desired(ts: f64, sq: &SquareScenario) -> Result<Vec<[f64; OUTPUT_DIM]>> {
    if !(sq.side_time > 0.0 && sq.dwell >= 0.0) {
        return Err(Error::InvalidParameter("square timing must be positive".into()));
    }
    let s = sq.side;
    let corners = [[0.0, 0.0], [s, 0.0], [s, s], [0.0, s], [0.0, 0.0]];
    let n = node_count(2.0 * sq.dwell + 4.0 * sq.side_time, ts)?;
    Ok((0..=n)
        .map(|k| {
            let t = (k as f64 * ts - sq.dwell).max(0.0);
            let side = ((t / sq.side_time).floor() as usize).min(3);
            let tau = ((t - side as f64 * sq.side_time) / sq.side_time).clamp(0.0, 1.0);
            let pos = 10.0 * tau.powi(3) - 15.0 * tau.powi(4) + 6.0 * tau.powi(5);
            let vel = (30.0 * tau.powi(2) - 60.0 * tau.powi(3) + 30.0 * tau.powi(4)) / sq.side_time;
            let (a, b) = (corners[side], corners[side + 1]);
            let d = [b[0] - a[0], b[1] - a[1]];
            [a[0] + d[0] * pos, a[1] + d[1] * pos, 0.0, d[0] * vel, d[1] * vel, 0.0]
        })
        .collect())
}

fn node_count(duration: f64, ts: f64) -> Result<usize> {
    if !(duration > 0.0 && ts > 0.0) {
        return Err(Error::InvalidParameter("duration and ts must be positive".into()));
    }
    Ok(((duration / ts).round() as usize).max(1))
}

/// Outcome of one optimization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: Status,
    pub iterations: usize,
    pub polished: bool,
    /// Tracking cost with the dropped constant restored, plus the smoothing term.
    pub objective: f64,
    pub tracking_cost: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub dynamics_residual: f64,
    pub nodes: usize,
    pub ts: f64,
    pub rod_length: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Plan {
    pub params: PendulumParams,
    pub ts: f64,
    pub states: Vec<PendulumState>,
    pub inputs: Vec<PivotInput>,
    pub report: SolveReport,
}

impl Plan {
    pub fn trajectory(&self) -> Result<Trajectory> {
        Trajectory::from_plan(&self.states, &self.inputs, self.ts, &self.params)
    }

    /// Largest `|u_{k+1} - u_k| / Ts` per axis.
    pub fn max_jerk(&self) -> [f64; 3] {
        let mut m = [0.0f64; 3];
        for w in self.inputs.windows(2) {
            for (i, mi) in m.iter_mut().enumerate() {
                *mi = mi.max(((w[1].0[i] - w[0].0[i]) / self.ts).abs());
            }
        }
        m
    }
}

/// Builds and solves the trajectory QP for `desired` mass targets.
///
/// Non-optimal outcomes are reported through `report.status`; the states and
/// inputs then hold the solver's last iterate.
pub fn optimize(config: &Config, desired: Vec<[f64; OUTPUT_DIM]>) -> Result<Plan> {
    config.validate()?;
    let params = config.params()?;
    let model = discrete_model(&params, config.ts)?;
    let spec = config.trajectory_spec(desired);
    let layout = spec.layout()?;
    let problem = assemble(&model, &spec)?;
    let sol = solve(&problem, &config.solver)?;
    let (kkt_p, kkt_d) = kkt_residuals(&problem, &sol);
    let (xs, us) = unstack(&layout, &sol.chi);
    let states = xs.iter().map(|x| PendulumState::from_slice(x)).collect::<Result<Vec<_>>>()?;
    let inputs: Vec<PivotInput> = us.iter().map(|u| PivotInput::new(u[0], u[1], u[2])).collect();
    let dynamics_residual = dynamics_residual(&model, &xs, &us);
    let report = SolveReport {
        status: sol.status,
        iterations: sol.iterations,
        polished: sol.polished,
        objective: sol.objective + dropped_constant(&model, &spec),
        tracking_cost: tracking_cost(&model, &spec, &sol.chi)?,
        primal_residual: kkt_p,
        dual_residual: kkt_d,
        dynamics_residual,
        nodes: layout.nodes,
        ts: config.ts,
        rod_length: params.rod_length,
    };
    Ok(Plan { params, ts: config.ts, states, inputs, report })
}

/// `max_k |A x_k + B u_k - x_{k+1}|_inf`
pub fn dynamics_residual(
    model: &crate::linear_model::DiscreteModel,
    xs: &[[f64; 10]],
    us: &[[f64; 3]],
) -> f64 {
    us.iter()
        .enumerate()
        .map(|(k, u)| {
            let x = nalgebra::DVector::from_column_slice(&xs[k]);
            let u = nalgebra::DVector::from_column_slice(u);
            let next = nalgebra::DVector::from_column_slice(&xs[k + 1]);
            (model.step(&x, &u) - next).amax()
        })
        .fold(0.0, f64::max)
}

/// One node of a replay: the plan as executed and the nonlinear simulation of the same inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RolloutNode {
    pub t: f64,
    pub state: PendulumState,
    pub input: PivotInput,
    pub mass_position: Vector3<f64>,
    pub mass_velocity: Vector3<f64>,
    pub mass_acceleration: Vector3<f64>,
    /// External force on the mass in the container frame.
    pub force: Vector3<f64>,
    pub replay_state: PendulumState,
    pub replay_position: Vector3<f64>,
    pub replay_velocity: Vector3<f64>,
    pub replay_acceleration: Vector3<f64>,
    pub replay_force: Vector3<f64>,
}

/// Replays the plan's inputs through the nonlinear model from its first state.
///
/// Each sample interval is integrated with RK4 steps no longer than `max_dt`.
pub fn simulate(
    states: &[PendulumState],
    inputs: &[PivotInput],
    ts: f64,
    max_dt: f64,
    params: &PendulumParams,
) -> Result<Vec<RolloutNode>> {
    let planned = Trajectory::from_plan(states, inputs, ts, params)?;
    let substeps = (ts / max_dt - 1e-9).ceil().max(1.0) as usize;
    let replay_states = rollout(&states[0], inputs, ts, substeps, params)?;
    let replay = Trajectory::from_nonlinear(&replay_states, inputs, ts, params)?;
    planned
        .nodes
        .iter()
        .zip(&replay.nodes)
        .enumerate()
        .map(|(k, (p, r))| {
            let (pt, pp) = p.state.tilt();
            let (rt, rp) = r.state.tilt();
            Ok(RolloutNode {
                t: p.t,
                state: p.state,
                input: p.input,
                mass_position: p.mass.position,
                mass_velocity: p.mass.velocity,
                mass_acceleration: p.mass.acceleration,
                force: node_slosh(pt, pp, &p.mass.acceleration, params, k)?.container_force,
                replay_state: r.state,
                replay_position: r.mass.position,
                replay_velocity: r.mass.velocity,
                replay_acceleration: r.mass.acceleration,
                replay_force: node_slosh(rt, rp, &r.mass.acceleration, params, k)?.container_force,
            })
        })
        .collect()
}

/// Peak magnitudes of a point's motion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionPeaks {
    pub max_velocity: f64,
    pub max_acceleration: f64,
    pub max_jerk: f64,
}

fn peaks(vel: &[Vector3<f64>], acc: &[Vector3<f64>], ts: f64) -> MotionPeaks {
    let max_norm = |v: &[Vector3<f64>]| v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    MotionPeaks {
        max_velocity: max_norm(vel),
        max_acceleration: max_norm(acc),
        max_jerk: acc.windows(2).map(|w| (w[1] - w[0]).norm() / ts).fold(0.0, f64::max),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Slosh metrics of the plan as executed.
    pub slosh: SloshMetrics,
    /// Slosh metrics of the nonlinear replay.
    pub replay_slosh: SloshMetrics,
    /// Largest mass-position distance between plan and replay (m).
    pub max_divergence: f64,
    pub pivot: MotionPeaks,
    pub mass: MotionPeaks,
}

/// Slosh metrics, plan-vs-replay divergence and motion peaks of a rollout.
pub fn metrics(rows: &[RolloutNode], ts: f64, params: &PendulumParams) -> Result<MetricsReport> {
    let mut slosh = SloshMetrics::default();
    let mut replay_slosh = SloshMetrics::default();
    let mut max_divergence = 0.0f64;
    for (k, r) in rows.iter().enumerate() {
        accumulate(&mut slosh, r.state.tilt(), &r.mass_acceleration, params, k)?;
        accumulate(&mut replay_slosh, r.replay_state.tilt(), &r.replay_acceleration, params, k)?;
        max_divergence = max_divergence.max((r.mass_position - r.replay_position).norm());
    }
    let pivot_v: Vec<_> = rows.iter().map(|r| r.state.pivot_vel).collect();
    // The last row repeats the final input, so it adds no jerk sample.
    let pivot_a: Vec<_> = rows.iter().map(|r| r.input.0).collect();
    let mass_v: Vec<_> = rows.iter().map(|r| r.mass_velocity).collect();
    let mass_a: Vec<_> = rows.iter().map(|r| r.mass_acceleration).collect();
    Ok(MetricsReport {
        slosh,
        replay_slosh,
        max_divergence,
        pivot: peaks(&pivot_v, &pivot_a, ts),
        mass: peaks(&mass_v, &mass_a, ts),
    })
}

fn accumulate(
    m: &mut SloshMetrics,
    (theta, phi): (f64, f64),
    acc: &Vector3<f64>,
    params: &PendulumParams,
    k: usize,
) -> Result<()> {
    let s = node_slosh(theta, phi, acc, params, k)?;
    m.force_alignment_error = m.force_alignment_error.max(s.alignment_error);
    m.kinematic_error = m.kinematic_error.max(s.residual_xz).max(s.residual_yz);
    m.max_tilt = m.max_tilt.max(theta.abs()).max(phi.abs());
    Ok(())
}

/// Joint-space tracking summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackReport {
    pub q0: Vec<f64>,
    /// `config` when `q0` was given, `solved` when it was found from the seed.
    pub q0_source: String,
    pub workspace_origin: [f64; 3],
    pub max_translation_error: f64,
    pub max_rotation_error: f64,
    pub min_manipulability: f64,
    pub task_max_velocity: f64,
    pub task_max_acceleration: f64,
    pub torques: bool,
    pub limits: LimitsReport,
}

/// Container poses of a state sequence, translated so the first mass position lands on `origin`.
pub fn workspace_poses(
    states: &[PendulumState],
    params: &PendulumParams,
    yaw: f64,
    origin: &Vector3<f64>,
) -> Result<Vec<UnitDualQuaternion>> {
    let first = states.first().ok_or_else(|| Error::Dimension("empty trajectory".into()))?;
    let shift = UnitDualQuaternion::from_translation(&(origin - crate::pendulum::mass_position(first, params)?));
    states.iter().map(|s| Ok(shift * pose_from_state(s, params, yaw)?)).collect()
}

/// Maps planned container poses to joint space and evaluates the limits.
pub fn track(
    config: &Config,
    states: &[PendulumState],
    inputs: &[PivotInput],
    ts: f64,
    params: &PendulumParams,
    model: &RobotModel,
) -> Result<(JointTrajectory, TrackReport)> {
    let seed = model.seed();
    let origin = match config.workspace_origin {
        Some(o) => Vector3::from(o),
        None => forward_kinematics(&seed, model)?.translation(),
    };
    let poses = workspace_poses(states, params, config.yaw, &origin)?;
    let (q0, q0_source) = match &config.q0 {
        Some(q) => (q.clone(), "config"),
        None => (solve_pose(&poses[0], &seed, model)?, "solved"),
    };
    let ik = differential_ik(&poses, &q0, model, ts, &config.ik)?;
    let mut jt = ik.trajectory.clone();
    let torques = model.inertia.is_some();
    if torques {
        jt.tau = Some(joint_torques(&jt, model, config.gravity)?);
    }
    let planned = Trajectory::from_plan(states, inputs, ts, params)?;
    let max_norm = |f: fn(&crate::trajectory::TrajectoryNode) -> Vector3<f64>| {
        planned.nodes.iter().map(|n| f(n).norm()).fold(0.0, f64::max)
    };
    let report = TrackReport {
        q0,
        q0_source: q0_source.into(),
        workspace_origin: origin.into(),
        max_translation_error: ik.max_translation_error(),
        max_rotation_error: ik.max_rotation_error(),
        min_manipulability: ik.min_manipulability,
        task_max_velocity: max_norm(|n| n.mass.velocity),
        task_max_acceleration: max_norm(|n| n.mass.acceleration),
        torques,
        limits: limits_report(&jt, model),
    };
    Ok((jt, report))
}
