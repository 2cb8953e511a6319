//! Differential inverse kinematics with a damped pseudo-inverse.

use nalgebra::{DMatrix, DVector, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use super::dualquat::{pose_error, UnitDualQuaternion};
use super::kinematics::{forward_kinematics, geometric_jacobian, manipulability};
use super::robot::RobotModel;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkSettings {
    /// Proportional pose-error feedback (1/s).
    pub gain: f64,
    /// Base damping of the pseudo-inverse.
    pub damping: f64,
    /// Damping reached at zero manipulability.
    pub max_damping: f64,
    /// Manipulability below which damping is inflated.
    pub manipulability_threshold: f64,
    /// Manipulability below which tracking is aborted.
    pub singular_manipulability: f64,
    /// Euler steps per sample interval.
    pub substeps: usize,
    /// Translation error (m) treated as divergence.
    pub divergence_tolerance: f64,
    /// Allowed mismatch between `FK(q0)` and the first pose (m and rad).
    pub start_tolerance: f64,
}

impl Default for IkSettings {
    fn default() -> Self {
        Self {
            gain: 10.0,
            damping: 1e-4,
            max_damping: 0.05,
            manipulability_threshold: 1e-3,
            singular_manipulability: 1e-7,
            substeps: 10,
            divergence_tolerance: 0.05,
            start_tolerance: 1e-3,
        }
    }
}

/// Joint positions and finite-difference derivatives on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct JointTrajectory {
    pub ts: f64,
    pub q: Vec<DVector<f64>>,
    pub dq: Vec<DVector<f64>>,
    pub ddq: Vec<DVector<f64>>,
    pub dddq: Vec<DVector<f64>>,
    pub tau: Option<Vec<DVector<f64>>>,
}

impl JointTrajectory {
    /// Builds the derivative columns from joint positions and velocities.
    pub fn from_motion(ts: f64, q: Vec<DVector<f64>>, dq: Vec<DVector<f64>>) -> Self {
        let ddq = finite_difference(&dq, ts);
        let dddq = finite_difference(&ddq, ts);
        Self { ts, q, dq, ddq, dddq, tau: None }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn dof(&self) -> usize {
        self.q.first().map_or(0, |v| v.len())
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.ts
    }
}

/// Central differences (one-sided at the ends) of a sampled vector signal.
pub fn finite_difference(series: &[DVector<f64>], ts: f64) -> Vec<DVector<f64>> {
    let n = series.len();
    match n {
        0 => Vec::new(),
        1 => vec![DVector::zeros(series[0].len())],
        _ => (0..n)
            .map(|k| match k {
                0 => (&series[1] - &series[0]) / ts,
                _ if k == n - 1 => (&series[n - 1] - &series[n - 2]) / ts,
                _ => (&series[k + 1] - &series[k - 1]) / (2.0 * ts),
            })
            .collect(),
    }
}

/// `J' (J J' + l^2 I)^-1 x`, evaluated in the smaller of the two equivalent forms.
pub fn damped_pinv_solve(j: &DMatrix<f64>, x: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let l2 = lambda * lambda;
    if j.ncols() >= j.nrows() {
        let g = j * j.transpose() + DMatrix::identity(j.nrows(), j.nrows()) * l2;
        let y = match g.clone().cholesky() {
            Some(c) => c.solve(x),
            None => g.lu().solve(x).unwrap_or_else(|| DVector::zeros(j.nrows())),
        };
        j.transpose() * y
    } else {
        let g = j.transpose() * j + DMatrix::identity(j.ncols(), j.ncols()) * l2;
        let rhs = j.transpose() * x;
        match g.clone().cholesky() {
            Some(c) => c.solve(&rhs),
            None => g.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(j.ncols())),
        }
    }
}

/// Damping grown quadratically as manipulability drops below the threshold.
pub fn damping_for(manip: f64, s: &IkSettings) -> f64 {
    if manip >= s.manipulability_threshold {
        return s.damping;
    }
    let ratio = manip / s.manipulability_threshold;
    (s.damping * s.damping + (1.0 - ratio * ratio) * s.max_damping * s.max_damping).sqrt()
}

fn twist_vector(w: &Vector3<f64>, v: &Vector3<f64>) -> DVector<f64> {
    DVector::from_column_slice(Vector6::new(w.x, w.y, w.z, v.x, v.y, v.z).as_slice())
}

/// Translation and rotation error of `current` with respect to `target`.
pub fn pose_distance(target: &UnitDualQuaternion, current: &UnitDualQuaternion) -> (f64, f64) {
    let (r, p) = pose_error(target, current);
    (p.norm(), r.norm())
}

/// Configuration reaching `target`, found by damped Newton steps from `seed`.
pub fn solve_pose(target: &UnitDualQuaternion, seed: &[f64], model: &RobotModel) -> Result<Vec<f64>> {
    model.check_dim(seed)?;
    let mut q = DVector::from_column_slice(seed);
    let mut err = f64::INFINITY;
    for _ in 0..500 {
        let current = forward_kinematics(q.as_slice(), model)?;
        let (r, p) = pose_error(target, &current);
        err = r.norm().max(p.norm());
        if err < 1e-12 {
            return Ok(q.as_slice().to_vec());
        }
        let j = geometric_jacobian(q.as_slice(), model)?;
        let step = damped_pinv_solve(&j, &twist_vector(&r, &p), 1e-3);
        q += step;
        for (qi, joint) in q.iter_mut().zip(&model.joints) {
            *qi = qi.clamp(joint.limits.q_min, joint.limits.q_max);
        }
    }
    if err < 1e-9 {
        Ok(q.as_slice().to_vec())
    } else {
        Err(Error::IkDivergence { node: 0, error: err })
    }
}

/// Joint trajectory together with the per-node tracking errors.
#[derive(Clone, Debug, PartialEq)]
pub struct IkResult {
    pub trajectory: JointTrajectory,
    pub translation_error: Vec<f64>,
    pub rotation_error: Vec<f64>,
    pub min_manipulability: f64,
}

impl IkResult {
    pub fn max_translation_error(&self) -> f64 {
        self.translation_error.iter().fold(0.0, |m, v| m.max(*v))
    }

    pub fn max_rotation_error(&self) -> f64 {
        self.rotation_error.iter().fold(0.0, |m, v| m.max(*v))
    }
}

struct Tracker<'a> {
    model: &'a RobotModel,
    settings: &'a IkSettings,
    min_manip: f64,
}

impl Tracker<'_> {
    /// Joint velocity realizing the spatial feed-forward twist `(w, v)` plus feedback towards `desired`.
    fn velocity(
        &mut self,
        q: &DVector<f64>,
        desired: &UnitDualQuaternion,
        w: &Vector3<f64>,
        v: &Vector3<f64>,
        node: usize,
    ) -> Result<DVector<f64>> {
        let current = forward_kinematics(q.as_slice(), self.model)?;
        let j = geometric_jacobian(q.as_slice(), self.model)?;
        let manip = manipulability(&j);
        self.min_manip = self.min_manip.min(manip);
        if manip < self.settings.singular_manipulability {
            return Err(Error::KinematicSingularity { node, manipulability: manip });
        }
        let (er, ep) = pose_error(desired, &current);
        let k = self.settings.gain;
        // Point velocity of the tool from the spatial twist.
        let point_v = v + w.cross(&desired.translation());
        let twist = twist_vector(&(w + er * k), &(point_v + ep * k));
        Ok(damped_pinv_solve(&j, &twist, damping_for(manip, self.settings)))
    }
}

/// Tracks a pose sequence sampled every `ts`, starting from `q0`.
///
/// Within each interval the reference moves along the screw between
/// consecutive poses; joint velocities are integrated with explicit Euler
/// substeps.
pub fn differential_ik(
    poses: &[UnitDualQuaternion],
    q0: &[f64],
    model: &RobotModel,
    ts: f64,
    settings: &IkSettings,
) -> Result<IkResult> {
    model.check_dim(q0)?;
    if poses.is_empty() {
        return Err(Error::Dimension("empty pose sequence".into()));
    }
    if !(ts > 0.0) || settings.substeps == 0 {
        return Err(Error::InvalidParameter("ts and substeps must be positive".into()));
    }
    let (e0, r0) = pose_distance(&poses[0], &forward_kinematics(q0, model)?);
    if e0 > settings.start_tolerance || r0 > settings.start_tolerance {
        return Err(Error::IkDivergence { node: 0, error: e0.max(r0) });
    }
    let mut tracker = Tracker { model, settings, min_manip: f64::INFINITY };
    let n = poses.len();
    let dt = ts / settings.substeps as f64;
    let mut q = DVector::from_column_slice(q0);
    let mut qs = vec![q.clone()];
    let mut dqs = Vec::with_capacity(n);
    let mut trans_err = vec![e0];
    let mut rot_err = vec![r0];
    for k in 0..n - 1 {
        let (w, v) = (poses[k + 1] * poses[k].inverse()).log();
        let (wf, vf) = (w / ts, v / ts);
        for s in 0..settings.substeps {
            let tau = s as f64 / settings.substeps as f64;
            let desired = UnitDualQuaternion::exp(&(w * tau), &(v * tau)) * poses[k];
            let dq = tracker.velocity(&q, &desired, &wf, &vf, k)?;
            if s == 0 {
                dqs.push(dq.clone());
            }
            q += dq * dt;
        }
        let (et, er) = pose_distance(&poses[k + 1], &forward_kinematics(q.as_slice(), model)?);
        if et > settings.divergence_tolerance {
            return Err(Error::IkDivergence { node: k + 1, error: et });
        }
        trans_err.push(et);
        rot_err.push(er);
        qs.push(q.clone());
    }
    let zero = Vector3::zeros();
    dqs.push(tracker.velocity(&q, &poses[n - 1], &zero, &zero, n - 1)?);
    let min_manipulability = tracker.min_manip;
    Ok(IkResult {
        trajectory: JointTrajectory::from_motion(ts, qs, dqs),
        translation_error: trans_err,
        rotation_error: rot_err,
        min_manipulability,
    })
}
