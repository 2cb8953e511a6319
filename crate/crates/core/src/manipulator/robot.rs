//! Serial manipulator description loaded from JSON.

use std::f64::consts::PI;

use nalgebra::{Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::dualquat::UnitDualQuaternion;
use crate::error::{Error, Result};

const PANDA_JSON: &str = include_str!("../../data/panda.json");

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointType {
    Revolute,
}

/// Modified (Craig) Denavit-Hartenberg parameters: `Rx(alpha) Tx(a) Rz(q + theta_offset) Tz(d)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dh {
    pub a: f64,
    pub d: f64,
    pub alpha: f64,
    #[serde(default)]
    pub theta_offset: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub q_min: f64,
    pub q_max: f64,
    pub dq: f64,
    pub ddq: f64,
    pub dddq: f64,
    pub tau: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    #[serde(rename = "type")]
    pub kind: JointType,
    pub dh: Dh,
    pub limits: JointLimits,
}

/// Link mass, centre of mass and inertia about the centre of mass, in the link frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkInertia {
    pub mass: f64,
    pub com: [f64; 3],
    /// `[ixx, ixy, ixz, iyy, iyz, izz]`
    pub inertia: [f64; 6],
}

impl LinkInertia {
    pub fn com(&self) -> Vector3<f64> {
        Vector3::from(self.com)
    }

    pub fn tensor(&self) -> Matrix3<f64> {
        let [xx, xy, xz, yy, yz, zz] = self.inertia;
        Matrix3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz)
    }
}

/// Fixed transform from the last joint frame to the tool frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tool {
    pub translation: [f64; 3],
    /// Roll, pitch, yaw; the rotation is `Rz(yaw) Ry(pitch) Rx(roll)`.
    #[serde(default)]
    pub rpy: [f64; 3],
}

impl Tool {
    pub fn pose(&self) -> UnitDualQuaternion {
        let [r, p, y] = self.rpy;
        UnitDualQuaternion::from_rotation_translation(
            &UnitQuaternion::from_euler_angles(r, p, y),
            &Vector3::from(self.translation),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RobotModel {
    #[serde(default)]
    pub name: String,
    pub joints: Vec<Joint>,
    #[serde(default)]
    pub tool: Option<Tool>,
    /// Nominal configuration used to seed inverse kinematics.
    #[serde(default)]
    pub ready: Option<Vec<f64>>,
    #[serde(default)]
    pub inertia: Option<Vec<LinkInertia>>,
}

impl RobotModel {
    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text).map_err(|e| Error::Parse(format!("robot model: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    /// The bundled 7-DoF arm (Franka Emika Panda kinematics, approximate inertias).
    pub fn panda() -> Self {
        Self::from_json(PANDA_JSON).expect("bundled robot model is valid")
    }

    /// Planar revolute chain in the x-y plane with the given link lengths; the tool sits at the tip.
    pub fn planar(link_lengths: &[f64]) -> Self {
        let limits = JointLimits { q_min: -PI, q_max: PI, dq: 2.0, ddq: 10.0, dddq: 1000.0, tau: 100.0 };
        let mut joints = Vec::with_capacity(link_lengths.len());
        let mut prev = 0.0;
        for &l in link_lengths {
            joints.push(Joint {
                kind: JointType::Revolute,
                dh: Dh { a: prev, d: 0.0, alpha: 0.0, theta_offset: 0.0 },
                limits,
            });
            prev = l;
        }
        Self {
            name: "planar".into(),
            joints,
            tool: Some(Tool { translation: [prev, 0.0, 0.0], rpy: [0.0; 3] }),
            ready: None,
            inertia: None,
        }
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.joints.is_empty() {
            return Err(Error::Parse("robot model has no joints".into()));
        }
        for (i, j) in self.joints.iter().enumerate() {
            let d = j.dh;
            let l = j.limits;
            let all = [d.a, d.d, d.alpha, d.theta_offset, l.q_min, l.q_max];
            if !all.iter().all(|v| v.is_finite()) {
                return Err(Error::Parse(format!("joint {}: non-finite parameter", i + 1)));
            }
            if l.q_min > l.q_max {
                return Err(Error::Parse(format!("joint {}: q_min > q_max", i + 1)));
            }
            for (name, v) in [("dq", l.dq), ("ddq", l.ddq), ("dddq", l.dddq), ("tau", l.tau)] {
                if !(v > 0.0) {
                    return Err(Error::Parse(format!("joint {}: limit {name} must be positive", i + 1)));
                }
            }
        }
        if let Some(r) = &self.ready {
            if r.len() != self.dof() {
                return Err(Error::Parse(format!("ready has {} entries for {} joints", r.len(), self.dof())));
            }
        }
        if let Some(links) = &self.inertia {
            if links.len() != self.dof() {
                return Err(Error::Parse(format!("inertia has {} links for {} joints", links.len(), self.dof())));
            }
            if links.iter().any(|l| !(l.mass >= 0.0)) {
                return Err(Error::Parse("link masses must be non-negative".into()));
            }
        }
        Ok(())
    }

    pub fn check_dim(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dof() {
            return Err(Error::Dimension(format!("expected {} joint values, got {}", self.dof(), q.len())));
        }
        Ok(())
    }

    /// Seed configuration: `ready` if given, otherwise the middle of the joint ranges.
    pub fn seed(&self) -> Vec<f64> {
        self.ready
            .clone()
            .unwrap_or_else(|| self.joints.iter().map(|j| 0.5 * (j.limits.q_min + j.limits.q_max)).collect())
    }

    pub fn tool_pose(&self) -> UnitDualQuaternion {
        self.tool.map(|t| t.pose()).unwrap_or_default()
    }
}
