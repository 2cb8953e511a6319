use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::ik::JointTrajectory;
use super::robot::{JointLimits, RobotModel};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointLimitEntry {
    /// 1-based joint number.
    pub joint: usize,
    pub min: f64,
    pub max: f64,
    pub limit_low: f64,
    pub limit_high: f64,
    /// Distance to the nearer limit; negative when violated.
    pub margin: f64,
    pub first_violation: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantityReport {
    /// One of `q`, `dq`, `ddq`, `dddq`, `tau`.
    pub quantity: String,
    pub joints: Vec<JointLimitEntry>,
    pub min_margin: f64,
    pub first_violation: Option<usize>,
}

impl QuantityReport {
    pub fn violated(&self) -> bool {
        self.first_violation.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitsReport {
    pub quantities: Vec<QuantityReport>,
}

impl LimitsReport {
    pub fn violated(&self) -> bool {
        self.quantities.iter().any(QuantityReport::violated)
    }

    pub fn quantity(&self, name: &str) -> Option<&QuantityReport> {
        self.quantities.iter().find(|q| q.quantity == name)
    }
}

fn evaluate(name: &str, series: &[DVector<f64>], bounds: &[(f64, f64)]) -> QuantityReport {
    let joints: Vec<JointLimitEntry> = bounds
        .iter()
        .enumerate()
        .map(|(i, &(lo, hi))| {
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            let mut first_violation = None;
            for (k, v) in series.iter().enumerate() {
                let x = v[i];
                min = min.min(x);
                max = max.max(x);
                if first_violation.is_none() && (x < lo || x > hi) {
                    first_violation = Some(k);
                }
            }
            JointLimitEntry {
                joint: i + 1,
                min,
                max,
                limit_low: lo,
                limit_high: hi,
                margin: (hi - max).min(min - lo),
                first_violation,
            }
        })
        .collect();
    QuantityReport {
        quantity: name.to_string(),
        min_margin: joints.iter().map(|j| j.margin).fold(f64::INFINITY, f64::min),
        first_violation: joints.iter().filter_map(|j| j.first_violation).min(),
        joints,
    }
}

/// Extremes and limit margins of every joint quantity; torques are included when present.
pub fn limits_report(jt: &JointTrajectory, model: &RobotModel) -> LimitsReport {
    let limits: Vec<JointLimits> = model.joints.iter().map(|j| j.limits).collect();
    let sym = |f: fn(&JointLimits) -> f64| -> Vec<(f64, f64)> { limits.iter().map(|l| (-f(l), f(l))).collect() };
    let mut quantities = vec![
        evaluate("q", &jt.q, &limits.iter().map(|l| (l.q_min, l.q_max)).collect::<Vec<_>>()),
        evaluate("dq", &jt.dq, &sym(|l| l.dq)),
        evaluate("ddq", &jt.ddq, &sym(|l| l.ddq)),
        evaluate("dddq", &jt.dddq, &sym(|l| l.dddq)),
    ];
    if let Some(tau) = &jt.tau {
        quantities.push(evaluate("tau", tau, &sym(|l| l.tau)));
    }
    LimitsReport { quantities }
}
