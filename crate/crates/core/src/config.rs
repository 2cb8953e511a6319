//! Pipeline configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manipulator::IkSettings;
use crate::pendulum::{PendulumParams, INPUT_DIM, STANDARD_GRAVITY, STATE_DIM};
use crate::qp::{BoundaryPins, BoxBounds, TrajectorySpec};
use crate::linear_model::OUTPUT_DIM;
use crate::solver::SolverSettings;

const INF: f64 = f64::INFINITY;

/// State, input and jerk limits. Unbounded entries are `inf` / `-inf`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub state_lower: [f64; STATE_DIM],
    pub state_upper: [f64; STATE_DIM],
    pub input_lower: [f64; INPUT_DIM],
    pub input_upper: [f64; INPUT_DIM],
    /// Limits on `(u_{k+1} - u_k) / Ts` in m/s^3.
    pub jerk_lower: [f64; INPUT_DIM],
    pub jerk_upper: [f64; INPUT_DIM],
}

impl Default for BoundsConfig {
    fn default() -> Self {
        let mut upper = [INF; STATE_DIM];
        upper[3] = 0.2;
        upper[4] = 0.2;
        Self {
            state_lower: upper.map(|v| -v),
            state_upper: upper,
            input_lower: [-INF; INPUT_DIM],
            input_upper: [INF; INPUT_DIM],
            jerk_lower: [-2.0; INPUT_DIM],
            jerk_upper: [2.0; INPUT_DIM],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PinsConfig {
    pub start: bool,
    pub end: bool,
    pub rest_to_rest: bool,
    pub waypoints: Vec<usize>,
}

impl Default for PinsConfig {
    fn default() -> Self {
        let p = BoundaryPins::default();
        Self { start: p.start, end: p.end, rest_to_rest: p.rest_to_rest, waypoints: p.waypoints }
    }
}

/// Position step of the mass along x, from rest to rest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepScenario {
    pub distance: f64,
    pub horizon: f64,
    /// Rod-length to object-height ratio used when the config gives no rod length.
    pub ratio: f64,
}

impl Default for StepScenario {
    fn default() -> Self {
        Self { distance: 0.3, horizon: 3.0, ratio: 6.0 }
    }
}

/// Closed square in the horizontal plane, each side traversed with a quintic time law.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SquareScenario {
    pub side: f64,
    pub side_time: f64,
    /// Rest time before the first and after the last side.
    pub dwell: f64,
    pub rod_length: f64,
}

impl Default for SquareScenario {
    fn default() -> Self {
        Self { side: 0.3, side_time: 1.2, dwell: 0.5, rod_length: 0.6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub gravity: f64,
    pub mass: f64,
    /// Either this or `object_height` together with `ratio`.
    pub rod_length: Option<f64>,
    pub object_height: Option<f64>,
    pub ratio: Option<f64>,
    pub ts: f64,
    pub bounds: BoundsConfig,
    /// Weight of the input-rate smoothing term (m/s^3)^-2.
    pub jerk_weight: f64,
    pub pins: PinsConfig,
    pub solver: SolverSettings,
    pub yaw: f64,
    /// Robot model file; the bundled arm is used when absent.
    pub robot: Option<String>,
    /// Initial joint configuration; solved from the model's ready pose when absent.
    pub q0: Option<Vec<f64>>,
    /// World position of the mass at the first node; defaults to the tool position at the seed configuration.
    pub workspace_origin: Option<[f64; 3]>,
    pub ik: IkSettings,
    /// Largest integration step of the nonlinear replay (s).
    pub max_sim_dt: f64,
    pub step: StepScenario,
    pub square: SquareScenario,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            gravity: STANDARD_GRAVITY,
            mass: 1.0,
            rod_length: None,
            object_height: None,
            ratio: None,
            ts: 0.033,
            bounds: BoundsConfig::default(),
            jerk_weight: 1e-6,
            pins: PinsConfig::default(),
            solver: SolverSettings::default(),
            yaw: 0.0,
            robot: None,
            q0: None,
            workspace_origin: None,
            ik: IkSettings::default(),
            max_sim_dt: 1e-3,
            step: StepScenario::default(),
            square: SquareScenario::default(),
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        if !(self.ts > 0.0 && self.ts.is_finite()) {
            return Err(Error::InvalidParameter(format!("ts must be positive, got {}", self.ts)));
        }
        if !(self.max_sim_dt > 0.0) {
            return Err(Error::InvalidParameter("max_sim_dt must be positive".into()));
        }
        if !(self.jerk_weight >= 0.0 && self.jerk_weight.is_finite()) {
            return Err(Error::InvalidParameter("jerk_weight must be non-negative".into()));
        }
        self.solver.validate()?;
        self.params().map(|_| ())
    }

    /// Pendulum parameters; exactly one of `rod_length` or (`object_height`, `ratio`) must be set.
    pub fn params(&self) -> Result<PendulumParams> {
        match (self.rod_length, self.object_height, self.ratio) {
            (Some(_), _, Some(_)) => {
                Err(Error::InvalidParameter("rod_length and ratio are mutually exclusive".into()))
            }
            (Some(l), h, None) => {
                let p = PendulumParams::new(l, self.gravity, self.mass)?;
                match h {
                    Some(h) => p.with_object_height(h),
                    None => Ok(p),
                }
            }
            (None, Some(h), Some(r)) => PendulumParams::from_ratio(h, r, self.gravity, self.mass),
            _ => Err(Error::InvalidParameter(
                "set either rod_length or both object_height and ratio".into(),
            )),
        }
    }

    /// Optimization problem description for a desired mass trajectory.
    pub fn trajectory_spec(&self, desired: Vec<[f64; OUTPUT_DIM]>) -> TrajectorySpec {
        let b = &self.bounds;
        let mut spec = TrajectorySpec::new(desired, self.ts);
        spec.bounds = BoxBounds {
            state_lower: b.state_lower,
            state_upper: b.state_upper,
            input_lower: b.input_lower,
            input_upper: b.input_upper,
        };
        spec.jerk_lower = b.jerk_lower;
        spec.jerk_upper = b.jerk_upper;
        spec.jerk_weight = self.jerk_weight;
        spec.pins = BoundaryPins {
            start: self.pins.start,
            end: self.pins.end,
            rest_to_rest: self.pins.rest_to_rest,
            waypoints: self.pins.waypoints.clone(),
        };
        spec
    }

    /// Copy set up for the step scenario at ratio `r` (object height defaults to 0.1 m).
    pub fn for_step(&self, r: f64) -> Self {
        let mut c = self.clone();
        c.rod_length = None;
        c.object_height = Some(self.object_height.unwrap_or(0.1));
        c.ratio = Some(r);
        c
    }

    /// Copy set up for the square scenario; an explicit rod length or ratio is kept.
    pub fn for_square(&self) -> Self {
        let mut c = self.clone();
        if c.rod_length.is_none() && c.ratio.is_none() {
            c.rod_length = Some(self.square.rod_length);
        }
        c
    }
}
