use crate::error::{Error, Result};
use crate::pendulum::{
    mass_kinematics, mass_kinematics_with_tilt_accel, step_rk4, MassKinematics, PendulumParams,
    PendulumState, PivotInput,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectoryNode {
    pub t: f64,
    pub state: PendulumState,
    /// Input applied from this node on (the last node repeats the final input).
    pub input: PivotInput,
    pub mass: MassKinematics,
}

/// Time-indexed states, inputs and mass kinematics.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub ts: f64,
    pub nodes: Vec<TrajectoryNode>,
}

fn check_lengths(states: &[PendulumState], inputs: &[PivotInput]) -> Result<()> {
    if states.is_empty() || inputs.len() + 1 != states.len() {
        return Err(Error::Dimension(format!(
            "need N+1 states and N inputs, got {} states and {} inputs",
            states.len(),
            inputs.len()
        )));
    }
    Ok(())
}

fn input_at(inputs: &[PivotInput], k: usize) -> PivotInput {
    inputs.get(k).or(inputs.last()).copied().unwrap_or_default()
}

impl Trajectory {
    /// Mass kinematics of a planned trajectory as it would be executed.
    ///
    /// Positions follow the exact mass map of each planned state while the
    /// tilt accelerations are the ones the linear model prescribes,
    /// `l theta'' = -g theta + u1` and `l phi'' = -g phi - u2`.
    pub fn from_plan(
        states: &[PendulumState],
        inputs: &[PivotInput],
        ts: f64,
        params: &PendulumParams,
    ) -> Result<Self> {
        check_lengths(states, inputs)?;
        let (g, l) = (params.gravity, params.rod_length);
        let nodes = states
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let u = input_at(inputs, k);
                let tilt_acc = ((-g * s.theta + u.0.x) / l, (-g * s.phi - u.0.y) / l);
                let mass = mass_kinematics_with_tilt_accel(s, &u, tilt_acc, params)?;
                Ok(TrajectoryNode { t: k as f64 * ts, state: *s, input: u, mass })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { ts, nodes })
    }

    /// Mass kinematics of states that obey the nonlinear equations of motion.
    pub fn from_nonlinear(
        states: &[PendulumState],
        inputs: &[PivotInput],
        ts: f64,
        params: &PendulumParams,
    ) -> Result<Self> {
        check_lengths(states, inputs)?;
        let nodes = states
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let u = input_at(inputs, k);
                let mass = mass_kinematics(s, &u, params)?;
                Ok(TrajectoryNode { t: k as f64 * ts, state: *s, input: u, mass })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { ts, nodes })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn states(&self) -> Vec<PendulumState> {
        self.nodes.iter().map(|n| n.state).collect()
    }
}

/// Replays a zero-order-hold input sequence through the nonlinear model.
///
/// Each input interval of length `ts` is split into `substeps` RK4 steps;
/// the returned states are sampled at the input nodes.
pub fn rollout(
    initial: &PendulumState,
    inputs: &[PivotInput],
    ts: f64,
    substeps: usize,
    params: &PendulumParams,
) -> Result<Vec<PendulumState>> {
    let substeps = substeps.max(1);
    let dt = ts / substeps as f64;
    let mut states = Vec::with_capacity(inputs.len() + 1);
    let mut s = *initial;
    states.push(s);
    for (k, u) in inputs.iter().enumerate() {
        for _ in 0..substeps {
            s = step_rk4(&s, u, dt, params).map_err(|e| match e {
                Error::Singularity { .. } => Error::SingularityAtNode { node: k },
                other => other,
            })?;
        }
        states.push(s);
    }
    Ok(states)
}
