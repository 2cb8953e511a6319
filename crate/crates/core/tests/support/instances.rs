//! Random trajectory problems that are feasible by construction and have a unique minimizer.
//!
//! The start is pinned at rest and every bound contains zero, so holding the
//! pendulum still is always feasible; end pins and waypoints return to the
//! start position. The input-rate weight together with the pinned first input
//! makes the objective strictly convex on the feasible set.

#![allow(dead_code)]

use rand::Rng;
use spillfree_core::linear_model::{discrete_model, DiscreteModel};
use spillfree_core::pendulum::PendulumParams;
use spillfree_core::qp::{assemble, BoundaryPins, BoxBounds, QpProblem, TrajectorySpec};

pub struct Instance {
    pub params: PendulumParams,
    pub model: DiscreteModel,
    pub spec: TrajectorySpec,
    pub problem: QpProblem,
}

fn maybe<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    if rng.random_bool(0.7) {
        rng.random_range(lo..hi)
    } else {
        f64::INFINITY
    }
}

pub fn random_instance<R: Rng>(rng: &mut R) -> Instance {
    let l = rng.random_range(0.3..0.9);
    let ts = rng.random_range(0.05..0.1);
    let pin_end = rng.random_bool(0.5);
    let nodes = if pin_end { rng.random_range(6..=10) } else { rng.random_range(2..=10) };
    let start: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.2..0.2));
    let mut desired: Vec<[f64; 6]> = (0..=nodes)
        .map(|_| {
            let mut row = [0.0; 6];
            for i in 0..3 {
                row[i] = start[i] + rng.random_range(-0.3..0.3);
                row[3 + i] = rng.random_range(-0.5..0.5);
            }
            row
        })
        .collect();
    desired[0][..3].copy_from_slice(&start);
    if pin_end {
        desired[nodes][..3].copy_from_slice(&start);
    }
    let mut waypoints = Vec::new();
    if nodes >= 4 && rng.random_bool(0.3) {
        let k = rng.random_range(1..nodes);
        desired[k][..3].copy_from_slice(&start);
        waypoints.push(k);
    }

    let tilt = maybe(rng, 0.02, 0.3);
    let vel = maybe(rng, 0.05, 1.0);
    let acc = maybe(rng, 0.2, 5.0);
    let mut state = [f64::INFINITY; 10];
    state[3] = tilt;
    state[4] = tilt;
    for i in 5..8 {
        state[i] = vel;
    }
    let jerk: [f64; 3] = std::array::from_fn(|_| maybe(rng, 0.5, 20.0));

    let mut spec = TrajectorySpec::new(desired, ts);
    spec.bounds = BoxBounds::symmetric(state, [acc; 3]);
    spec.jerk_lower = jerk.map(|j| -j);
    spec.jerk_upper = jerk;
    spec.jerk_weight = 10f64.powf(rng.random_range(-4.0..-2.0));
    spec.pins = BoundaryPins { start: true, end: pin_end, rest_to_rest: true, waypoints };

    let params = PendulumParams::new(l, 9.81, 1.0).unwrap();
    let model = discrete_model(&params, ts).unwrap();
    let problem = assemble(&model, &spec).unwrap();
    Instance { params, model, spec, problem }
}
