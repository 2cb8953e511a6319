//! Mapping of pendulum trajectories to a serial manipulator.

pub mod dualquat;
pub mod dynamics;
pub mod ik;
pub mod kinematics;
pub mod limits;
pub mod robot;

use nalgebra::{UnitQuaternion, Vector3};

use crate::error::Result;
use crate::pendulum::{container_rotation, mass_position, PendulumParams, PendulumState};

pub use dualquat::UnitDualQuaternion;
pub use ik::{differential_ik, IkResult, IkSettings, JointTrajectory};
pub use kinematics::{forward_kinematics, geometric_jacobian};
pub use limits::{limits_report, LimitsReport};
pub use robot::RobotModel;

/// Container pose: origin at the mass, z axis along the rod towards the pivot.
pub fn pose_from_state(state: &PendulumState, params: &PendulumParams, yaw: f64) -> Result<UnitDualQuaternion> {
    let t = mass_position(state, params)?;
    let (theta, phi) = state.tilt();
    let r = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw)
        * UnitQuaternion::from_rotation_matrix(&container_rotation(theta, phi));
    Ok(UnitDualQuaternion::from_rotation_translation(&r, &t))
}
