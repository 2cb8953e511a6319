use nalgebra::{DMatrix, UnitQuaternion, Vector3};

use super::dualquat::UnitDualQuaternion;
use super::robot::{Joint, RobotModel};
use crate::error::Result;

/// `Rx(alpha) Tx(a) Rz(q + offset) Tz(d)` as a dual quaternion.
pub fn joint_transform(joint: &Joint, q: f64) -> UnitDualQuaternion {
    let dh = joint.dh;
    let rx = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), dh.alpha);
    let rz = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), q + dh.theta_offset);
    UnitDualQuaternion::from_rotation_translation(&rx, &(rx * Vector3::new(dh.a, 0.0, 0.0)))
        * UnitDualQuaternion::from_rotation_translation(&rz, &Vector3::new(0.0, 0.0, dh.d))
}

/// World poses of every joint frame (joint `i` rotates about the z axis of frame `i`).
pub fn joint_frames(q: &[f64], model: &RobotModel) -> Result<Vec<UnitDualQuaternion>> {
    model.check_dim(q)?;
    let mut pose = UnitDualQuaternion::identity();
    Ok(model
        .joints
        .iter()
        .zip(q)
        .map(|(j, &qi)| {
            pose = (pose * joint_transform(j, qi)).normalize();
            pose
        })
        .collect())
}

/// Tool pose in the base frame.
pub fn forward_kinematics(q: &[f64], model: &RobotModel) -> Result<UnitDualQuaternion> {
    let frames = joint_frames(q, model)?;
    let flange = *frames.last().expect("model has joints");
    Ok((flange * model.tool_pose()).normalize())
}

/// Base-frame geometric Jacobian of the tool, angular rows over linear rows.
pub fn geometric_jacobian(q: &[f64], model: &RobotModel) -> Result<DMatrix<f64>> {
    let frames = joint_frames(q, model)?;
    let tool = (*frames.last().expect("model has joints") * model.tool_pose()).translation();
    let mut j = DMatrix::zeros(6, model.dof());
    for (i, f) in frames.iter().enumerate() {
        let z = f.rotation() * Vector3::z();
        let lin = z.cross(&(tool - f.translation()));
        j.fixed_view_mut::<3, 1>(0, i).copy_from(&z);
        j.fixed_view_mut::<3, 1>(3, i).copy_from(&lin);
    }
    Ok(j)
}

/// Yoshikawa manipulability `sqrt(det(J J'))`, using `J'J` for arms with fewer than six joints.
pub fn manipulability(j: &DMatrix<f64>) -> f64 {
    let g = if j.ncols() < j.nrows() { j.transpose() * j } else { j * j.transpose() };
    g.determinant().max(0.0).sqrt()
}
