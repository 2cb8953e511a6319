//! Recursive Newton-Euler inverse dynamics on modified DH frames.

use nalgebra::{DVector, UnitQuaternion, Vector3};

use super::ik::JointTrajectory;
use super::kinematics::{joint_frames, joint_transform};
use super::robot::{LinkInertia, RobotModel};
use crate::error::{Error, Result};

fn links(model: &RobotModel) -> Result<&[LinkInertia]> {
    model.inertia.as_deref().ok_or(Error::DynamicsUnavailable)
}

/// Joint torques for `(q, dq, ddq)` with gravity `g` along the negative base z axis.
pub fn inverse_dynamics(q: &[f64], dq: &[f64], ddq: &[f64], model: &RobotModel, g: f64) -> Result<DVector<f64>> {
    let links = links(model)?;
    model.check_dim(q)?;
    model.check_dim(dq)?;
    model.check_dim(ddq)?;
    let n = model.dof();
    let z = Vector3::z();
    let parts: Vec<(UnitQuaternion<f64>, Vector3<f64>)> = model
        .joints
        .iter()
        .zip(q)
        .map(|(j, &qi)| {
            let t = joint_transform(j, qi);
            (t.rotation(), t.translation())
        })
        .collect();

    let mut w = Vector3::zeros();
    let mut wd = Vector3::zeros();
    // Gravity enters as an upward base acceleration.
    let mut vd = Vector3::new(0.0, 0.0, g);
    let mut force = Vec::with_capacity(n);
    let mut moment = Vec::with_capacity(n);
    for i in 0..n {
        let (r, p) = &parts[i];
        let rt = r.inverse();
        let vd_i = rt * (wd.cross(p) + w.cross(&w.cross(p)) + vd);
        let w_prev = rt * w;
        let w_i = w_prev + z * dq[i];
        let wd_i = rt * wd + w_prev.cross(&(z * dq[i])) + z * ddq[i];
        let link = &links[i];
        let c = link.com();
        let inertia = link.tensor();
        let vd_c = wd_i.cross(&c) + w_i.cross(&w_i.cross(&c)) + vd_i;
        force.push(vd_c * link.mass);
        moment.push(inertia * wd_i + w_i.cross(&(inertia * w_i)));
        w = w_i;
        wd = wd_i;
        vd = vd_i;
    }

    let mut tau = DVector::zeros(n);
    let mut f_next = Vector3::zeros();
    let mut n_next = Vector3::zeros();
    for i in (0..n).rev() {
        let (f_child, n_child, p_child) = if i + 1 < n {
            let (r, p) = &parts[i + 1];
            (r * f_next, r * n_next, *p)
        } else {
            (Vector3::zeros(), Vector3::zeros(), Vector3::zeros())
        };
        let c = links[i].com();
        let f_i = f_child + force[i];
        let n_i = moment[i] + n_child + c.cross(&force[i]) + p_child.cross(&f_child);
        tau[i] = n_i.z;
        f_next = f_i;
        n_next = n_i;
    }
    Ok(tau)
}

/// Kinetic and potential energy of the arm.
pub fn mechanical_energy(q: &[f64], dq: &[f64], model: &RobotModel, g: f64) -> Result<(f64, f64)> {
    let links = links(model)?;
    model.check_dim(dq)?;
    let frames = joint_frames(q, model)?;
    let axes: Vec<(Vector3<f64>, Vector3<f64>)> =
        frames.iter().map(|f| (f.rotation() * Vector3::z(), f.translation())).collect();
    let (mut kinetic, mut potential) = (0.0, 0.0);
    for (i, link) in links.iter().enumerate() {
        let frame = &frames[i];
        let c = frame.transform_point(&link.com());
        let mut w = Vector3::zeros();
        let mut v = Vector3::zeros();
        for (j, (axis, origin)) in axes.iter().enumerate().take(i + 1) {
            w += axis * dq[j];
            v += axis.cross(&(c - origin)) * dq[j];
        }
        let r = frame.rotation().to_rotation_matrix();
        let inertia = r.matrix() * link.tensor() * r.matrix().transpose();
        kinetic += 0.5 * link.mass * v.norm_squared() + 0.5 * w.dot(&(inertia * w));
        potential += link.mass * g * c.z;
    }
    Ok((kinetic, potential))
}

/// Torques at every node of a joint trajectory.
pub fn joint_torques(jt: &JointTrajectory, model: &RobotModel, g: f64) -> Result<Vec<DVector<f64>>> {
    (0..jt.len())
        .map(|k| inverse_dynamics(jt.q[k].as_slice(), jt.dq[k].as_slice(), jt.ddq[k].as_slice(), model, g))
        .collect()
}
