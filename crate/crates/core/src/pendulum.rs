//! Nonlinear spherical-pendulum model of a carried container.
//!
//! The container is a point mass hanging from a driven pivot on a weightless
//! rod. The rod direction is parametrized by two superposed planar tilts:
//! `theta` about the world y axis and `phi` about the world x axis. The
//! mass sits at
//!
//! ```text
//! x_m = x_p - l sin(theta)
//! y_m = y_p + l cos(theta) sin(phi)
//! z_m = z_p - l cos(theta) cos(phi)
//! ```
//!
//! and the pivot accelerations are the control input.

use nalgebra::{Rotation3, Vector3};

use crate::error::{Error, Result};
use crate::trajectory::Trajectory;

pub const STATE_DIM: usize = 10;
pub const INPUT_DIM: usize = 3;
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Smallest admissible `|cos(theta)|` before the `phi` equation is rejected.
pub const SINGULARITY_COS: f64 = 1e-9;

/// Physical parameters of the virtual pendulum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendulumParams {
    pub rod_length: f64,
    pub gravity: f64,
    pub mass: f64,
    /// Height of the carried object, only used for point-mass validity checks.
    pub object_height: Option<f64>,
}

impl PendulumParams {
    pub fn new(rod_length: f64, gravity: f64, mass: f64) -> Result<Self> {
        for (name, v) in [("rod_length", rod_length), ("gravity", gravity), ("mass", mass)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(Self { rod_length, gravity, mass, object_height: None })
    }

    pub fn with_object_height(mut self, h: f64) -> Result<Self> {
        if !(h.is_finite() && h >= 0.0) {
            return Err(Error::InvalidParameter(format!("object_height must be >= 0, got {h}")));
        }
        self.object_height = Some(h);
        Ok(self)
    }

    /// Parameters for an object of height `h` carried on a rod `ratio` times longer.
    pub fn from_ratio(object_height: f64, ratio: f64, gravity: f64, mass: f64) -> Result<Self> {
        if !(ratio.is_finite() && ratio > 0.0) {
            return Err(Error::InvalidParameter(format!("ratio must be positive, got {ratio}")));
        }
        Self::new(ratio * object_height, gravity, mass)?.with_object_height(object_height)
    }
}

/// State ordered `[x_p, y_p, z_p, theta, phi, vx_p, vy_p, vz_p, theta_dot, phi_dot]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PendulumState {
    pub pivot: Vector3<f64>,
    pub theta: f64,
    pub phi: f64,
    pub pivot_vel: Vector3<f64>,
    pub theta_dot: f64,
    pub phi_dot: f64,
}

impl PendulumState {
    /// Hanging equilibrium with the pivot at `pivot`.
    pub fn at_rest(pivot: Vector3<f64>) -> Self {
        Self { pivot, ..Default::default() }
    }

    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() != STATE_DIM {
            return Err(Error::Dimension(format!("state needs {STATE_DIM} entries, got {}", x.len())));
        }
        Ok(Self {
            pivot: Vector3::new(x[0], x[1], x[2]),
            theta: x[3],
            phi: x[4],
            pivot_vel: Vector3::new(x[5], x[6], x[7]),
            theta_dot: x[8],
            phi_dot: x[9],
        })
    }

    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [
            self.pivot.x,
            self.pivot.y,
            self.pivot.z,
            self.theta,
            self.phi,
            self.pivot_vel.x,
            self.pivot_vel.y,
            self.pivot_vel.z,
            self.theta_dot,
            self.phi_dot,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    fn check(&self) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidState("non-finite entry".into()))
        }
    }

    /// Shorthand for the tilt pair `(theta, phi)`.
    pub fn tilt(&self) -> (f64, f64) {
        (self.theta, self.phi)
    }
}

/// Pivot acceleration command `[ddx_p, ddy_p, ddz_p]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PivotInput(pub Vector3<f64>);

impl PivotInput {
    pub fn new(ax: f64, ay: f64, az: f64) -> Self {
        Self(Vector3::new(ax, ay, az))
    }

    pub fn zero() -> Self {
        Self::default()
    }
}

/// World-frame position, velocity and acceleration of the mass.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MassKinematics {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
}

/// Worst-case slosh-free violations over a trajectory.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SloshMetrics {
    pub force_alignment_error: f64,
    pub kinematic_error: f64,
    pub max_tilt: f64,
}

/// Orientation of the container frame whose z axis points from the mass to the pivot.
pub fn container_rotation(theta: f64, phi: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::x_axis(), phi) * Rotation3::from_axis_angle(&Vector3::y_axis(), theta)
}

/// Unit vector from the mass towards the pivot.
pub fn rod_direction(theta: f64, phi: f64) -> Vector3<f64> {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    Vector3::new(st, -ct * sp, ct * cp)
}

pub fn mass_position(state: &PendulumState, params: &PendulumParams) -> Result<Vector3<f64>> {
    state.check()?;
    let l = params.rod_length;
    let (st, ct) = state.theta.sin_cos();
    let (sp, cp) = state.phi.sin_cos();
    Ok(state.pivot + Vector3::new(-l * st, l * ct * sp, -l * ct * cp))
}

fn mass_velocity_unchecked(state: &PendulumState, l: f64) -> Vector3<f64> {
    let (st, ct) = state.theta.sin_cos();
    let (sp, cp) = state.phi.sin_cos();
    let (td, pd) = (state.theta_dot, state.phi_dot);
    state.pivot_vel
        + l * Vector3::new(-ct * td, -st * sp * td + ct * cp * pd, st * cp * td + ct * sp * pd)
}

/// Mass kinematics for a prescribed tilt acceleration `(theta_ddot, phi_ddot)`.
///
/// Used both with the nonlinear equations of motion and with the tilt
/// accelerations implied by a planned (linear-model) trajectory.
pub fn mass_kinematics_with_tilt_accel(
    state: &PendulumState,
    input: &PivotInput,
    tilt_accel: (f64, f64),
    params: &PendulumParams,
) -> Result<MassKinematics> {
    let position = mass_position(state, params)?;
    let l = params.rod_length;
    let (st, ct) = state.theta.sin_cos();
    let (sp, cp) = state.phi.sin_cos();
    let (td, pd) = (state.theta_dot, state.phi_dot);
    let (tdd, pdd) = tilt_accel;
    let sq = td * td + pd * pd;
    let rel = Vector3::new(
        st * td * td - ct * tdd,
        -ct * sp * sq - 2.0 * st * cp * td * pd - st * sp * tdd + ct * cp * pdd,
        ct * cp * sq - 2.0 * st * sp * td * pd + st * cp * tdd + ct * sp * pdd,
    );
    Ok(MassKinematics {
        position,
        velocity: mass_velocity_unchecked(state, l),
        acceleration: input.0 + l * rel,
    })
}

pub fn mass_kinematics(
    state: &PendulumState,
    input: &PivotInput,
    params: &PendulumParams,
) -> Result<MassKinematics> {
    let acc = nonlinear_accel(state, input, params)?;
    mass_kinematics_with_tilt_accel(state, input, acc, params)
}

/// Tilt accelerations `(theta_ddot, phi_ddot)` from the Euler-Lagrange equations.
pub fn nonlinear_accel(
    state: &PendulumState,
    input: &PivotInput,
    params: &PendulumParams,
) -> Result<(f64, f64)> {
    state.check()?;
    if !input.0.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidState("non-finite input".into()));
    }
    let l = params.rod_length;
    let g = params.gravity;
    let (st, ct) = state.theta.sin_cos();
    let (sp, cp) = state.phi.sin_cos();
    if ct.abs() <= SINGULARITY_COS {
        return Err(Error::Singularity { cos_theta: ct });
    }
    let u = input.0;
    let theta_dd =
        (-st * (g + u.z) * cp + u.x * ct + u.y * sp * st - l * ct * st * state.phi_dot.powi(2)) / l;
    let phi_dd = (-sp * (g + u.z) - u.y * cp + 2.0 * l * state.phi_dot * state.theta_dot * st) / (l * ct);
    Ok((theta_dd, phi_dd))
}

fn derivative(
    state: &PendulumState,
    input: &PivotInput,
    params: &PendulumParams,
) -> Result<[f64; STATE_DIM]> {
    let (tdd, pdd) = nonlinear_accel(state, input, params)?;
    let u = input.0;
    Ok([
        state.pivot_vel.x,
        state.pivot_vel.y,
        state.pivot_vel.z,
        state.theta_dot,
        state.phi_dot,
        u.x,
        u.y,
        u.z,
        tdd,
        pdd,
    ])
}

/// One classical Runge-Kutta step with the input held constant.
pub fn step_rk4(
    state: &PendulumState,
    input: &PivotInput,
    dt: f64,
    params: &PendulumParams,
) -> Result<PendulumState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let x0 = state.to_array();
    let offset = |k: &[f64; STATE_DIM], h: f64| -> Result<PendulumState> {
        let mut x = x0;
        for (xi, ki) in x.iter_mut().zip(k) {
            *xi += h * ki;
        }
        PendulumState::from_slice(&x)
    };
    let k1 = derivative(state, input, params)?;
    let k2 = derivative(&offset(&k1, 0.5 * dt)?, input, params)?;
    let k3 = derivative(&offset(&k2, 0.5 * dt)?, input, params)?;
    let k4 = derivative(&offset(&k3, dt)?, input, params)?;
    let mut x = x0;
    for i in 0..STATE_DIM {
        x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    PendulumState::from_slice(&x)
}

/// Integrates `steps` RK4 steps of size `dt` under a constant input.
pub fn integrate(
    state: &PendulumState,
    input: &PivotInput,
    dt: f64,
    steps: usize,
    params: &PendulumParams,
) -> Result<PendulumState> {
    let mut s = *state;
    for _ in 0..steps {
        s = step_rk4(&s, input, dt, params)?;
    }
    Ok(s)
}

/// Kinetic and potential energy `(K, U)` of the mass.
pub fn total_energy(state: &PendulumState, params: &PendulumParams) -> Result<(f64, f64)> {
    let pos = mass_position(state, params)?;
    let vel = mass_velocity_unchecked(state, params.rod_length);
    let kinetic = 0.5 * params.mass * vel.norm_squared();
    let potential = params.mass * params.gravity * pos.z;
    Ok((kinetic, potential))
}

/// Per-node slosh evaluation: lateral force ratio and the per-plane kinematic residuals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeSlosh {
    /// External force on the mass expressed in the container frame.
    pub container_force: Vector3<f64>,
    pub alignment_error: f64,
    pub residual_xz: f64,
    pub residual_yz: f64,
}

/// Evaluates the slosh-free condition at a single node.
///
/// The x-z residual uses the tilt of the rod projected onto the x-z plane,
/// `tan = tan(theta) / cos(phi)`, and the y-z residual uses `phi`; both reduce
/// to `(a_z + g) tan(tilt) = a_lat` for planar motion.
pub fn node_slosh(
    theta: f64,
    phi: f64,
    acceleration: &Vector3<f64>,
    params: &PendulumParams,
    node: usize,
) -> Result<NodeSlosh> {
    let g = params.gravity;
    let force = params.mass * (acceleration + Vector3::new(0.0, 0.0, g));
    let norm = force.norm();
    if !(norm >= 1e-12) {
        return Err(Error::FreeFall { node });
    }
    let container_force = container_rotation(theta, phi).inverse() * force;
    let alignment_error = container_force.x.hypot(container_force.y) / norm;
    let vertical = acceleration.z + g;
    let tan_xz = theta.tan() / phi.cos();
    let residual_xz = (vertical * tan_xz - acceleration.x).abs();
    let residual_yz = (vertical * phi.tan() + acceleration.y).abs();
    Ok(NodeSlosh { container_force, alignment_error, residual_xz, residual_yz })
}

/// Worst-case force alignment, kinematic residual and tilt over a trajectory.
pub fn slosh_metrics(traj: &Trajectory, params: &PendulumParams) -> Result<SloshMetrics> {
    let mut m = SloshMetrics::default();
    for (k, node) in traj.nodes.iter().enumerate() {
        let (theta, phi) = node.state.tilt();
        let s = node_slosh(theta, phi, &node.mass.acceleration, params, k)?;
        m.force_alignment_error = m.force_alignment_error.max(s.alignment_error);
        m.kinematic_error = m.kinematic_error.max(s.residual_xz).max(s.residual_yz);
        m.max_tilt = m.max_tilt.max(theta.abs()).max(phi.abs());
    }
    Ok(m)
}

/// Rod length giving point-mass approximation error `p` for an object of height `h`.
pub fn rod_length_for_validity(p: f64, h: f64) -> Result<f64> {
    if !(p > 0.0 && h > 0.0) {
        return Err(Error::InvalidParameter(format!("p and h must be positive, got p={p}, h={h}")));
    }
    Ok(h / (6.0 * p).sqrt())
}

/// Point-mass approximation error `p = h^2 / (6 l^2)`.
pub fn validity_error(l: f64, h: f64) -> Result<f64> {
    if !(l > 0.0 && h > 0.0) {
        return Err(Error::InvalidParameter(format!("l and h must be positive, got l={l}, h={h}")));
    }
    Ok(h * h / (6.0 * l * l))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(l: f64) -> PendulumParams {
        PendulumParams::new(l, STANDARD_GRAVITY, 1.0).unwrap()
    }

    fn state(v: [f64; 10]) -> PendulumState {
        PendulumState::from_slice(&v).unwrap()
    }

    #[test]
    fn equilibrium_position() {
        let p = mass_position(&PendulumState::default(), &params(0.6)).unwrap();
        assert_eq!(p, Vector3::new(0.0, 0.0, -0.6));
    }

    #[test]
    fn horizontal_rod() {
        let s = state([0.0, 0.0, 0.0, std::f64::consts::FRAC_PI_2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let p = mass_position(&s, &params(1.0)).unwrap();
        assert_relative_eq!(p, Vector3::new(-1.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn generic_position() {
        let s = state([1.0, 2.0, 3.0, 0.1, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let p = mass_position(&s, &params(0.6)).unwrap();
        // 1 - 0.6 sin 0.1, 2 + 0.6 cos 0.1 sin 0.2, 3 - 0.6 cos 0.1 cos 0.2
        assert_relative_eq!(p.x, 0.940_099_950_011_903_2, epsilon = 1e-14);
        assert_relative_eq!(p.y, 2.118_606_086_992_450_3, epsilon = 1e-14);
        assert_relative_eq!(p.z, 2.414_897_803_678_910_4, epsilon = 1e-14);
    }

    #[test]
    fn rejects_non_finite_state() {
        let s = state([f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(mass_position(&s, &params(1.0)), Err(Error::InvalidState(_))));
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let p = params(0.6);
        let s = PendulumState::default();
        assert_eq!(nonlinear_accel(&s, &PivotInput::zero(), &p).unwrap(), (0.0, 0.0));
        let next = step_rk4(&s, &PivotInput::zero(), 0.01, &p).unwrap();
        assert_eq!(next, s);
        let k = mass_kinematics(&s, &PivotInput::zero(), &p).unwrap();
        assert_eq!(k.velocity, Vector3::zeros());
        assert_eq!(k.acceleration, Vector3::zeros());
    }

    #[test]
    fn vertical_pivot_motion_passes_through() {
        let p = params(0.6);
        let mut s = PendulumState::default();
        s.pivot_vel.z = 0.5;
        let u = PivotInput::new(0.0, 0.0, 1.3);
        let k = mass_kinematics(&s, &u, &p).unwrap();
        assert_relative_eq!(k.velocity, Vector3::new(0.0, 0.0, 0.5), epsilon = 1e-15);
        assert_relative_eq!(k.acceleration, Vector3::new(0.0, 0.0, 1.3), epsilon = 1e-15);
    }

    #[test]
    fn planar_reduction() {
        let p = params(0.6);
        for &theta in &[0.3, -0.7, 1.2] {
            let s = state([0.0, 0.0, 0.0, theta, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
            let (tdd, pdd) = nonlinear_accel(&s, &PivotInput::zero(), &p).unwrap();
            assert_relative_eq!(tdd, -(p.gravity / p.rod_length) * theta.sin(), epsilon = 1e-14);
            assert_eq!(pdd, 0.0);
            let u = PivotInput::new(0.7, 0.0, -1.1);
            let (tdd, _) = nonlinear_accel(&s, &u, &p).unwrap();
            let planar = (-p.gravity * theta.sin() + 0.7 * theta.cos() + 1.1 * theta.sin()) / p.rod_length;
            assert_relative_eq!(tdd, planar, epsilon = 1e-14);
        }
    }

    #[test]
    fn singular_parametrization() {
        let s = state([0.0, 0.0, 0.0, std::f64::consts::FRAC_PI_2, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            nonlinear_accel(&s, &PivotInput::zero(), &params(1.0)),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn energy_examples() {
        let p = params(0.6);
        let (k, u) = total_energy(&PendulumState::default(), &p).unwrap();
        assert_eq!(k, 0.0);
        assert_relative_eq!(u, -5.886, epsilon = 1e-12);
        let mut s = PendulumState::default();
        s.pivot_vel.z = 1.0;
        let (k, _) = total_energy(&s, &p).unwrap();
        assert_relative_eq!(k, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn validity_relations() {
        assert_relative_eq!(validity_error(3.0, 1.0).unwrap(), 1.0 / 54.0, epsilon = 1e-15);
        assert_relative_eq!(rod_length_for_validity(1.0 / 6.0, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(validity_error(0.6, 0.1).unwrap(), 1.0 / 216.0, epsilon = 1e-15);
        assert_relative_eq!(rod_length_for_validity(1.0 / 216.0, 0.1).unwrap(), 0.6, epsilon = 1e-12);
        assert!(validity_error(0.0, 1.0).is_err());
        assert!(rod_length_for_validity(0.1, -1.0).is_err());
    }

    #[test]
    fn container_axis_follows_rod() {
        for &(t, f) in &[(0.1, 0.0), (0.0, 0.2), (-0.3, 0.25)] {
            let z = container_rotation(t, f) * Vector3::z();
            assert_relative_eq!(z, rod_direction(t, f), epsilon = 1e-15);
        }
    }

    #[test]
    fn static_hold_has_no_slosh() {
        let p = params(0.6);
        let s = node_slosh(0.0, 0.0, &Vector3::zeros(), &p, 0).unwrap();
        assert_eq!(s.alignment_error, 0.0);
        assert_eq!(s.residual_xz, 0.0);
        assert_eq!(s.residual_yz, 0.0);
        assert_relative_eq!(s.container_force.z, p.gravity);
    }

    #[test]
    fn free_fall_is_rejected() {
        let p = params(0.6);
        let a = Vector3::new(0.0, 0.0, -p.gravity);
        assert_eq!(node_slosh(0.0, 0.0, &a, &p, 4), Err(Error::FreeFall { node: 4 }));
    }

    #[test]
    fn parameter_validation() {
        assert!(PendulumParams::new(0.0, 9.81, 1.0).is_err());
        assert!(PendulumParams::new(1.0, -9.81, 1.0).is_err());
        assert!(PendulumParams::new(1.0, 9.81, 0.0).is_err());
        let p = PendulumParams::from_ratio(0.1, 6.0, 9.81, 0.01).unwrap();
        assert_relative_eq!(p.rod_length, 0.6, epsilon = 1e-15);
        assert_eq!(p.object_height, Some(0.1));
    }
}
