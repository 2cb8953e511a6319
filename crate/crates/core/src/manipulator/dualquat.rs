//! Unit dual quaternions for rigid poses.
//!
//! A pose with rotation `r` and translation `t` is stored as `r + eps d`
//! with `d = 1/2 t r` (translation applied after rotation).

use std::ops::Mul;

use nalgebra::{Isometry3, Matrix3, Quaternion, Translation3, UnitQuaternion, Vector3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitDualQuaternion {
    pub real: Quaternion<f64>,
    pub dual: Quaternion<f64>,
}

fn pure(v: &Vector3<f64>) -> Quaternion<f64> {
    Quaternion::new(0.0, v.x, v.y, v.z)
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Left Jacobian of SO(3), the `V` in `exp([w, v]) = (exp(w), V v)`.
fn left_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let k = skew(w);
    let (a, b) = if theta < 1e-6 {
        let t2 = theta * theta;
        (0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0)
    } else {
        let t2 = theta * theta;
        ((1.0 - theta.cos()) / t2, (theta - theta.sin()) / (t2 * theta))
    };
    Matrix3::identity() + k * a + k * k * b
}

fn left_jacobian_inv(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let k = skew(w);
    let c = if theta < 1e-6 {
        1.0 / 12.0 + theta * theta / 720.0
    } else {
        let half = 0.5 * theta;
        (1.0 - half / half.tan()) / (theta * theta)
    };
    Matrix3::identity() - k * 0.5 + k * k * c
}

impl Default for UnitDualQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl UnitDualQuaternion {
    pub fn identity() -> Self {
        Self { real: Quaternion::identity(), dual: Quaternion::new(0.0, 0.0, 0.0, 0.0) }
    }

    pub fn from_rotation_translation(rotation: &UnitQuaternion<f64>, translation: &Vector3<f64>) -> Self {
        let real = *rotation.quaternion();
        Self { real, dual: pure(translation) * real * 0.5 }
    }

    pub fn from_translation(t: &Vector3<f64>) -> Self {
        Self::from_rotation_translation(&UnitQuaternion::identity(), t)
    }

    pub fn from_rotation(r: &UnitQuaternion<f64>) -> Self {
        Self::from_rotation_translation(r, &Vector3::zeros())
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self::from_rotation_translation(&iso.rotation, &iso.translation.vector)
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_quaternion(self.real)
    }

    pub fn translation(&self) -> Vector3<f64> {
        (self.dual * self.real.conjugate() * 2.0).imag()
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.translation()), self.rotation())
    }

    /// Inverse of a unit dual quaternion (its quaternion conjugate).
    pub fn inverse(&self) -> Self {
        Self { real: self.real.conjugate(), dual: self.dual.conjugate() }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * p + self.translation()
    }

    /// `| |real| - 1 |` and the Plücker residual `| real . dual |`.
    pub fn constraint_residuals(&self) -> (f64, f64) {
        ((self.real.norm() - 1.0).abs(), self.real.coords.dot(&self.dual.coords).abs())
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        let (n, p) = self.constraint_residuals();
        n <= tol && p <= tol
    }

    /// Projects back onto the unit set after accumulated round-off.
    pub fn normalize(&self) -> Self {
        let n = self.real.norm();
        let real = self.real / n;
        let dual = self.dual / n;
        let dual = dual - real * real.coords.dot(&dual.coords);
        Self { real, dual }
    }

    /// Screw logarithm as a spatial twist `(w, v)` with `exp(w, v) == self`.
    ///
    /// `v` is the velocity of the point at the origin of the reference frame.
    pub fn log(&self) -> (Vector3<f64>, Vector3<f64>) {
        let w = self.rotation().scaled_axis();
        let v = left_jacobian_inv(&w) * self.translation();
        (w, v)
    }

    pub fn exp(w: &Vector3<f64>, v: &Vector3<f64>) -> Self {
        let r = UnitQuaternion::from_scaled_axis(*w);
        Self::from_rotation_translation(&r, &(left_jacobian(w) * v))
    }

    /// Screw interpolation from `self` (at `s = 0`) to `other` (at `s = 1`).
    pub fn sclerp(&self, other: &Self, s: f64) -> Self {
        let (w, v) = (*other * self.inverse()).log();
        Self::exp(&(w * s), &(v * s)) * *self
    }
}

impl Mul for UnitDualQuaternion {
    type Output = Self;

    fn mul(self, rhs: Self) -> Self {
        Self { real: self.real * rhs.real, dual: self.real * rhs.dual + self.dual * rhs.real }
    }
}

/// World-frame pose error `(rotation vector, translation difference)` from `current` to `target`.
pub fn pose_error(target: &UnitDualQuaternion, current: &UnitDualQuaternion) -> (Vector3<f64>, Vector3<f64>) {
    let dr = target.rotation() * current.rotation().inverse();
    (dr.scaled_axis(), target.translation() - current.translation())
}
