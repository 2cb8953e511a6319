//! Linearization about the hanging equilibrium and zero-order-hold discretization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::pendulum::{PendulumParams, INPUT_DIM, STATE_DIM};

pub const OUTPUT_DIM: usize = 6;

/// Continuous model `x' = A_c x + B_c u`, `y = C x + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// Constant output term; carries the `-l` of the mass height.
    pub output_offset: DVector<f64>,
}

/// Sampled model `x_{k+1} = A x_k + B u_k`, `y_k = C x_k + offset`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub output_offset: DVector<f64>,
    pub ts: f64,
}

/// Output matrix and offset of the linearized mass position and velocity.
fn output_map(l: f64) -> (DMatrix<f64>, DVector<f64>) {
    let mut c = DMatrix::zeros(OUTPUT_DIM, STATE_DIM);
    c[(0, 0)] = 1.0;
    c[(0, 3)] = -l;
    c[(1, 1)] = 1.0;
    c[(1, 4)] = l;
    c[(2, 2)] = 1.0;
    c[(3, 5)] = 1.0;
    c[(3, 8)] = -l;
    c[(4, 6)] = 1.0;
    c[(4, 9)] = l;
    c[(5, 7)] = 1.0;
    let mut offset = DVector::zeros(OUTPUT_DIM);
    offset[2] = -l;
    (c, offset)
}

pub fn build_continuous(params: &PendulumParams) -> ContinuousModel {
    let l = params.rod_length;
    let g = params.gravity;
    let mut a = DMatrix::zeros(STATE_DIM, STATE_DIM);
    for i in 0..5 {
        a[(i, i + 5)] = 1.0;
    }
    a[(8, 3)] = -g / l;
    a[(9, 4)] = -g / l;
    let mut b = DMatrix::zeros(STATE_DIM, INPUT_DIM);
    b[(5, 0)] = 1.0;
    b[(6, 1)] = 1.0;
    b[(7, 2)] = 1.0;
    b[(8, 0)] = 1.0 / l;
    b[(9, 1)] = -1.0 / l;
    let (c, output_offset) = output_map(l);
    ContinuousModel { a, b, c, output_offset }
}

/// Matrix exponential (nalgebra's Pade approximant with scaling and squaring).
pub fn matrix_exponential(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("expm needs a square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(m.exp())
}

/// Exact zero-order-hold discretization through the augmented exponential.
pub fn discretize_zoh(cm: &ContinuousModel, ts: f64) -> Result<DiscreteModel> {
    if !(ts > 0.0 && ts.is_finite()) {
        return Err(Error::InvalidParameter(format!("sample time must be positive, got {ts}")));
    }
    let n = cm.a.nrows();
    let m = cm.b.ncols();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(&cm.a * ts));
    aug.view_mut((0, n), (n, m)).copy_from(&(&cm.b * ts));
    let e = matrix_exponential(&aug)?;
    Ok(DiscreteModel {
        a: e.view((0, 0), (n, n)).into_owned(),
        b: e.view((0, n), (n, m)).into_owned(),
        c: cm.c.clone(),
        output_offset: cm.output_offset.clone(),
        ts,
    })
}

/// Convenience: continuous build followed by discretization.
pub fn discrete_model(params: &PendulumParams, ts: f64) -> Result<DiscreteModel> {
    discretize_zoh(&build_continuous(params), ts)
}

impl DiscreteModel {
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    pub fn output(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.c * x + &self.output_offset
    }
}
