//! Modified Ruiz equilibration of the KKT data `(P, q, A, l, u)`.

use crate::sparse::CscMatrix;

const MIN_SCALING: f64 = 1e-4;
const MAX_SCALING: f64 = 1e4;

fn limit(v: f64) -> f64 {
    if v < MIN_SCALING {
        1.0
    } else {
        v.min(MAX_SCALING)
    }
}

/// Scaling `x = D x_s`, `y = E y_s / c`, `z = E^-1 z_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaling {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
    pub d_inv: Vec<f64>,
    pub e_inv: Vec<f64>,
    pub c: f64,
    pub c_inv: f64,
}

impl Scaling {
    pub fn identity(n: usize, m: usize) -> Self {
        Self { d: vec![1.0; n], e: vec![1.0; m], d_inv: vec![1.0; n], e_inv: vec![1.0; m], c: 1.0, c_inv: 1.0 }
    }
}

/// Equilibrates in place. `p` is the upper triangle of the Hessian.
pub fn equilibrate(
    p: &mut CscMatrix,
    q: &mut [f64],
    a: &mut CscMatrix,
    l: &mut [f64],
    u: &mut [f64],
    iterations: usize,
) -> Scaling {
    let n = p.ncols;
    let m = a.nrows;
    let mut s = Scaling::identity(n, m);
    for _ in 0..iterations {
        // Column norms of the symmetric P from its upper triangle.
        let mut p_cols = vec![0.0f64; n];
        for (r, c, v) in p.iter() {
            p_cols[c] = p_cols[c].max(v.abs());
            p_cols[r] = p_cols[r].max(v.abs());
        }
        let a_cols = a.col_inf_norms();
        let a_rows = a.row_inf_norms();
        let delta: Vec<f64> = (0..n).map(|j| 1.0 / limit(p_cols[j].max(a_cols[j])).sqrt()).collect();
        let eps: Vec<f64> = a_rows.iter().map(|&v| 1.0 / limit(v).sqrt()).collect();

        p.scale(&delta, &delta);
        a.scale(&eps, &delta);
        for (qi, di) in q.iter_mut().zip(&delta) {
            *qi *= di;
        }
        for i in 0..n {
            s.d[i] *= delta[i];
        }
        for i in 0..m {
            s.e[i] *= eps[i];
        }

        // Cost scaling.
        let mut p_cols = vec![0.0f64; n];
        for (r, c, v) in p.iter() {
            p_cols[c] = p_cols[c].max(v.abs());
            p_cols[r] = p_cols[r].max(v.abs());
        }
        let mean = if n > 0 { p_cols.iter().sum::<f64>() / n as f64 } else { 0.0 };
        let q_norm = q.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let gamma = 1.0 / limit(mean.max(q_norm));
        for v in p.values.iter_mut() {
            *v *= gamma;
        }
        for v in q.iter_mut() {
            *v *= gamma;
        }
        s.c *= gamma;
    }
    for i in 0..m {
        l[i] *= s.e[i];
        u[i] *= s.e[i];
    }
    s.d_inv = s.d.iter().map(|v| 1.0 / v).collect();
    s.e_inv = s.e.iter().map(|v| 1.0 / v).collect();
    s.c_inv = 1.0 / s.c;
    s
}
