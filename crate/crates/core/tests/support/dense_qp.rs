//! Dense reference QP solver for cross-checking the sparse ADMM solver.
//!
//! Minimizes `1/2 x'Hx - g'x` s.t. `A x = b`, `l <= G x <= u` with a
//! Mehrotra predictor-corrector interior-point method, then re-solves the
//! equality-constrained KKT system of the detected active set exactly.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use spillfree_core::qp::QpProblem;

pub struct DenseQp {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    /// One-sided rows `c' x <= d` built from the finite bounds.
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
}

impl DenseQp {
    pub fn from_problem(p: &QpProblem) -> Self {
        let n = p.num_vars();
        let ain = p.a_in.to_dense();
        let mut rows: Vec<DVector<f64>> = Vec::new();
        let mut d = Vec::new();
        for i in 0..ain.nrows() {
            let r = ain.row(i).transpose();
            if p.upper[i].is_finite() {
                rows.push(r.clone());
                d.push(p.upper[i]);
            }
            if p.lower[i].is_finite() {
                rows.push(-r);
                d.push(-p.lower[i]);
            }
        }
        let mut c = DMatrix::zeros(rows.len(), n);
        for (i, r) in rows.iter().enumerate() {
            c.set_row(i, &r.transpose());
        }
        Self {
            h: p.hessian.to_dense(),
            g: DVector::from_column_slice(&p.linear),
            a: p.a_eq.to_dense(),
            b: DVector::from_column_slice(&p.b_eq),
            c,
            d: DVector::from_vec(d),
        }
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) - self.g.dot(x)
    }
}

/// Solves the symmetric indefinite system `[[K, E'], [E, 0]] [x; y] = [r1; r2]`.
fn kkt_solve(k: &DMatrix<f64>, e: &DMatrix<f64>, r1: &DVector<f64>, r2: &DVector<f64>) -> Option<DVector<f64>> {
    let (n, m) = (k.nrows(), e.nrows());
    let mut big = DMatrix::zeros(n + m, n + m);
    big.view_mut((0, 0), (n, n)).copy_from(k);
    big.view_mut((n, 0), (m, n)).copy_from(e);
    big.view_mut((0, n), (n, m)).copy_from(&e.transpose());
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(r1);
    rhs.rows_mut(n, m).copy_from(r2);
    big.lu().solve(&rhs)
}

pub struct DenseSolution {
    pub x: DVector<f64>,
    pub iterations: usize,
    pub refined: bool,
}

/// Interior-point solve; `None` when the method fails to converge.
pub fn solve_dense(qp: &DenseQp) -> Option<DenseSolution> {
    let n = qp.h.nrows();
    let mi = qp.c.nrows();
    let mut x = DVector::zeros(n);
    let mut y = DVector::zeros(qp.a.nrows());
    let mut s = DVector::from_element(mi, 1.0);
    let mut z = DVector::from_element(mi, 1.0);
    for (i, si) in s.iter_mut().enumerate() {
        *si = (qp.d[i] - qp.c.row(i).dot(&x.transpose())).max(1.0);
    }
    let mut iterations = 0;
    let mut converged = false;
    for it in 0..200 {
        iterations = it + 1;
        let rd = &qp.h * &x - &qp.g + qp.a.transpose() * &y + qp.c.transpose() * &z;
        let rp = &qp.a * &x - &qp.b;
        let ri = &qp.c * &x + &s - &qp.d;
        let mu = if mi > 0 { s.dot(&z) / mi as f64 } else { 0.0 };
        let scale = 1.0 + qp.g.amax().max(qp.b.amax()).max(qp.d.amax());
        if rd.amax() < 1e-11 * scale && rp.amax() < 1e-11 * scale && ri.amax() < 1e-11 * scale && mu < 1e-13 {
            converged = true;
            break;
        }
        // Reduced system: (H + C' diag(z/s) C) dx + A' dy = r, A dx = -rp.
        let w = z.component_div(&s);
        let mut k = qp.h.clone();
        if mi > 0 {
            let cw = DMatrix::from_fn(mi, n, |i, j| qp.c[(i, j)] * w[i]);
            k += qp.c.transpose() * cw;
        }
        let direction = |sigma_mu: f64, ds_dz: Option<&DVector<f64>>| {
            // Complementarity target: s z = sigma mu - ds dz.
            let rc = DVector::from_fn(mi, |i, _| {
                s[i] * z[i] - sigma_mu + ds_dz.map_or(0.0, |v| v[i])
            });
            // dz = (z/s) (C dx + ri) - rc/s  with ds = -(C dx + ri)
            let tmp = DVector::from_fn(mi, |i, _| (z[i] * ri[i] - rc[i]) / s[i]);
            let r1 = -(&rd + qp.c.transpose() * &tmp);
            let sol = kkt_solve(&k, &qp.a, &r1, &(-&rp))?;
            let dx = sol.rows(0, n).into_owned();
            let dy = sol.rows(n, qp.a.nrows()).into_owned();
            let cdx = &qp.c * &dx;
            let ds = -(&cdx + &ri);
            let dz = DVector::from_fn(mi, |i, _| (-rc[i] - z[i] * ds[i]) / s[i]);
            Some((dx, dy, ds, dz))
        };
        let max_step = |v: &DVector<f64>, dv: &DVector<f64>| {
            v.iter().zip(dv.iter()).filter(|(_, d)| **d < 0.0).map(|(a, d)| -a / d).fold(1.0, f64::min)
        };
        let (_, _, ds_a, dz_a) = direction(0.0, None)?;
        let alpha_a = max_step(&s, &ds_a).min(max_step(&z, &dz_a));
        let mu_aff = if mi > 0 {
            (&s + &ds_a * alpha_a).dot(&(&z + &dz_a * alpha_a)) / mi as f64
        } else {
            0.0
        };
        let sigma = if mu > 0.0 { (mu_aff / mu).powi(3) } else { 0.0 };
        let cross = ds_a.component_mul(&dz_a);
        let (dx, dy, ds, dz) = direction(sigma * mu, Some(&cross))?;
        let alpha = (0.99 * max_step(&s, &ds).min(max_step(&z, &dz))).min(1.0);
        x += &dx * alpha;
        y += &dy * alpha;
        s += &ds * alpha;
        z += &dz * alpha;
    }
    if !converged {
        return None;
    }
    // Active-set refinement.
    let active: Vec<usize> = (0..mi).filter(|&i| z[i] > s[i]).collect();
    let mut e = DMatrix::zeros(qp.a.nrows() + active.len(), n);
    let mut rhs = DVector::zeros(e.nrows());
    e.view_mut((0, 0), (qp.a.nrows(), n)).copy_from(&qp.a);
    rhs.rows_mut(0, qp.a.nrows()).copy_from(&qp.b);
    for (r, &i) in active.iter().enumerate() {
        e.set_row(qp.a.nrows() + r, &qp.c.row(i));
        rhs[qp.a.nrows() + r] = qp.d[i];
    }
    if let Some(sol) = kkt_solve(&qp.h, &e, &qp.g, &rhs) {
        let xr = sol.rows(0, n).into_owned();
        let mult = sol.rows(qp.a.nrows() + n, active.len());
        let slack_ok = (&qp.c * &xr - &qp.d).iter().all(|v| *v <= 1e-10);
        let sign_ok = mult.iter().all(|v| *v >= -1e-10);
        if slack_ok && sign_ok && (&xr - &x).amax() < 1e-5 {
            return Some(DenseSolution { x: xr, iterations, refined: true });
        }
    }
    Some(DenseSolution { x, iterations, refined: false })
}
