//! Operator-splitting (ADMM) solver for the sparse trajectory QP.
//!
//! Solves `min 1/2 x'Px + q'x  s.t.  l <= A x <= u` where equalities are rows
//! with `l == u`. Each iteration solves one quasi-definite KKT system with a
//! cached sparse `L D L'` factorization; the factorization is only refreshed
//! when the penalty is adapted. The data is Ruiz-equilibrated first, and the
//! final iterate is polished by solving the KKT system of the detected active
//! set.

pub mod ldl;
pub mod ordering;
pub mod ruiz;

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qp::{dot, QpProblem};
use crate::sparse::{CscMatrix, TripletBuilder};

use ldl::LdlFactor;
use ruiz::Scaling;

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
const RHO_EQ_FACTOR: f64 = 1e3;
const POLISH_DELTA: f64 = 1e-7;
/// Largest polish system handed to the dense fallback.
const DENSE_POLISH_MAX: usize = 600;
const POLISH_ROUNDS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    /// Initial ADMM penalty.
    pub rho: f64,
    pub sigma: f64,
    /// Over-relaxation factor in (0, 2).
    pub alpha: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_prim_inf: f64,
    pub eps_dual_inf: f64,
    pub max_iter: usize,
    pub polish: bool,
    /// Krylov iterations per restart when solving the polish system.
    pub polish_refine_iter: usize,
    pub scaling_iterations: usize,
    pub adaptive_rho: bool,
    /// Iterations between convergence checks.
    pub check_interval: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            eps_abs: 1e-8,
            eps_rel: 1e-8,
            eps_prim_inf: 1e-6,
            eps_dual_inf: 1e-6,
            max_iter: 20_000,
            polish: true,
            polish_refine_iter: 20,
            scaling_iterations: 10,
            adaptive_rho: true,
            check_interval: 25,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho", self.rho),
            ("sigma", self.sigma),
            ("eps_abs", self.eps_abs),
            ("eps_rel", self.eps_rel),
            ("eps_prim_inf", self.eps_prim_inf),
            ("eps_dual_inf", self.eps_dual_inf),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::InvalidParameter(format!("alpha must lie in (0, 2), got {}", self.alpha)));
        }
        if self.max_iter == 0 || self.check_interval == 0 {
            return Err(Error::InvalidParameter("max_iter and check_interval must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Status {
    Optimal,
    MaxIter,
    PrimalInfeasible,
    DualInfeasible,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub chi: Vec<f64>,
    /// Multipliers of the equality rows.
    pub y_eq: Vec<f64>,
    /// Multipliers of the inequality rows; positive when the upper bound is active.
    pub y_in: Vec<f64>,
    pub status: Status,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
    pub polished: bool,
}

/// Residuals recomputed from the original problem data.
///
/// Primal: `max |A_eq chi - b_eq|` and the distance of `A_in chi` to its bounds.
/// Dual: `max |H chi - g + A_eq' y_eq + A_in' y_in|`.
pub fn kkt_residuals(problem: &QpProblem, solution: &Solution) -> (f64, f64) {
    let chi = &solution.chi;
    let eq = problem.a_eq.mul_vec(chi);
    let ineq = problem.a_in.mul_vec(chi);
    let mut primal = 0.0f64;
    for (v, b) in eq.iter().zip(&problem.b_eq) {
        primal = primal.max((v - b).abs());
    }
    for ((v, lo), hi) in ineq.iter().zip(&problem.lower).zip(&problem.upper) {
        primal = primal.max((lo - v).max(v - hi).max(0.0));
    }
    let mut grad = problem.hessian.mul_vec(chi);
    let at_eq = problem.a_eq.tr_mul_vec(&solution.y_eq);
    let at_in = problem.a_in.tr_mul_vec(&solution.y_in);
    let mut dual = 0.0f64;
    for i in 0..grad.len() {
        grad[i] += at_eq[i] + at_in[i] - problem.linear[i];
        dual = dual.max(grad[i].abs());
    }
    (primal, dual)
}

/// Restarted GMRES on `K x = b` with right preconditioner `M`, started from `x0`.
///
/// Stops when the residual 2-norm no longer shrinks over a restart cycle or falls
/// below a relative `1e-15`.
fn gmres(
    k: impl Fn(&[f64]) -> Vec<f64>,
    m_inv: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Vec<f64>,
    restart: usize,
) -> Vec<f64> {
    let n = b.len();
    let restart = restart.max(1);
    let tol = 1e-15 * norm2(b).max(1e-300);
    let residual = |x: &[f64]| -> Vec<f64> { k(x).iter().zip(b).map(|(kx, bi)| bi - kx).collect() };
    let mut x = x0;
    let mut r = residual(&x);
    let mut best = norm2(&r);
    for _cycle in 0..10 {
        if best <= tol {
            break;
        }
        let beta = norm2(&r);
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<f64>> = Vec::new();
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut g = vec![beta];
        for j in 0..restart {
            let mut w = k(&m_inv(&basis[j]));
            let mut col = vec![0.0; j + 2];
            for (i, v) in basis.iter().enumerate() {
                let h = dot(&w, v);
                col[i] = h;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= h * vk;
                }
            }
            let wn = norm2(&w);
            col[j + 1] = wn;
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let d = col[j].hypot(col[j + 1]);
            let (c, s) = if d > 0.0 { (col[j] / d, col[j + 1] / d) } else { (1.0, 0.0) };
            col[j] = d;
            col[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[j]);
            g[j] *= c;
            hess.push(col);
            if wn <= 1e-300 || g[j + 1].abs() <= tol {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        let steps = hess.len();
        let mut yv = vec![0.0; steps];
        for i in (0..steps).rev() {
            let mut acc = g[i];
            for j in i + 1..steps {
                acc -= hess[j][i] * yv[j];
            }
            yv[i] = acc / hess[i][i];
        }
        let mut u = vec![0.0; n];
        for (yi, v) in yv.iter().zip(&basis) {
            for (uk, vk) in u.iter_mut().zip(v) {
                *uk += yi * vk;
            }
        }
        let candidate: Vec<f64> = x.iter().zip(m_inv(&u)).map(|(a, b)| a + b).collect();
        let r_new = residual(&candidate);
        let norm = norm2(&r_new);
        if !(norm < best) {
            break;
        }
        x = candidate;
        r = r_new;
        best = norm;
    }
    x
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn scaled_inf_norm(v: &[f64], s: &[f64]) -> f64 {
    v.iter().zip(s).fold(0.0f64, |m, (x, w)| m.max((x * w).abs()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Active {
    Inactive,
    Lower,
    Upper,
    Equality,
}

struct Residuals {
    prim: f64,
    dual: f64,
    eps_prim: f64,
    eps_dual: f64,
    /// Normalized residuals in the scaled space, used for penalty adaptation.
    prim_rel: f64,
    dual_rel: f64,
}

impl Residuals {
    fn converged(&self) -> bool {
        self.prim <= self.eps_prim && self.dual <= self.eps_dual
    }
}

struct Workspace<'s> {
    settings: &'s SolverSettings,
    n: usize,
    m: usize,
    p: CscMatrix,
    q: Vec<f64>,
    a: CscMatrix,
    l: Vec<f64>,
    u: Vec<f64>,
    scaling: Scaling,
    rho: f64,
    rho_vec: Vec<f64>,
    factor: LdlFactor,
    x: Vec<f64>,
    z: Vec<f64>,
    y: Vec<f64>,
}

fn kkt_upper(p: &CscMatrix, a: &CscMatrix, sigma: f64, rho_vec: &[f64]) -> CscMatrix {
    let n = p.ncols;
    let m = a.nrows;
    let mut t = TripletBuilder::new(n + m, n + m);
    for (r, c, v) in p.iter() {
        t.push(r, c, v);
    }
    for j in 0..n {
        t.push(j, j, sigma);
    }
    for (r, c, v) in a.iter() {
        t.push(c, n + r, v);
    }
    for (i, rho) in rho_vec.iter().enumerate() {
        t.push(n + i, n + i, -1.0 / rho);
    }
    t.build()
}

impl<'s> Workspace<'s> {
    fn new(problem: &QpProblem, settings: &'s SolverSettings) -> Result<Self> {
        let n = problem.num_vars();
        let mut p = problem.hessian.upper_triangle();
        let mut q: Vec<f64> = problem.linear.iter().map(|g| -g).collect();
        let mut a = problem.a_eq.vstack(&problem.a_in)?;
        let m = a.nrows;
        let mut l: Vec<f64> = problem.b_eq.iter().chain(&problem.lower).copied().collect();
        let mut u: Vec<f64> = problem.b_eq.iter().chain(&problem.upper).copied().collect();
        if !p.values.iter().chain(&a.values).all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let scaling = if settings.scaling_iterations > 0 {
            ruiz::equilibrate(&mut p, &mut q, &mut a, &mut l, &mut u, settings.scaling_iterations)
        } else {
            Scaling::identity(n, m)
        };
        let rho = settings.rho.clamp(RHO_MIN, RHO_MAX);
        let rho_vec = Self::rho_vector(&l, &u, rho);
        let factor = LdlFactor::new(&kkt_upper(&p, &a, settings.sigma, &rho_vec))?;
        debug!("ADMM setup: n = {n}, m = {m}, nnz(L) = {}", factor.nnz_l());
        Ok(Self {
            settings,
            n,
            m,
            p,
            q,
            a,
            l,
            u,
            scaling,
            rho,
            rho_vec,
            factor,
            x: vec![0.0; n],
            z: vec![0.0; m],
            y: vec![0.0; m],
        })
    }

    fn rho_vector(l: &[f64], u: &[f64], rho: f64) -> Vec<f64> {
        l.iter()
            .zip(u)
            .map(|(&lo, &hi)| {
                if lo == hi {
                    (RHO_EQ_FACTOR * rho).min(RHO_MAX)
                } else if lo.is_infinite() && hi.is_infinite() {
                    RHO_MIN
                } else {
                    rho
                }
            })
            .collect()
    }

    fn update_rho(&mut self, rho: f64) -> Result<()> {
        self.rho = rho.clamp(RHO_MIN, RHO_MAX);
        self.rho_vec = Self::rho_vector(&self.l, &self.u, self.rho);
        self.factor.refactor(&kkt_upper(&self.p, &self.a, self.settings.sigma, &self.rho_vec))
    }

    fn project(&self, i: usize, v: f64) -> f64 {
        v.max(self.l[i]).min(self.u[i])
    }

    fn iterate(&mut self) {
        let (n, m) = (self.n, self.m);
        let sigma = self.settings.sigma;
        let alpha = self.settings.alpha;
        let mut rhs = vec![0.0; n + m];
        for j in 0..n {
            rhs[j] = sigma * self.x[j] - self.q[j];
        }
        for i in 0..m {
            rhs[n + i] = self.z[i] - self.y[i] / self.rho_vec[i];
        }
        self.factor.solve_in_place(&mut rhs);
        for j in 0..n {
            self.x[j] = alpha * rhs[j] + (1.0 - alpha) * self.x[j];
        }
        for i in 0..m {
            let z_tilde = self.z[i] + (rhs[n + i] - self.y[i]) / self.rho_vec[i];
            let z_relaxed = alpha * z_tilde + (1.0 - alpha) * self.z[i];
            let z_new = self.project(i, z_relaxed + self.y[i] / self.rho_vec[i]);
            self.y[i] += self.rho_vec[i] * (z_relaxed - z_new);
            self.z[i] = z_new;
        }
    }

    fn residuals(&self, x: &[f64], z: &[f64], y: &[f64]) -> Residuals {
        let s = &self.scaling;
        let ax = self.a.mul_vec(x);
        let px = self.p.sym_upper_mul_vec(x);
        let aty = self.a.tr_mul_vec(y);
        let diff: Vec<f64> = ax.iter().zip(z).map(|(a, b)| a - b).collect();
        let grad: Vec<f64> = (0..self.n).map(|j| px[j] + self.q[j] + aty[j]).collect();

        let prim = scaled_inf_norm(&diff, &s.e_inv);
        let dual = s.c_inv * scaled_inf_norm(&grad, &s.d_inv);
        let eps = &self.settings;
        let prim_scale = scaled_inf_norm(&ax, &s.e_inv).max(scaled_inf_norm(z, &s.e_inv));
        let dual_scale = s.c_inv
            * scaled_inf_norm(&px, &s.d_inv)
                .max(scaled_inf_norm(&aty, &s.d_inv))
                .max(scaled_inf_norm(&self.q, &s.d_inv));
        let tiny = 1e-30;
        Residuals {
            prim,
            dual,
            eps_prim: eps.eps_abs + eps.eps_rel * prim_scale,
            eps_dual: eps.eps_abs + eps.eps_rel * dual_scale,
            prim_rel: inf_norm(&diff) / inf_norm(&ax).max(inf_norm(z)).max(tiny),
            dual_rel: inf_norm(&grad)
                / inf_norm(&px).max(inf_norm(&aty)).max(inf_norm(&self.q)).max(tiny),
        }
    }

    fn primal_infeasible(&self, y_prev: &[f64]) -> bool {
        let eps = self.settings.eps_prim_inf;
        let mut dy: Vec<f64> = self.y.iter().zip(y_prev).map(|(a, b)| a - b).collect();
        for i in 0..self.m {
            if self.u[i].is_infinite() {
                dy[i] = dy[i].min(0.0);
            }
            if self.l[i].is_infinite() {
                dy[i] = dy[i].max(0.0);
            }
        }
        let norm_dy = scaled_inf_norm(&dy, &self.scaling.e);
        if norm_dy <= 1e-30 {
            return false;
        }
        let mut support = 0.0;
        for i in 0..self.m {
            if dy[i] > 0.0 {
                support += self.u[i] * dy[i];
            } else if dy[i] < 0.0 {
                support += self.l[i] * dy[i];
            }
        }
        if !(support < -eps * norm_dy) {
            return false;
        }
        let aty = self.a.tr_mul_vec(&dy);
        scaled_inf_norm(&aty, &self.scaling.d_inv) <= eps * norm_dy
    }

    fn dual_infeasible(&self, x_prev: &[f64]) -> bool {
        let eps = self.settings.eps_dual_inf;
        let s = &self.scaling;
        let dx: Vec<f64> = self.x.iter().zip(x_prev).map(|(a, b)| a - b).collect();
        let norm_dx = scaled_inf_norm(&dx, &s.d);
        if norm_dx <= 1e-30 {
            return false;
        }
        if !(dot(&self.q, &dx) * s.c_inv < -eps * norm_dx) {
            return false;
        }
        let pdx = self.p.sym_upper_mul_vec(&dx);
        if s.c_inv * scaled_inf_norm(&pdx, &s.d_inv) > eps * norm_dx {
            return false;
        }
        let adx = self.a.mul_vec(&dx);
        (0..self.m).all(|i| {
            let v = adx[i] * s.e_inv[i];
            let upper_ok = self.u[i].is_infinite() || v <= eps * norm_dx;
            let lower_ok = self.l[i].is_infinite() || v >= -eps * norm_dx;
            upper_ok && lower_ok
        })
    }

    fn active_set(&self) -> Vec<Active> {
        (0..self.m)
            .map(|i| {
                if self.l[i] == self.u[i] {
                    Active::Equality
                } else if self.z[i] - self.l[i] < -self.y[i] {
                    Active::Lower
                } else if self.u[i] - self.z[i] < self.y[i] {
                    Active::Upper
                } else {
                    Active::Inactive
                }
            })
            .collect()
    }

    /// Solves the equality-constrained KKT system of the guessed active set.
    fn polish(&self, active: &[Active], dense: bool) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let n = self.n;
        let rows: Vec<usize> = (0..self.m).filter(|&i| active[i] != Active::Inactive).collect();
        let k = rows.len();
        let mut a_act = TripletBuilder::new(k, n);
        let mut row_of = vec![usize::MAX; self.m];
        for (r, &i) in rows.iter().enumerate() {
            row_of[i] = r;
        }
        for (r, c, v) in self.a.iter() {
            if row_of[r] != usize::MAX {
                a_act.push(row_of[r], c, v);
            }
        }
        let a_act = a_act.build();
        let mut rhs = vec![0.0; n + k];
        for j in 0..n {
            rhs[j] = -self.q[j];
        }
        for (r, &i) in rows.iter().enumerate() {
            rhs[n + r] = match active[i] {
                Active::Lower => self.l[i],
                _ => self.u[i],
            };
        }
        let apply = |v: &[f64]| {
            let (xs, ys) = v.split_at(n);
            let mut out = self.p.sym_upper_mul_vec(xs);
            for (o, a) in out.iter_mut().zip(a_act.tr_mul_vec(ys)) {
                *o += a;
            }
            out.extend(a_act.mul_vec(xs));
            out
        };
        let sol = if dense {
            if n + k > DENSE_POLISH_MAX {
                return None;
            }
            let mut kkt = DMatrix::zeros(n + k, n + k);
            for (r, c, v) in self.p.iter() {
                kkt[(r, c)] = v;
                kkt[(c, r)] = v;
            }
            for (r, c, v) in a_act.iter() {
                kkt[(n + r, c)] = v;
                kkt[(c, n + r)] = v;
            }
            let lu = kkt.lu();
            let lu_solve = |b: &[f64]| lu.solve(&DVector::from_column_slice(b)).map(|v| v.as_slice().to_vec());
            let mut sol = lu_solve(&rhs)?;
            for _ in 0..self.settings.polish_refine_iter {
                let res: Vec<f64> = rhs.iter().zip(apply(&sol)).map(|(b, v)| b - v).collect();
                if norm2(&res) <= 1e-15 * norm2(&rhs) {
                    break;
                }
                for (s, d) in sol.iter_mut().zip(lu_solve(&res)?) {
                    *s += d;
                }
            }
            sol
        } else {
            let mut t = TripletBuilder::new(n + k, n + k);
            for (r, c, v) in self.p.iter() {
                t.push(r, c, v);
            }
            for j in 0..n {
                t.push(j, j, POLISH_DELTA);
            }
            for (r, c, v) in a_act.iter() {
                t.push(c, n + r, v);
            }
            for r in 0..k {
                t.push(n + r, n + r, -POLISH_DELTA);
            }
            let factor = LdlFactor::new(&t.build()).ok()?;
            // The regularized factor preconditions a Krylov solve of the exact KKT system.
            gmres(apply, |v| factor.solve(v), &rhs, factor.solve(&rhs), self.settings.polish_refine_iter)
        };
        if !sol.iter().all(|v| v.is_finite()) {
            return None;
        }
        let x = sol[..n].to_vec();
        let mut y = vec![0.0; self.m];
        for (r, &i) in rows.iter().enumerate() {
            y[i] = sol[n + r];
        }
        let z: Vec<f64> = self.a.mul_vec(&x).iter().enumerate().map(|(i, v)| self.project(i, *v)).collect();
        Some((x, z, y))
    }

    /// Polishes the guessed active set, correcting the guess for a few rounds:
    /// rows with wrong-sign multipliers are released and violated rows are added.
    /// Small systems too ill-conditioned for the regularized factor fall back to a
    /// pivoted dense solve.
    fn try_polish(&self, active: &[Active]) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let s = &self.scaling;
        let mut active = active.to_vec();
        for _ in 0..POLISH_ROUNDS {
            let mut best: Option<((Vec<f64>, Vec<f64>, Vec<f64>), f64)> = None;
            for dense in [false, true] {
                let Some(cand) = self.polish(&active, dense) else { continue };
                if self.polish_acceptable(&active, &cand.0, &cand.1, &cand.2) {
                    return Some(cand);
                }
                let dual = self.residuals(&cand.0, &cand.1, &cand.2).dual;
                if best.as_ref().is_none_or(|(_, d)| dual < *d) {
                    best = Some((cand, dual));
                }
            }
            let ((x, _, y), _) = best?;
            let tol = self.settings.eps_abs;
            let ax = self.a.mul_vec(&x);
            let mut changed = false;
            for i in 0..self.m {
                let yi = y[i] * s.e[i] * s.c_inv;
                let next = match active[i] {
                    Active::Lower if yi > tol => Active::Inactive,
                    Active::Upper if yi < -tol => Active::Inactive,
                    Active::Inactive if (self.l[i] - ax[i]) * s.e_inv[i] > tol => Active::Lower,
                    Active::Inactive if (ax[i] - self.u[i]) * s.e_inv[i] > tol => Active::Upper,
                    other => other,
                };
                changed |= next != active[i];
                active[i] = next;
            }
            if !changed {
                break;
            }
        }
        None
    }

    /// A polished point is accepted when it meets the tolerances and its multipliers have the right signs.
    fn polish_acceptable(&self, active: &[Active], x: &[f64], z: &[f64], y: &[f64]) -> bool {
        let r = self.residuals(x, z, y);
        if !r.converged() {
            return false;
        }
        let s = &self.scaling;
        let tol = r.eps_dual.max(self.settings.eps_abs);
        (0..self.m).all(|i| {
            let yi = y[i] * s.e[i] * s.c_inv;
            match active[i] {
                Active::Lower => yi <= tol,
                Active::Upper => yi >= -tol,
                _ => true,
            }
        })
    }

    fn unscale(&self, x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let s = &self.scaling;
        let xu = x.iter().zip(&s.d).map(|(v, d)| v * d).collect();
        let yu = y.iter().zip(&s.e).map(|(v, e)| v * e * s.c_inv).collect();
        (xu, yu)
    }
}

/// Solves the QP. Infeasibility and iteration limits are reported through [`Status`].
pub fn solve(problem: &QpProblem, settings: &SolverSettings) -> Result<Solution> {
    settings.validate()?;
    problem.validate()?;
    let mut ws = Workspace::new(problem, settings)?;

    let mut status = Status::MaxIter;
    let mut iterations = 0;
    let mut last_polish_attempt: Option<Vec<Active>> = None;
    let mut polished: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut x_prev = ws.x.clone();
    let mut y_prev = ws.y.clone();

    while iterations < settings.max_iter {
        x_prev.copy_from_slice(&ws.x);
        y_prev.copy_from_slice(&ws.y);
        ws.iterate();
        iterations += 1;
        if iterations % settings.check_interval != 0 && iterations != settings.max_iter {
            continue;
        }
        let r = ws.residuals(&ws.x, &ws.z, &ws.y);
        if r.converged() {
            status = Status::Optimal;
            break;
        }
        if ws.primal_infeasible(&y_prev) {
            status = Status::PrimalInfeasible;
            break;
        }
        if ws.dual_infeasible(&x_prev) {
            status = Status::DualInfeasible;
            break;
        }
        if settings.polish && r.prim_rel < 1e-3 && r.dual_rel < 1e-3 {
            let active = ws.active_set();
            if last_polish_attempt.as_ref() != Some(&active) {
                if let Some(p) = ws.try_polish(&active) {
                    polished = Some(p);
                    status = Status::Optimal;
                    break;
                }
                last_polish_attempt = Some(active);
            }
        }
        if settings.adaptive_rho {
            let ratio = (r.prim_rel / r.dual_rel.max(1e-30)).sqrt();
            let new_rho = (ws.rho * ratio).clamp(RHO_MIN, RHO_MAX);
            if new_rho > 5.0 * ws.rho || new_rho < 0.2 * ws.rho {
                debug!("iteration {iterations}: rho {:.3e} -> {new_rho:.3e}", ws.rho);
                ws.update_rho(new_rho)?;
            }
        }
    }

    if polished.is_none()
        && settings.polish
        && matches!(status, Status::Optimal | Status::MaxIter)
    {
        let active = ws.active_set();
        if let Some(p) = ws.try_polish(&active) {
            polished = Some(p);
            status = Status::Optimal;
        }
    }

    let is_polished = polished.is_some();
    let (x, z, y) = polished.unwrap_or_else(|| (ws.x.clone(), ws.z.clone(), ws.y.clone()));
    let r = ws.residuals(&x, &z, &y);
    let (chi, y_all) = match status {
        // Certificates are reported as the last iterates' differences.
        Status::PrimalInfeasible => {
            let dy: Vec<f64> = y.iter().zip(&y_prev).map(|(a, b)| a - b).collect();
            ws.unscale(&x, &dy)
        }
        _ => ws.unscale(&x, &y),
    };
    let m_eq = problem.a_eq.nrows;
    let objective = problem.objective(&chi);
    debug!(
        "ADMM finished: {status:?} after {iterations} iterations (polished: {is_polished}), prim {:.2e}, dual {:.2e}",
        r.prim, r.dual
    );
    Ok(Solution {
        chi,
        y_eq: y_all[..m_eq].to_vec(),
        y_in: y_all[m_eq..].to_vec(),
        status,
        iterations,
        primal_residual: r.prim,
        dual_residual: r.dual,
        objective,
        polished: is_polished,
    })
}
