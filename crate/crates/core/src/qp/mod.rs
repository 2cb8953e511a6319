//! Direct-transcription QP over the stacked decision vector
//! `chi = [x_0 .. x_N, u_0 .. u_{N-1}]`.
//!
//! The cost is `1/2 chi' H chi - g' chi`; the constraints are the sampled
//! pendulum dynamics, endpoint pins, element-wise boxes on states and inputs,
//! and finite-difference bounds on the pivot jerk.

mod dump;

pub use dump::{read_problem, write_problem};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linear_model::{DiscreteModel, OUTPUT_DIM};
use crate::pendulum::{INPUT_DIM, STATE_DIM};
use crate::sparse::{CscMatrix, TripletBuilder};

/// Index arithmetic for the stacked decision vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecisionLayout {
    /// Number of intervals; the trajectory has `nodes + 1` states and `nodes` inputs.
    pub nodes: usize,
}

impl DecisionLayout {
    pub fn new(nodes: usize) -> Self {
        Self { nodes }
    }

    pub fn total(&self) -> usize {
        STATE_DIM * (self.nodes + 1) + INPUT_DIM * self.nodes
    }

    pub fn state_index(&self, k: usize) -> usize {
        debug_assert!(k <= self.nodes);
        STATE_DIM * k
    }

    pub fn input_index(&self, k: usize) -> usize {
        debug_assert!(k < self.nodes);
        STATE_DIM * (self.nodes + 1) + INPUT_DIM * k
    }

    pub fn state<'a>(&self, chi: &'a [f64], k: usize) -> &'a [f64] {
        let i = self.state_index(k);
        &chi[i..i + STATE_DIM]
    }

    pub fn input<'a>(&self, chi: &'a [f64], k: usize) -> &'a [f64] {
        let i = self.input_index(k);
        &chi[i..i + INPUT_DIM]
    }
}

/// Element-wise limits applied at every node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxBounds {
    pub state_lower: [f64; STATE_DIM],
    pub state_upper: [f64; STATE_DIM],
    pub input_lower: [f64; INPUT_DIM],
    pub input_upper: [f64; INPUT_DIM],
}

impl Default for BoxBounds {
    fn default() -> Self {
        Self {
            state_lower: [f64::NEG_INFINITY; STATE_DIM],
            state_upper: [f64::INFINITY; STATE_DIM],
            input_lower: [f64::NEG_INFINITY; INPUT_DIM],
            input_upper: [f64::INFINITY; INPUT_DIM],
        }
    }
}

impl BoxBounds {
    /// Symmetric limits `|x_i| <= s_i`, `|u_j| <= a_j`.
    pub fn symmetric(state: [f64; STATE_DIM], input: [f64; INPUT_DIM]) -> Self {
        Self {
            state_lower: state.map(|v| -v),
            state_upper: state,
            input_lower: input.map(|v| -v),
            input_upper: input,
        }
    }
}

/// Which nodes receive equality pins.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryPins {
    pub start: bool,
    pub end: bool,
    /// Also hold the tilt, tilt rate and endpoint inputs at zero at pinned endpoints.
    pub rest_to_rest: bool,
    /// Interior nodes whose mass position must match the target exactly.
    pub waypoints: Vec<usize>,
}

impl Default for BoundaryPins {
    fn default() -> Self {
        Self { start: true, end: true, rest_to_rest: true, waypoints: Vec::new() }
    }
}

/// Desired mass trajectory plus the limits of one optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectorySpec {
    /// World-frame mass targets `[x, y, z, vx, vy, vz]`, one row per node.
    pub desired: Vec<[f64; OUTPUT_DIM]>,
    pub ts: f64,
    pub bounds: BoxBounds,
    pub jerk_lower: [f64; INPUT_DIM],
    pub jerk_upper: [f64; INPUT_DIM],
    /// Weight `w` of the smoothing term `1/2 w sum_k |(u_{k+1} - u_k) / Ts|^2`; zero disables it.
    pub jerk_weight: f64,
    pub pins: BoundaryPins,
}

impl TrajectorySpec {
    /// Unbounded problem with default (rest-to-rest) pins.
    pub fn new(desired: Vec<[f64; OUTPUT_DIM]>, ts: f64) -> Self {
        Self {
            desired,
            ts,
            bounds: BoxBounds::default(),
            jerk_lower: [f64::NEG_INFINITY; INPUT_DIM],
            jerk_upper: [f64::INFINITY; INPUT_DIM],
            jerk_weight: 0.0,
            pins: BoundaryPins::default(),
        }
    }

    pub fn layout(&self) -> Result<DecisionLayout> {
        if self.desired.len() < 2 {
            return Err(Error::Dimension(format!(
                "desired trajectory needs at least 2 nodes, got {}",
                self.desired.len()
            )));
        }
        Ok(DecisionLayout::new(self.desired.len() - 1))
    }

    /// Fills desired velocities from central differences of desired positions.
    pub fn with_synthesized_velocities(mut self) -> Self {
        synthesize_velocities(&mut self.desired, self.ts);
        self
    }
}

/// Overwrites velocity columns with central (one-sided at the ends) differences of positions.
pub fn synthesize_velocities(rows: &mut [[f64; OUTPUT_DIM]], ts: f64) {
    let n = rows.len();
    if n < 2 {
        return;
    }
    let pos: Vec<[f64; 3]> = rows.iter().map(|r| [r[0], r[1], r[2]]).collect();
    for k in 0..n {
        let (a, b, h) = match k {
            0 => (0, 1, ts),
            _ if k == n - 1 => (n - 2, n - 1, ts),
            _ => (k - 1, k + 1, 2.0 * ts),
        };
        for i in 0..3 {
            rows[k][3 + i] = (pos[b][i] - pos[a][i]) / h;
        }
    }
}

/// Sparse QP `min 1/2 chi' H chi - g' chi` s.t. `A_eq chi = b_eq`, `lower <= A_in chi <= upper`.
#[derive(Clone, Debug, PartialEq)]
pub struct QpProblem {
    /// Full symmetric Hessian.
    pub hessian: CscMatrix,
    pub linear: Vec<f64>,
    pub a_eq: CscMatrix,
    pub b_eq: Vec<f64>,
    pub a_in: CscMatrix,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl QpProblem {
    pub fn num_vars(&self) -> usize {
        self.hessian.ncols
    }

    pub fn objective(&self, chi: &[f64]) -> f64 {
        let hx = self.hessian.mul_vec(chi);
        0.5 * dot(chi, &hx) - dot(&self.linear, chi)
    }

    /// Checks dimensions, symmetry of the Hessian pattern and finite/ordered bounds.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let dim = |what: &str, a: usize, b: usize| {
            if a == b {
                Ok(())
            } else {
                Err(Error::Dimension(format!("{what}: expected {b}, got {a}")))
            }
        };
        dim("hessian rows", self.hessian.nrows, n)?;
        dim("linear term", self.linear.len(), n)?;
        dim("A_eq columns", self.a_eq.ncols, n)?;
        dim("b_eq", self.b_eq.len(), self.a_eq.nrows)?;
        dim("A_in columns", self.a_in.ncols, n)?;
        dim("lower", self.lower.len(), self.a_in.nrows)?;
        dim("upper", self.upper.len(), self.a_in.nrows)?;
        for (index, (&lower, &upper)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lower.is_nan() || upper.is_nan() || lower > upper {
                return Err(Error::InconsistentBounds { index, lower, upper });
            }
        }
        if !self.b_eq.iter().chain(&self.linear).all(|v| v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A block of constraint rows `lower <= A chi <= upper` (equalities have `lower == upper`).
#[derive(Clone, Debug)]
pub struct RowBlock {
    pub rows: TripletBuilder,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl RowBlock {
    fn new(ncols: usize) -> Self {
        Self { rows: TripletBuilder::new(0, ncols), lower: Vec::new(), upper: Vec::new() }
    }

    fn add_row(&mut self, entries: &[(usize, f64)], lower: f64, upper: f64) {
        let r = self.rows.grow_rows(1);
        for &(c, v) in entries {
            self.rows.push(r, c, v);
        }
        self.lower.push(lower);
        self.upper.push(upper);
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn matrix(&self) -> CscMatrix {
        self.rows.clone().build()
    }
}

fn targets_in_model_space(model: &DiscreteModel, spec: &TrajectorySpec) -> Vec<DVector<f64>> {
    spec.desired
        .iter()
        .map(|row| DVector::from_row_slice(row) - &model.output_offset)
        .collect()
}

/// Hessian `blockdiag(C'C, .., C'C, 0)` and linear term `[C' y_0; ..; C' y_N; 0]`.
///
/// A positive `jerk_weight` adds the banded input-difference block to the zero input part.
pub fn build_cost(model: &DiscreteModel, spec: &TrajectorySpec) -> Result<(CscMatrix, Vec<f64>)> {
    let layout = spec.layout()?;
    if model.c.nrows() != OUTPUT_DIM || model.c.ncols() != STATE_DIM {
        return Err(Error::Dimension("output matrix must be 6x10".into()));
    }
    let n = layout.total();
    let ctc = model.c.transpose() * &model.c;
    let mut h = TripletBuilder::new(n, n);
    let mut g = vec![0.0; n];
    for (k, y) in targets_in_model_space(model, spec).iter().enumerate() {
        let base = layout.state_index(k);
        for j in 0..STATE_DIM {
            for i in 0..STATE_DIM {
                h.push(base + i, base + j, ctc[(i, j)]);
            }
        }
        let cty = model.c.transpose() * y;
        g[base..base + STATE_DIM].copy_from_slice(cty.as_slice());
    }
    if !(spec.jerk_weight >= 0.0 && spec.jerk_weight.is_finite()) {
        return Err(Error::InvalidParameter(format!("jerk_weight must be >= 0, got {}", spec.jerk_weight)));
    }
    if spec.jerk_weight > 0.0 {
        let w = spec.jerk_weight / (spec.ts * spec.ts);
        for k in 0..layout.nodes.saturating_sub(1) {
            let (a, b) = (layout.input_index(k), layout.input_index(k + 1));
            for i in 0..INPUT_DIM {
                h.push(a + i, a + i, w);
                h.push(b + i, b + i, w);
                h.push(a + i, b + i, -w);
                h.push(b + i, a + i, -w);
            }
        }
    }
    Ok((h.build(), g))
}

/// `A x_k + B u_k - x_{k+1} = 0` for every interval.
pub fn build_dynamics_constraints(model: &DiscreteModel, layout: &DecisionLayout) -> RowBlock {
    let mut block = RowBlock::new(layout.total());
    for k in 0..layout.nodes {
        let xk = layout.state_index(k);
        let uk = layout.input_index(k);
        let xn = layout.state_index(k + 1);
        for i in 0..STATE_DIM {
            let mut entries: Vec<(usize, f64)> = (0..STATE_DIM).map(|j| (xk + j, model.a[(i, j)])).collect();
            entries.extend((0..INPUT_DIM).map(|j| (uk + j, model.b[(i, j)])));
            entries.push((xn + i, -1.0));
            block.add_row(&entries, 0.0, 0.0);
        }
    }
    block
}

/// Element-wise bounds on every entry of `chi`; unbounded entries keep infinite limits.
pub fn build_box_constraints(spec: &TrajectorySpec, layout: &DecisionLayout) -> Result<RowBlock> {
    let b = &spec.bounds;
    let check = |lo: &[f64], hi: &[f64], offset: usize| -> Result<()> {
        for (i, (&l, &u)) in lo.iter().zip(hi).enumerate() {
            if l.is_nan() || u.is_nan() || l > u {
                return Err(Error::InconsistentBounds { index: offset + i, lower: l, upper: u });
            }
        }
        Ok(())
    };
    check(&b.state_lower, &b.state_upper, 0)?;
    check(&b.input_lower, &b.input_upper, STATE_DIM)?;
    let mut block = RowBlock::new(layout.total());
    for k in 0..=layout.nodes {
        let base = layout.state_index(k);
        for i in 0..STATE_DIM {
            block.add_row(&[(base + i, 1.0)], b.state_lower[i], b.state_upper[i]);
        }
    }
    for k in 0..layout.nodes {
        let base = layout.input_index(k);
        for i in 0..INPUT_DIM {
            block.add_row(&[(base + i, 1.0)], b.input_lower[i], b.input_upper[i]);
        }
    }
    Ok(block)
}

/// `jerk_lower <= (u_{k+1} - u_k) / Ts <= jerk_upper`; empty for fewer than two inputs.
pub fn build_jerk_constraints(spec: &TrajectorySpec, layout: &DecisionLayout) -> Result<RowBlock> {
    for i in 0..INPUT_DIM {
        let (l, u) = (spec.jerk_lower[i], spec.jerk_upper[i]);
        if l.is_nan() || u.is_nan() || l > u {
            return Err(Error::InconsistentBounds { index: i, lower: l, upper: u });
        }
    }
    let mut block = RowBlock::new(layout.total());
    let inv_ts = 1.0 / spec.ts;
    for k in 0..layout.nodes.saturating_sub(1) {
        let a = layout.input_index(k);
        let b = layout.input_index(k + 1);
        for i in 0..INPUT_DIM {
            block.add_row(&[(a + i, -inv_ts), (b + i, inv_ts)], spec.jerk_lower[i], spec.jerk_upper[i]);
        }
    }
    Ok(block)
}

/// Endpoint and waypoint pins.
///
/// Endpoints match the target mass position with zero mass velocity. With
/// rest-to-rest enabled the endpoint tilts and tilt rates are held at zero,
/// as are the first and last inputs. Waypoints pin the mass position only.
pub fn build_boundary_constraints(model: &DiscreteModel, spec: &TrajectorySpec) -> Result<RowBlock> {
    let layout = spec.layout()?;
    let targets = targets_in_model_space(model, spec);
    let mut block = RowBlock::new(layout.total());
    let c = &model.c;
    let pin_output = |block: &mut RowBlock, k: usize, rows: std::ops::Range<usize>, zero: bool| {
        let base = layout.state_index(k);
        for r in rows {
            let entries: Vec<(usize, f64)> =
                (0..STATE_DIM).filter(|&j| c[(r, j)] != 0.0).map(|j| (base + j, c[(r, j)])).collect();
            let target = if zero { 0.0 } else { targets[k][r] };
            block.add_row(&entries, target, target);
        }
    };
    let pins = &spec.pins;
    let mut endpoints = Vec::new();
    if pins.start {
        endpoints.push(0);
    }
    if pins.end {
        endpoints.push(layout.nodes);
    }
    for &k in &endpoints {
        pin_output(&mut block, k, 0..3, false);
        pin_output(&mut block, k, 3..6, true);
        if pins.rest_to_rest {
            let base = layout.state_index(k);
            for i in [3, 4, 8, 9] {
                block.add_row(&[(base + i, 1.0)], 0.0, 0.0);
            }
        }
    }
    if pins.rest_to_rest {
        let mut held = Vec::new();
        if pins.start {
            held.push(0);
        }
        if pins.end && !held.contains(&(layout.nodes - 1)) {
            held.push(layout.nodes - 1);
        }
        for k in held {
            let base = layout.input_index(k);
            for i in 0..INPUT_DIM {
                block.add_row(&[(base + i, 1.0)], 0.0, 0.0);
            }
        }
    }
    for &k in &pins.waypoints {
        if k > layout.nodes {
            return Err(Error::Dimension(format!("waypoint {k} beyond last node {}", layout.nodes)));
        }
        pin_output(&mut block, k, 0..3, false);
    }
    Ok(block)
}

/// Stacks cost and constraints; equality rows are dynamics then pins, inequality rows are boxes then jerk.
pub fn assemble(model: &DiscreteModel, spec: &TrajectorySpec) -> Result<QpProblem> {
    let layout = spec.layout()?;
    if (model.ts - spec.ts).abs() > 1e-12 * spec.ts.max(1.0) {
        return Err(Error::Dimension(format!("model sample time {} differs from spec {}", model.ts, spec.ts)));
    }
    let (hessian, linear) = build_cost(model, spec)?;
    let dynamics = build_dynamics_constraints(model, &layout);
    let boundary = build_boundary_constraints(model, spec)?;
    let boxes = build_box_constraints(spec, &layout)?;
    let jerk = build_jerk_constraints(spec, &layout)?;

    let a_eq = dynamics.matrix().vstack(&boundary.matrix())?;
    let b_eq = dynamics.lower.iter().chain(&boundary.lower).copied().collect();
    let a_in = boxes.matrix().vstack(&jerk.matrix())?;
    let lower = boxes.lower.iter().chain(&jerk.lower).copied().collect();
    let upper = boxes.upper.iter().chain(&jerk.upper).copied().collect();
    let problem = QpProblem { hessian, linear, a_eq, b_eq, a_in, lower, upper };
    problem.validate()?;
    Ok(problem)
}

/// Splits a solved decision vector into per-node states and inputs.
pub fn unstack(layout: &DecisionLayout, chi: &[f64]) -> (Vec<[f64; STATE_DIM]>, Vec<[f64; INPUT_DIM]>) {
    let states = (0..=layout.nodes)
        .map(|k| {
            let mut s = [0.0; STATE_DIM];
            s.copy_from_slice(layout.state(chi, k));
            s
        })
        .collect();
    let inputs = (0..layout.nodes)
        .map(|k| {
            let mut u = [0.0; INPUT_DIM];
            u.copy_from_slice(layout.input(chi, k));
            u
        })
        .collect();
    (states, inputs)
}

/// `sum_k 1/2 |C x_k - y_k|^2` with the targets in model output space (smoothing term excluded).
pub fn tracking_cost(model: &DiscreteModel, spec: &TrajectorySpec, chi: &[f64]) -> Result<f64> {
    let layout = spec.layout()?;
    let targets = targets_in_model_space(model, spec);
    Ok((0..=layout.nodes)
        .map(|k| {
            let x = DVector::from_column_slice(layout.state(chi, k));
            0.5 * (&model.c * x - &targets[k]).norm_squared()
        })
        .sum())
}

/// The constant `sum_k 1/2 |y_k|^2` dropped from the QP objective.
pub fn dropped_constant(model: &DiscreteModel, spec: &TrajectorySpec) -> f64 {
    targets_in_model_space(model, spec).iter().map(|y| 0.5 * y.norm_squared()).sum()
}
