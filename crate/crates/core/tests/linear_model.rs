use nalgebra::{DMatrix, DVector};
use spillfree_core::linear_model::*;
use spillfree_core::pendulum::*;

fn params(l: f64) -> PendulumParams {
    PendulumParams::new(l, 9.81, 1.0).unwrap()
}

/// Sampled double integrators for the pivot and harmonic oscillators for the tilts.
fn closed_form(l: f64, ts: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let w = (9.81 / l).sqrt();
    let (s, c) = (w * ts).sin_cos();
    let mut a = DMatrix::identity(10, 10);
    let mut b = DMatrix::zeros(10, 3);
    for i in 0..3 {
        a[(i, i + 5)] = ts;
        b[(i, i)] = 0.5 * ts * ts;
        b[(i + 5, i)] = ts;
    }
    for (i, sign) in [(3, 1.0), (4, -1.0)] {
        a[(i, i)] = c;
        a[(i, i + 5)] = s / w;
        a[(i + 5, i)] = -w * s;
        a[(i + 5, i + 5)] = c;
        b[(i, i - 3)] = sign * (1.0 - c) / (w * w * l);
        b[(i + 5, i - 3)] = sign * s / (w * l);
    }
    (a, b)
}

#[test]
fn discretization_matches_closed_form() {
    for ts in [0.001, 0.033, 0.1] {
        for l in [0.3, 0.6, 0.9] {
            let dm = discrete_model(&params(l), ts).unwrap();
            let (a, b) = closed_form(l, ts);
            let ea = (&dm.a - a).amax();
            let eb = (&dm.b - b).amax();
            assert!(ea <= 1e-10 && eb <= 1e-10, "ts={ts} l={l}: A {ea:e}, B {eb:e}");
        }
    }
}

/// Nonlinear state derivative, assembled from the public equations of motion.
fn f(x: &[f64], u: &[f64], p: &PendulumParams) -> DVector<f64> {
    let s = PendulumState::from_slice(x).unwrap();
    let (tdd, pdd) = nonlinear_accel(&s, &PivotInput::new(u[0], u[1], u[2]), p).unwrap();
    DVector::from_vec(vec![x[5], x[6], x[7], x[8], x[9], u[0], u[1], u[2], tdd, pdd])
}

#[test]
fn linearization_matches_nonlinear_jacobian() {
    let p = params(0.6);
    let cm = build_continuous(&p);
    let h = 1e-6;
    let x0 = [0.3, -0.1, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let u0 = [0.0; 3];
    for j in 0..10 {
        let (mut xp, mut xm) = (x0, x0);
        xp[j] += h;
        xm[j] -= h;
        let col = (f(&xp, &u0, &p) - f(&xm, &u0, &p)) / (2.0 * h);
        assert!((col - cm.a.column(j)).amax() < 1e-8, "A column {j}");
    }
    for j in 0..3 {
        let (mut up, mut um) = (u0, u0);
        up[j] += h;
        um[j] -= h;
        let col = (f(&x0, &up, &p) - f(&x0, &um, &p)) / (2.0 * h);
        assert!((col - cm.b.column(j)).amax() < 1e-8, "B column {j}");
    }
}

#[test]
fn output_map_linearizes_mass_position() {
    let p = params(0.6);
    let cm = build_continuous(&p);
    let x = [0.1, 0.2, 0.3, 1e-4, -2e-4, 0.5, -0.4, 0.3, 0.2, 0.1];
    let y = &cm.c * DVector::from_row_slice(&x) + &cm.output_offset;
    let s = PendulumState::from_slice(&x).unwrap();
    let k = mass_kinematics_with_tilt_accel(&s, &PivotInput::zero(), (0.0, 0.0), &p).unwrap();
    assert!((y.rows(0, 3) - k.position).amax() < 1e-7);
    assert!((y.rows(3, 3) - k.velocity).amax() < 1e-7);
}

fn one_step_error(eps: f64) -> f64 {
    let p = params(0.6);
    let ts = 0.033;
    let dm = discrete_model(&p, ts).unwrap();
    let x0 = [0.0, 0.0, 0.0, 0.1, -0.1, 1.0, 0.0, 0.0, 0.0, 0.0].map(|v| v * eps);
    let u = [5.0, -5.0, 2.0].map(|v| v * eps);
    let lin = dm.step(&DVector::from_row_slice(&x0), &DVector::from_row_slice(&u));
    let s = integrate(&PendulumState::from_slice(&x0).unwrap(), &PivotInput::new(u[0], u[1], u[2]), ts / 330.0, 330, &p)
        .unwrap();
    (lin - DVector::from_row_slice(&s.to_array())).amax()
}

#[test]
fn one_step_prediction_error_is_second_order() {
    let (e1, e2) = (one_step_error(1e-2), one_step_error(5e-3));
    assert!(e1 < 2e-5, "{e1:e}");
    let ratio = e1 / e2;
    assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn samples_compose() {
    let cm = build_continuous(&params(0.9));
    let small = discretize_zoh(&cm, 0.01).unwrap();
    let big = discretize_zoh(&cm, 0.05).unwrap();
    let mut a = DMatrix::identity(10, 10);
    let mut b = DMatrix::zeros(10, 3);
    for _ in 0..5 {
        b = &small.a * b + &small.b;
        a = &small.a * a;
    }
    assert!((a - &big.a).amax() < 1e-13);
    assert!((b - &big.b).amax() < 1e-13);
}
