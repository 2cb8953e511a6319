use nalgebra::Vector3;
use proptest::prelude::*;
use spillfree_core::pendulum::*;

const G: f64 = 9.81;

fn params(l: f64) -> PendulumParams {
    PendulumParams::new(l, G, 1.0).unwrap()
}

fn state(v: [f64; 10]) -> PendulumState {
    PendulumState::from_slice(&v).unwrap()
}

/// State on the quadratic path `x(t) = x0 + t v + t^2/2 a` in every coordinate.
fn path(x0: &[f64; 10], acc: &[f64; 5], t: f64) -> PendulumState {
    let mut x = [0.0; 10];
    for i in 0..5 {
        x[i] = x0[i] + t * x0[5 + i] + 0.5 * t * t * acc[i];
        x[5 + i] = x0[5 + i] + t * acc[i];
    }
    state(x)
}

#[test]
fn kinematics_match_finite_differences() {
    let p = params(0.7);
    let x0 = [0.1, -0.2, 0.3, 0.25, -0.15, 0.4, -0.3, 0.2, 0.9, -1.1];
    let acc = [0.7, -0.4, 1.3, -2.0, 3.0];
    let h = 1e-4;
    let pos = |t: f64| mass_position(&path(&x0, &acc, t), &p).unwrap();
    let k = mass_kinematics_with_tilt_accel(
        &state(x0),
        &PivotInput::new(acc[0], acc[1], acc[2]),
        (acc[3], acc[4]),
        &p,
    )
    .unwrap();
    let v_fd = (pos(h) - pos(-h)) / (2.0 * h);
    let a_fd = (pos(h) - 2.0 * pos(0.0) + pos(-h)) / (h * h);
    assert!((k.velocity - v_fd).amax() < 1e-7, "{:?} vs {:?}", k.velocity, v_fd);
    assert!((k.acceleration - a_fd).amax() < 1e-5, "{:?} vs {:?}", k.acceleration, a_fd);
}

/// The rod can only pull along itself, so `m (a + g z)` must be parallel to the rod.
fn newton_residual(s: &PendulumState, u: &PivotInput, p: &PendulumParams) -> f64 {
    let k = mass_kinematics(s, u, p).unwrap();
    let f = k.acceleration + Vector3::new(0.0, 0.0, p.gravity);
    let d = rod_direction(s.theta, s.phi);
    f.cross(&d).norm() / f.norm()
}

#[test]
fn equations_of_motion_satisfy_newton() {
    let p = params(0.45);
    let cases = [
        ([0.0, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0]),
        ([0.0, 0.0, 0.0, 0.3, -0.4, 0.1, 0.2, 0.0, 1.5, -0.7], [1.0, -2.0, 0.5]),
        ([1.0, 2.0, 3.0, -1.1, 0.9, 0.0, 0.0, 0.0, -2.0, 3.0], [-3.0, 0.4, -4.0]),
    ];
    for (x, u) in cases {
        let r = newton_residual(&state(x), &PivotInput::new(u[0], u[1], u[2]), &p);
        assert!(r < 1e-14, "residual {r:e} at {x:?}");
    }
}

#[test]
fn energy_is_conserved_with_fixed_pivot() {
    let p = params(0.6);
    for x in [
        [0.0, 0.0, 0.0, 0.3, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 0.3, 0.2, 0.0, 0.0, 0.0, 0.0, 1.0],
    ] {
        let s0 = state(x);
        let (k0, u0) = total_energy(&s0, &p).unwrap();
        let e0 = k0 + u0;
        let s = integrate(&s0, &PivotInput::zero(), 1e-3, 10_000, &p).unwrap();
        let (k, u) = total_energy(&s, &p).unwrap();
        let drift = ((k + u) - e0).abs() / e0.abs();
        assert!(drift < 1e-6, "relative drift {drift:e}");
    }
}

/// Arithmetic-geometric mean, used for the exact large-amplitude period.
fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..30 {
        (a, b) = (0.5 * (a + b), (a * b).sqrt());
    }
    a
}

fn measured_period(theta0: f64, l: f64) -> f64 {
    let p = params(l);
    let dt = 1e-3;
    let mut s = state([0.0, 0.0, 0.0, theta0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let mut t = 0.0;
    let mut crossings = Vec::new();
    while crossings.len() < 3 {
        let next = step_rk4(&s, &PivotInput::zero(), dt, &p).unwrap();
        if s.theta > 0.0 && next.theta <= 0.0 || s.theta < 0.0 && next.theta >= 0.0 {
            crossings.push(t + dt * s.theta / (s.theta - next.theta));
        }
        s = next;
        t += dt;
    }
    crossings[2] - crossings[0]
}

#[test]
fn period_matches_exact_pendulum() {
    for (theta0, l) in [(0.01f64, 0.6), (0.3, 0.6), (1.0, 0.3)] {
        let small = 2.0 * std::f64::consts::PI * (l / G).sqrt();
        let exact = small / agm(1.0, (theta0 / 2.0).cos());
        let t = measured_period(theta0, l);
        assert!((t - exact).abs() < 1e-6, "theta0={theta0}: {t} vs {exact}");
    }
}

#[test]
fn free_motion_is_slosh_free() {
    let p = params(0.6);
    let mut s = state([0.0, 0.0, 0.0, 0.05, -0.03, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let dt = 1e-3;
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for k in 0..3000 {
        let t = k as f64 * dt;
        let u = PivotInput::new(2.0 * (3.0 * t).sin(), -1.5 * (2.0 * t).cos(), 0.5 * (5.0 * t).sin());
        let m = mass_kinematics(&s, &u, &p).unwrap();
        let n = node_slosh(s.theta, s.phi, &m.acceleration, &p, k).unwrap();
        worst = worst.max(n.residual_xz).max(n.residual_yz);
        scale = scale.max(m.acceleration.amax()).max(G);
        assert!(n.alignment_error < 1e-12);
        s = step_rk4(&s, &u, dt, &p).unwrap();
    }
    assert!(worst < 1e-9 * scale, "residual {worst:e}, scale {scale}");
}

#[test]
fn point_mass_validity() {
    assert!((validity_error(3.0, 1.0).unwrap() - 1.0 / 54.0).abs() < 1e-15);
    assert!((100.0 * validity_error(0.3, 0.1).unwrap() - 1.85).abs() < 5e-3);
    let l = rod_length_for_validity(0.01, 0.1).unwrap();
    assert!((validity_error(l, 0.1).unwrap() - 0.01).abs() < 1e-15);
}

fn angles() -> impl Strategy<Value = (f64, f64)> {
    (-1.4..1.4f64, -3.0..3.0f64)
}

proptest! {
    #[test]
    fn rod_keeps_its_length((theta, phi) in angles(), pivot in prop::array::uniform3(-2.0..2.0f64), l in 0.1..2.0f64) {
        let s = state([pivot[0], pivot[1], pivot[2], theta, phi, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let m = mass_position(&s, &params(l)).unwrap();
        let d = (s.pivot - m) / l;
        prop_assert!(((s.pivot - m).norm() - l).abs() < 1e-12);
        prop_assert!((d - rod_direction(theta, phi)).amax() < 1e-12);
    }

    #[test]
    fn container_rotation_is_proper((theta, phi) in angles()) {
        let r = container_rotation(theta, phi).into_inner();
        prop_assert!((r.transpose() * r - nalgebra::Matrix3::identity()).amax() < 1e-14);
        prop_assert!((r.determinant() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn dynamics_respect_newton(
        (theta, phi) in (-1.2..1.2f64, -1.5..1.5f64),
        rates in prop::array::uniform2(-3.0..3.0f64),
        u in prop::array::uniform3(-5.0..5.0f64),
        l in 0.2..1.5f64,
    ) {
        let s = state([0.0, 0.0, 0.0, theta, phi, 0.0, 0.0, 0.0, rates[0], rates[1]]);
        let input = PivotInput::new(u[0], u[1], u[2]);
        let k = mass_kinematics(&s, &input, &params(l)).unwrap();
        prop_assume!((k.acceleration + Vector3::new(0.0, 0.0, G)).norm() > 1e-3);
        prop_assert!(newton_residual(&s, &input, &params(l)) < 1e-12);
    }
}
