use taxisfv::discretization::Operator1D;
use taxisfv::grid::Grid1D;
use taxisfv::model::{Reaction, SpeciesSystem, UpaParameters};
use taxisfv::time_integration::*;

/// `exp(m t) w` by scaling and squaring with a truncated Taylor series.
fn expm_apply(m: &[f64], n: usize, t: f64, w: &[f64]) -> Vec<f64> {
    let norm: f64 = m.iter().map(|x| x.abs()).sum::<f64>() * t.abs();
    let squarings = (norm.max(1.0).log2().ceil() as i32 + 4).max(0);
    let scale = t / 2f64.powi(squarings);
    let mut e = vec![0.0; n * n];
    let mut term = vec![0.0; n * n];
    for i in 0..n {
        e[i * n + i] = 1.0;
        term[i * n + i] = 1.0;
    }
    for k in 1..30 {
        let mut next = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                next[i * n + j] = (0..n).map(|l| term[i * n + l] * m[l * n + j]).sum::<f64>() * scale / k as f64;
            }
        }
        term = next;
        for (a, b) in e.iter_mut().zip(&term) {
            *a += b;
        }
    }
    for _ in 0..squarings {
        let mut sq = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                sq[i * n + j] = (0..n).map(|l| e[i * n + l] * e[l * n + j]).sum();
            }
        }
        e = sq;
    }
    (0..n).map(|i| (0..n).map(|j| e[i * n + j] * w[j]).sum()).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn linear_problem() -> DenseLinearProblem {
    DenseLinearProblem::new(
        2,
        vec![0.0, 0.5, -0.5, 0.0],
        vec![-4.0, 1.0, 1.0, -3.0],
        vec![-0.1, 0.3, 0.2, -0.4],
    )
    .unwrap()
}

fn total(p: &DenseLinearProblem) -> Vec<f64> {
    (0..4).map(|i| p.taxis[i] + p.diffusion[i] + p.reaction[i]).collect()
}

fn run(step: impl Fn(&[f64], f64) -> Vec<f64>, w0: &[f64], t_end: f64, steps: usize) -> Vec<f64> {
    let tau = t_end / steps as f64;
    let mut w = w0.to_vec();
    for _ in 0..steps {
        w = step(&w, tau);
    }
    w
}

/// Observed order from errors at `steps` and `2 * steps`.
fn observed_order(step: impl Fn(&[f64], f64) -> Vec<f64>, w0: &[f64], t_end: f64, exact: &[f64], steps: usize) -> f64 {
    let e1 = max_diff(&run(&step, w0, t_end, steps), exact);
    let e2 = max_diff(&run(&step, w0, t_end, 2 * steps), exact);
    (e1 / e2).log2()
}

fn assert_order(name: &str, got: f64, nominal: f64) {
    assert!((got - nominal).abs() <= 0.15, "{name}: order {got:.3}, nominal {nominal}");
}

#[test]
fn full_schemes_reach_nominal_order_on_linear_system() {
    let p = linear_problem();
    let w0 = [1.0, 0.5];
    let t_end = 1.0;
    let exact = expm_apply(&total(&p), 2, t_end, &w0);
    let cases = [(Method::Explicit, 1.0, 40), (Method::Imex2, 2.0, 20), (Method::Imex3, 3.0, 20)];
    for (m, nominal, steps) in cases {
        let got = observed_order(|w, tau| m.step(&p, w, tau).unwrap().0, &w0, t_end, &exact, steps);
        assert_order(m.label(), got, nominal);
    }
}

/// Rosenbrock stages use `J = D + J_R`, so the test system carries no taxis
/// part and the Jacobian is exact.
#[test]
fn rosenbrock_schemes_reach_nominal_order_with_exact_jacobian() {
    let mut p = linear_problem();
    p.taxis = vec![0.0; 4];
    let w0 = [1.0, 0.5];
    let exact = expm_apply(&total(&p), 2, 1.0, &w0);
    for (m, nominal) in [(Method::Ros2, 2.0), (Method::Ros3, 3.0)] {
        let got = observed_order(|w, tau| m.step(&p, w, tau).unwrap().0, &w0, 1.0, &exact, 20);
        assert_order(m.label(), got, nominal);
    }
}

/// With taxis left out of the Jacobian the scheme is a W-method and ROS3
/// falls back to second order.
#[test]
fn rosenbrock_with_inexact_jacobian_is_second_order() {
    let p = linear_problem();
    let w0 = [1.0, 0.5];
    let exact = expm_apply(&total(&p), 2, 1.0, &w0);
    for m in [Method::Ros2, Method::Ros3] {
        let got = observed_order(|w, tau| m.step(&p, w, tau).unwrap().0, &w0, 1.0, &exact, 40);
        assert_order(m.label(), got, 2.0);
    }
}

#[test]
fn sub_integrators_reach_nominal_order() {
    let p = linear_problem();
    let w0 = [1.0, 0.5];
    let t_end = 1.0;
    let exact_d = expm_apply(&p.diffusion, 2, t_end, &w0);
    let exact_r = expm_apply(&p.reaction, 2, t_end, &w0);
    let trbdf2 = ButcherTableau::tr_bdf2();
    let got = observed_order(|w, h| dirk_diffusion(&p, w, h, &trbdf2).unwrap(), &w0, t_end, &exact_d, 20);
    assert_order("TR-BDF2", got, 2.0);
    let got = observed_order(|w, h| crank_nicolson_diffusion(&p, w, h).unwrap(), &w0, t_end, &exact_d, 20);
    assert_order("CN diffusion", got, 2.0);
    let got = observed_order(|w, h| rk4(|v, o| p.reaction(v, o), w, h), &w0, t_end, &exact_r, 5);
    assert_order("RK4", got, 4.0);
    let got = observed_order(|w, h| reaction_ros2(&p, w, h).unwrap(), &w0, t_end, &exact_r, 10);
    assert_order("ROS2 reaction", got, 2.0);
}

#[test]
fn strang_is_second_order_on_non_commuting_parts() {
    let p = linear_problem();
    let w0 = [1.0, 0.5];
    let exact = expm_apply(&total(&p), 2, 1.0, &w0);
    for m in [Method::Strang, Method::StrangIr, Method::StrangCnd] {
        let got = observed_order(|w, tau| m.step(&p, w, tau).unwrap().0, &w0, 1.0, &exact, 20);
        assert_order(m.label(), got, 2.0);
    }
}

#[test]
fn cnd_is_first_order_with_reaction_and_second_order_without() {
    let p = linear_problem();
    let w0 = [1.0, 0.5];
    let exact = expm_apply(&total(&p), 2, 1.0, &w0);
    let got = observed_order(|w, tau| Method::Cnd.step(&p, w, tau).unwrap().0, &w0, 1.0, &exact, 40);
    assert_order("CND", got, 1.0);
    let pure = DenseLinearProblem::new(2, vec![0.0; 4], p.diffusion.clone(), vec![0.0; 4]).unwrap();
    let exact = expm_apply(&pure.diffusion, 2, 1.0, &w0);
    let got = observed_order(|w, tau| Method::Cnd.step(&pure, w, tau).unwrap().0, &w0, 1.0, &exact, 20);
    assert_order("CND diffusion", got, 2.0);
}

#[test]
fn embedded_companions_are_lower_order() {
    let p = linear_problem();
    let w0 = [1.0, 0.5];
    let exact = expm_apply(&total(&p), 2, 1.0, &w0);
    let got = observed_order(|w, tau| Method::Imex3Atc.step(&p, w, tau).unwrap().1.unwrap(), &w0, 1.0, &exact, 80);
    assert_order("IMEX3 embedded", got, 2.0);
    let got = observed_order(|w, tau| Method::Ros3Atc.step(&p, w, tau).unwrap().1.unwrap(), &w0, 1.0, &exact, 40);
    assert!(got > 0.85 && got < 2.15, "ROS3 embedded order {got}");
}

fn upa_constant_state() -> (Operator1D, Vec<f64>) {
    let op = Operator1D::new(
        Grid1D::uniform(0.0, 1.0, 5).unwrap(),
        SpeciesSystem::upa(&UpaParameters::preset_p()).unwrap(),
    )
    .unwrap();
    let cell = [0.8, 0.6, 0.3, 0.1, 0.05];
    (op, cell.repeat(5))
}

#[test]
fn schemes_keep_their_order_on_the_nonlinear_reaction() {
    let (op, w0) = upa_constant_state();
    let t_end = 2.0;
    let exact = run(|w, h| rk4(|v, o| op.reaction(v, o), w, h), &w0, t_end, 20000);
    // The printed ROS3 weights violate the nonlinear third-order condition
    // b . (A e)^2 = 1/3 (they give 5/12), so only second order is attainable.
    let cases = [
        (Method::Ros2, 2.0, 80),
        (Method::Ros3, 2.0, 160),
        (Method::Imex3, 3.0, 20),
        (Method::Imex3AtcIr, 3.0, 20),
        (Method::Strang, 4.0, 20),
        (Method::StrangIr, 2.0, 80),
    ];
    for (m, nominal, steps) in cases {
        let got = observed_order(|w, tau| m.step(&op, w, tau).unwrap().0, &w0, t_end, &exact, steps);
        assert_order(m.label(), got, nominal);
    }
}

#[test]
fn reaction_only_integration_matches_ode_oracle() {
    let (op, w0) = upa_constant_state();
    let exact = run(|w, h| rk4(|v, o| op.reaction(v, o), w, h), &w0, 3.0, 30000);
    let mut w = w0.clone();
    let mut stepper = Stepper::new(Method::Imex3, StepController { tau_max: 0.01, ..Default::default() });
    let r = integrate(&op, &mut w, 0.0, 3.0, &mut stepper, |_, _| {}).unwrap();
    assert_eq!(r.t, 3.0);
    assert!(max_diff(&w, &exact) < 1e-6, "error {}", max_diff(&w, &exact));
}

fn amplification(m: Method, z: f64) -> f64 {
    let p = DenseLinearProblem::scalar(0.0, z, 0.0);
    m.step(&p, &[1.0], 1.0).unwrap().0[0]
}

#[test]
fn l_stable_schemes_damp_stiff_modes() {
    let trbdf2 = ButcherTableau::tr_bdf2();
    for k in 2..=8 {
        let z = -10f64.powi(k);
        let p = DenseLinearProblem::scalar(0.0, z, 0.0);
        let values = [
            ("ROS2", amplification(Method::Ros2, z)),
            ("ROS3", amplification(Method::Ros3, z)),
            ("IMEX3", amplification(Method::Imex3, z)),
            ("TR-BDF2", dirk_diffusion(&p, &[1.0], 1.0, &trbdf2).unwrap()[0]),
        ];
        for (name, r) in values {
            let bound = if k == 8 { 1e-2 } else { 1.0 };
            assert!(r.abs() < bound, "{name} at z = {z}: {r}");
        }
    }
}

#[test]
fn ros2_matches_its_stability_function() {
    let g = 1.0 - 0.5 * 2f64.sqrt();
    for z in [-3.0, -0.5, 0.1, 0.4] {
        let k1 = z / (1.0 - g * z);
        let k2 = z * (1.0 + (2f64.sqrt() - 1.0) * k1) / (1.0 - g * z);
        let r = 1.0 + 0.5 * (k1 + k2);
        assert!((amplification(Method::Ros2, z) - r).abs() < 1e-14);
    }
    for z in [1e-2, 5e-3, 2.5e-3] {
        let err = (amplification(Method::Ros2, z) - f64::exp(z)).abs();
        let ratio = err / z.powi(3);
        assert!(ratio > 1e-3 && ratio < 1.0, "ROS2 local error ratio {ratio}");
    }
}

#[test]
fn imex2_matches_hand_unrolled_stages() {
    for (ze, zi) in [(0.3, -2.0), (-0.1, -50.0), (0.05, 0.2)] {
        let p = DenseLinearProblem::scalar(ze, zi, 0.0);
        let got = Method::Imex2.step(&p, &[1.0], 1.0).unwrap().0[0];
        let expected = 1.0 + (ze + zi) * (1.0 + 0.5 * ze) / (1.0 - 0.5 * zi);
        assert!((got - expected).abs() < 1e-14);
    }
}

#[test]
fn cnd_pure_diffusion_amplification() {
    for z in [-0.5, -5.0, -500.0] {
        let p = DenseLinearProblem::scalar(0.0, z, 0.0);
        let got = Method::Cnd.step(&p, &[1.0], 1.0).unwrap().0[0];
        assert!((got - (1.0 + z / 2.0) / (1.0 - z / 2.0)).abs() < 1e-14);
    }
}

#[test]
fn trivial_steps() {
    let p = DenseLinearProblem::scalar(0.0, 0.0, -1.0);
    assert!((Method::Explicit.step(&p, &[1.0], 0.1).unwrap().0[0] - 0.9).abs() < 1e-15);
    let zero = DenseLinearProblem::scalar(0.0, 0.0, 0.0);
    for m in Method::ALL {
        assert_eq!(m.step(&zero, &[0.7], 0.3).unwrap().0, vec![0.7], "{m}");
    }
}

#[test]
fn splitting_is_exact_for_commuting_parts() {
    let p = DenseLinearProblem::scalar(-0.3, -0.7, 0.2);
    let got = Method::Strang.step(&p, &[1.0], 0.01).unwrap().0[0];
    let trbdf2_half: f64 = {
        let z = -0.7 * 0.005;
        let w2 = (1.0 + z / 4.0) / (1.0 - z / 4.0);
        (1.0 + z / 3.0 * (1.0 + w2)) / (1.0 - z / 3.0)
    };
    let rk4 = |z: f64| -> f64 { 1.0 + z + z * z / 2.0 + z.powi(3) / 6.0 + z.powi(4) / 24.0 };
    let expected = rk4(-0.3 * 0.005).powi(2) * trbdf2_half.powi(2) * rk4(0.2 * 0.01);
    assert!((got - expected).abs() < 1e-15);
}

#[test]
fn method_labels_round_trip() {
    for m in Method::ALL {
        assert_eq!(m.label().parse::<Method>().unwrap(), m);
    }
    assert_eq!("imex3_atc".parse::<Method>().unwrap(), Method::Imex3Atc);
    assert!("RK45".parse::<Method>().is_err());
    assert_eq!(
        Method::Imex3AtcUpwind1.reconstruction(),
        taxisfv::discretization::Reconstruction::FirstOrder
    );
}

#[test]
fn controller_arithmetic() {
    let c = StepController::default();
    assert!((c.rejection_factor(8.0, 1.0) - 0.45).abs() < 1e-15);
    assert_eq!(c.growth_factor(1e-30, 1.0), 2.0);
    assert!((c.tolerance(10.0) - 1e-5).abs() < 1e-20);
    assert_eq!(c.tolerance(0.1), 1e-6);
}

#[test]
fn exact_embedded_pair_accepts_at_the_cfl_bound() {
    // With zero error estimate the proposal must be the CFL cap.
    let p = DenseLinearProblem::scalar(0.0, 0.0, 0.0);
    let mut s = Stepper::new(Method::Imex3Atc, StepController { tau_max: 0.05, ..Default::default() });
    let mut w = vec![1.0];
    let r1 = s.step(&p, &mut w, 0.0, 1.0).unwrap();
    let r2 = s.step(&p, &mut w, r1.tau, 1.0).unwrap();
    assert_eq!((r1.tau, r2.tau), (0.05, 0.05));
    assert_eq!(r1.error_estimate, Some(0.0));
}

#[test]
fn adaptive_control_meets_tolerance() {
    let p = linear_problem();
    let mut s = Stepper::new(Method::Imex3Atc, StepController { tau_max: 1.0, ..Default::default() });
    let mut w = vec![1.0, 0.5];
    let mut t = 0.0;
    while t < 2.0 {
        let tol = s.controller().tolerance(w.iter().map(|x: &f64| x.abs()).sum());
        let r = s.step(&p, &mut w, t, 2.0).unwrap();
        assert!(r.error_estimate.unwrap() < tol);
        t += r.tau;
    }
    assert!(s.stats().rejections > 0 || s.stats().steps > 1);
}

#[test]
fn integrate_edge_cases() {
    let p = DenseLinearProblem::scalar(0.0, 0.0, -1.0);
    let mut w = vec![1.0];
    let mut s = Stepper::new(Method::Ros3, StepController::default());
    let r = integrate(&p, &mut w, 0.0, 0.0, &mut s, |_, _| panic!("no steps expected")).unwrap();
    assert_eq!((r.steps, w[0]), (0, 1.0));
    let mut times = Vec::new();
    integrate(&p, &mut w, 0.0, 0.25, &mut s, |t, _| times.push(t)).unwrap();
    assert_eq!(*times.last().unwrap(), 0.25);
    assert_eq!(times.len(), 3);
}

#[test]
fn blow_up_is_reported_with_location() {
    let sys = SpeciesSystem::new(vec!["c".into()], vec![0.0], vec![0.0], Reaction::Linear(vec![1e308]), None).unwrap();
    let op = Operator1D::new(Grid1D::uniform(0.0, 1.0, 5).unwrap(), sys).unwrap();
    let mut w = vec![0.0, 0.0, 1e10, 0.0, 0.0];
    let mut s = Stepper::new(Method::Explicit, StepController::default());
    match integrate(&op, &mut w, 0.0, 1.0, &mut s, |_, _| {}) {
        Err(taxisfv::Error::NonFinite { cell, species, .. }) => assert_eq!((cell, species), (2, 0)),
        other => panic!("expected NonFinite, got {other:?}"),
    }
}

#[test]
fn fixed_step_runs_are_bitwise_reproducible() {
    let (op, w0) = upa_constant_state();
    let go = || {
        let mut w = w0.clone();
        let mut s = Stepper::new(Method::Strang, StepController::default());
        integrate(&op, &mut w, 0.0, 1.0, &mut s, |_, _| {}).unwrap();
        w
    };
    assert_eq!(go(), go());
}
