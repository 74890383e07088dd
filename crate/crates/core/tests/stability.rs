use taxisfv::discretization::Operator1D;
use taxisfv::grid::Grid1D;
use taxisfv::model::{Reaction, ReducedParameters, SpeciesSystem, UpaParameters};
use taxisfv::stability::*;
use taxisfv::time_integration::{integrate, Method, StepController, Stepper};

fn reduced(chi: f64) -> (ReducedParameters, SpeciesSystem) {
    let p = ReducedParameters {
        chi,
        ..ReducedParameters::default()
    };
    let sys = SpeciesSystem::reduced(&p, None).unwrap();
    (p, sys)
}

/// Roots of `det(J_R - k J_T)` for the reduced model at `(1, alpha / beta)`.
fn quadratic_roots(p: &ReducedParameters) -> (f64, f64) {
    // det = (mu + k D_c)(beta + k D_u) - k chi alpha
    let a = p.d_c * p.d_u;
    let b = p.mu * p.d_u + p.beta * p.d_c - p.chi * p.alpha;
    let c = p.mu * p.beta;
    let disc = (b * b - 4.0 * a * c).sqrt();
    ((-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a))
}

#[test]
fn unstable_band_matches_closed_form_roots() {
    let (p, sys) = reduced(0.04);
    let steady = [1.0, p.alpha / p.beta];
    let (lo, hi) = quadratic_roots(&p);
    assert!((lo - 20.14).abs() < 0.01 && (hi - 151.28).abs() < 0.01, "{lo} {hi}");
    let scan = scan_dispersion(&sys, &steady, 400.0, 801).unwrap();
    assert_eq!(scan.unstable.len(), 1);
    let (a, b) = scan.unstable[0];
    assert!((a - lo).abs() <= 1e-3 * lo, "{a} vs {lo}");
    assert!((b - hi).abs() <= 1e-3 * hi, "{b} vs {hi}");
    let (k_peak, l_peak) = scan.peak();
    assert!(k_peak > lo && k_peak < hi && l_peak > 0.0);
}

#[test]
fn no_band_without_taxis() {
    let (p, sys) = reduced(0.0);
    let scan = scan_dispersion(&sys, &[1.0, p.alpha / p.beta], 400.0, 401).unwrap();
    assert!(scan.unstable.is_empty());
    assert!(scan.lambda.windows(2).all(|w| w[1] <= w[0] + 1e-15));
}

#[test]
fn eigenvalues_agree_with_characteristic_polynomial() {
    let (p, sys) = reduced(0.04);
    let steady = [1.0, p.alpha / p.beta];
    let d = Dispersion::new(&sys, &steady).unwrap();
    for i in 0..1000 {
        let k = 0.3 * i as f64;
        let m = d.matrix(k);
        let tr = m[0] + m[3];
        let det = m[0] * m[3] - m[1] * m[2];
        let disc = tr * tr - 4.0 * det;
        let expected = if disc >= 0.0 { 0.5 * (tr + disc.sqrt()) } else { 0.5 * tr };
        assert!((d.lambda(k) - expected).abs() < 1e-9, "k = {k}");
    }
}

#[test]
fn transport_jacobian_matches_finite_differences_of_the_flux_map() {
    let p = UpaParameters::preset_p();
    let sys = SpeciesSystem::upa(&p).unwrap();
    let w = [0.7, 0.4, 0.2, 0.05, 0.01];
    let g0 = [0.3, -1.2, 0.8, 0.1, -0.4];
    // flux density of species s: D_s g_s - sum_r chi_sr w_s g_r
    let flux = |g: &[f64]| -> Vec<f64> {
        (0..5)
            .map(|s| sys.diffusivities()[s] * g[s] - (0..5).map(|r| sys.taxis(s, r) * w[s] * g[r]).sum::<f64>())
            .collect()
    };
    let jt = transport_jacobian(&sys, &w);
    let eps = 1e-6;
    for r in 0..5 {
        let mut gp = g0;
        let mut gm = g0;
        gp[r] += eps;
        gm[r] -= eps;
        let (fp, fm) = (flux(&gp), flux(&gm));
        for s in 0..5 {
            let fd = (fp[s] - fm[s]) / (2.0 * eps);
            assert!((fd - jt[s * 5 + r]).abs() < 1e-8, "entry ({s}, {r})");
        }
    }
    let no_taxis = sys.without_taxis();
    let jt = transport_jacobian(&no_taxis, &w);
    for s in 0..5 {
        for r in 0..5 {
            let expected = if r == s { sys.diffusivities()[s] } else { 0.0 };
            assert_eq!(jt[s * 5 + r], expected);
        }
    }
}

#[test]
fn steady_states() {
    let (p, sys) = reduced(0.04);
    let w = find_reaction_steady_state(&sys, &[1.1, 0.3]).unwrap();
    assert!((w[0] - 1.0).abs() < 1e-12 && (w[1] - p.alpha / p.beta).abs() < 1e-12);
    let logistic = SpeciesSystem::new(vec!["c".into()], vec![0.0], vec![0.0], Reaction::Logistic { mu: 0.3 }, None).unwrap();
    assert!((find_reaction_steady_state(&logistic, &[0.7]).unwrap()[0] - 1.0).abs() < 1e-12);
    match find_reaction_steady_state(&logistic, &[-0.2]) {
        Err(taxisfv::Error::NonPositiveSteadyState { .. }) => {}
        other => panic!("expected a non-positive root, got {other:?}"),
    }
}

#[test]
fn upa_steady_state_and_band() {
    let p = UpaParameters::preset_p();
    let sys = SpeciesSystem::upa(&p).unwrap();
    let w = find_reaction_steady_state(&sys, &[1.0; 5]).unwrap();
    let mut r = [0.0; 5];
    sys.react(&w, &mut r);
    assert!(r.iter().all(|x| x.abs() < 1e-12));
    assert!(w.iter().all(|&x| x > 0.0));
    // a second Newton run from a nearby guess lands on the same root
    let w2 = find_reaction_steady_state(&sys, &w.iter().map(|x| x * 1.01).collect::<Vec<_>>()).unwrap();
    for (a, b) in w.iter().zip(&w2) {
        assert!((a - b).abs() < 1e-10);
    }
    // Damped fixed-point oracle: the root attracts the reaction flow, so
    // relaxing w <- w + theta R(w) from a perturbed root must return to it.
    assert!(spectral_abscissa(5, &reaction_jacobian(&sys, &w)) < 0.0);
    let mut x: Vec<f64> = w.iter().map(|v| v * 1.001).collect();
    let mut rx = [0.0; 5];
    for _ in 0..200_000 {
        sys.react(&x, &mut rx);
        for (xi, ri) in x.iter_mut().zip(&rx) {
            *xi += 0.01 * ri;
        }
    }
    for (a, b) in w.iter().zip(&x) {
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }
    let scan = scan_dispersion(&sys, &w, 2000.0, 2001).unwrap();
    assert!(!scan.unstable.is_empty(), "lambda peak {:?}", scan.peak());
}

/// Amplitude of `cos(q x)` in the first species relative to the steady value.
fn mode_amplitude(grid: &Grid1D, w: &[f64], n: usize, base: f64, q: f64) -> f64 {
    let l = grid.total_length();
    let acc: f64 = grid
        .centers()
        .iter()
        .zip(grid.widths())
        .zip(w.iter().step_by(n))
        .map(|((x, h), c)| (c - base) * (q * x).cos() * h)
        .sum();
    2.0 * acc / l
}

fn growth_ratio(k: f64, periods: f64, cells: usize) -> (f64, f64) {
    let (p, sys) = reduced(0.04);
    let steady = [1.0, p.alpha / p.beta];
    let d = Dispersion::new(&sys, &steady).unwrap();
    let m = d.matrix(k);
    let lambda = d.lambda(k);
    let v = [m[1], lambda - m[0]];
    let scale = 1e-3 / v[0].abs().max(v[1].abs());
    let q = k.sqrt();
    let grid = Grid1D::uniform(0.0, periods * std::f64::consts::PI / q, cells).unwrap();
    let mut w: Vec<f64> = grid
        .centers()
        .iter()
        .flat_map(|x| {
            let c = (q * x).cos() * scale;
            [steady[0] + c * v[0], steady[1] + c * v[1]]
        })
        .collect();
    let a0 = mode_amplitude(&grid, &w, 2, steady[0], q);
    let op = Operator1D::new(grid.clone(), sys).unwrap();
    let mut stepper = Stepper::new(Method::Imex3, StepController { tau_max: 0.05, ..Default::default() });
    integrate(&op, &mut w, 0.0, 5.0, &mut stepper, |_, _| {}).unwrap();
    let a1 = mode_amplitude(&grid, &w, 2, steady[0], q);
    (a1 / a0, (5.0 * lambda).exp())
}

#[test]
fn simulation_growth_follows_dispersion_relation() {
    let (ratio, predicted) = growth_ratio(70.0, 8.0, 300);
    assert!(ratio > 1.1, "unstable mode ratio {ratio}");
    assert!((ratio / predicted - 1.0).abs() < 0.05, "{ratio} vs {predicted}");
    let (ratio, predicted) = growth_ratio(300.0, 16.0, 300);
    assert!(ratio < 0.9, "stable mode ratio {ratio}");
    assert!(predicted < 0.9);
}
