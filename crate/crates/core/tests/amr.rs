use proptest::prelude::*;
use taxisfv::amr::*;
use taxisfv::discretization::Operator1D;
use taxisfv::grid::{DyadicCell, Grid1D};
use taxisfv::model::{ReducedParameters, SpeciesSystem};

fn mass(grid: &Grid1D, w: &[f64], n: usize, s: usize) -> f64 {
    grid.widths().iter().zip(w.iter().skip(s).step_by(n)).map(|(h, v)| h * v).sum()
}

fn abs_mass(grid: &Grid1D, w: &[f64], n: usize, s: usize) -> f64 {
    grid.widths().iter().zip(w.iter().skip(s).step_by(n)).map(|(h, v)| h * v.abs()).sum()
}

/// Random admissible grid: repeated bisection of random cells, optionally
/// keeping neighbouring levels within one of each other.
fn random_grid(base: usize, picks: &[usize], max_level: u32, smooth: bool) -> Grid1D {
    let mut g = Grid1D::uniform(0.0, 1.0, base).unwrap();
    for &p in picks {
        let i = p % g.len();
        if g.level(i) >= max_level {
            continue;
        }
        let next = g.bisect(i).unwrap();
        if !smooth || next.is_smooth() {
            g = next;
        }
    }
    g
}

fn reduced() -> SpeciesSystem {
    SpeciesSystem::reduced(&ReducedParameters::default(), None).unwrap()
}

#[test]
fn in_band_monitors_leave_grid_unchanged() {
    let g = Grid1D::uniform(0.0, 1.0, 20).unwrap();
    let w: Vec<f64> = g.centers().iter().flat_map(|x| [40.0 * x, 1.0]).collect();
    let (g2, w2, r) = adapt(&g, &w, &reduced(), &AmrConfig::default()).unwrap();
    assert!(!r.changed());
    assert_eq!(g2.cells(), g.cells());
    assert_eq!(w2, w);
}

#[test]
fn steep_cell_is_bisected_conservatively() {
    let g = Grid1D::uniform(0.0, 1.0, 10).unwrap();
    let mut c = vec![0.0; 10];
    c[5] = 100.0;
    let m = monitor_gradient(&g, &c);
    let marks: Vec<bool> = m.iter().map(|&x| x > 55.0).collect();
    let (g2, c2, count) = refine(&g, &c, 1, &marks, 5, false).unwrap();
    assert_eq!(count, 3);
    assert_eq!(g2.len(), 13);
    assert_eq!(g2.level(6), 1);
    assert!((g2.width(6) - 0.05).abs() < 1e-15);
    assert!((mass(&g2, &c2, 1, 0) - mass(&g, &c, 1, 0)).abs() <= 1e-14 * abs_mass(&g, &c, 1, 0));
}

#[test]
fn linear_profile_survives_refine_then_coarsen() {
    let g = Grid1D::uniform(0.0, 1.0, 12).unwrap();
    let c: Vec<f64> = g.centers().iter().map(|x| 3.0 * x - 1.0).collect();
    let all = vec![true; 12];
    let (fine, cf, _) = refine(&g, &c, 1, &all, 3, false).unwrap();
    for (x, v) in fine.centers().iter().zip(&cf).skip(2).take(fine.len() - 4) {
        assert!((v - (3.0 * x - 1.0)).abs() < 1e-14);
    }
    let (back, cb, merged) = coarsen(&fine, &cf, 1, &vec![true; fine.len()], false).unwrap();
    assert_eq!(merged, 12);
    assert_eq!(back.cells(), g.cells());
    for (a, b) in cb.iter().zip(&c) {
        assert!((a - b).abs() < 1e-14);
    }
}

#[test]
fn velocity_monitor_vanishes_on_linear_and_is_second_order_on_cubic() {
    let sys = reduced();
    let lin = |g: &Grid1D| -> Vec<f64> { g.centers().iter().flat_map(|x| [1.0, 0.5 + 2.0 * x]).collect() };
    let g = Grid1D::uniform(0.0, 1.0, 40).unwrap();
    let op = Operator1D::new(g.clone(), sys.clone()).unwrap();
    assert!(monitor_velocity_error(&op, &lin(&g)).iter().all(|&m| m < 1e-13));

    let cubic = |g: &Grid1D| -> Vec<f64> { g.centers().iter().flat_map(|x| [1.0, x * x * x]).collect() };
    let peak = |n: usize| {
        let g = Grid1D::uniform(0.0, 1.0, n).unwrap();
        let op = Operator1D::new(g.clone(), sys.clone()).unwrap();
        monitor_velocity_error(&op, &cubic(&g)).into_iter().fold(0.0, f64::max)
    };
    let (a, b) = (peak(40), peak(80));
    assert!(a > 0.0);
    assert!((a / b - 4.0).abs() < 0.05, "ratio {}", a / b);
}

#[test]
fn repeated_adapt_is_nearly_idempotent() {
    let sys = reduced();
    let g = Grid1D::uniform(0.0, 1.0, 50).unwrap();
    let w: Vec<f64> = g.centers().iter().flat_map(|x| [(100.0 * (x - 0.5)).tanh(), 1.0]).collect();
    let cfg = AmrConfig {
        l_max: 2,
        n_ref: 2,
        ..AmrConfig::default()
    };
    let (g1, w1, r1) = adapt(&g, &w, &sys, &cfg).unwrap();
    assert!(r1.refined > 0);
    let (g2, _, r2) = adapt(&g1, &w1, &sys, &cfg).unwrap();
    assert_eq!(r2.refined, 0, "second adapt refined");
    assert!(r2.merged <= 2);
    assert!(g2.len() + 2 >= g1.len());
}

#[test]
fn rule_one_example_from_two_cells() {
    // two level-0 neighbours; refining the second forces nothing, but a
    // level-2 cell next to a level-0 cell would violate smoothness
    let g = Grid1D::uniform(0.0, 1.0, 5).unwrap();
    let mut marks = vec![false; 5];
    marks[1] = true;
    let (g1, w1, _) = refine(&g, &[0.0; 5], 1, &marks, 5, true).unwrap();
    assert_eq!(g1.levels(), vec![0, 1, 1, 0, 0, 0]);
    let mut marks = vec![false; 6];
    marks[1] = true;
    let (g2, _, n) = refine(&g1, &w1, 1, &marks, 5, true).unwrap();
    assert_eq!(n, 2);
    assert_eq!(g2.levels(), vec![1, 1, 2, 2, 1, 0, 0, 0]);
    assert!(g2.is_smooth());
}

fn cell_count(g: &Grid1D) -> usize {
    g.len()
}

proptest! {
    #[test]
    fn smoothness_is_preserved(
        base in 5usize..8,
        picks in prop::collection::vec(0usize..64, 0..12),
        refine_bits in prop::collection::vec(any::<bool>(), 40),
        coarsen_bits in prop::collection::vec(any::<bool>(), 40),
    ) {
        let g = random_grid(base, &picks, 3, true);
        prop_assume!(g.len() <= 12);
        let w: Vec<f64> = (0..g.len()).map(|i| i as f64).collect();
        let (g1, w1, _) = refine(&g, &w, 1, &refine_bits[..g.len()], 3, true).unwrap();
        prop_assert!(g1.is_smooth());
        prop_assert!(g1.max_level() <= 3);
        let (g2, _, _) = coarsen(&g1, &w1, 1, &coarsen_bits[..g1.len()], true).unwrap();
        prop_assert!(g2.is_smooth(), "levels {:?} -> {:?}", g1.levels(), g2.levels());
        prop_assert!(cell_count(&g2) >= base);
    }

    #[test]
    fn adapt_conserves_mass_and_respects_level_cap(
        picks in prop::collection::vec(0usize..64, 0..20),
        values in prop::collection::vec(-5.0f64..5.0, 80),
        c_ref in 1.0f64..100.0,
        gap in 0.1f64..0.9,
        l_max in 1u32..4,
        smooth in any::<bool>(),
    ) {
        let g = random_grid(8, &picks, l_max, smooth);
        let n = 2;
        let w: Vec<f64> = values.iter().cycle().take(g.len() * n).copied().collect();
        let cfg = AmrConfig {
            monitor: MonitorSpec { kind: MonitorKind::Gradient, c_ref, c_coa: c_ref * gap },
            l_max,
            smooth,
            ..AmrConfig::default()
        };
        let (g2, w2, _) = adapt(&g, &w, &reduced(), &cfg).unwrap();
        prop_assert!(g2.max_level() <= l_max);
        if smooth {
            prop_assert!(g2.is_smooth());
        }
        for s in 0..n {
            let before = mass(&g, &w, n, s);
            let after = mass(&g2, &w2, n, s);
            let scale = abs_mass(&g, &w, n, s).max(f64::MIN_POSITIVE);
            prop_assert!((before - after).abs() <= 1e-14 * scale, "species {}: {} vs {}", s, before, after);
        }
    }

    #[test]
    fn transfer_of_constant_state_is_constant(picks in prop::collection::vec(0usize..64, 0..20), v in -3.0f64..3.0) {
        let g = random_grid(6, &picks, 4, false);
        let fine = g.with_cells(g.cells().iter().flat_map(|c| { let (a, b) = c.daughters(); [a, b] }).collect::<Vec<DyadicCell>>()).unwrap();
        let w = vec![v; g.len()];
        let out = transfer_state(&g, &fine, &w, 1).unwrap();
        prop_assert!(out.iter().all(|x| (x - v).abs() < 1e-14));
    }
}
