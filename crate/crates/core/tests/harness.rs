use proptest::prelude::*;
use taxisfv::grid::Grid1D;
use taxisfv::harness::*;
use taxisfv::time_integration::{Method, StepController};

fn names(n: usize) -> Vec<String> {
    ["c", "v", "u", "p", "m"].iter().take(n).map(|s| s.to_string()).collect()
}

#[test]
fn eoc_of_a_quartered_error_is_two() {
    assert!((eoc(4e-2, 1e-2, 100, 200).unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(eoc(3e-3, 3e-3, 100, 200).unwrap(), 0.0);
}

#[test]
fn table_rows_get_eocs_against_their_coarser_neighbour() {
    let row = |cells, error| ErrorReport {
        cells,
        error,
        eoc: None,
        wall_time: 0.0,
        steps: 0,
    };
    let mut rows = vec![row(100, 1e-2), row(200, 2.5e-3), row(400, 0.0)];
    attach_eocs(&mut rows);
    assert_eq!(rows[0].eoc, None);
    assert!((rows[1].eoc.unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(rows[2].eoc, None);
}

#[test]
fn error_rejects_references_finer_by_less_than_ten() {
    let g = Grid1D::uniform(0.0, 5.0, 100).unwrap();
    let r = Grid1D::uniform(0.0, 5.0, 999).unwrap();
    let err = discrete_l1_error(&g, &[0.0; 100], &r, &[0.0; 999]).unwrap_err();
    assert!(matches!(err, taxisfv::Error::ReferenceTooCoarse { .. }));
}

#[test]
fn error_of_a_refined_grid_uses_true_cell_widths() {
    let g = Grid1D::uniform(0.0, 1.0, 5).unwrap().bisect(0).unwrap();
    // cells: [0, 0.1], [0.1, 0.2], then four of width 0.2
    let r = Grid1D::uniform(0.0, 1.0, 60).unwrap();
    let e = discrete_l1_error(&g, &[1.0, 2.0, 0.0, 0.0, 0.0, 3.0], &r, &[0.0; 60]).unwrap();
    assert!((e - (0.1 + 0.2 + 0.6)).abs() < 1e-15);
}

proptest! {
    #[test]
    fn error_of_a_sampled_linear_profile_vanishes(n in 2usize..40, ratio in 10usize..25, a in -2.0..2.0f64, b in -2.0..2.0f64) {
        // the reference value at a coarse centre is exact for linear data
        let m = n * ratio;
        let lin = |x: f64| a + b * x;
        let c: Vec<f64> = (0..n).map(|i| lin((i as f64 + 0.5) / n as f64)).collect();
        let c_ref: Vec<f64> = (0..m).map(|j| lin((j as f64 + 0.5) / m as f64)).collect();
        let e = discrete_l1_error_uniform(&c, &c_ref, 1.0).unwrap();
        // odd ratios leave the centre inside a reference cell, off by at most h_ref / 2
        let bound = if ratio % 2 == 0 { 1e-12 } else { 0.5 * b.abs() / m as f64 + 1e-12 };
        prop_assert!(e <= bound, "e = {e}, bound = {bound}");
    }

    #[test]
    fn reference_cells_contain_the_centre(level in 0u32..6, base in 1usize..50, reference_factor in 10usize..40, frac in 0.0..1.0f64) {
        let cells = base << level;
        let index = ((frac * cells as f64) as u64).min(cells as u64 - 1);
        let reference = base * reference_factor;
        let (j, k) = reference_cells(level, index, base, reference);
        let centre = (2 * index + 1) as f64 / (2 * cells) as f64;
        let h = 1.0 / reference as f64;
        prop_assert!(k == j || k == j + 1);
        prop_assert!(j as f64 * h <= centre + 1e-12 && centre <= (k + 1) as f64 * h + 1e-12);
        if k == j + 1 {
            prop_assert!((centre - k as f64 * h).abs() < 1e-12);
        }
    }
}

#[test]
fn snapshot_csv_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let preset = ExperimentPreset::new(PresetName::I, Scale::Ci);
    let grid = preset.grid(37).unwrap().bisect(20).unwrap().bisect(4).unwrap().bisect(3).unwrap();
    let mut w = preset.initial_state(&grid);
    // values that do not survive a fixed-precision print
    w[0] = std::f64::consts::PI * 1e-300;
    w[1] = 1.0 / 3.0;
    w[2] = -0.0;
    let snap = Snapshot::from_1d(&grid, &w, &names(5));
    let path = dir.path().join("s.csv");
    write_snapshot_csv(&path, &snap).unwrap();
    let back = read_snapshot_csv(&path).unwrap();
    assert_eq!(back.names, snap.names);
    assert_eq!(back.level, snap.level);
    for (a, b) in back.values.iter().zip(&snap.values).chain(back.x.iter().zip(&snap.x)) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn malformed_snapshot_reports_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "x,h,level,c\n0.5,1.0,zero,1.0\n").unwrap();
    let msg = read_snapshot_csv(&path).unwrap_err().to_string();
    assert!(msg.contains("bad.csv"), "{msg}");
}

#[test]
fn metadata_echoes_the_parameter_symbols() {
    let dir = tempfile::tempdir().unwrap();
    let preset = ExperimentPreset::new(PresetName::I, Scale::Ci);
    let meta = RunMetadata {
        version: "test".into(),
        preset: preset.name.to_string(),
        method: Method::Imex3.label().into(),
        cells: 10,
        t_end: 1.0,
        cfl: 0.49,
        parameters: preset.parameters.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        steps: 0,
        rejections: 0,
        wall_time: 0.0,
        config: serde_json::Value::Null,
    };
    let path = dir.path().join("meta.json");
    write_json(&path, &meta).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["parameters"]["delta"], 8.15);
    assert_eq!(v["parameters"]["D_c"], 3.5e-4);
}

#[test]
fn run_observer_sees_increasing_times_and_conserved_volume() {
    let preset = ExperimentPreset::new(PresetName::Reduced, Scale::Ci);
    let grid = preset.grid(100).unwrap();
    let mut rows = Vec::new();
    let run = simulate_1d(&preset, grid, Method::Imex3, StepController::default(), 1.0, |t, dt, w| {
        rows.push(MetricsRow {
            t,
            dt,
            masses: vec![w.iter().step_by(2).sum::<f64>() * 0.1],
            error: None,
        })
    })
    .unwrap();
    assert_eq!(run.t, 1.0);
    assert!(rows.windows(2).all(|p| p[1].t > p[0].t && p[1].dt > 0.0));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("metrics.csv");
    write_metrics_csv(&path, &names(1), &rows).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,dt,mass_c");
    assert_eq!(text.lines().count(), rows.len() + 1);
}

#[test]
fn reference_cache_is_content_addressed() {
    let preset = ExperimentPreset::new(PresetName::II, Scale::Ci);
    let ctl = StepController::default();
    let k = ReferenceCache::key(&preset, Method::Imex3, 1000, 20.0, &ctl);
    assert_eq!(k, ReferenceCache::key(&preset, Method::Imex3, 1000, 20.0, &ctl));
    assert_ne!(k, ReferenceCache::key(&preset, Method::Imex3, 1000, 10.0, &ctl));
    assert_ne!(k, ReferenceCache::key(&preset, Method::Ros3, 1000, 20.0, &ctl));
    let mut other = preset.clone();
    other.parameters.set("chi_v", 0.5).unwrap();
    assert_ne!(k, ReferenceCache::key(&other, Method::Imex3, 1000, 20.0, &ctl));

    let dir = tempfile::tempdir().unwrap();
    let cache = ReferenceCache::new(dir.path());
    assert_eq!(cache.load(&k, 3).unwrap(), None);
    cache.store(&k, &[1.0, -2.5, f64::MIN_POSITIVE]).unwrap();
    assert_eq!(cache.load(&k, 3).unwrap(), Some(vec![1.0, -2.5, f64::MIN_POSITIVE]));
    assert!(cache.load(&k, 4).is_err());
}

#[test]
fn cached_study_reproduces_the_fresh_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = StudyConfig::new(ExperimentPreset::new(PresetName::II, Scale::Ci), Method::Imex3, vec![40, 20], 400);
    config.t_end = 0.5;
    config.cache_dir = Some(dir.path().to_path_buf());
    let fresh = run_convergence_study(&config).unwrap();
    let cached = run_convergence_study(&config).unwrap();
    assert!(!fresh.reference_from_cache && cached.reference_from_cache);
    assert_eq!(fresh.rows.iter().map(|r| r.cells).collect::<Vec<_>>(), [20, 40]);
    for (a, b) in fresh.rows.iter().zip(&cached.rows) {
        assert_eq!(a.error.to_bits(), b.error.to_bits());
    }
    assert!(fresh.converged);
}

#[test]
fn study_refuses_a_coarse_reference() {
    let config = StudyConfig::new(ExperimentPreset::new(PresetName::I, Scale::Ci), Method::Imex3, vec![100, 200], 1999);
    assert!(matches!(
        run_convergence_study(&config),
        Err(taxisfv::Error::ReferenceTooCoarse { .. })
    ));
}

#[test]
fn two_d_initial_snapshot_splits_matrix_and_tumour() {
    let mut config = TwoDConfig::new(ExperimentPreset::new(PresetName::TwoD, Scale::Ci));
    config.cells_per_side = 40;
    config.t_end = 0.0;
    config.snapshot_times = vec![0.0];
    let out = run_2d(&config).unwrap();
    let snap = &out.snapshots[0];
    let c = snap.species(5, 0);
    let v = snap.species(5, 1);
    assert!(c.iter().zip(&v).all(|(c, v)| c + v == 1.0));
    assert!(c.contains(&1.0) && c.contains(&0.0));
}

#[test]
fn two_d_refuses_runs_beyond_the_memory_budget() {
    let mut config = TwoDConfig::new(ExperimentPreset::new(PresetName::TwoD, Scale::Paper));
    config.max_memory_bytes = 1 << 20;
    assert!(matches!(run_2d(&config), Err(taxisfv::Error::Config(_))));
}

#[test]
fn interface_curve_matches_its_pieces() {
    assert_eq!(interface_curve(0.0), 4.0);
    assert_eq!(interface_curve(-2.0), 4.0 + 0.7 * (-1.8f64).sin());
    assert_eq!(interface_curve(5.0), 7.0 * 4.5f64.sin() + 1.0 + 4.0);
    assert_eq!(interface_curve(6.0), 5.0 + 0.7 * 4.5f64.sin() + 0.7 * 0.9f64.sin());
}
