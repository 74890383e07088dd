use std::time::Instant;

use serde::Serialize;

use super::preset::ExperimentPreset;
use crate::discretization::Operator2D;
use crate::error::{Error, Result};
use crate::grid::Grid2D;
use crate::time_integration::{integrate, Method, StepController, StepStats, Stepper};

/// Working vectors of the 2D integrators, in units of the state size.
const WORK_VECTORS: usize = 32;

#[derive(Clone, Debug, Serialize)]
pub struct TwoDConfig {
    pub preset: ExperimentPreset,
    pub cells_per_side: usize,
    pub method: Method,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    /// Square window `[a, b]^2` that snapshots keep.
    pub window: (f64, f64),
    pub controller: StepController,
    pub max_memory_bytes: usize,
}

impl TwoDConfig {
    pub fn new(preset: ExperimentPreset) -> Self {
        let t_end = preset.t_end;
        Self {
            cells_per_side: preset.cells,
            method: preset.method,
            window: preset.comparison_domain,
            snapshot_times: vec![0.0, t_end],
            t_end,
            preset,
            controller: StepController::default(),
            max_memory_bytes: 8 << 30,
        }
    }

    /// Rough peak memory of the run.
    pub fn memory_estimate(&self) -> usize {
        self.cells_per_side * self.cells_per_side * self.preset.n_species() * 8 * WORK_VECTORS
    }
}

/// State restricted to the window at one time, plus whole-domain diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct Snapshot2D {
    pub t: f64,
    pub nx: usize,
    pub ny: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Cell-major window values, rows of constant `y`.
    pub values: Vec<f64>,
    /// Integral of every species over the whole domain.
    pub mass: Vec<f64>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Snapshot2D {
    pub fn species(&self, n_species: usize, s: usize) -> Vec<f64> {
        self.values.iter().skip(s).step_by(n_species).copied().collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TwoDResult {
    pub snapshots: Vec<Snapshot2D>,
    pub stats: StepStats,
    pub wall_time: f64,
}

fn snapshot(grid: &Grid2D, w: &[f64], n: usize, t: f64, window: (f64, f64)) -> Snapshot2D {
    let inside = |v: f64| v >= window.0 && v <= window.1;
    let cols: Vec<usize> = (0..grid.nx()).filter(|&i| inside(grid.center(i, 0).0)).collect();
    let rows: Vec<usize> = (0..grid.ny()).filter(|&j| inside(grid.center(0, j).1)).collect();
    let mut values = Vec::with_capacity(cols.len() * rows.len() * n);
    for &j in &rows {
        for &i in &cols {
            let o = grid.offset(i, j) * n;
            values.extend_from_slice(&w[o..o + n]);
        }
    }
    let vol = grid.cell_volume();
    let mut mass = vec![0.0; n];
    let mut min = vec![f64::INFINITY; n];
    let mut max = vec![f64::NEG_INFINITY; n];
    for cell in w.chunks_exact(n) {
        for s in 0..n {
            mass[s] += vol * cell[s];
            min[s] = min[s].min(cell[s]);
            max[s] = max[s].max(cell[s]);
        }
    }
    Snapshot2D {
        t,
        nx: cols.len(),
        ny: rows.len(),
        x: cols.iter().map(|&i| grid.center(i, 0).0).collect(),
        y: rows.iter().map(|&j| grid.center(0, j).1).collect(),
        values,
        mass,
        min,
        max,
    }
}

/// Runs the 2D preset on a uniform square grid and keeps windowed snapshots
/// at the requested times.
pub fn run_2d(config: &TwoDConfig) -> Result<TwoDResult> {
    let need = config.memory_estimate();
    if need > config.max_memory_bytes {
        return Err(Error::Config(format!(
            "a {0}x{0} run needs about {1} MiB, above the limit of {2} MiB",
            config.cells_per_side,
            need >> 20,
            config.max_memory_bytes >> 20
        )));
    }
    let mut times = config.snapshot_times.clone();
    times.retain(|t| (0.0..=config.t_end).contains(t));
    times.sort_by(f64::total_cmp);
    times.dedup();
    let start = Instant::now();
    let (a, b) = config.preset.domain;
    let grid = Grid2D::new(a, b, config.cells_per_side, config.cells_per_side)?;
    let n = config.preset.n_species();
    let mut w = config.preset.initial_state_2d(&grid);
    let op = Operator2D::new(grid.clone(), config.preset.system()?).with_reconstruction(config.method.reconstruction());
    let mut stepper = Stepper::new(config.method, config.controller);
    let mut t = 0.0;
    let mut snapshots = Vec::new();
    for target in times {
        if target > t {
            integrate(&op, &mut w, t, target, &mut stepper, |_, _| {})?;
            t = target;
            log::info!("2D run reached t = {t} after {} steps", stepper.stats().steps);
        }
        snapshots.push(snapshot(&grid, &w, n, t, config.window));
    }
    if config.t_end > t {
        integrate(&op, &mut w, t, config.t_end, &mut stepper, |_, _| {})?;
    }
    Ok(TwoDResult {
        snapshots,
        stats: stepper.stats(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}
