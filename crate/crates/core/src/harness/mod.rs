//! Benchmark harness: experiment presets, error metrics, convergence studies,
//! the AMR benchmark, the 2D run and result files.

mod amr_bench;
mod config;
mod io;
mod metrics;
mod preset;
mod study;
mod two_d;

use std::time::Instant;

pub use amr_bench::{run_amr_benchmark, AmrBenchConfig, AmrBenchResult, AmrSample};
pub use config::{RunConfig, NUMERIC_KEYS};
pub use io::{
    read_snapshot_csv, write_json, write_metrics_csv, write_snapshot_csv, MetricsRow, RunMetadata, Snapshot,
};
pub use metrics::{
    attach_eocs, discrete_l1_error, discrete_l1_error_uniform, eoc, mass, reference_cells, reference_index, species, ErrorReport,
    REFERENCE_RATIO,
};
pub use preset::{interface_curve, ExperimentPreset, ModelParameters, PresetName, Scale, GAUSSIAN_WIDTH};
pub use study::{run_convergence_study, ReferenceCache, StudyConfig, StudyOutcome, StudyRun};
pub use two_d::{run_2d, Snapshot2D, TwoDConfig, TwoDResult};

use crate::discretization::Operator1D;
use crate::error::Result;
use crate::grid::Grid1D;
use crate::time_integration::{integrate, Method, StepController, StepStats, Stepper};

/// Final state of a 1D run.
#[derive(Clone, Debug)]
pub struct Run1D {
    pub grid: Grid1D,
    pub w: Vec<f64>,
    pub t: f64,
    pub stats: StepStats,
    pub wall_time: f64,
}

/// Integrates `preset` on `grid` from its initial data to `t_end`, calling
/// `observer(t, dt, w)` after every step.
pub fn simulate_1d(
    preset: &ExperimentPreset,
    grid: Grid1D,
    method: Method,
    controller: StepController,
    t_end: f64,
    mut observer: impl FnMut(f64, f64, &[f64]),
) -> Result<Run1D> {
    let start = Instant::now();
    let mut w = preset.initial_state(&grid);
    let op = Operator1D::new(grid, preset.system()?)?.with_reconstruction(method.reconstruction());
    let mut stepper = Stepper::new(method, controller);
    let mut last = 0.0;
    let run = integrate(&op, &mut w, 0.0, t_end, &mut stepper, |t, w| {
        observer(t, t - last, w);
        last = t;
    })?;
    Ok(Run1D {
        grid: op.grid().clone(),
        w,
        t: run.t,
        stats: stepper.stats(),
        wall_time: start.elapsed().as_secs_f64(),
    })
}
