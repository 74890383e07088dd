use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{discrete_l1_error, mass, species};
use super::preset::{ExperimentPreset, PresetName, Scale};
use crate::amr::{adapt, AmrConfig};
use crate::discretization::Operator1D;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::time_integration::{integrate, Method, StepController, Stepper};

#[derive(Clone, Debug, Serialize)]
pub struct AmrBenchConfig {
    pub preset: ExperimentPreset,
    pub initial_cells: usize,
    pub amr: AmrConfig,
    pub method: Method,
    pub t_end: f64,
    /// Spacing of the times at which errors are measured.
    pub sample_interval: f64,
    pub reference_cells: usize,
    /// Uniform runs whose errors are reported alongside the adaptive one.
    pub uniform_cells: Vec<usize>,
    pub controller: StepController,
}

impl AmrBenchConfig {
    /// 400 initial cells on the narrowed Experiment-I domain with IMEX3.
    pub fn new(amr: AmrConfig, t_end: f64, reference_cells: usize) -> Self {
        Self {
            preset: ExperimentPreset::new(PresetName::I, Scale::Ci),
            initial_cells: 400,
            amr,
            method: Method::Imex3,
            t_end,
            sample_interval: 0.5,
            reference_cells,
            uniform_cells: vec![400, 600, 800],
            controller: StepController::default(),
        }
    }

    /// Sample times `0, dt, 2 dt, ...` ending exactly at `t_end`.
    pub fn sample_times(&self) -> Vec<f64> {
        let eps = 1e-12 * self.t_end.abs().max(1.0);
        let mut times = Vec::new();
        let mut i = 0;
        loop {
            let t = i as f64 * self.sample_interval;
            if t >= self.t_end - eps {
                times.push(self.t_end);
                return times;
            }
            times.push(t);
            i += 1;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AmrSample {
    pub t: f64,
    pub error: f64,
    pub cells: usize,
    pub mass_c: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AmrBenchResult {
    pub samples: Vec<AmrSample>,
    /// `(N, E(t_k))` for each uniform comparison run.
    pub uniform: Vec<(usize, Vec<f64>)>,
    /// `(t, N)` after every accepted step, starting with the adapted initial grid.
    pub cell_history: Vec<(f64, usize)>,
    pub steps: usize,
    pub adaptations: usize,
    pub wall_time: f64,
}

impl AmrBenchResult {
    /// Largest cell count over steps with `t <= horizon`.
    pub fn max_cells(&self, horizon: f64) -> usize {
        self.cell_history.iter().filter(|(t, _)| *t <= horizon).map(|&(_, n)| n).max().unwrap_or(0)
    }

    /// Mean cell count over the steps with `0 < t <= horizon`.
    pub fn average_cells(&self, horizon: f64) -> f64 {
        let counts: Vec<usize> = self.cell_history.iter().filter(|(t, _)| *t > 0.0 && *t <= horizon).map(|&(_, n)| n).collect();
        if counts.is_empty() {
            return self.cell_history.first().map_or(0.0, |&(_, n)| n as f64);
        }
        counts.iter().sum::<usize>() as f64 / counts.len() as f64
    }

    pub fn uniform_errors(&self, cells: usize) -> Option<&[f64]> {
        self.uniform.iter().find(|(n, _)| *n == cells).map(|(_, e)| e.as_slice())
    }
}

/// Cancer-cell density of a uniform run at each sample time.
fn sampled_uniform(config: &AmrBenchConfig, cells: usize, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let grid = config.preset.comparison_grid(cells)?;
    let n = config.preset.n_species();
    let mut w = config.preset.initial_state(&grid);
    let op = Operator1D::new(grid, config.preset.system()?)?.with_reconstruction(config.method.reconstruction());
    let mut stepper = Stepper::new(config.method, config.controller);
    let mut out = vec![species(&w, n, 0)];
    for pair in times.windows(2) {
        integrate(&op, &mut w, pair[0], pair[1], &mut stepper, |_, _| {})?;
        out.push(species(&w, n, 0));
    }
    Ok(out)
}

/// Experiment I on an adaptive grid, with `E(t)` against a uniform reference
/// at every sample time and the same error for plain uniform runs.
pub fn run_amr_benchmark(config: &AmrBenchConfig) -> Result<AmrBenchResult> {
    config.amr.validate()?;
    if !(config.sample_interval > 0.0) || !(config.t_end >= 0.0) {
        return Err(Error::Config("AMR benchmark needs sample_interval > 0 and t_end >= 0".into()));
    }
    let times = config.sample_times();
    let ((uniform, adaptive), reference) = rayon::join(
        || {
            rayon::join(
                || {
                    config
                        .uniform_cells
                        .par_iter()
                        .map(|&n| sampled_uniform(config, n, &times).map(|c| (n, c)))
                        .collect::<Result<Vec<_>>>()
                },
                || adaptive_run(config, &times),
            )
        },
        || sampled_uniform(config, config.reference_cells, &times),
    );
    let reference = reference?;
    let (samples_raw, cell_history, steps, adaptations, wall_time) = adaptive?;
    let ref_grid = config.preset.comparison_grid(config.reference_cells)?;

    let mut samples = Vec::with_capacity(times.len());
    for ((t, grid, c), c_ref) in samples_raw.into_iter().zip(&reference) {
        samples.push(AmrSample {
            t,
            error: discrete_l1_error(&grid, &c, &ref_grid, c_ref)?,
            cells: grid.len(),
            mass_c: mass(grid.widths(), &c, 1, 0),
        });
    }
    let mut uniform_errors = Vec::new();
    for (n, cs) in uniform? {
        let grid = config.preset.comparison_grid(n)?;
        let e = cs
            .iter()
            .zip(&reference)
            .map(|(c, r)| discrete_l1_error(&grid, c, &ref_grid, r))
            .collect::<Result<Vec<_>>>()?;
        uniform_errors.push((n, e));
    }
    Ok(AmrBenchResult {
        samples,
        uniform: uniform_errors,
        cell_history,
        steps,
        adaptations,
        wall_time,
    })
}

type AdaptiveRun = (Vec<(f64, Grid1D, Vec<f64>)>, Vec<(f64, usize)>, usize, usize, f64);

fn adaptive_run(config: &AmrBenchConfig, times: &[f64]) -> Result<AdaptiveRun> {
    let start = Instant::now();
    let system = config.preset.system()?;
    let n = system.n_species();
    let grid = config.preset.comparison_grid(config.initial_cells)?;
    let w0 = config.preset.initial_state(&grid);
    let (mut grid, mut w, _) = adapt(&grid, &w0, &system, &config.amr)?;
    let build = |g: &Grid1D| -> Result<Operator1D> {
        Ok(Operator1D::new(g.clone(), system.clone())?.with_reconstruction(config.method.reconstruction()))
    };
    let mut op = build(&grid)?;
    let mut stepper = Stepper::new(config.method, config.controller);
    let mut samples = vec![(0.0, grid.clone(), species(&w, n, 0))];
    let mut history = vec![(0.0, grid.len())];
    let (mut steps, mut adaptations, mut since_adapt) = (0, 0, 0);
    let mut t = 0.0;
    for &target in &times[1..] {
        let eps = 1e-12 * target.abs().max(1.0);
        while target - t > eps {
            let r = stepper.step(&op, &mut w, t, target)?;
            t = if target - (t + r.tau) <= eps { target } else { t + r.tau };
            steps += 1;
            since_adapt += 1;
            if since_adapt == config.amr.cadence {
                since_adapt = 0;
                let (g, v, report) = adapt(&grid, &w, &system, &config.amr)?;
                if report.changed() {
                    adaptations += 1;
                    (grid, w) = (g, v);
                    op = build(&grid)?;
                }
            }
            history.push((t, grid.len()));
        }
        samples.push((target, grid.clone(), species(&w, n, 0)));
    }
    Ok((samples, history, steps, adaptations, start.elapsed().as_secs_f64()))
}
