use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::metrics::{attach_eocs, discrete_l1_error, species, ErrorReport, REFERENCE_RATIO};
use super::preset::ExperimentPreset;
use super::simulate_1d;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::time_integration::{Method, StepController};

/// A grid-convergence study of one method against a fine uniform reference.
#[derive(Clone, Debug, Serialize)]
pub struct StudyConfig {
    pub preset: ExperimentPreset,
    pub method: Method,
    pub cells: Vec<usize>,
    pub reference_cells: usize,
    pub reference_method: Method,
    pub t_end: f64,
    pub controller: StepController,
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
}

impl StudyConfig {
    pub fn new(preset: ExperimentPreset, method: Method, cells: Vec<usize>, reference_cells: usize) -> Self {
        let t_end = preset.t_end;
        Self {
            preset,
            method,
            cells,
            reference_cells,
            reference_method: Method::Imex3,
            t_end,
            controller: StepController::default(),
            cache_dir: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let max = self.cells.iter().copied().max().ok_or_else(|| Error::Config("no cell counts given".into()))?;
        if self.reference_cells < REFERENCE_RATIO * max {
            return Err(Error::ReferenceTooCoarse {
                coarse: max,
                reference: self.reference_cells,
            });
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end = {} must be finite and nonnegative", self.t_end)));
        }
        Ok(())
    }
}

/// Outcome of one test run of a study.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyRun {
    pub cells: usize,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyOutcome {
    pub method: Method,
    pub reference_cells: usize,
    pub t_end: f64,
    /// Successful runs sorted by cell count, with EOCs between neighbours.
    pub rows: Vec<ErrorReport>,
    pub runs: Vec<StudyRun>,
    pub converged: bool,
    /// Why the study was flagged non-convergent.
    pub reason: Option<String>,
    pub reference_from_cache: bool,
}

impl StudyOutcome {
    /// EOC between the two finest successful runs.
    pub fn terminal_eoc(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.eoc)
    }

    pub fn error_at(&self, cells: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.cells == cells).map(|r| r.error)
    }
}

/// Content-addressed store of reference solutions.
#[derive(Clone, Debug)]
pub struct ReferenceCache {
    dir: PathBuf,
}

impl ReferenceCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// SHA-256 over everything that determines the reference run.
    pub fn key(preset: &ExperimentPreset, method: Method, cells: usize, t_end: f64, controller: &StepController) -> String {
        #[derive(Serialize)]
        struct Key<'a> {
            version: &'a str,
            preset: &'a ExperimentPreset,
            method: &'a str,
            cells: usize,
            t_end: f64,
            controller: &'a StepController,
        }
        let bytes = serde_json::to_vec(&Key {
            version: env!("CARGO_PKG_VERSION"),
            preset,
            method: method.label(),
            cells,
            t_end,
            controller,
        })
        .expect("reference key serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.f64"))
    }

    pub fn load(&self, key: &str, expected_len: usize) -> Result<Option<Vec<f64>>> {
        let path = self.path(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(path, e)),
        };
        if bytes.len() != 8 * expected_len {
            return Err(Error::Format {
                path,
                message: format!("{} bytes, expected {}", bytes.len(), 8 * expected_len),
            });
        }
        Ok(Some(
            bytes
                .chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
                .collect(),
        ))
    }

    pub fn store(&self, key: &str, w: &[f64]) -> Result<()> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path(key);
        let tmp = path.with_extension("tmp");
        let bytes: Vec<u8> = w.iter().flat_map(|x| x.to_le_bytes()).collect();
        fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

struct Finished {
    cells: usize,
    c: Vec<f64>,
    grid: Grid1D,
    wall_time: f64,
    steps: usize,
}

fn run_one(config: &StudyConfig, method: Method, cells: usize) -> Result<Finished> {
    let grid = config.preset.comparison_grid(cells)?;
    let run = simulate_1d(&config.preset, grid, method, config.controller, config.t_end, |_, _, _| {})?;
    Ok(Finished {
        cells,
        c: species(&run.w, config.preset.n_species(), 0),
        grid: run.grid,
        wall_time: run.wall_time,
        steps: run.stats.steps,
    })
}

/// Runs the reference (or loads it from the cache) and every test resolution,
/// in parallel. A failing test run is recorded and the study goes on; a
/// failing reference run aborts it.
pub fn run_convergence_study(config: &StudyConfig) -> Result<StudyOutcome> {
    config.validate()?;
    let n = config.preset.n_species();
    let cache = config.cache_dir.as_ref().map(ReferenceCache::new);
    let key = ReferenceCache::key(
        &config.preset,
        config.reference_method,
        config.reference_cells,
        config.t_end,
        &config.controller,
    );
    let cached = match &cache {
        Some(c) => c.load(&key, config.reference_cells * n)?,
        None => None,
    };
    let reference_from_cache = cached.is_some();

    let mut cells = config.cells.clone();
    cells.sort_unstable();
    cells.dedup();
    let (reference, tests) = rayon::join(
        || -> Result<Vec<f64>> {
            if let Some(w) = cached {
                return Ok(w);
            }
            log::info!("computing reference on {} cells", config.reference_cells);
            let grid = config.preset.comparison_grid(config.reference_cells)?;
            let run = simulate_1d(&config.preset, grid, config.reference_method, config.controller, config.t_end, |_, _, _| {})?;
            if let Some(c) = &cache {
                c.store(&key, &run.w)?;
            }
            Ok(run.w)
        },
        || {
            cells
                .par_iter()
                .map(|&k| (k, run_one(config, config.method, k)))
                .collect::<Vec<_>>()
        },
    );
    let reference = reference?;
    let ref_grid = config.preset.comparison_grid(config.reference_cells)?;
    let c_ref = species(&reference, n, 0);

    let mut rows = Vec::new();
    let mut runs = Vec::new();
    for (k, result) in tests {
        let outcome = result.and_then(|f| {
            let error = discrete_l1_error(&f.grid, &f.c, &ref_grid, &c_ref)?;
            Ok(ErrorReport {
                cells: f.cells,
                error,
                eoc: None,
                wall_time: f.wall_time,
                steps: f.steps,
            })
        });
        match outcome {
            Ok(row) => {
                log::info!("{} N = {k}: E = {:e}", config.method, row.error);
                rows.push(row);
                runs.push(StudyRun { cells: k, failure: None });
            }
            Err(e) => {
                log::warn!("{} N = {k} failed: {e}", config.method);
                runs.push(StudyRun {
                    cells: k,
                    failure: Some(e.to_string()),
                });
            }
        }
    }
    attach_eocs(&mut rows);
    let reason = non_convergence(&runs, &rows);
    Ok(StudyOutcome {
        method: config.method,
        reference_cells: config.reference_cells,
        t_end: config.t_end,
        converged: reason.is_none(),
        reason,
        rows,
        runs,
        reference_from_cache,
    })
}

/// A study converges when every run succeeds with a finite error and the
/// error strictly decreases under refinement.
fn non_convergence(runs: &[StudyRun], rows: &[ErrorReport]) -> Option<String> {
    if let Some(r) = runs.iter().find(|r| r.failure.is_some()) {
        return Some(format!("run on {} cells failed: {}", r.cells, r.failure.as_deref().unwrap_or("")));
    }
    if let Some(r) = rows.iter().find(|r| !r.error.is_finite()) {
        return Some(format!("error on {} cells is not finite", r.cells));
    }
    rows.windows(2).find(|p| p[1].error >= p[0].error).map(|p| {
        format!(
            "error does not decrease from {} cells ({:e}) to {} cells ({:e})",
            p[0].cells, p[0].error, p[1].cells, p[1].error
        )
    })
}
