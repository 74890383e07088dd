//! Monitor-driven h-refinement of 1D grids.
//!
//! A cell whose monitor exceeds `c_ref` is bisected (up to `l_max`); two
//! sibling cells whose monitors are both below `c_coa` merge back into their
//! mother. State is moved between grids conservatively: daughters get the
//! mother's MC-limited linear reconstruction, mothers the mean of their
//! daughters.

use serde::{Deserialize, Serialize};

use crate::discretization::{Operator1D, SlopeCoeffs};
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::model::SpeciesSystem;

/// Which quantity drives the adaptation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorKind {
    /// Discrete gradient of the first species.
    Gradient,
    /// Gap between the wide and the two-point interface velocities.
    VelocityError,
}

/// Monitor with its coarsening and refinement thresholds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorSpec {
    pub kind: MonitorKind,
    pub c_ref: f64,
    pub c_coa: f64,
}

impl MonitorSpec {
    pub fn gradient() -> Self {
        Self {
            kind: MonitorKind::Gradient,
            c_ref: 55.0,
            c_coa: 35.0,
        }
    }

    pub fn velocity_error() -> Self {
        Self {
            kind: MonitorKind::VelocityError,
            c_ref: 7e-4,
            c_coa: 4e-4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_coa.is_finite() && self.c_ref.is_finite() && self.c_coa < self.c_ref) {
            return Err(Error::Config(format!(
                "monitor thresholds need c_coa < c_ref, got {} and {}",
                self.c_coa, self.c_ref
            )));
        }
        Ok(())
    }

    /// Monitor values on every cell of `grid`.
    pub fn evaluate(&self, grid: &Grid1D, system: &SpeciesSystem, w: &[f64]) -> Result<Vec<f64>> {
        match self.kind {
            MonitorKind::Gradient => {
                let n = system.n_species();
                let c: Vec<f64> = w.iter().step_by(n).copied().collect();
                Ok(monitor_gradient(grid, &c))
            }
            MonitorKind::VelocityError => {
                let op = Operator1D::new(grid.clone(), system.clone())?;
                Ok(monitor_velocity_error(&op, w))
            }
        }
    }
}

/// Adaptation settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmrConfig {
    pub monitor: MonitorSpec,
    pub n_ref: usize,
    pub n_coa: usize,
    pub l_max: u32,
    pub smooth: bool,
    /// Adapt every `cadence` time steps.
    pub cadence: usize,
}

impl Default for AmrConfig {
    fn default() -> Self {
        Self {
            monitor: MonitorSpec::gradient(),
            n_ref: 1,
            n_coa: 3,
            l_max: 5,
            smooth: false,
            cadence: 1,
        }
    }
}

impl AmrConfig {
    pub fn validate(&self) -> Result<()> {
        self.monitor.validate()?;
        if self.n_ref == 0 || self.n_coa == 0 || self.l_max == 0 || self.cadence == 0 {
            return Err(Error::Config(
                "n_ref, n_coa, l_max and cadence must all be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// `max(|2 (c_{i+1} - c_i) / (h_{i+1} + h_i)|, |2 (c_i - c_{i-1}) / (h_i + h_{i-1})|)`;
/// boundary cells use their one available side.
pub fn monitor_gradient(grid: &Grid1D, c: &[f64]) -> Vec<f64> {
    let h = grid.widths();
    let n = c.len();
    let side = |i: usize| 2.0 * (c[i + 1] - c[i]).abs() / (h[i + 1] + h[i]);
    (0..n)
        .map(|i| {
            let left = if i > 0 { side(i - 1) } else { 0.0 };
            let right = if i + 1 < n { side(i) } else { 0.0 };
            left.max(right)
        })
        .collect()
}

/// Largest `|P - P_low|` over the two interfaces of each cell and all
/// advected species.
pub fn monitor_velocity_error(op: &Operator1D, w: &[f64]) -> Vec<f64> {
    let n_cells = op.n_cells();
    let mut m = vec![0.0f64; n_cells];
    for s in op.system().advected_species() {
        let p = op.velocities(w, s);
        let pl = op.low_order_velocities(w, s);
        let gap: Vec<f64> = p.iter().zip(&pl).map(|(a, b)| (a - b).abs()).collect();
        for (i, mi) in m.iter_mut().enumerate() {
            *mi = mi.max(gap[i]).max(gap[i + 1]);
        }
    }
    m
}

/// Rule 1: a cell to be refined forces the refinement of coarser neighbours,
/// transitively.
pub fn cascade_refinement(levels: &[u32], marks: &mut [bool]) {
    let n = levels.len();
    let mut stack: Vec<usize> = (0..n).filter(|&i| marks[i]).collect();
    while let Some(i) = stack.pop() {
        for j in [i.wrapping_sub(1), i + 1] {
            if j < n && !marks[j] && levels[j] < levels[i] {
                marks[j] = true;
                stack.push(j);
            }
        }
    }
}

/// Rule 2: a coarsening mark is dropped when a finer neighbour is not marked.
pub fn drop_blocked_coarsening(levels: &[u32], marks: &mut [bool]) {
    let n = levels.len();
    let before = marks.to_vec();
    for i in 0..n {
        if !before[i] {
            continue;
        }
        for j in [i.wrapping_sub(1), i + 1] {
            if j < n && levels[j] > levels[i] && !before[j] {
                marks[i] = false;
            }
        }
    }
}

/// Left-to-right selection of sibling pairs that are both marked.
fn merge_pairs(grid: &Grid1D, marks: &[bool]) -> Vec<bool> {
    let n = grid.len();
    let mut starts = vec![false; n];
    let mut i = 0;
    while i + 1 < n {
        if marks[i] && marks[i + 1] && grid.are_siblings(i) {
            starts[i] = true;
            i += 2;
        } else {
            i += 1;
        }
    }
    starts
}

/// Cancels merges that would leave neighbouring levels more than one apart.
fn keep_merges_smooth(levels: &[u32], starts: &mut [bool]) {
    let n = levels.len();
    loop {
        let mut after = levels.to_vec();
        for i in 0..n {
            if starts[i] {
                after[i] -= 1;
                after[i + 1] -= 1;
            }
        }
        let mut changed = false;
        for i in 0..n {
            if !starts[i] {
                continue;
            }
            let outer = [i.wrapping_sub(1), i + 2];
            if outer.iter().any(|&j| j < n && after[j] > after[i] + 1) {
                starts[i] = false;
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

/// MC-limited slopes of every species on `grid`, zero on boundary cells.
fn limited_slopes(grid: &Grid1D, w: &[f64], n_species: usize) -> Vec<f64> {
    let h = grid.widths();
    let n = grid.len();
    let mut s = vec![0.0; w.len()];
    for i in 1..n.saturating_sub(1) {
        let k = SlopeCoeffs::nonuniform(h[i - 1], h[i], h[i + 1]);
        for sp in 0..n_species {
            s[i * n_species + sp] = k.apply(
                w[(i - 1) * n_species + sp],
                w[i * n_species + sp],
                w[(i + 1) * n_species + sp],
            );
        }
    }
    s
}

/// Moves a cell-major state between two dyadic grids on the same base grid.
/// Finer cells sample the old cell's limited linear reconstruction at their
/// centre, coarser cells take the volume-weighted mean; both keep
/// `sum h w` per species.
pub fn transfer_state(old: &Grid1D, new: &Grid1D, w: &[f64], n_species: usize) -> Result<Vec<f64>> {
    if w.len() != old.len() * n_species {
        return Err(Error::StateShape {
            got: w.len(),
            expected: old.len() * n_species,
        });
    }
    if old.domain() != new.domain() || old.base_width() != new.base_width() {
        return Err(Error::Grid("grids do not share a base partition".into()));
    }
    let slopes = limited_slopes(old, w, n_species);
    let finest = old.max_level().max(new.max_level());
    let span = |g: &Grid1D, i: usize| {
        let c = g.cell(i);
        let scale = 1u128 << (finest - c.level);
        (c.index as u128 * scale, (c.index as u128 + 1) * scale)
    };
    let mut out = vec![0.0; new.len() * n_species];
    let mut j = 0;
    for i in 0..new.len() {
        let (lo, hi) = span(new, i);
        while span(old, j).1 <= lo {
            j += 1;
        }
        let (olo, ohi) = span(old, j);
        if olo <= lo && hi <= ohi {
            let dx = new.center(i) - old.center(j);
            for s in 0..n_species {
                let k = j * n_species + s;
                out[i * n_species + s] = w[k] + slopes[k] * dx;
            }
        } else {
            let mut acc = vec![0.0; n_species];
            let mut jj = j;
            while jj < old.len() && span(old, jj).0 < hi {
                for (s, a) in acc.iter_mut().enumerate() {
                    *a += old.width(jj) * w[jj * n_species + s];
                }
                jj += 1;
            }
            for s in 0..n_species {
                out[i * n_species + s] = acc[s] / new.width(i);
            }
        }
    }
    Ok(out)
}

/// Counts of one [`adapt`] call.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AdaptReport {
    pub refined: usize,
    pub merged: usize,
}

impl AdaptReport {
    pub fn changed(&self) -> bool {
        self.refined + self.merged > 0
    }
}

/// Bisects every marked cell below `l_max`; with `smooth`, rule 1 is applied
/// to the marks first. Returns the new grid, state and number of bisections.
pub fn refine(
    grid: &Grid1D,
    w: &[f64],
    n_species: usize,
    marks: &[bool],
    l_max: u32,
    smooth: bool,
) -> Result<(Grid1D, Vec<f64>, usize)> {
    let levels = grid.levels();
    let mut marks: Vec<bool> = marks.iter().zip(&levels).map(|(&m, &l)| m && l < l_max).collect();
    if smooth {
        cascade_refinement(&levels, &mut marks);
        // a cascade never reaches l_max: it only marks cells coarser than a marked one
    }
    let count = marks.iter().filter(|&&b| b).count();
    if count == 0 {
        return Ok((grid.clone(), w.to_vec(), 0));
    }
    let mut cells = Vec::with_capacity(grid.len() + count);
    for (c, &mark) in grid.cells().iter().zip(&marks) {
        if mark {
            let (a, b) = c.daughters();
            cells.push(a);
            cells.push(b);
        } else {
            cells.push(*c);
        }
    }
    let next = grid.with_cells(cells)?;
    let w = transfer_state(grid, &next, w, n_species)?;
    Ok((next, w, count))
}

/// Merges marked sibling pairs left to right; with `smooth`, rule 2 is applied
/// and merges that would break `|L_i - L_{i+1}| <= 1` are cancelled. Returns
/// the new grid, state and number of merges.
pub fn coarsen(
    grid: &Grid1D,
    w: &[f64],
    n_species: usize,
    marks: &[bool],
    smooth: bool,
) -> Result<(Grid1D, Vec<f64>, usize)> {
    let levels = grid.levels();
    let mut marks = marks.to_vec();
    if smooth {
        drop_blocked_coarsening(&levels, &mut marks);
    }
    let mut starts = merge_pairs(grid, &marks);
    if smooth {
        keep_merges_smooth(&levels, &mut starts);
    }
    let count = starts.iter().filter(|&&b| b).count();
    if count == 0 {
        return Ok((grid.clone(), w.to_vec(), 0));
    }
    let mut cells = Vec::with_capacity(grid.len() - count);
    let mut i = 0;
    while i < grid.len() {
        if starts[i] {
            cells.push(grid.cell(i).mother().expect("siblings have a mother"));
            i += 2;
        } else {
            cells.push(grid.cell(i));
            i += 1;
        }
    }
    let next = grid.with_cells(cells)?;
    let w = transfer_state(grid, &next, w, n_species)?;
    Ok((next, w, count))
}

/// One adaptation: `n_ref` refinement sweeps, then `n_coa` coarsening sweeps,
/// each with freshly evaluated monitors.
pub fn adapt(
    grid: &Grid1D,
    w: &[f64],
    system: &SpeciesSystem,
    config: &AmrConfig,
) -> Result<(Grid1D, Vec<f64>, AdaptReport)> {
    config.validate()?;
    let n_species = system.n_species();
    let mut grid = grid.clone();
    let mut w = w.to_vec();
    let mut report = AdaptReport::default();
    let spec = config.monitor;
    for _ in 0..config.n_ref {
        let marks: Vec<bool> = spec.evaluate(&grid, system, &w)?.iter().map(|&m| m > spec.c_ref).collect();
        let (g, v, count) = refine(&grid, &w, n_species, &marks, config.l_max, config.smooth)?;
        if count == 0 {
            break;
        }
        (grid, w) = (g, v);
        report.refined += count;
    }
    for _ in 0..config.n_coa {
        let marks: Vec<bool> = spec.evaluate(&grid, system, &w)?.iter().map(|&m| m < spec.c_coa).collect();
        let (g, v, count) = coarsen(&grid, &w, n_species, &marks, config.smooth)?;
        if count == 0 {
            break;
        }
        (grid, w) = (g, v);
        report.merged += count;
    }
    Ok((grid, w, report))
}
