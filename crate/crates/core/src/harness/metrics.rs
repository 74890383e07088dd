use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid1D;

/// Minimum ratio of reference cells to test cells.
pub const REFERENCE_RATIO: usize = 10;

/// Reference cells holding the centre of the dyadic cell `(level, index)` of
/// a grid with `base` level-0 cells, in exact integer arithmetic. Returns
/// `(j, j)` for an interior centre and `(j, j + 1)` when the centre sits on
/// the interface between reference cells `j` and `j + 1`.
pub fn reference_cells(level: u32, index: u64, base: usize, reference: usize) -> (usize, usize) {
    // centre = (2 index + 1) / (2 base 2^level) of the domain length
    let num = (2 * index as u128 + 1) * reference as u128;
    let den = 2 * (base as u128) << level;
    let j = (num / den) as usize;
    if num % den == 0 {
        (j - 1, j)
    } else {
        let j = j.min(reference - 1);
        (j, j)
    }
}

/// Left cell of [`reference_cells`].
pub fn reference_index(level: u32, index: u64, base: usize, reference: usize) -> usize {
    reference_cells(level, index, base, reference).0
}

/// Reference value at the centre of a dyadic cell. On a reference interface
/// the two neighbours are averaged, which keeps the sampling symmetric.
fn reference_value(level: u32, index: u64, base: usize, c_ref: &[f64]) -> f64 {
    match reference_cells(level, index, base, c_ref.len()) {
        (j, k) if j == k => c_ref[j],
        (j, k) => 0.5 * (c_ref[j] + c_ref[k]),
    }
}

/// `sum_i vol(C_i) |c_i - c_ref(x_i)|` with `c_ref(x_i)` the reference value
/// at the centre of `C_i`. `c` and `c_ref` hold one value per cell.
pub fn discrete_l1_error(grid: &Grid1D, c: &[f64], reference: &Grid1D, c_ref: &[f64]) -> Result<f64> {
    if c.len() != grid.len() {
        return Err(Error::StateShape {
            got: c.len(),
            expected: grid.len(),
        });
    }
    if c_ref.len() != reference.len() {
        return Err(Error::StateShape {
            got: c_ref.len(),
            expected: reference.len(),
        });
    }
    if !reference.is_uniform() || reference.max_level() != 0 {
        return Err(Error::Config("the reference solution must live on a uniform grid".into()));
    }
    let (a, b) = grid.domain();
    let (ra, rb) = reference.domain();
    let tol = 1e-12 * (b - a);
    if (a - ra).abs() > tol || (b - rb).abs() > tol {
        return Err(Error::Config(format!(
            "test domain [{a}, {b}] differs from reference domain [{ra}, {rb}]"
        )));
    }
    if reference.len() < REFERENCE_RATIO * grid.len() {
        return Err(Error::ReferenceTooCoarse {
            coarse: grid.len(),
            reference: reference.len(),
        });
    }
    let base = ((b - a) / grid.base_width()).round() as usize;
    Ok(grid
        .cells()
        .iter()
        .zip(grid.widths())
        .zip(c)
        .map(|((cell, h), ci)| {
            h * (ci - reference_value(cell.level, cell.index, base, c_ref)).abs()
        })
        .sum())
}

/// The error sum for two uniform partitions of one interval of length
/// `length`, given only the cell values. Unlike [`discrete_l1_error`] this
/// only asks for a reference at least as fine as the test grid.
pub fn discrete_l1_error_uniform(c: &[f64], c_ref: &[f64], length: f64) -> Result<f64> {
    if c.is_empty() {
        return Err(Error::StateShape { got: 0, expected: 1 });
    }
    if c_ref.len() < c.len() {
        return Err(Error::ReferenceTooCoarse {
            coarse: c.len(),
            reference: c_ref.len(),
        });
    }
    let h = length / c.len() as f64;
    Ok(c.iter()
        .enumerate()
        .map(|(i, ci)| h * (ci - reference_value(0, i as u64, c.len(), c_ref)).abs())
        .sum())
}

/// Experimental order of convergence between `(n1, e1)` and `(n2, e2)`.
pub fn eoc(e1: f64, e2: f64, n1: usize, n2: usize) -> Result<f64> {
    if !(e1 > 0.0 && e2 > 0.0 && e1.is_finite() && e2.is_finite()) {
        return Err(Error::Parameter(format!("EOC needs positive finite errors, got {e1} and {e2}")));
    }
    if n2 <= n1 {
        return Err(Error::Parameter(format!("EOC needs N2 > N1, got {n1} and {n2}")));
    }
    Ok((e1.ln() - e2.ln()) / ((n2 as f64).ln() - (n1 as f64).ln()))
}

/// One row of a convergence table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub cells: usize,
    pub error: f64,
    /// Order against the previous (coarser) row, when both errors are positive.
    pub eoc: Option<f64>,
    pub wall_time: f64,
    pub steps: usize,
}

/// Fills in `eoc` for consecutive rows sorted by cell count.
pub fn attach_eocs(rows: &mut [ErrorReport]) {
    for i in 1..rows.len() {
        let (prev, cur) = (&rows[i - 1], &rows[i]);
        rows[i].eoc = eoc(prev.error, cur.error, prev.cells, cur.cells).ok();
    }
    if let Some(first) = rows.first_mut() {
        first.eoc = None;
    }
}

/// Volume-weighted integral of species `s`.
pub fn mass(widths: &[f64], w: &[f64], n_species: usize, s: usize) -> f64 {
    widths.iter().zip(w.iter().skip(s).step_by(n_species)).map(|(h, v)| h * v).sum()
}

/// Values of species `s` from a cell-major state.
pub fn species(w: &[f64], n_species: usize, s: usize) -> Vec<f64> {
    w.iter().skip(s).step_by(n_species).copied().collect()
}
