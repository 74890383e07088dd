//! Cell partitions of intervals and squares.
//!
//! A [`Grid1D`] is a dyadic refinement of a uniform base partition: every cell
//! is identified by its refinement level and its index on that level, so widths
//! are exact powers-of-two fractions of the base width and bisect/merge round
//! trips are bit-identical. A [`Grid2D`] is a uniform tensor grid addressed by
//! lexicographic single indices.

use crate::error::{Error, Result};

/// Smallest number of cells for which every stencil has full support.
pub const MIN_CELLS: usize = 5;

/// Round-off undershoot tolerated on densities before a state is considered invalid.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-12;

/// A cell of a dyadic partition: `index` counts cells of width
/// `base_width * 2^-level` from the left end of the domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DyadicCell {
    pub level: u32,
    pub index: u64,
}

impl DyadicCell {
    pub fn daughters(self) -> (DyadicCell, DyadicCell) {
        let level = self.level + 1;
        (
            DyadicCell {
                level,
                index: 2 * self.index,
            },
            DyadicCell {
                level,
                index: 2 * self.index + 1,
            },
        )
    }

    pub fn mother(self) -> Option<DyadicCell> {
        (self.level > 0).then(|| DyadicCell {
            level: self.level - 1,
            index: self.index / 2,
        })
    }

    /// True when `self` is a left daughter and `other` its right sister.
    pub fn is_left_sibling_of(self, other: DyadicCell) -> bool {
        self.level > 0
            && self.level == other.level
            && self.index % 2 == 0
            && other.index == self.index + 1
    }
}

/// Non-uniform partition of `[lower, upper]` obtained by dyadic refinement of a
/// uniform base grid.
#[derive(Clone, Debug)]
pub struct Grid1D {
    lower: f64,
    upper: f64,
    base_width: f64,
    cells: Vec<DyadicCell>,
    widths: Vec<f64>,
    centers: Vec<f64>,
    revision: u64,
}

impl Grid1D {
    /// `n` cells of width `(b - a) / n`, all on level 0, revision 0.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::Grid(format!("domain [{a}, {b}] is empty or not finite")));
        }
        if n < MIN_CELLS {
            return Err(Error::Grid(format!(
                "{n} cells requested, the stencils need at least {MIN_CELLS}"
            )));
        }
        let cells = (0..n as u64)
            .map(|index| DyadicCell { level: 0, index })
            .collect();
        Ok(Self::assemble(a, b, (b - a) / n as f64, cells, 0))
    }

    fn assemble(lower: f64, upper: f64, base_width: f64, cells: Vec<DyadicCell>, revision: u64) -> Self {
        let widths: Vec<f64> = cells
            .iter()
            .map(|c| base_width * (-(c.level as f64)).exp2())
            .collect();
        let centers = cells
            .iter()
            .zip(&widths)
            .map(|(c, &h)| lower + (c.index as f64 + 0.5) * h)
            .collect();
        Self {
            lower,
            upper,
            base_width,
            cells,
            widths,
            centers,
            revision,
        }
    }

    /// Builds the successor grid from a new list of cells. The list must tile
    /// the domain contiguously.
    pub fn with_cells(&self, cells: Vec<DyadicCell>) -> Result<Self> {
        if cells.len() < MIN_CELLS {
            return Err(Error::Grid(format!("{} cells is below the minimum of {MIN_CELLS}", cells.len())));
        }
        // contiguity in units of the finest level present
        let finest = cells.iter().map(|c| c.level).max().unwrap_or(0);
        let mut cursor: u128 = 0;
        for c in &cells {
            let scale = 1u128 << (finest - c.level);
            if c.index as u128 * scale != cursor {
                return Err(Error::Grid(format!("cell {c:?} does not start where its left neighbour ends")));
            }
            cursor += scale;
        }
        let base_cells = self.base_cell_count() as u128;
        if cursor != base_cells << finest {
            return Err(Error::Grid("cells do not cover the whole domain".into()));
        }
        Ok(Self::assemble(self.lower, self.upper, self.base_width, cells, self.revision + 1))
    }

    fn base_cell_count(&self) -> u64 {
        ((self.upper - self.lower) / self.base_width).round() as u64
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn base_width(&self) -> f64 {
        self.base_width
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn cells(&self) -> &[DyadicCell] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> DyadicCell {
        self.cells[i]
    }

    pub fn level(&self, i: usize) -> u32 {
        self.cells[i].level
    }

    pub fn levels(&self) -> Vec<u32> {
        self.cells.iter().map(|c| c.level).collect()
    }

    pub fn max_level(&self) -> u32 {
        self.cells.iter().map(|c| c.level).max().unwrap_or(0)
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn width(&self, i: usize) -> f64 {
        self.widths[i]
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn center(&self, i: usize) -> f64 {
        self.centers[i]
    }

    pub fn min_width(&self) -> f64 {
        self.base_width * (-(self.max_level() as f64)).exp2()
    }

    /// Interface `x_{i+1/2}` in zero-based numbering: `interface(0) = a`,
    /// `interface(len()) = b`.
    pub fn interface(&self, i: usize) -> f64 {
        if i == self.cells.len() {
            return self.upper;
        }
        let c = self.cells[i];
        self.lower + c.index as f64 * self.widths[i]
    }

    pub fn interfaces(&self) -> Vec<f64> {
        (0..=self.len()).map(|i| self.interface(i)).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.widths.iter().sum()
    }

    pub fn is_uniform(&self) -> bool {
        self.cells.windows(2).all(|w| w[0].level == w[1].level)
    }

    /// Equal widths on cells `i - 1`, `i`, `i + 1` (out-of-range neighbours are ignored).
    pub fn locally_uniform(&self, i: usize) -> bool {
        let l = self.cells[i].level;
        (i == 0 || self.cells[i - 1].level == l) && (i + 1 >= self.len() || self.cells[i + 1].level == l)
    }

    /// Neighbouring levels differ by at most one.
    pub fn is_smooth(&self) -> bool {
        self.cells
            .windows(2)
            .all(|w| w[0].level.abs_diff(w[1].level) <= 1)
    }

    /// Cells `i` and `i + 1` are the two daughters of one mother cell.
    pub fn are_siblings(&self, i: usize) -> bool {
        i + 1 < self.len() && self.cells[i].is_left_sibling_of(self.cells[i + 1])
    }

    /// Splits cell `i` into its two daughters.
    pub fn bisect(&self, i: usize) -> Result<Self> {
        if i >= self.len() {
            return Err(Error::IndexOutOfRange { index: i + 1, max: self.len() });
        }
        let mut cells = Vec::with_capacity(self.len() + 1);
        cells.extend_from_slice(&self.cells[..i]);
        let (left, right) = self.cells[i].daughters();
        cells.push(left);
        cells.push(right);
        cells.extend_from_slice(&self.cells[i + 1..]);
        self.with_cells(cells)
    }

    /// Merges cells `i` and `i + 1`, which must be siblings.
    pub fn merge(&self, i: usize) -> Result<Self> {
        if !self.are_siblings(i) {
            return Err(Error::Grid(format!("cells {i} and {} are not siblings", i + 1)));
        }
        let mut cells = Vec::with_capacity(self.len() - 1);
        cells.extend_from_slice(&self.cells[..i]);
        cells.push(self.cells[i].mother().expect("siblings have a mother"));
        cells.extend_from_slice(&self.cells[i + 2..]);
        self.with_cells(cells)
    }

    /// Cell containing `x` under the convention `C_j = (x_{j-1/2}, x_{j+1/2}]`
    /// (the left end of the domain belongs to the first cell).
    pub fn locate(&self, x: f64) -> Option<usize> {
        if !(self.lower..=self.upper).contains(&x) {
            return None;
        }
        // first interface x_{j+1/2} >= x
        let (mut lo, mut hi) = (0usize, self.len() - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.interface(mid + 1) >= x {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Some(lo)
    }
}

/// Unit directions of a 2D tensor grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    PlusE1,
    MinusE1,
    PlusE2,
    MinusE2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Neighbor {
    Cell(usize),
    Boundary,
}

/// Lexicographic single index `k = i + (j - 1) L` of the one-based pair `(i, j)`.
pub fn flat_index(i: usize, j: usize, l: usize, m: usize) -> Result<usize> {
    if i == 0 || i > l {
        return Err(Error::IndexOutOfRange { index: i, max: l });
    }
    if j == 0 || j > m {
        return Err(Error::IndexOutOfRange { index: j, max: m });
    }
    Ok(i + (j - 1) * l)
}

/// Inverse of [`flat_index`]: `(k - [(k-1)/L] L, [(k-1)/L] + 1)`.
pub fn pair_index(k: usize, l: usize, m: usize) -> Result<(usize, usize)> {
    if k == 0 || k > l * m {
        return Err(Error::IndexOutOfRange { index: k, max: l * m });
    }
    let row = (k - 1) / l;
    Ok((k - row * l, row + 1))
}

/// Flat index of the neighbour of `C_k` in the given direction.
pub fn neighbor_2d(k: usize, direction: Direction, l: usize, m: usize) -> Result<Neighbor> {
    let (i, j) = pair_index(k, l, m)?;
    let target = match direction {
        Direction::PlusE1 => (i < l).then(|| (i + 1, j)),
        Direction::MinusE1 => (i > 1).then(|| (i - 1, j)),
        Direction::PlusE2 => (j < m).then(|| (i, j + 1)),
        Direction::MinusE2 => (j > 1).then(|| (i, j - 1)),
    };
    Ok(match target {
        Some((i, j)) => Neighbor::Cell(flat_index(i, j, l, m)?),
        None => Neighbor::Boundary,
    })
}

/// Uniform `L x M` partition of the square `[a, b]^2`.
#[derive(Clone, Debug)]
pub struct Grid2D {
    lower: f64,
    upper: f64,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

impl Grid2D {
    pub fn new(a: f64, b: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(Error::Grid(format!("domain [{a}, {b}]^2 is empty or not finite")));
        }
        if nx < MIN_CELLS || ny < MIN_CELLS {
            return Err(Error::Grid(format!(
                "{nx}x{ny} cells requested, the stencils need at least {MIN_CELLS} per direction"
            )));
        }
        Ok(Self {
            lower: a,
            upper: b,
            nx,
            ny,
            hx: (b - a) / nx as f64,
            hy: (b - a) / ny as f64,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.lower, self.upper)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn widths(&self) -> (f64, f64) {
        (self.hx, self.hy)
    }

    pub fn cell_volume(&self) -> f64 {
        self.hx * self.hy
    }

    /// Zero-based storage offset of zero-based `(i, j)`.
    #[inline]
    pub fn offset(&self, i: usize, j: usize) -> usize {
        i + j * self.nx
    }

    /// Center of the zero-based cell `(i, j)`.
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.lower + (i as f64 + 0.5) * self.hx,
            self.lower + (j as f64 + 0.5) * self.hy,
        )
    }

    pub fn flat_index(&self, i: usize, j: usize) -> Result<usize> {
        flat_index(i, j, self.nx, self.ny)
    }

    pub fn pair_index(&self, k: usize) -> Result<(usize, usize)> {
        pair_index(k, self.nx, self.ny)
    }

    pub fn neighbor(&self, k: usize, direction: Direction) -> Result<Neighbor> {
        neighbor_2d(k, direction, self.nx, self.ny)
    }
}

/// Per-cell species densities bound to one revision of a grid. Values are
/// stored cell-major: `values[i * n_species + s]`.
#[derive(Clone, Debug, PartialEq)]
pub struct StateField {
    revision: u64,
    n_species: usize,
    values: Vec<f64>,
}

impl StateField {
    pub fn new(grid_revision: u64, n_species: usize, values: Vec<f64>) -> Result<Self> {
        if n_species == 0 || values.len() % n_species != 0 {
            return Err(Error::StateShape {
                got: values.len(),
                expected: n_species.max(1) * (values.len() / n_species.max(1)),
            });
        }
        Ok(Self {
            revision: grid_revision,
            n_species,
            values,
        })
    }

    pub fn zeros(grid_revision: u64, n_cells: usize, n_species: usize) -> Self {
        Self {
            revision: grid_revision,
            n_species,
            values: vec![0.0; n_cells * n_species],
        }
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    pub fn n_species(&self) -> usize {
        self.n_species
    }

    pub fn n_cells(&self) -> usize {
        self.values.len() / self.n_species
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn cell(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_species..(i + 1) * self.n_species]
    }

    pub fn get(&self, i: usize, s: usize) -> f64 {
        self.values[i * self.n_species + s]
    }

    pub fn set(&mut self, i: usize, s: usize, v: f64) {
        self.values[i * self.n_species + s] = v;
    }

    pub fn species(&self, s: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(s).step_by(self.n_species).copied()
    }

    pub fn species_vec(&self, s: usize) -> Vec<f64> {
        self.species(s).collect()
    }

    /// Fails unless the field belongs to `grid` and has one vector per cell.
    pub fn check_bound(&self, grid: &Grid1D) -> Result<()> {
        if self.revision != grid.revision() {
            return Err(Error::StaleState {
                state: self.revision,
                grid: grid.revision(),
            });
        }
        if self.n_cells() != grid.len() {
            return Err(Error::StateShape {
                got: self.values.len(),
                expected: grid.len() * self.n_species,
            });
        }
        Ok(())
    }

    /// `sum_i vol(C_i) w_{i,s}`.
    pub fn mass(&self, s: usize, volumes: &[f64]) -> f64 {
        self.species(s).zip(volumes).map(|(w, h)| w * h).sum()
    }

    /// First `(cell, species)` whose value is below `-NEGATIVITY_TOLERANCE`.
    pub fn first_negative(&self) -> Option<(usize, usize)> {
        self.values
            .iter()
            .position(|&v| v < -NEGATIVITY_TOLERANCE)
            .map(|k| (k / self.n_species, k % self.n_species))
    }
}
