use super::{diffusion_coeffs, velocity_coeffs, Reconstruction, SlopeCoeffs, DEFAULT_TAU_MAX};
use crate::error::Result;
use crate::grid::{Grid1D, StateField};
use crate::model::SpeciesSystem;

/// Sparse row of a cell-local stencil: coefficients for cells `first..first + len`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StencilRow<const K: usize> {
    pub first: usize,
    pub len: usize,
    pub coeffs: [f64; K],
}

impl<const K: usize> StencilRow<K> {
    const EMPTY: Self = Self {
        first: 0,
        len: 0,
        coeffs: [0.0; K],
    };

    #[inline]
    fn apply(&self, w: &[f64], n: usize, s: usize) -> f64 {
        let mut acc = 0.0;
        for t in 0..self.len {
            acc += self.coeffs[t] * w[(self.first + t) * n + s];
        }
        acc
    }
}

/// Semi-discrete operators of a species system on one [`Grid1D`]. All stencils
/// are precomputed at construction; the operator is immutable afterwards.
#[derive(Clone, Debug)]
pub struct Operator1D {
    grid: Grid1D,
    system: SpeciesSystem,
    reconstruction: Reconstruction,
    advected: Vec<usize>,
    diffusion: Vec<StencilRow<5>>,
    /// One row per interface `0..=N`; the two boundary rows are empty.
    velocity: Vec<StencilRow<4>>,
    /// Two-point interface differences, same layout as `velocity`.
    velocity_low: Vec<StencilRow<4>>,
    slopes: Vec<Option<SlopeCoeffs>>,
}

/// The three operator evaluations of the semi-discrete system, stored cell-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RhsParts {
    pub taxis: Vec<f64>,
    pub diffusion: Vec<f64>,
    pub reaction: Vec<f64>,
}

impl RhsParts {
    pub fn total(&self) -> Vec<f64> {
        self.taxis
            .iter()
            .zip(&self.diffusion)
            .zip(&self.reaction)
            .map(|((a, d), r)| a + d + r)
            .collect()
    }
}

impl Operator1D {
    pub fn new(grid: Grid1D, system: SpeciesSystem) -> Result<Self> {
        let n_cells = grid.len();
        let h = grid.widths();
        let level = |i: usize| grid.level(i);

        let mut diffusion = Vec::with_capacity(n_cells);
        for i in 0..n_cells {
            let interior = i >= 1 && i + 1 < n_cells;
            let row = if interior && level(i - 1) == level(i) && level(i + 1) == level(i) {
                let inv = 1.0 / (h[i] * h[i]);
                StencilRow {
                    first: i - 1,
                    len: 3,
                    coeffs: [inv, -2.0 * inv, inv, 0.0, 0.0],
                }
            } else if i >= 2 && i + 2 < n_cells {
                let st = diffusion_coeffs([h[i - 2], h[i - 1], h[i], h[i + 1], h[i + 2]])?;
                StencilRow {
                    first: i - 2,
                    len: 5,
                    coeffs: st.alpha,
                }
            } else {
                // conservative flux form, zero flux through the boundary
                let gl = if i > 0 { 2.0 / (h[i] * (h[i - 1] + h[i])) } else { 0.0 };
                let gr = if i + 1 < n_cells { 2.0 / (h[i] * (h[i] + h[i + 1])) } else { 0.0 };
                let (first, coeffs, len) = match (i > 0, i + 1 < n_cells) {
                    (true, true) => (i - 1, [gl, -(gl + gr), gr, 0.0, 0.0], 3),
                    (false, true) => (i, [-gr, gr, 0.0, 0.0, 0.0], 2),
                    (true, false) => (i - 1, [gl, -gl, 0.0, 0.0, 0.0], 2),
                    (false, false) => (i, [0.0; 5], 1),
                };
                StencilRow { first, len, coeffs }
            };
            diffusion.push(row);
        }

        let mut velocity = vec![StencilRow::EMPTY; n_cells + 1];
        let mut velocity_low = vec![StencilRow::EMPTY; n_cells + 1];
        for k in 1..n_cells {
            let d = 2.0 / (h[k - 1] + h[k]);
            let two_point = StencilRow {
                first: k - 1,
                len: 2,
                coeffs: [-d, d, 0.0, 0.0],
            };
            velocity_low[k] = two_point;
            velocity[k] = if k >= 2 && k + 1 < n_cells {
                let widths = [h[k - 2], h[k - 1], h[k], h[k + 1]];
                let coeffs = if widths.iter().all(|&x| x == widths[0]) {
                    [1.0, -27.0, 27.0, -1.0].map(|c| c / (24.0 * widths[0]))
                } else {
                    velocity_coeffs(widths)?.beta
                };
                StencilRow {
                    first: k - 2,
                    len: 4,
                    coeffs,
                }
            } else {
                two_point
            };
        }

        let slopes = (0..n_cells)
            .map(|i| {
                if i == 0 || i + 1 == n_cells {
                    None
                } else if level(i - 1) == level(i) && level(i + 1) == level(i) {
                    Some(SlopeCoeffs::uniform(h[i]))
                } else {
                    Some(SlopeCoeffs::nonuniform(h[i - 1], h[i], h[i + 1]))
                }
            })
            .collect();

        Ok(Self {
            advected: system.advected_species(),
            grid,
            system,
            reconstruction: Reconstruction::Limited,
            diffusion,
            velocity,
            velocity_low,
            slopes,
        })
    }

    pub fn with_reconstruction(mut self, reconstruction: Reconstruction) -> Self {
        self.reconstruction = reconstruction;
        self
    }

    pub fn reconstruction(&self) -> Reconstruction {
        self.reconstruction
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn system(&self) -> &SpeciesSystem {
        &self.system
    }

    pub fn n_cells(&self) -> usize {
        self.grid.len()
    }

    pub fn n_species(&self) -> usize {
        self.system.n_species()
    }

    /// Length of a flattened state vector.
    pub fn dim(&self) -> usize {
        self.n_cells() * self.n_species()
    }

    pub fn diffusion_rows(&self) -> &[StencilRow<5>] {
        &self.diffusion
    }

    pub fn velocity_rows(&self) -> &[StencilRow<4>] {
        &self.velocity
    }

    fn raw_velocities(&self, rows: &[StencilRow<4>], w: &[f64], s: usize) -> Vec<f64> {
        let n = self.n_species();
        let chi = self.system.taxis_row(s);
        rows.iter()
            .map(|row| {
                if row.len == 0 {
                    return 0.0;
                }
                let raw: f64 = chi
                    .iter()
                    .enumerate()
                    .filter(|(_, &x)| x != 0.0)
                    .map(|(r, &x)| x * row.apply(w, n, r))
                    .sum();
                self.system.limit_velocity(raw)
            })
            .collect()
    }

    /// Characteristic velocities `P_{k}` of species `s` at interfaces `k = 0..=N`.
    pub fn velocities(&self, w: &[f64], s: usize) -> Vec<f64> {
        self.raw_velocities(&self.velocity, w, s)
    }

    /// Velocities from two-point interface differences.
    pub fn low_order_velocities(&self, w: &[f64], s: usize) -> Vec<f64> {
        self.raw_velocities(&self.velocity_low, w, s)
    }

    /// Limited slopes of species `s` (zero in boundary cells).
    pub fn slopes(&self, w: &[f64], s: usize) -> Vec<f64> {
        let n = self.n_species();
        if self.reconstruction == Reconstruction::FirstOrder {
            return vec![0.0; self.n_cells()];
        }
        self.slopes
            .iter()
            .enumerate()
            .map(|(i, coeffs)| match coeffs {
                Some(c) => c.apply(w[(i - 1) * n + s], w[i * n + s], w[(i + 1) * n + s]),
                None => 0.0,
            })
            .collect()
    }

    /// Upwind fluxes `H_k` of species `s` at interfaces `k = 0..=N`.
    pub fn fluxes(&self, w: &[f64], s: usize) -> Vec<f64> {
        let n = self.n_species();
        let h = self.grid.widths();
        let p = self.velocities(w, s);
        let slope = self.slopes(w, s);
        let mut flux = vec![0.0; self.n_cells() + 1];
        for k in 1..self.n_cells() {
            flux[k] = if p[k] >= 0.0 {
                p[k] * (w[(k - 1) * n + s] + 0.5 * h[k - 1] * slope[k - 1])
            } else {
                p[k] * (w[k * n + s] - 0.5 * h[k] * slope[k])
            };
        }
        flux
    }

    /// Taxis operator: `-(H_{i+1/2} - H_{i-1/2}) / h_i` for advected species, 0 otherwise.
    pub fn taxis(&self, w: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let n = self.n_species();
        let h = self.grid.widths();
        for &s in &self.advected {
            let flux = self.fluxes(w, s);
            for i in 0..self.n_cells() {
                out[i * n + s] = -(flux[i + 1] - flux[i]) / h[i];
            }
        }
    }

    pub fn diffusion(&self, w: &[f64], out: &mut [f64]) {
        let n = self.n_species();
        let d = self.system.diffusivities();
        for (i, row) in self.diffusion.iter().enumerate() {
            for s in 0..n {
                out[i * n + s] = if d[s] == 0.0 { 0.0 } else { d[s] * row.apply(w, n, s) };
            }
        }
    }

    pub fn reaction(&self, w: &[f64], out: &mut [f64]) {
        let n = self.n_species();
        for (wc, oc) in w.chunks_exact(n).zip(out.chunks_exact_mut(n)) {
            self.system.react(wc, oc);
        }
    }

    pub fn rhs_parts(&self, state: &StateField) -> Result<RhsParts> {
        state.check_bound(&self.grid)?;
        let w = state.values();
        let mut parts = RhsParts {
            taxis: vec![0.0; w.len()],
            diffusion: vec![0.0; w.len()],
            reaction: vec![0.0; w.len()],
        };
        self.taxis(w, &mut parts.taxis);
        self.diffusion(w, &mut parts.diffusion);
        self.reaction(w, &mut parts.reaction);
        Ok(parts)
    }

    /// `max |P_k| / h` over interfaces, with `h` the smaller adjacent width.
    pub fn max_courant_rate(&self, w: &[f64]) -> f64 {
        let h = self.grid.widths();
        let mut rate: f64 = 0.0;
        for &s in &self.advected {
            let p = self.velocities(w, s);
            for k in 1..self.n_cells() {
                rate = rate.max(p[k].abs() / h[k - 1].min(h[k]));
            }
        }
        rate
    }

    /// Time step for which the largest Courant number equals `cfl`, capped by `tau_max`.
    pub fn cfl_timestep(&self, w: &[f64], cfl: f64, tau_max: f64) -> f64 {
        cfl_step(self.max_courant_rate(w), cfl, tau_max)
    }

    /// Forward-Euler diffusion limit `min h^2 / (2 max D)`.
    pub fn explicit_diffusion_limit(&self) -> f64 {
        let d = self.system.max_diffusivity();
        if d == 0.0 {
            f64::INFINITY
        } else {
            self.grid.min_width().powi(2) / (2.0 * d)
        }
    }
}

pub(crate) fn cfl_step(rate: f64, cfl: f64, tau_max: f64) -> f64 {
    let tau_max = if tau_max > 0.0 { tau_max } else { DEFAULT_TAU_MAX };
    if rate > 0.0 {
        (cfl / rate).min(tau_max)
    } else {
        tau_max
    }
}
