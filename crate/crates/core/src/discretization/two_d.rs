use rayon::prelude::*;

use super::{mc_slope_uniform, one_d::cfl_step, Reconstruction};
use crate::grid::Grid2D;
use crate::model::SpeciesSystem;

/// Semi-discrete operators on a uniform [`Grid2D`]. Storage is cell-major with
/// zero-based cell offset `i + j * nx`. Slopes use the uniform MC formula per
/// direction; a saturation cap, if present, acts on each velocity component.
#[derive(Clone, Debug)]
pub struct Operator2D {
    grid: Grid2D,
    system: SpeciesSystem,
    reconstruction: Reconstruction,
    advected: Vec<usize>,
}

/// Interface velocities in both directions. `x[i + j * (nx + 1)]` sits between
/// cells `(i - 1, j)` and `(i, j)`; `y[i + j * nx]` between `(i, j - 1)` and `(i, j)`.
#[derive(Clone, Debug)]
pub struct Velocities2D {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Interface derivative along a line of `len` values read through `at`:
/// four-point uniform stencil where it fits, two-point difference otherwise.
#[inline]
fn interface_derivative(at: impl Fn(usize) -> f64, k: usize, len: usize, h: f64) -> f64 {
    if k >= 2 && k + 1 < len {
        (at(k - 2) - 27.0 * at(k - 1) + 27.0 * at(k) - at(k + 1)) / (24.0 * h)
    } else {
        (at(k) - at(k - 1)) / h
    }
}

impl Operator2D {
    pub fn new(grid: Grid2D, system: SpeciesSystem) -> Self {
        Self {
            advected: system.advected_species(),
            grid,
            system,
            reconstruction: Reconstruction::Limited,
        }
    }

    pub fn with_reconstruction(mut self, reconstruction: Reconstruction) -> Self {
        self.reconstruction = reconstruction;
        self
    }

    pub fn grid(&self) -> &Grid2D {
        &self.grid
    }

    pub fn system(&self) -> &SpeciesSystem {
        &self.system
    }

    pub fn n_species(&self) -> usize {
        self.system.n_species()
    }

    pub fn dim(&self) -> usize {
        self.grid.len() * self.n_species()
    }

    pub fn velocities(&self, w: &[f64], s: usize) -> Velocities2D {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let (hx, hy) = self.grid.widths();
        let n = self.n_species();
        let chi: Vec<(usize, f64)> = self
            .system
            .taxis_row(s)
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, x)| *x != 0.0)
            .collect();
        let sys = &self.system;

        let mut x = vec![0.0; (nx + 1) * ny];
        x.par_chunks_mut(nx + 1).enumerate().for_each(|(j, row)| {
            for (k, out) in row.iter_mut().enumerate().take(nx).skip(1) {
                let raw: f64 = chi
                    .iter()
                    .map(|&(r, c)| c * interface_derivative(|i| w[(i + j * nx) * n + r], k, nx, hx))
                    .sum();
                *out = sys.limit_velocity(raw);
            }
        });
        let mut y = vec![0.0; nx * (ny + 1)];
        y.par_chunks_mut(nx).enumerate().for_each(|(k, row)| {
            if k == 0 || k == ny {
                return;
            }
            for (i, out) in row.iter_mut().enumerate() {
                let raw: f64 = chi
                    .iter()
                    .map(|&(r, c)| c * interface_derivative(|j| w[(i + j * nx) * n + r], k, ny, hy))
                    .sum();
                *out = sys.limit_velocity(raw);
            }
        });
        Velocities2D { x, y }
    }

    fn slopes(&self, w: &[f64], s: usize) -> (Vec<f64>, Vec<f64>) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let (hx, hy) = self.grid.widths();
        let n = self.n_species();
        let mut sx = vec![0.0; nx * ny];
        let mut sy = vec![0.0; nx * ny];
        if self.reconstruction == Reconstruction::FirstOrder {
            return (sx, sy);
        }
        let val = |i: usize, j: usize| w[(i + j * nx) * n + s];
        sx.par_chunks_mut(nx)
            .zip(sy.par_chunks_mut(nx))
            .enumerate()
            .for_each(|(j, (rx, ry))| {
                for i in 0..nx {
                    if i > 0 && i + 1 < nx {
                        rx[i] = mc_slope_uniform(val(i - 1, j), val(i, j), val(i + 1, j), hx);
                    }
                    if j > 0 && j + 1 < ny {
                        ry[i] = mc_slope_uniform(val(i, j - 1), val(i, j), val(i, j + 1), hy);
                    }
                }
            });
        (sx, sy)
    }

    pub fn taxis(&self, w: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let (hx, hy) = self.grid.widths();
        let n = self.n_species();
        for &s in &self.advected {
            let p = self.velocities(w, s);
            let (sx, sy) = self.slopes(w, s);
            let val = |o: usize| w[o * n + s];
            let flux_x = |i: usize, j: usize| -> f64 {
                if i == 0 || i == nx {
                    return 0.0;
                }
                let pk = p.x[i + j * (nx + 1)];
                let (l, r) = (i - 1 + j * nx, i + j * nx);
                if pk >= 0.0 {
                    pk * (val(l) + 0.5 * hx * sx[l])
                } else {
                    pk * (val(r) - 0.5 * hx * sx[r])
                }
            };
            let flux_y = |i: usize, j: usize| -> f64 {
                if j == 0 || j == ny {
                    return 0.0;
                }
                let pk = p.y[i + j * nx];
                let (b, t) = (i + (j - 1) * nx, i + j * nx);
                if pk >= 0.0 {
                    pk * (val(b) + 0.5 * hy * sy[b])
                } else {
                    pk * (val(t) - 0.5 * hy * sy[t])
                }
            };
            out.par_chunks_mut(nx * n).enumerate().for_each(|(j, row)| {
                for i in 0..nx {
                    row[i * n + s] = -(flux_x(i + 1, j) - flux_x(i, j)) / hx - (flux_y(i, j + 1) - flux_y(i, j)) / hy;
                }
            });
        }
    }

    /// Five-point Neumann Laplacian of a contiguous scalar field.
    pub fn laplacian(&self, x: &[f64], out: &mut [f64]) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let (hx, hy) = self.grid.widths();
        let (ax, ay) = (1.0 / (hx * hx), 1.0 / (hy * hy));
        out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| {
            for (i, o) in row.iter_mut().enumerate() {
                let c = x[i + j * nx];
                let mut acc = 0.0;
                if i > 0 {
                    acc += ax * (x[i - 1 + j * nx] - c);
                }
                if i + 1 < nx {
                    acc += ax * (x[i + 1 + j * nx] - c);
                }
                if j > 0 {
                    acc += ay * (x[i + (j - 1) * nx] - c);
                }
                if j + 1 < ny {
                    acc += ay * (x[i + (j + 1) * nx] - c);
                }
                *o = acc;
            }
        });
    }

    /// Diagonal entry of [`Self::laplacian`] at zero-based offset `o`.
    pub fn laplacian_diagonal(&self, o: usize) -> f64 {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let (hx, hy) = self.grid.widths();
        let (i, j) = (o % nx, o / nx);
        let faces_x = (i > 0) as u8 + (i + 1 < nx) as u8;
        let faces_y = (j > 0) as u8 + (j + 1 < ny) as u8;
        -(faces_x as f64) / (hx * hx) - (faces_y as f64) / (hy * hy)
    }

    pub fn diffusion(&self, w: &[f64], out: &mut [f64]) {
        let n = self.n_species();
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let (hx, hy) = self.grid.widths();
        let (ax, ay) = (1.0 / (hx * hx), 1.0 / (hy * hy));
        let d = self.system.diffusivities();
        out.par_chunks_mut(nx * n).enumerate().for_each(|(j, row)| {
            for i in 0..nx {
                let o = i + j * nx;
                for s in 0..n {
                    if d[s] == 0.0 {
                        row[i * n + s] = 0.0;
                        continue;
                    }
                    let c = w[o * n + s];
                    let mut acc = 0.0;
                    if i > 0 {
                        acc += ax * (w[(o - 1) * n + s] - c);
                    }
                    if i + 1 < nx {
                        acc += ax * (w[(o + 1) * n + s] - c);
                    }
                    if j > 0 {
                        acc += ay * (w[(o - nx) * n + s] - c);
                    }
                    if j + 1 < ny {
                        acc += ay * (w[(o + nx) * n + s] - c);
                    }
                    row[i * n + s] = d[s] * acc;
                }
            }
        });
    }

    pub fn reaction(&self, w: &[f64], out: &mut [f64]) {
        let n = self.n_species();
        let sys = &self.system;
        out.par_chunks_mut(n)
            .zip(w.par_chunks(n))
            .for_each(|(o, x)| sys.react(x, o));
    }

    pub fn max_courant_rate(&self, w: &[f64]) -> f64 {
        let (hx, hy) = self.grid.widths();
        let mut rate: f64 = 0.0;
        for &s in &self.advected {
            let p = self.velocities(w, s);
            let mx = p.x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let my = p.y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            rate = rate.max(mx / hx).max(my / hy);
        }
        rate
    }

    pub fn cfl_timestep(&self, w: &[f64], cfl: f64, tau_max: f64) -> f64 {
        cfl_step(self.max_courant_rate(w), cfl, tau_max)
    }

    pub fn explicit_diffusion_limit(&self) -> f64 {
        let d = self.system.max_diffusivity();
        let (hx, hy) = self.grid.widths();
        if d == 0.0 {
            f64::INFINITY
        } else {
            1.0 / (2.0 * d * (1.0 / (hx * hx) + 1.0 / (hy * hy)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Reaction, UpaParameters};

    #[test]
    fn taxis_conserves_mass_and_constants_are_steady() {
        let g = Grid2D::new(0.0, 1.0, 12, 9).unwrap();
        let op = Operator2D::new(g.clone(), SpeciesSystem::upa(&UpaParameters::preset_p()).unwrap());
        let mut w = vec![0.0; op.dim()];
        for j in 0..9 {
            for i in 0..12 {
                let (x, y) = g.center(i, j);
                let o = (i + j * 12) * 5;
                w[o] = (-((x - 0.4).powi(2) + (y - 0.6).powi(2)) / 0.02).exp();
                w[o + 1] = 1.0 - 0.5 * w[o];
                w[o + 2] = 0.5 * w[o] + 0.1 * x;
                w[o + 3] = 0.05 * w[o] + 0.2 * y * y;
            }
        }
        let mut out = vec![0.0; op.dim()];
        op.taxis(&w, &mut out);
        let mass: f64 = out.iter().step_by(5).sum();
        assert!(mass.abs() < 1e-12);
        op.diffusion(&w, &mut out);
        for s in 0..5 {
            let m: f64 = out.iter().skip(s).step_by(5).sum();
            assert!(m.abs() < 1e-10, "species {s}: {m}");
        }
        let flat = vec![0.3; op.dim()];
        op.taxis(&flat, &mut out);
        assert!(out.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn laplacian_matches_diffusion() {
        let g = Grid2D::new(0.0, 2.0, 7, 6).unwrap();
        let sys = SpeciesSystem::new(vec!["a".into()], vec![1.0], vec![0.0], Reaction::None, None).unwrap();
        let op = Operator2D::new(g, sys);
        let x: Vec<f64> = (0..42).map(|k| ((k * 7919) % 13) as f64).collect();
        let (mut a, mut b) = (vec![0.0; 42], vec![0.0; 42]);
        op.laplacian(&x, &mut a);
        op.diffusion(&x, &mut b);
        assert_eq!(a, b);
        let mut e = vec![0.0; 42];
        e[10] = 1.0;
        op.laplacian(&e, &mut a);
        assert!((a[10] - op.laplacian_diagonal(10)).abs() < 1e-12);
    }
}
