//! Semi-discrete problems seen by the time steppers.

use crate::discretization::{Operator1D, Operator2D};
use crate::error::{Error, Result};
use crate::linear_solver::{
    assemble_shifted_operator, solve_dense_in_place, BandedLu, DiffusionSolver1D, DiffusionSolver2D,
    ShiftedJacobian,
};

/// Solver for a fixed shifted system `(I - sigma J) x = b`, overwriting `b`.
pub trait ShiftedSolver {
    fn solve(&self, x: &mut [f64]) -> Result<()>;
}

/// Split right-hand side `A + D + R` of a cell-major ODE system.
pub trait SemiDiscrete {
    fn dim(&self) -> usize;

    /// Species per cell; `dim / n_species` cells.
    fn n_species(&self) -> usize;

    fn taxis(&self, w: &[f64], out: &mut [f64]);
    fn diffusion(&self, w: &[f64], out: &mut [f64]);
    fn reaction(&self, w: &[f64], out: &mut [f64]);

    /// Row-major reaction Jacobian of one cell's values.
    fn reaction_jacobian(&self, cell: &[f64], jac: &mut [f64]);

    /// Solver for `I - sigma D`.
    fn diffusion_solver(&self, sigma: f64) -> Result<Box<dyn ShiftedSolver + '_>>;

    /// Solver for `I - sigma (D + J_R(w))`.
    fn jacobian_solver(&self, sigma: f64, w: &[f64]) -> Result<Box<dyn ShiftedSolver + '_>>;

    /// Largest `|P| / h` over all interfaces.
    fn courant_rate(&self, w: &[f64]) -> f64;

    /// Forward-Euler diffusion bound on the step.
    fn explicit_diffusion_limit(&self) -> f64;

    /// Volume-weighted sum of absolute values.
    fn l1_norm(&self, w: &[f64]) -> f64;

    /// `(D + J_R(w)) v`.
    fn jacobian_apply(&self, w: &[f64], v: &[f64], out: &mut [f64]) {
        let n = self.n_species();
        self.diffusion(v, out);
        let mut jac = vec![0.0; n * n];
        for ((wc, vc), oc) in w.chunks_exact(n).zip(v.chunks_exact(n)).zip(out.chunks_exact_mut(n)) {
            self.reaction_jacobian(wc, &mut jac);
            for r in 0..n {
                oc[r] += (0..n).map(|s| jac[r * n + s] * vc[s]).sum::<f64>();
            }
        }
    }
}

struct Banded1D(DiffusionSolver1D);

impl ShiftedSolver for Banded1D {
    fn solve(&self, x: &mut [f64]) -> Result<()> {
        self.0.solve_in_place(x);
        Ok(())
    }
}

struct Coupled1D(BandedLu);

impl ShiftedSolver for Coupled1D {
    fn solve(&self, x: &mut [f64]) -> Result<()> {
        self.0.solve_in_place(x);
        Ok(())
    }
}

impl SemiDiscrete for Operator1D {
    fn dim(&self) -> usize {
        Operator1D::dim(self)
    }

    fn n_species(&self) -> usize {
        Operator1D::n_species(self)
    }

    fn taxis(&self, w: &[f64], out: &mut [f64]) {
        Operator1D::taxis(self, w, out)
    }

    fn diffusion(&self, w: &[f64], out: &mut [f64]) {
        Operator1D::diffusion(self, w, out)
    }

    fn reaction(&self, w: &[f64], out: &mut [f64]) {
        Operator1D::reaction(self, w, out)
    }

    fn reaction_jacobian(&self, cell: &[f64], jac: &mut [f64]) {
        self.system().react_jacobian(cell, jac)
    }

    fn diffusion_solver(&self, sigma: f64) -> Result<Box<dyn ShiftedSolver + '_>> {
        Ok(Box::new(Banded1D(DiffusionSolver1D::new(self, sigma)?)))
    }

    fn jacobian_solver(&self, sigma: f64, w: &[f64]) -> Result<Box<dyn ShiftedSolver + '_>> {
        let m = assemble_shifted_operator(self, sigma, ShiftedJacobian::DiffusionReaction, w);
        Ok(Box::new(Coupled1D(m.factorize()?)))
    }

    fn courant_rate(&self, w: &[f64]) -> f64 {
        self.max_courant_rate(w)
    }

    fn explicit_diffusion_limit(&self) -> f64 {
        Operator1D::explicit_diffusion_limit(self)
    }

    fn l1_norm(&self, w: &[f64]) -> f64 {
        let n = Operator1D::n_species(self);
        self.grid()
            .widths()
            .iter()
            .zip(w.chunks_exact(n))
            .map(|(h, c)| h * c.iter().map(|x| x.abs()).sum::<f64>())
            .sum()
    }
}

struct Cg2D<'a>(DiffusionSolver2D<'a>);

impl ShiftedSolver for Cg2D<'_> {
    fn solve(&self, x: &mut [f64]) -> Result<()> {
        self.0.solve_in_place(x)
    }
}

impl SemiDiscrete for Operator2D {
    fn dim(&self) -> usize {
        Operator2D::dim(self)
    }

    fn n_species(&self) -> usize {
        Operator2D::n_species(self)
    }

    fn taxis(&self, w: &[f64], out: &mut [f64]) {
        Operator2D::taxis(self, w, out)
    }

    fn diffusion(&self, w: &[f64], out: &mut [f64]) {
        Operator2D::diffusion(self, w, out)
    }

    fn reaction(&self, w: &[f64], out: &mut [f64]) {
        Operator2D::reaction(self, w, out)
    }

    fn reaction_jacobian(&self, cell: &[f64], jac: &mut [f64]) {
        self.system().react_jacobian(cell, jac)
    }

    fn diffusion_solver(&self, sigma: f64) -> Result<Box<dyn ShiftedSolver + '_>> {
        Ok(Box::new(Cg2D(DiffusionSolver2D::new(self, sigma))))
    }

    fn jacobian_solver(&self, _sigma: f64, _w: &[f64]) -> Result<Box<dyn ShiftedSolver + '_>> {
        Err(Error::Unsupported(
            "coupled diffusion-reaction solves are only available in 1D".into(),
        ))
    }

    fn courant_rate(&self, w: &[f64]) -> f64 {
        self.max_courant_rate(w)
    }

    fn explicit_diffusion_limit(&self) -> f64 {
        Operator2D::explicit_diffusion_limit(self)
    }

    fn l1_norm(&self, w: &[f64]) -> f64 {
        self.grid().cell_volume() * w.iter().map(|x| x.abs()).sum::<f64>()
    }
}

/// Linear system `w' = (T + D + R) w` with dense row-major matrices, treated
/// as one cell holding `dim` species. Used to measure integrator orders.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseLinearProblem {
    dim: usize,
    pub taxis: Vec<f64>,
    pub diffusion: Vec<f64>,
    pub reaction: Vec<f64>,
}

impl DenseLinearProblem {
    pub fn new(dim: usize, taxis: Vec<f64>, diffusion: Vec<f64>, reaction: Vec<f64>) -> Result<Self> {
        for m in [&taxis, &diffusion, &reaction] {
            if m.len() != dim * dim {
                return Err(Error::StateShape {
                    got: m.len(),
                    expected: dim * dim,
                });
            }
        }
        Ok(Self {
            dim,
            taxis,
            diffusion,
            reaction,
        })
    }

    /// Scalar problem `y' = (t + d + r) y`.
    pub fn scalar(t: f64, d: f64, r: f64) -> Self {
        Self {
            dim: 1,
            taxis: vec![t],
            diffusion: vec![d],
            reaction: vec![r],
        }
    }

    fn apply(&self, m: &[f64], w: &[f64], out: &mut [f64]) {
        let n = self.dim;
        for (r, o) in out.iter_mut().enumerate() {
            *o = (0..n).map(|s| m[r * n + s] * w[s]).sum();
        }
    }

    fn shifted(&self, sigma: f64, with_reaction: bool) -> DenseShifted {
        let n = self.dim;
        let mut a = vec![0.0; n * n];
        for r in 0..n {
            for s in 0..n {
                let mut j = self.diffusion[r * n + s];
                if with_reaction {
                    j += self.reaction[r * n + s];
                }
                a[r * n + s] = f64::from(u8::from(r == s)) - sigma * j;
            }
        }
        DenseShifted { n, a }
    }
}

struct DenseShifted {
    n: usize,
    a: Vec<f64>,
}

impl ShiftedSolver for DenseShifted {
    fn solve(&self, x: &mut [f64]) -> Result<()> {
        let mut a = self.a.clone();
        solve_dense_in_place(self.n, &mut a, x)
    }
}

impl SemiDiscrete for DenseLinearProblem {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_species(&self) -> usize {
        self.dim
    }

    fn taxis(&self, w: &[f64], out: &mut [f64]) {
        self.apply(&self.taxis, w, out)
    }

    fn diffusion(&self, w: &[f64], out: &mut [f64]) {
        self.apply(&self.diffusion, w, out)
    }

    fn reaction(&self, w: &[f64], out: &mut [f64]) {
        self.apply(&self.reaction, w, out)
    }

    fn reaction_jacobian(&self, _cell: &[f64], jac: &mut [f64]) {
        jac.copy_from_slice(&self.reaction)
    }

    fn diffusion_solver(&self, sigma: f64) -> Result<Box<dyn ShiftedSolver + '_>> {
        Ok(Box::new(self.shifted(sigma, false)))
    }

    fn jacobian_solver(&self, sigma: f64, _w: &[f64]) -> Result<Box<dyn ShiftedSolver + '_>> {
        Ok(Box::new(self.shifted(sigma, true)))
    }

    fn courant_rate(&self, _w: &[f64]) -> f64 {
        0.0
    }

    fn explicit_diffusion_limit(&self) -> f64 {
        f64::INFINITY
    }

    fn l1_norm(&self, w: &[f64]) -> f64 {
        w.iter().map(|x| x.abs()).sum()
    }
}
