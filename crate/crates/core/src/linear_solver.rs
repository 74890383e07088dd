//! Linear algebra for implicit stages.
//!
//! In 1D every implicit operator is banded: the diffusion stencils reach two
//! cells in each direction, and the reaction Jacobian couples species within a
//! cell. Systems are factorized once with partial pivoting and reused for all
//! stages that share the same shift. In 2D the diffusion systems are symmetric
//! positive definite and are solved by Jacobi-preconditioned conjugate
//! gradients.

use crate::discretization::{Operator1D, Operator2D};
use crate::error::{Error, Result};

/// Residual tolerance of [`BandedMatrix::solve_checked`], relative to `1 + ||b||_inf`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Factorizations whose pivot ratio exceeds this are reported as unusable.
pub const CONDITION_LIMIT: f64 = 1e14;

/// Square banded matrix with `kl` sub- and `ku` super-diagonals.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major band: entry `(i, j)` at `i * (kl + ku + 1) + (j + kl - i)`.
    data: Vec<f64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    pub fn identity(n: usize, kl: usize, ku: usize) -> Self {
        let mut m = Self::zeros(n, kl, ku);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i < self.n && j < self.n && self.in_band(i, j) {
            self.data[i * (self.kl + self.ku + 1) + (j + self.kl - i)]
        } else {
            0.0
        }
    }

    /// Panics if `(i, j)` lies outside the band.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) is outside the band");
        self.data[i * (self.kl + self.ku + 1) + (j + self.kl - i)] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "({i}, {j}) is outside the band");
        self.data[i * (self.kl + self.ku + 1) + (j + self.kl - i)] += v;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let w = self.kl + self.ku + 1;
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let row = &self.data[i * w..(i + 1) * w];
            y[i] = (lo..=hi).map(|j| row[j + self.kl - i] * x[j]).sum();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// LU factorization with partial pivoting.
    pub fn factorize(&self) -> Result<BandedLu> {
        BandedLu::new(self)
    }

    /// Factorizes, solves and checks the residual.
    pub fn solve_checked(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let lu = self.factorize()?;
        let mut x = rhs.to_vec();
        lu.solve_in_place(&mut x);
        let mut r = vec![0.0; self.n];
        self.matvec(&x, &mut r);
        let residual = r.iter().zip(rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let scale = 1.0 + rhs.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        if residual > RESIDUAL_TOLERANCE * scale || !residual.is_finite() {
            return Err(Error::SolverNotConverged {
                iterations: 1,
                residual,
            });
        }
        Ok(x)
    }
}

/// LU factors in LAPACK `gbtrf` layout (column-major band with room for fill-in).
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    fn new(m: &BandedMatrix) -> Result<Self> {
        let (n, kl, ku) = (m.n, m.kl, m.ku);
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n.saturating_sub(1)) {
                ab[kv + i - j + j * ldab] = m.get(i, j);
            }
        }
        if !m.is_finite() {
            return Err(Error::Singular("matrix has non-finite entries".into()));
        }
        let idx = |i: usize, j: usize| kv + i - j + j * ldab;
        let mut pivots = vec![0; n];
        let mut ju = 0usize;
        let (mut min_pivot, mut max_pivot) = (f64::INFINITY, 0.0f64);
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = ab[idx(j, j)].abs();
            for t in 1..=km {
                let v = ab[idx(j + t, j)].abs();
                if v > best {
                    best = v;
                    jp = t;
                }
            }
            pivots[j] = j + jp;
            if best == 0.0 {
                return Err(Error::Singular(format!("zero pivot in column {j}")));
            }
            min_pivot = min_pivot.min(best);
            max_pivot = max_pivot.max(best);
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    ab.swap(idx(j, c), idx(j + jp, c));
                }
            }
            let piv = ab[idx(j, j)];
            for t in 1..=km {
                ab[idx(j + t, j)] /= piv;
            }
            for c in j + 1..=ju {
                let f = ab[idx(j, c)];
                if f != 0.0 {
                    for t in 1..=km {
                        let l = ab[idx(j + t, j)];
                        ab[idx(j + t, c)] -= l * f;
                    }
                }
            }
        }
        if n > 0 && max_pivot / min_pivot > CONDITION_LIMIT {
            return Err(Error::Singular(format!(
                "pivot ratio {:e} exceeds {CONDITION_LIMIT:e}",
                max_pivot / min_pivot
            )));
        }
        Ok(Self {
            n,
            kl,
            ku,
            ldab,
            ab,
            pivots,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl) = (self.n, self.kl);
        let kv = self.kl + self.ku;
        let ldab = self.ldab;
        let ab = &self.ab;
        for j in 0..n {
            let p = self.pivots[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                for t in 1..=km {
                    b[j + t] -= ab[kv + t + j * ldab] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= ab[kv + j * ldab];
            let bj = b[j];
            if bj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    b[i] -= ab[kv + i - j + j * ldab] * bj;
                }
            }
        }
    }
}

/// Which Jacobian enters a shifted operator `I - sigma J`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ShiftedJacobian {
    /// Diffusion only; decouples by species and does not depend on the state.
    Diffusion,
    /// Diffusion plus the reaction Jacobian at a given state.
    DiffusionReaction,
}

/// `I - sigma D_s L_h` for species `s` in 1D.
pub fn assemble_diffusion_1d(op: &Operator1D, s: usize, sigma: f64) -> BandedMatrix {
    let n_cells = op.n_cells();
    let d = op.system().diffusivities()[s];
    let mut m = BandedMatrix::identity(n_cells, 2, 2);
    if d == 0.0 || sigma == 0.0 {
        return m;
    }
    for (i, row) in op.diffusion_rows().iter().enumerate() {
        for t in 0..row.len {
            m.add(i, row.first + t, -sigma * d * row.coeffs[t]);
        }
    }
    m
}

/// `I - sigma J` on the full cell-major state vector.
pub fn assemble_shifted_operator(
    op: &Operator1D,
    sigma: f64,
    which: ShiftedJacobian,
    state: &[f64],
) -> BandedMatrix {
    let n = op.n_species();
    let dim = op.dim();
    let band = 2 * n;
    let mut m = BandedMatrix::identity(dim, band, band);
    if sigma == 0.0 {
        return m;
    }
    let d = op.system().diffusivities();
    for (i, row) in op.diffusion_rows().iter().enumerate() {
        for s in 0..n {
            if d[s] == 0.0 {
                continue;
            }
            for t in 0..row.len {
                m.add(i * n + s, (row.first + t) * n + s, -sigma * d[s] * row.coeffs[t]);
            }
        }
    }
    if which == ShiftedJacobian::DiffusionReaction {
        let mut jac = vec![0.0; n * n];
        for i in 0..op.n_cells() {
            op.system().react_jacobian(&state[i * n..(i + 1) * n], &mut jac);
            for r in 0..n {
                for s in 0..n {
                    if jac[r * n + s] != 0.0 {
                        m.add(i * n + r, i * n + s, -sigma * jac[r * n + s]);
                    }
                }
            }
        }
    }
    m
}

/// Factorized `I - sigma D` for all species of a 1D operator; species without
/// diffusion are the identity and carry no factorization.
#[derive(Clone, Debug)]
pub struct DiffusionSolver1D {
    n_species: usize,
    factors: Vec<Option<BandedLu>>,
}

impl DiffusionSolver1D {
    pub fn new(op: &Operator1D, sigma: f64) -> Result<Self> {
        let n = op.n_species();
        let factors = (0..n)
            .map(|s| {
                if op.system().diffusivities()[s] == 0.0 || sigma == 0.0 {
                    Ok(None)
                } else {
                    assemble_diffusion_1d(op, s, sigma).factorize().map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n_species: n,
            factors,
        })
    }

    /// Solves in place on a cell-major vector.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n_species;
        let mut buf = vec![0.0; x.len() / n];
        for (s, lu) in self.factors.iter().enumerate() {
            let Some(lu) = lu else { continue };
            for (b, v) in buf.iter_mut().zip(x.iter().skip(s).step_by(n)) {
                *b = *v;
            }
            lu.solve_in_place(&mut buf);
            for (v, b) in x.iter_mut().skip(s).step_by(n).zip(&buf) {
                *v = *b;
            }
        }
    }
}

/// Jacobi-preconditioned conjugate gradients for `(I - sigma D_s L_h) x = b`
/// on a 2D grid, per species.
#[derive(Clone, Debug)]
pub struct DiffusionSolver2D<'a> {
    op: &'a Operator2D,
    sigma: f64,
    tolerance: f64,
    max_iterations: usize,
}

impl<'a> DiffusionSolver2D<'a> {
    pub fn new(op: &'a Operator2D, sigma: f64) -> Self {
        let cells = op.grid().len();
        Self {
            op,
            sigma,
            tolerance: RESIDUAL_TOLERANCE,
            max_iterations: (10.0 * (cells as f64).sqrt()).ceil() as usize,
        }
    }

    pub fn with_limits(mut self, tolerance: f64, max_iterations: usize) -> Self {
        self.tolerance = tolerance;
        self.max_iterations = max_iterations;
        self
    }

    /// Solves the scalar system for diffusivity `d`; `x` holds the initial
    /// guess on entry. Returns the iteration count.
    pub fn solve_scalar(&self, d: f64, b: &[f64], x: &mut [f64]) -> Result<usize> {
        let len = b.len();
        let shift = self.sigma * d;
        if shift == 0.0 {
            x.copy_from_slice(b);
            return Ok(0);
        }
        let apply = |v: &[f64], out: &mut [f64]| {
            self.op.laplacian(v, out);
            for (o, vi) in out.iter_mut().zip(v) {
                *o = vi - shift * *o;
            }
        };
        let inv_diag: Vec<f64> = (0..len)
            .map(|o| 1.0 / (1.0 - shift * self.op.laplacian_diagonal(o)))
            .collect();
        let b_norm = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let target = self.tolerance * (1.0 + b_norm);

        let mut r = vec![0.0; len];
        apply(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri = bi - *ri;
        }
        let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, d)| a * d).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; len];
        let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        for it in 0..=self.max_iterations {
            let res = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if res <= target {
                return Ok(it);
            }
            if it == self.max_iterations {
                return Err(Error::SolverNotConverged {
                    iterations: it,
                    residual: res,
                });
            }
            apply(&p, &mut ap);
            let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
            let alpha = rz / pap;
            for k in 0..len {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            for k in 0..len {
                z[k] = r[k] * inv_diag[k];
            }
            let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..len {
                p[k] = z[k] + beta * p[k];
            }
        }
        unreachable!("loop returns on its last iteration")
    }

    /// Solves every diffusing species of a cell-major vector in place.
    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        let n = self.op.n_species();
        let cells = self.op.grid().len();
        let d = self.op.system().diffusivities();
        let mut b = vec![0.0; cells];
        let mut sol = vec![0.0; cells];
        for s in 0..n {
            if d[s] == 0.0 {
                continue;
            }
            for (k, v) in x.iter().skip(s).step_by(n).enumerate() {
                b[k] = *v;
                sol[k] = *v;
            }
            self.solve_scalar(d[s], &b, &mut sol)?;
            for (v, y) in x.iter_mut().skip(s).step_by(n).zip(&sol) {
                *v = *y;
            }
        }
        Ok(())
    }
}

/// Solves a small dense row-major `n x n` system in place by Gaussian
/// elimination with partial pivoting; `a` is overwritten.
pub fn solve_dense_in_place(n: usize, a: &mut [f64], b: &mut [f64]) -> Result<()> {
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))
            .unwrap_or(k);
        if a[p * n + k] == 0.0 || !a[p * n + k].is_finite() {
            return Err(Error::Singular(format!("zero pivot in column {k} of a dense block")));
        }
        if p != k {
            for j in 0..n {
                a.swap(k * n + j, p * n + j);
            }
            b.swap(k, p);
        }
        let piv = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / piv;
            if f != 0.0 {
                for j in k..n {
                    a[i * n + j] -= f * a[k * n + j];
                }
                b[i] -= f * b[k];
            }
        }
    }
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i * n + j] * b[j]).sum();
        b[i] = (b[i] - s) / a[i * n + i];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Grid1D, Grid2D};
    use crate::model::{Reaction, SpeciesSystem};

    fn poisson_like(n: usize) -> BandedMatrix {
        let mut m = BandedMatrix::zeros(n, 2, 2);
        for i in 0..n {
            m.set(i, i, 4.0 + 0.01 * i as f64);
            if i > 0 {
                m.set(i, i - 1, -1.0);
            }
            if i + 1 < n {
                m.set(i, i + 1, -1.5);
            }
            if i + 2 < n {
                m.set(i, i + 2, 0.25);
            }
            if i >= 2 {
                m.set(i, i - 2, -0.3);
            }
        }
        m
    }

    #[test]
    fn identity_solve_returns_rhs() {
        let m = BandedMatrix::identity(7, 2, 2);
        let b = vec![1.0, -2.0, 3.0, 0.5, 0.0, 9.0, -1.0];
        assert_eq!(m.solve_checked(&b).unwrap(), b);
    }

    #[test]
    fn manufactured_solution_is_recovered() {
        let m = poisson_like(200);
        let xs: Vec<f64> = (0..200).map(|i| (i as f64 * 0.1).sin()).collect();
        let mut b = vec![0.0; 200];
        m.matvec(&xs, &mut b);
        let x = m.solve_checked(&b).unwrap();
        for (a, e) in x.iter().zip(&xs) {
            assert!((a - e).abs() < 1e-9);
        }
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let mut m = BandedMatrix::zeros(4, 1, 1);
        m.set(0, 1, 1.0);
        m.set(1, 0, 1.0);
        m.set(1, 2, 2.0);
        m.set(2, 1, 1.0);
        m.set(2, 3, 1.0);
        m.set(3, 2, 3.0);
        m.set(3, 3, 1.0);
        let xs = [1.0, 2.0, 3.0, 4.0];
        let mut b = [0.0; 4];
        m.matvec(&xs, &mut b);
        let x = m.solve_checked(&b).unwrap();
        for (a, e) in x.iter().zip(xs) {
            assert!((a - e).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_block_solve() {
        let mut a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let orig = a.clone();
        let xs = [1.0, -1.0, 2.0];
        let mut b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| orig[i * 3 + j] * xs[j]).sum()).collect();
        solve_dense_in_place(3, &mut a, &mut b).unwrap();
        for (x, e) in b.iter().zip(xs) {
            assert!((x - e).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let m = BandedMatrix::zeros(3, 1, 1);
        assert!(matches!(m.factorize(), Err(Error::Singular(_))));
    }

    #[test]
    fn sigma_zero_gives_identity() {
        let g = Grid1D::uniform(0.0, 1.0, 10).unwrap();
        let sys = SpeciesSystem::new(vec!["a".into()], vec![1.0], vec![0.0], Reaction::None, None).unwrap();
        let op = Operator1D::new(g, sys).unwrap();
        assert_eq!(assemble_diffusion_1d(&op, 0, 0.0), BandedMatrix::identity(10, 2, 2));
    }

    #[test]
    fn uniform_diffusion_rows() {
        let g = Grid1D::uniform(0.0, 1.0, 10).unwrap();
        let sys = SpeciesSystem::new(vec!["a".into()], vec![2.0], vec![0.0], Reaction::None, None).unwrap();
        let op = Operator1D::new(g, sys).unwrap();
        let sigma = 0.01;
        let m = assemble_diffusion_1d(&op, 0, sigma);
        let k = sigma * 2.0 / 0.01;
        for i in 1..9 {
            assert!((m.get(i, i - 1) + k).abs() < 1e-12);
            assert!((m.get(i, i) - (1.0 + 2.0 * k)).abs() < 1e-12);
            assert!((m.get(i, i + 1) + k).abs() < 1e-12);
            let row_sum: f64 = (0..10).map(|j| m.get(i, j)).sum();
            assert!((row_sum - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_solves_2d_diffusion() {
        let g = Grid2D::new(0.0, 1.0, 100, 100).unwrap();
        let sys = SpeciesSystem::new(vec!["a".into()], vec![1e-3], vec![0.0], Reaction::None, None).unwrap();
        let op = Operator2D::new(g, sys);
        let solver = DiffusionSolver2D::new(&op, 0.5);
        let b: Vec<f64> = (0..10_000).map(|k| ((k % 17) as f64).sin()).collect();
        let mut x = b.clone();
        let its = solver.solve_scalar(1e-3, &b, &mut x).unwrap();
        assert!(its <= 1000);
        let mut lap = vec![0.0; 10_000];
        op.laplacian(&x, &mut lap);
        let res = x
            .iter()
            .zip(&lap)
            .zip(&b)
            .map(|((xi, li), bi)| (xi - 0.5e-3 * li - bi).abs())
            .fold(0.0, f64::max);
        assert!(res <= 1e-10 * (1.0 + 1.0));
    }
}
