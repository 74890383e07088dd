//! Linear stability of spatially homogeneous steady states.
//!
//! A Fourier mode with wave number `k` (the squared spatial frequency) around
//! a reaction equilibrium `w` grows at rate `lambda_k`, the largest real part
//! of the eigenvalues of `J_R(w) - k J_T(w)`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linear_solver::solve_dense_in_place;
use crate::model::SpeciesSystem;

/// Residual target of [`find_reaction_steady_state`].
pub const STEADY_STATE_TOLERANCE: f64 = 1e-12;

/// Newton iteration cap of [`find_reaction_steady_state`].
pub const STEADY_STATE_MAX_ITERATIONS: usize = 100;

/// Width below which scan endpoints are no longer bisected.
pub const ENDPOINT_TOLERANCE: f64 = 1e-6;

/// Row-major `n x n` matrix with entries `D_s delta_sr - chi_sr w_s`.
pub fn transport_jacobian(system: &SpeciesSystem, w: &[f64]) -> Vec<f64> {
    let n = system.n_species();
    let d = system.diffusivities();
    let mut j = vec![0.0; n * n];
    for s in 0..n {
        for r in 0..n {
            j[s * n + r] = -system.taxis(s, r) * w[s];
        }
        j[s * n + s] += d[s];
    }
    j
}

/// Row-major reaction Jacobian at `w`.
pub fn reaction_jacobian(system: &SpeciesSystem, w: &[f64]) -> Vec<f64> {
    let n = system.n_species();
    let mut j = vec![0.0; n * n];
    system.react_jacobian(w, &mut j);
    j
}

/// Largest real part of the eigenvalues of a row-major square matrix.
pub fn spectral_abscissa(n: usize, m: &[f64]) -> f64 {
    if n == 1 {
        return m[0];
    }
    DMatrix::from_row_slice(n, n, m)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Precomputed `J_R` and `J_T` at one steady state.
#[derive(Clone, Debug, PartialEq)]
pub struct Dispersion {
    n: usize,
    reaction: Vec<f64>,
    transport: Vec<f64>,
}

impl Dispersion {
    pub fn new(system: &SpeciesSystem, steady: &[f64]) -> Result<Self> {
        let n = system.n_species();
        if steady.len() != n {
            return Err(Error::StateShape {
                got: steady.len(),
                expected: n,
            });
        }
        if steady.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("steady state is not finite".into()));
        }
        Ok(Self {
            n,
            reaction: reaction_jacobian(system, steady),
            transport: transport_jacobian(system, steady),
        })
    }

    /// `J_R - k J_T`.
    pub fn matrix(&self, k: f64) -> Vec<f64> {
        self.reaction
            .iter()
            .zip(&self.transport)
            .map(|(r, t)| r - k * t)
            .collect()
    }

    pub fn lambda(&self, k: f64) -> f64 {
        spectral_abscissa(self.n, &self.matrix(k))
    }

    /// Samples `lambda_k` on `samples` uniform points of `[0, k_max]` and
    /// sharpens every sign change by bisection.
    pub fn scan(&self, k_max: f64, samples: usize) -> Result<DispersionScan> {
        if samples < 2 || !(k_max > 0.0) {
            return Err(Error::Parameter(format!(
                "scan needs k_max > 0 and at least 2 samples, got {k_max} and {samples}"
            )));
        }
        let k: Vec<f64> = (0..samples)
            .map(|i| k_max * i as f64 / (samples - 1) as f64)
            .collect();
        let lambda: Vec<f64> = k.iter().map(|&x| self.lambda(x)).collect();
        let mut unstable = Vec::new();
        let mut start = (lambda[0] > 0.0).then_some(0.0);
        for i in 1..samples {
            let (was, is) = (lambda[i - 1] > 0.0, lambda[i] > 0.0);
            if was != is {
                let edge = self.bisect(k[i - 1], k[i]);
                if is {
                    start = Some(edge);
                } else if let Some(s) = start.take() {
                    unstable.push((s, edge));
                }
            }
        }
        if let Some(s) = start {
            unstable.push((s, k_max));
        }
        Ok(DispersionScan { k, lambda, unstable })
    }

    fn bisect(&self, mut lo: f64, mut hi: f64) -> f64 {
        let positive_lo = self.lambda(lo) > 0.0;
        while hi - lo > ENDPOINT_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if (self.lambda(mid) > 0.0) == positive_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Sampled dispersion relation with its unstable wave-number intervals.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DispersionScan {
    pub k: Vec<f64>,
    pub lambda: Vec<f64>,
    pub unstable: Vec<(f64, f64)>,
}

impl DispersionScan {
    /// Sample with the largest growth rate.
    pub fn peak(&self) -> (f64, f64) {
        self.k
            .iter()
            .zip(&self.lambda)
            .fold((0.0, f64::NEG_INFINITY), |best, (&k, &l)| if l > best.1 { (k, l) } else { best })
    }
}

/// `lambda_k` at one steady state.
pub fn lambda_k(system: &SpeciesSystem, steady: &[f64], k: f64) -> Result<f64> {
    Ok(Dispersion::new(system, steady)?.lambda(k))
}

pub fn scan_dispersion(system: &SpeciesSystem, steady: &[f64], k_max: f64, samples: usize) -> Result<DispersionScan> {
    Dispersion::new(system, steady)?.scan(k_max, samples)
}

fn residual(system: &SpeciesSystem, w: &[f64], r: &mut [f64]) -> f64 {
    system.react(w, r);
    r.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Newton iteration for `R(w) = 0` with backtracking on `||R||_inf`.
/// The root must be strictly positive.
pub fn find_reaction_steady_state(system: &SpeciesSystem, guess: &[f64]) -> Result<Vec<f64>> {
    let n = system.n_species();
    if guess.len() != n {
        return Err(Error::StateShape {
            got: guess.len(),
            expected: n,
        });
    }
    let mut w = guess.to_vec();
    let mut r = vec![0.0; n];
    let mut res = residual(system, &w, &mut r);
    let mut iterations = 0;
    while res >= STEADY_STATE_TOLERANCE {
        if iterations == STEADY_STATE_MAX_ITERATIONS || !res.is_finite() {
            return Err(Error::SteadyStateNotConverged {
                iterations,
                residual: res,
            });
        }
        iterations += 1;
        let mut jac = reaction_jacobian(system, &w);
        let mut step: Vec<f64> = r.iter().map(|x| -x).collect();
        solve_dense_in_place(n, &mut jac, &mut step).map_err(|_| Error::SteadyStateNotConverged {
            iterations,
            residual: res,
        })?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = w.iter().zip(&step).map(|(a, b)| a + t * b).collect();
            let mut rt = vec![0.0; n];
            let rt_norm = residual(system, &trial, &mut rt);
            if rt_norm < res || t < 1e-4 {
                w = trial;
                r = rt;
                res = rt_norm;
                break;
            }
            t *= 0.5;
        }
    }
    if let Some((component, &value)) = w.iter().enumerate().find(|(_, &x)| x <= 0.0) {
        return Err(Error::NonPositiveSteadyState { component, value });
    }
    Ok(w)
}
