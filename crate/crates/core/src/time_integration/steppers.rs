//! Single steps of every scheme. Each function takes the state at `t` and
//! returns the state at `t + tau`; embedded schemes also return their
//! low-order companion.

use super::problems::{SemiDiscrete, ShiftedSolver};
use super::tableau::{ButcherTableau, ImexTableau, RosenbrockTableau};
use crate::error::{Error, Result};
use crate::linear_solver::solve_dense_in_place;

/// Newton tolerance for implicit diffusion-reaction stages, relative to `1 + ||rhs||_inf`.
pub const NEWTON_TOLERANCE: f64 = 1e-10;

/// Newton iteration cap for implicit diffusion-reaction stages.
pub const NEWTON_MAX_ITERATIONS: usize = 25;

/// Operators treated implicitly by an IMEX scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ImplicitPart {
    Diffusion,
    DiffusionReaction,
}

/// Sub-integrators of the Strang splitting.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrangVariant {
    /// TR-BDF2 diffusion, RK4 reaction.
    TrBdf2,
    /// Crank-Nicolson diffusion, RK4 reaction.
    CrankNicolson,
    /// TR-BDF2 diffusion, cellwise ROS2 reaction.
    ImplicitReaction,
}

pub(crate) fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn full_rhs<P: SemiDiscrete + ?Sized>(p: &P, w: &[f64], out: &mut [f64]) {
    let mut tmp = vec![0.0; w.len()];
    p.taxis(w, out);
    p.diffusion(w, &mut tmp);
    axpy(out, 1.0, &tmp);
    p.reaction(w, &mut tmp);
    axpy(out, 1.0, &tmp);
}

/// Forward Euler on `A + D + R`.
pub fn explicit_euler<P: SemiDiscrete + ?Sized>(p: &P, w: &[f64], tau: f64) -> Result<Vec<f64>> {
    let mut f = vec![0.0; w.len()];
    full_rhs(p, w, &mut f);
    let mut out = w.to_vec();
    axpy(&mut out, tau, &f);
    Ok(out)
}

/// `(I - tau/2 D) w' = w + tau (D w / 2 + R w + A w)`.
pub fn crank_nicolson_type<P: SemiDiscrete + ?Sized>(p: &P, w: &[f64], tau: f64) -> Result<Vec<f64>> {
    let n = w.len();
    let (mut a, mut d, mut r) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    p.taxis(w, &mut a);
    p.diffusion(w, &mut d);
    p.reaction(w, &mut r);
    let mut x = w.to_vec();
    for i in 0..n {
        x[i] += tau * (0.5 * d[i] + r[i] + a[i]);
    }
    p.diffusion_solver(0.5 * tau)?.solve(&mut x)?;
    Ok(x)
}

/// Linearly implicit step with `J = D + J_R(w)`.
pub fn rosenbrock<P: SemiDiscrete + ?Sized>(
    p: &P,
    w: &[f64],
    tau: f64,
    tab: &RosenbrockTableau,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let n = w.len();
    let s = tab.stages;
    let mut solvers: Vec<(f64, Box<dyn ShiftedSolver + '_>)> = Vec::new();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut arg = vec![0.0; n];
    let mut jv = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    for j in 0..s {
        arg.copy_from_slice(w);
        jv.fill(0.0);
        let mut coupled = false;
        for (nu, kn) in k.iter().enumerate() {
            axpy(&mut arg, tau * tab.argument_weight(j, nu), kn);
            let c = tab.jacobian_weight(j, nu);
            if c != 0.0 {
                axpy(&mut jv, c, kn);
                coupled = true;
            }
        }
        let mut kj = vec![0.0; n];
        full_rhs(p, &arg, &mut kj);
        if coupled {
            p.jacobian_apply(w, &jv, &mut tmp);
            axpy(&mut kj, tau, &tmp);
        }
        let sigma = tab.a(j, j) * tau;
        let idx = match solvers.iter().position(|(sg, _)| *sg == sigma) {
            Some(i) => i,
            None => {
                solvers.push((sigma, p.jacobian_solver(sigma, w)?));
                solvers.len() - 1
            }
        };
        solvers[idx].1.solve(&mut kj)?;
        k.push(kj);
    }
    let combine = |b: &[f64]| {
        let mut out = w.to_vec();
        for (bj, kj) in b.iter().zip(&k) {
            axpy(&mut out, tau * bj, kj);
        }
        out
    };
    Ok((combine(&tab.b), tab.embedded.as_deref().map(combine)))
}

/// Classical fourth-order Runge-Kutta step of `w' = f(w)`.
pub fn rk4(f: impl Fn(&[f64], &mut [f64]), w: &[f64], tau: f64) -> Vec<f64> {
    let n = w.len();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut arg = vec![0.0; n];
    f(w, &mut k1);
    for i in 0..n {
        arg[i] = w[i] + 0.5 * tau * k1[i];
    }
    f(&arg, &mut k2);
    for i in 0..n {
        arg[i] = w[i] + 0.5 * tau * k2[i];
    }
    f(&arg, &mut k3);
    for i in 0..n {
        arg[i] = w[i] + tau * k3[i];
    }
    f(&arg, &mut k4);
    (0..n)
        .map(|i| w[i] + tau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Diagonally implicit step of `w' = D w` from a tableau with explicit first stage.
pub fn dirk_diffusion<P: SemiDiscrete + ?Sized>(
    p: &P,
    w: &[f64],
    h: f64,
    tab: &ButcherTableau,
) -> Result<Vec<f64>> {
    let n = w.len();
    let s = tab.stages;
    let mut stages: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut derivs: Vec<Vec<f64>> = Vec::with_capacity(s);
    for i in 0..s {
        let mut x = w.to_vec();
        for (j, kj) in derivs.iter().enumerate() {
            axpy(&mut x, h * tab.a(i, j), kj);
        }
        let diag = tab.a(i, i);
        if diag != 0.0 {
            p.diffusion_solver(h * diag)?.solve(&mut x)?;
        }
        let mut kx = vec![0.0; n];
        p.diffusion(&x, &mut kx);
        stages.push(x);
        derivs.push(kx);
    }
    let stiffly_accurate = (0..s).all(|j| tab.a(s - 1, j) == tab.b[j]);
    if stiffly_accurate {
        return Ok(stages.pop().expect("at least one stage"));
    }
    let mut out = w.to_vec();
    for (bj, kj) in tab.b.iter().zip(&derivs) {
        axpy(&mut out, h * bj, kj);
    }
    Ok(out)
}

/// Crank-Nicolson step of `w' = D w`.
pub fn crank_nicolson_diffusion<P: SemiDiscrete + ?Sized>(p: &P, w: &[f64], h: f64) -> Result<Vec<f64>> {
    let mut x = vec![0.0; w.len()];
    p.diffusion(w, &mut x);
    for (xi, wi) in x.iter_mut().zip(w) {
        *xi = wi + 0.5 * h * *xi;
    }
    p.diffusion_solver(0.5 * h)?.solve(&mut x)?;
    Ok(x)
}

/// Solves `(I - sigma J_R(at)) x = b` cell by cell, overwriting `x`.
fn block_reaction_solve<P: SemiDiscrete + ?Sized>(p: &P, at: &[f64], sigma: f64, x: &mut [f64]) -> Result<()> {
    let n = p.n_species();
    let mut jac = vec![0.0; n * n];
    for (ac, xc) in at.chunks_exact(n).zip(x.chunks_exact_mut(n)) {
        p.reaction_jacobian(ac, &mut jac);
        for r in 0..n {
            for s in 0..n {
                jac[r * n + s] = f64::from(u8::from(r == s)) - sigma * jac[r * n + s];
            }
        }
        solve_dense_in_place(n, &mut jac, xc)?;
    }
    Ok(())
}

/// ROS2 step of the reaction ODE with the cellwise reaction Jacobian.
pub fn reaction_ros2<P: SemiDiscrete + ?Sized>(p: &P, w: &[f64], tau: f64) -> Result<Vec<f64>> {
    let tab = RosenbrockTableau::ros2();
    let n = w.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(2);
    let nsp = p.n_species();
    let mut jac = vec![0.0; nsp * nsp];
    for j in 0..tab.stages {
        let mut arg = w.to_vec();
        let mut jv = vec![0.0; n];
        for (nu, kn) in k.iter().enumerate() {
            axpy(&mut arg, tau * tab.argument_weight(j, nu), kn);
            axpy(&mut jv, tab.jacobian_weight(j, nu), kn);
        }
        let mut kj = vec![0.0; n];
        p.reaction(&arg, &mut kj);
        if !k.is_empty() {
            for ((wc, vc), oc) in w.chunks_exact(nsp).zip(jv.chunks_exact(nsp)).zip(kj.chunks_exact_mut(nsp)) {
                p.reaction_jacobian(wc, &mut jac);
                for r in 0..nsp {
                    oc[r] += tau * (0..nsp).map(|s| jac[r * nsp + s] * vc[s]).sum::<f64>();
                }
            }
        }
        block_reaction_solve(p, w, tab.a(j, j) * tau, &mut kj)?;
        k.push(kj);
    }
    let mut out = w.to_vec();
    for (bj, kj) in tab.b.iter().zip(&k) {
        axpy(&mut out, tau * bj, kj);
    }
    Ok(out)
}

/// `T(tau/2) D(tau/2) R(tau) D(tau/2) T(tau/2)`.
pub fn strang<P: SemiDiscrete + ?Sized>(p: &P, w: &[f64], tau: f64, variant: StrangVariant) -> Result<Vec<f64>> {
    let trbdf2 = ButcherTableau::tr_bdf2();
    let diffuse = |x: &[f64]| match variant {
        StrangVariant::CrankNicolson => crank_nicolson_diffusion(p, x, 0.5 * tau),
        _ => dirk_diffusion(p, x, 0.5 * tau, &trbdf2),
    };
    let x = rk4(|v, o| p.taxis(v, o), w, 0.5 * tau);
    let x = diffuse(&x)?;
    let x = match variant {
        StrangVariant::ImplicitReaction => reaction_ros2(p, &x, tau)?,
        _ => rk4(|v, o| p.reaction(v, o), &x, tau),
    };
    let x = diffuse(&x)?;
    Ok(rk4(|v, o| p.taxis(v, o), &x, 0.5 * tau))
}

/// Solves `W - sigma (D W + R(W)) = rhs` by Newton's method.
pub fn newton_stage<P: SemiDiscrete + ?Sized>(p: &P, sigma: f64, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rhs.len();
    let mut x = rhs.to_vec();
    let mut f = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let target = NEWTON_TOLERANCE * (1.0 + norm_inf(rhs));
    for it in 0..=NEWTON_MAX_ITERATIONS {
        p.diffusion(&x, &mut f);
        p.reaction(&x, &mut tmp);
        for i in 0..n {
            f[i] = -(x[i] - sigma * (f[i] + tmp[i]) - rhs[i]);
        }
        let res = norm_inf(&f);
        if res <= target {
            return Ok(x);
        }
        if it == NEWTON_MAX_ITERATIONS || !res.is_finite() {
            return Err(Error::NewtonNotConverged {
                iterations: it,
                residual: res,
            });
        }
        p.jacobian_solver(sigma, &x)?.solve(&mut f)?;
        axpy(&mut x, 1.0, &f);
    }
    unreachable!("loop returns on its last iteration")
}

/// Additive Runge-Kutta step: `E = A + R`, `I = D` or `E = A`, `I = D + R`.
pub fn imex<P: SemiDiscrete + ?Sized>(
    p: &P,
    w: &[f64],
    tau: f64,
    tab: &ImexTableau,
    part: ImplicitPart,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let n = w.len();
    let s = tab.stages;
    let mut solvers: Vec<(f64, Box<dyn ShiftedSolver + '_>)> = Vec::new();
    let mut e: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut im: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut tmp = vec![0.0; n];
    for i in 0..s {
        let mut x = w.to_vec();
        for j in 0..i {
            axpy(&mut x, tau * tab.a_exp(i, j), &e[j]);
            axpy(&mut x, tau * tab.a_imp(i, j), &im[j]);
        }
        let sigma = tau * tab.a_imp(i, i);
        if sigma != 0.0 {
            match part {
                ImplicitPart::Diffusion => {
                    let idx = match solvers.iter().position(|(sg, _)| *sg == sigma) {
                        Some(k) => k,
                        None => {
                            solvers.push((sigma, p.diffusion_solver(sigma)?));
                            solvers.len() - 1
                        }
                    };
                    solvers[idx].1.solve(&mut x)?;
                }
                ImplicitPart::DiffusionReaction => x = newton_stage(p, sigma, &x)?,
            }
        }
        let mut ei = vec![0.0; n];
        let mut ii = vec![0.0; n];
        p.taxis(&x, &mut ei);
        p.diffusion(&x, &mut ii);
        p.reaction(&x, &mut tmp);
        match part {
            ImplicitPart::Diffusion => axpy(&mut ei, 1.0, &tmp),
            ImplicitPart::DiffusionReaction => axpy(&mut ii, 1.0, &tmp),
        }
        e.push(ei);
        im.push(ii);
    }
    let combine = |be: &[f64], bi: &[f64]| {
        let mut out = w.to_vec();
        for j in 0..s {
            axpy(&mut out, tau * be[j], &e[j]);
            axpy(&mut out, tau * bi[j], &im[j]);
        }
        out
    };
    let high = combine(&tab.b_exp, &tab.b_imp);
    let low = match (&tab.embedded_exp, &tab.embedded_imp) {
        (Some(be), Some(bi)) => Some(combine(be, bi)),
        _ => None,
    };
    Ok((high, low))
}
