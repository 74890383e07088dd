//! Time integration of the semi-discrete system `w' = A(w) + D(w) + R(w)`.
//!
//! Fixed-step methods take the CFL step `tau = min(CFL / max(|P|/h), tau_max)`
//! recomputed from the current state. Methods with an embedded companion
//! (`*-ATC`) control the step from the difference of the two solutions and
//! never exceed the CFL step.

mod problems;
mod steppers;
pub mod tableau;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use problems::{DenseLinearProblem, SemiDiscrete, ShiftedSolver};
pub use steppers::{
    crank_nicolson_diffusion, crank_nicolson_type, dirk_diffusion, explicit_euler, imex, newton_stage,
    reaction_ros2, rk4, rosenbrock, strang, ImplicitPart, StrangVariant, NEWTON_MAX_ITERATIONS,
    NEWTON_TOLERANCE,
};
pub use tableau::{ButcherTableau, GammaConvention, ImexTableau, RosenbrockTableau};

use crate::discretization::{Reconstruction, DEFAULT_TAU_MAX};
use crate::error::{Error, Result};

/// Time integration schemes, named by their conventional labels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Explicit,
    Cnd,
    Ros2,
    Ros3,
    Ros3Atc,
    Strang,
    StrangCnd,
    StrangIr,
    Imex2,
    Imex3,
    Imex3Atc,
    Imex3AtcIr,
    Imex3AtcUpwind1,
}

impl Method {
    pub const ALL: [Method; 13] = [
        Method::Explicit,
        Method::Cnd,
        Method::Ros2,
        Method::Ros3,
        Method::Ros3Atc,
        Method::Strang,
        Method::StrangCnd,
        Method::StrangIr,
        Method::Imex2,
        Method::Imex3,
        Method::Imex3Atc,
        Method::Imex3AtcIr,
        Method::Imex3AtcUpwind1,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Explicit => "EXPLICIT",
            Method::Cnd => "CND",
            Method::Ros2 => "ROS2",
            Method::Ros3 => "ROS3",
            Method::Ros3Atc => "ROS3-ATC",
            Method::Strang => "STRANG",
            Method::StrangCnd => "STRANG-CND",
            Method::StrangIr => "STRANG-IR",
            Method::Imex2 => "IMEX2",
            Method::Imex3 => "IMEX3",
            Method::Imex3Atc => "IMEX3-ATC",
            Method::Imex3AtcIr => "IMEX3-ATC-IR",
            Method::Imex3AtcUpwind1 => "IMEX3-ATC-UPWIND1",
        }
    }

    /// True for methods with adaptive time-step control.
    pub fn is_adaptive(self) -> bool {
        matches!(
            self,
            Method::Ros3Atc | Method::Imex3Atc | Method::Imex3AtcIr | Method::Imex3AtcUpwind1
        )
    }

    /// Slope reconstruction the method requires of the spatial operator.
    pub fn reconstruction(self) -> Reconstruction {
        match self {
            Method::Imex3AtcUpwind1 => Reconstruction::FirstOrder,
            _ => Reconstruction::Limited,
        }
    }

    /// True when an implicit solve couples diffusion with the reaction Jacobian.
    pub fn needs_coupled_solver(self) -> bool {
        matches!(self, Method::Ros2 | Method::Ros3 | Method::Ros3Atc | Method::Imex3AtcIr)
    }

    /// One step of size `tau`, with the low-order companion for adaptive methods.
    pub fn step<P: SemiDiscrete + ?Sized>(
        self,
        p: &P,
        w: &[f64],
        tau: f64,
    ) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
        match self {
            Method::Explicit => Ok((explicit_euler(p, w, tau)?, None)),
            Method::Cnd => Ok((crank_nicolson_type(p, w, tau)?, None)),
            Method::Ros2 => rosenbrock(p, w, tau, &RosenbrockTableau::ros2()),
            Method::Ros3 => Ok((rosenbrock(p, w, tau, &RosenbrockTableau::ros3())?.0, None)),
            Method::Ros3Atc => rosenbrock(p, w, tau, &RosenbrockTableau::ros3()),
            Method::Strang => Ok((strang(p, w, tau, StrangVariant::TrBdf2)?, None)),
            Method::StrangCnd => Ok((strang(p, w, tau, StrangVariant::CrankNicolson)?, None)),
            Method::StrangIr => Ok((strang(p, w, tau, StrangVariant::ImplicitReaction)?, None)),
            Method::Imex2 => imex(p, w, tau, &ImexTableau::imex2(), ImplicitPart::Diffusion),
            Method::Imex3 => Ok((
                imex(p, w, tau, &ImexTableau::imex3(), ImplicitPart::Diffusion)?.0,
                None,
            )),
            Method::Imex3Atc | Method::Imex3AtcUpwind1 => {
                imex(p, w, tau, &ImexTableau::imex3(), ImplicitPart::Diffusion)
            }
            Method::Imex3AtcIr => imex(p, w, tau, &ImexTableau::imex3(), ImplicitPart::DiffusionReaction),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.label() == key)
            .ok_or_else(|| {
                let known: Vec<_> = Method::ALL.iter().map(|m| m.label()).collect();
                Error::Config(format!("unknown method {s:?}; expected one of {}", known.join(", ")))
            })
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Step-size policy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepController {
    pub cfl: f64,
    pub tau_max: f64,
    /// Absolute floor of the error tolerance.
    pub tolerance_floor: f64,
    /// Tolerance relative to the L1 norm of the state.
    pub relative_tolerance: f64,
    pub safety: f64,
    pub exponent: f64,
    /// Largest factor by which an accepted step may grow.
    pub max_growth: f64,
    pub max_retries: usize,
}

impl Default for StepController {
    fn default() -> Self {
        Self {
            cfl: 0.49,
            tau_max: DEFAULT_TAU_MAX,
            tolerance_floor: 1e-6,
            relative_tolerance: 1e-6,
            safety: 0.9,
            exponent: 1.0 / 3.0,
            max_growth: 2.0,
            max_retries: 20,
        }
    }
}

impl StepController {
    pub fn with_cfl(mut self, cfl: f64) -> Self {
        self.cfl = cfl;
        self
    }

    /// Accepted steps need an estimate strictly below this.
    pub fn tolerance(&self, l1_norm: f64) -> f64 {
        self.tolerance_floor.max(self.relative_tolerance * l1_norm)
    }

    /// Factor applied to a rejected step.
    pub fn rejection_factor(&self, estimate: f64, tolerance: f64) -> f64 {
        self.safety * (tolerance / estimate).powf(self.exponent)
    }

    /// Factor applied after an accepted step, capped by `max_growth`.
    pub fn growth_factor(&self, estimate: f64, tolerance: f64) -> f64 {
        if estimate == 0.0 {
            f64::INFINITY
        } else {
            self.rejection_factor(estimate, tolerance).min(self.max_growth)
        }
    }

    /// CFL step at state `w`; forward Euler is additionally held below the
    /// explicit diffusion limit.
    pub fn cfl_step<P: SemiDiscrete + ?Sized>(&self, method: Method, p: &P, w: &[f64]) -> f64 {
        let rate = p.courant_rate(w);
        let tau_max = if self.tau_max > 0.0 { self.tau_max } else { DEFAULT_TAU_MAX };
        let mut tau = if rate > 0.0 { (self.cfl / rate).min(tau_max) } else { tau_max };
        if method == Method::Explicit {
            tau = tau.min(p.explicit_diffusion_limit());
        }
        tau
    }
}

/// Result of one accepted step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub tau: f64,
    pub retries: usize,
    pub error_estimate: Option<f64>,
}

/// Running totals over an integration.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub steps: usize,
    pub rejections: usize,
    pub min_tau: f64,
    pub max_tau: f64,
}

/// Drives one method, carrying the proposed step of the adaptive controller.
#[derive(Clone, Debug)]
pub struct Stepper {
    method: Method,
    controller: StepController,
    proposed: Option<f64>,
    stats: StepStats,
}

impl Stepper {
    pub fn new(method: Method, controller: StepController) -> Self {
        Self {
            method,
            controller,
            proposed: None,
            stats: StepStats::default(),
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn controller(&self) -> &StepController {
        &self.controller
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    /// Advances `w` from `t` by one step that does not pass `t_end`.
    pub fn step<P: SemiDiscrete + ?Sized>(
        &mut self,
        p: &P,
        w: &mut Vec<f64>,
        t: f64,
        t_end: f64,
    ) -> Result<StepReport> {
        let remaining = t_end - t;
        let tau_cfl = self.controller.cfl_step(self.method, p, w);
        let report = if self.method.is_adaptive() {
            self.adaptive_step(p, w, t, tau_cfl, remaining)?
        } else {
            let tau = tau_cfl.min(remaining);
            let (next, _) = self.method.step(p, w, tau)?;
            if let Some(e) = first_non_finite(&next) {
                return Err(non_finite(t + tau, e, p.n_species()));
            }
            *w = next;
            StepReport {
                tau,
                retries: 0,
                error_estimate: None,
            }
        };
        let s = &mut self.stats;
        if s.steps == 0 {
            s.min_tau = report.tau;
            s.max_tau = report.tau;
        } else {
            s.min_tau = s.min_tau.min(report.tau);
            s.max_tau = s.max_tau.max(report.tau);
        }
        s.steps += 1;
        s.rejections += report.retries;
        Ok(report)
    }

    fn adaptive_step<P: SemiDiscrete + ?Sized>(
        &mut self,
        p: &P,
        w: &mut Vec<f64>,
        t: f64,
        tau_cfl: f64,
        remaining: f64,
    ) -> Result<StepReport> {
        let c = self.controller;
        let tolerance = c.tolerance(p.l1_norm(w));
        let mut tau = self.proposed.unwrap_or(tau_cfl).min(tau_cfl).min(remaining);
        let mut retries = 0;
        let mut estimate = f64::NAN;
        let mut last_non_finite = None;
        loop {
            let outcome = self.method.step(p, w, tau);
            let factor = match outcome {
                Ok((high, Some(low))) if first_non_finite(&high).is_none() => {
                    estimate = high
                        .iter()
                        .zip(&low)
                        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                    if estimate < tolerance {
                        self.proposed = Some(tau * c.growth_factor(estimate, tolerance));
                        *w = high;
                        return Ok(StepReport {
                            tau,
                            retries,
                            error_estimate: Some(estimate),
                        });
                    }
                    last_non_finite = None;
                    c.rejection_factor(estimate, tolerance)
                }
                Ok((_, None)) => unreachable!("adaptive methods return a companion"),
                Ok((high, _)) => {
                    last_non_finite = first_non_finite(&high);
                    0.25
                }
                Err(Error::Singular(_) | Error::NewtonNotConverged { .. } | Error::SolverNotConverged { .. }) => 0.25,
                Err(e) => return Err(e),
            };
            retries += 1;
            if retries > c.max_retries {
                if let Some(e) = last_non_finite {
                    return Err(non_finite(t + tau, e, p.n_species()));
                }
                return Err(Error::StepRejected {
                    retries: retries - 1,
                    estimate,
                    tolerance,
                });
            }
            tau *= factor;
        }
    }
}

fn first_non_finite(w: &[f64]) -> Option<usize> {
    w.iter().position(|x| !x.is_finite())
}

fn non_finite(time: f64, index: usize, n_species: usize) -> Error {
    Error::NonFinite {
        time,
        cell: index / n_species,
        species: index % n_species,
    }
}

/// Summary of an [`integrate`] call.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integration {
    pub t: f64,
    pub steps: usize,
    pub rejections: usize,
}

/// Advances `w` from `t0` to exactly `t_end`, calling `observer(t, w)` after
/// every accepted step.
pub fn integrate<P: SemiDiscrete + ?Sized>(
    p: &P,
    w: &mut Vec<f64>,
    t0: f64,
    t_end: f64,
    stepper: &mut Stepper,
    mut observer: impl FnMut(f64, &[f64]),
) -> Result<Integration> {
    if w.len() != p.dim() {
        return Err(Error::StateShape {
            got: w.len(),
            expected: p.dim(),
        });
    }
    let start = stepper.stats();
    let mut t = t0;
    // Steps shorter than this relative to the horizon would not change `t`.
    let eps = 1e-12 * t_end.abs().max(1.0);
    while t_end - t > eps {
        let r = stepper.step(p, w, t, t_end)?;
        t = if t_end - (t + r.tau) <= eps { t_end } else { t + r.tau };
        observer(t, w);
    }
    let end = stepper.stats();
    Ok(Integration {
        t: t.max(t0),
        steps: end.steps - start.steps,
        rejections: end.rejections - start.rejections,
    })
}
