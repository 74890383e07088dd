//! Finite-volume spatial operators.
//!
//! Cell values are cell averages for conservation bookkeeping and are fed to
//! the stencils as point values at the cell centres; both agree to second
//! order. Homogeneous Neumann boundaries are closed by mirrored ghost cells,
//! so boundary fluxes and boundary interface velocities vanish. Where a wide
//! stencil would reach past the boundary the operators fall back to the
//! conservative three-point diffusion stencil and the two-point interface
//! difference.

mod one_d;
mod two_d;

pub use one_d::Operator1D;
pub use two_d::Operator2D;

use crate::error::{Error, Result};

/// Default upper bound on the time step, used when no taxis velocity is present.
pub const DEFAULT_TAU_MAX: f64 = 0.1;

/// Slope reconstruction used by the taxis fluxes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Reconstruction {
    /// MC-limited linear reconstruction (second order).
    #[default]
    Limited,
    /// Piecewise constant, i.e. first order upwind fluxes.
    FirstOrder,
}

/// Coefficients of the five-point second-derivative stencil of one cell,
/// ordered from `i - 2` to `i + 2`, together with the shared denominator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StencilDiff {
    pub alpha: [f64; 5],
    pub sigma: f64,
}

/// Coefficients of the four-point first-derivative stencil at interface
/// `i + 1/2`, ordered from cell `i - 1` to cell `i + 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StencilVel {
    pub beta: [f64; 4],
}

fn check_widths(h: &[f64]) -> Result<()> {
    match h.iter().find(|x| !(x.is_finite() && **x > 0.0)) {
        Some(bad) => Err(Error::Grid(format!("stencil width {bad} is not positive"))),
        None => Ok(()),
    }
}

/// Second-order non-uniform diffusion stencil from the widths
/// `(h_{i-2}, h_{i-1}, h_i, h_{i+1}, h_{i+2})`.
pub fn diffusion_coeffs(h: [f64; 5]) -> Result<StencilDiff> {
    check_widths(&h)?;
    let [hm2, hm1, hi, hp1, hp2] = h;
    let sigma = hm2 * hm2 + hp2 * hp2 + 2.0 * (hm1 * hm1 + hp1 * hp1) + 3.0 * (hm1 * hm2 + hp1 * hp2)
        + hi * (hp1 + hm1 + hp2 + hm2)
        - hm2 * (hp1 + hp2)
        - hm1 * (hp1 + hp2);
    let am2 = -8.0 * (hm1 - hp1) / ((hm2 + 2.0 * hm1 + 2.0 * hi + 2.0 * hp1 + hp2) * sigma);
    let am1 = 8.0
        * (hm1 * (4.0 * hm1 + 4.0 * hm2 + 2.0 * hi - 4.0 * hp1 - 2.0 * hp2)
            + 3.0 * hp1 * hp1
            + hp2 * hp2
            + 4.0 * hp1 * hp2
            + hi * hp2
            + hm2 * (hm2 - 2.0 * hp1 - hp2 + hi))
        / ((hi + hm1) * (hm1 + 2.0 * hi + hp1) * sigma);
    let ap1 = 8.0
        * (hp1 * (4.0 * hp1 + 4.0 * hp2 + 2.0 * hi - 4.0 * hm1 - 2.0 * hm2)
            + 3.0 * hm1 * hm1
            + hm2 * hm2
            + 4.0 * hm1 * hm2
            + hi * hm2
            + hp2 * (hp2 - 2.0 * hm1 - hm2 + hi))
        / ((hi + hp1) * (hm1 + 2.0 * hi + hp1) * sigma);
    Ok(StencilDiff {
        alpha: [am2, am1, -(am1 + ap1), ap1, -am2],
        sigma,
    })
}

/// Third-order interface derivative stencil from `(h_{i-1}, h_i, h_{i+1}, h_{i+2})`.
pub fn velocity_coeffs(h: [f64; 4]) -> Result<StencilVel> {
    check_widths(&h)?;
    let [hm1, hi, hp1, hp2] = h;
    let wide = hm1 + 2.0 * hi + 2.0 * hp1 + hp2;
    let b0 = (hp1 * (6.0 * hi - 4.0 * hp1 - 2.0 * hp2) + 2.0 * hi * hp2)
        / ((hi + hm1) * (hm1 + 2.0 * hi + hp1) * wide);
    let b1 = -(hp1 * (12.0 * hi + 6.0 * hm1 - 2.0 * hp2 - 4.0 * hp1) + hp2 * (2.0 * hm1 + 4.0 * hi))
        / ((hm1 + hi) * (hi + hp1) * (hi + 2.0 * hp1 + hp2));
    let b2 = (hi * (12.0 * hp1 + 6.0 * hp2 - 2.0 * hm1 - 4.0 * hi) + hm1 * (2.0 * hp2 + 4.0 * hp1))
        / ((hp1 + hp2) * (hi + hp1) * (hm1 + 2.0 * hi + hp1));
    let b3 = -(hi * (6.0 * hp1 - 4.0 * hi - 2.0 * hm1) + 2.0 * hp1 * hm1)
        / ((hp1 + hp2) * (hi + 2.0 * hp1 + hp2) * wide);
    Ok(StencilVel {
        beta: [b0, b1, b2, b3],
    })
}

/// `min` if all arguments are positive, `max` if all are negative, else 0.
pub fn minmod(values: &[f64]) -> f64 {
    if values.iter().all(|&v| v > 0.0) {
        values.iter().copied().fold(f64::INFINITY, f64::min)
    } else if values.iter().all(|&v| v < 0.0) {
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        0.0
    }
}

#[inline]
pub(crate) fn minmod3(a: f64, b: f64, c: f64) -> f64 {
    if a > 0.0 && b > 0.0 && c > 0.0 {
        a.min(b).min(c)
    } else if a < 0.0 && b < 0.0 && c < 0.0 {
        a.max(b).max(c)
    } else {
        0.0
    }
}

/// MC-limited slope on a uniform grid of width `h`.
#[inline]
pub fn mc_slope_uniform(cm: f64, c: f64, cp: f64, h: f64) -> f64 {
    minmod3(2.0 * (c - cm) / h, (cp - cm) / (2.0 * h), 2.0 * (cp - c) / h)
}

/// Coefficients of the non-uniform MC slope: the two one-sided arguments are
/// `left * (c_i - c_{i-1})` and `right * (c_{i+1} - c_i)`; the central one is
/// `centre . (c_{i-1}, c_i, c_{i+1})`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlopeCoeffs {
    pub left: f64,
    pub centre: [f64; 3],
    pub right: f64,
}

impl SlopeCoeffs {
    pub fn uniform(h: f64) -> Self {
        Self {
            left: 2.0 / h,
            centre: [-0.5 / h, 0.0, 0.5 / h],
            right: 2.0 / h,
        }
    }

    /// Weighted form with `kappa_{i-1} = h_{i-1} + h_i`, `kappa_i = h_i + h_{i+1}`.
    pub fn nonuniform(hm: f64, h: f64, hp: f64) -> Self {
        let km = hm + h;
        let k = h + hp;
        let sum = km + k;
        Self {
            left: 4.0 / km,
            centre: [
                -2.0 * k / (km * sum),
                2.0 * (k * k - km * km) / (km * k * sum),
                2.0 * km / (k * sum),
            ],
            right: 4.0 / k,
        }
    }

    #[inline]
    pub fn apply(&self, cm: f64, c: f64, cp: f64) -> f64 {
        minmod3(
            self.left * (c - cm),
            self.centre[0] * cm + self.centre[1] * c + self.centre[2] * cp,
            self.right * (cp - c),
        )
    }
}
