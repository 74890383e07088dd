//! Species systems: the five-component uPA invasion model, the reduced
//! chemotaxis-haptotaxis model and a few small systems used for testing.
//!
//! State vectors are ordered `(c, v, u, p, m)` for the uPA model and `(c, u)`
//! for the reduced model. Every system is an instance of [`SpeciesSystem`], so
//! the spatial operators and time integrators never look at model internals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the uPA invasion model. Field names serialize to the usual
/// symbol names (`D_c`, `chi_u`, `phi_21`, ...).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UpaParameters {
    #[serde(rename = "D_c")]
    pub d_c: f64,
    #[serde(rename = "D_u")]
    pub d_u: f64,
    #[serde(rename = "D_p")]
    pub d_p: f64,
    #[serde(rename = "D_m")]
    pub d_m: f64,
    pub chi_u: f64,
    pub chi_p: f64,
    pub chi_v: f64,
    pub mu_1: f64,
    pub mu_2: f64,
    pub delta: f64,
    pub alpha_3: f64,
    pub alpha_4: f64,
    pub alpha_5: f64,
    pub phi_13: f64,
    pub phi_21: f64,
    pub phi_22: f64,
    pub phi_31: f64,
    pub phi_33: f64,
    pub phi_41: f64,
    pub phi_42: f64,
    pub phi_51: f64,
    pub phi_52: f64,
    pub phi_53: f64,
}

impl Default for UpaParameters {
    fn default() -> Self {
        Self::preset_p()
    }
}

macro_rules! parameter_table {
    ($ty:ty { $($key:literal => $field:ident),* $(,)? }) => {
        impl $ty {
            pub const NAMES: &'static [&'static str] = &[$($key),*];

            pub fn get(&self, name: &str) -> Option<f64> {
                match name {
                    $($key => Some(self.$field),)*
                    _ => None,
                }
            }

            /// Sets a parameter by symbol name. Values must be finite and nonnegative.
            pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
                if !value.is_finite() || value < 0.0 {
                    return Err(Error::Parameter(format!("{name} = {value} must be finite and nonnegative")));
                }
                match name {
                    $($key => self.$field = value,)*
                    _ => return Err(Error::Parameter(format!("unknown parameter `{name}`"))),
                }
                Ok(())
            }

            pub fn validate(&self) -> Result<()> {
                for &name in Self::NAMES {
                    let v = self.get(name).unwrap_or(f64::NAN);
                    if !v.is_finite() || v < 0.0 {
                        return Err(Error::Parameter(format!("{name} = {v} must be finite and nonnegative")));
                    }
                }
                Ok(())
            }

            pub fn entries(&self) -> Vec<(&'static str, f64)> {
                vec![$(($key, self.$field)),*]
            }
        }
    };
}

parameter_table!(UpaParameters {
    "D_c" => d_c, "D_u" => d_u, "D_p" => d_p, "D_m" => d_m,
    "chi_u" => chi_u, "chi_p" => chi_p, "chi_v" => chi_v,
    "mu_1" => mu_1, "mu_2" => mu_2, "delta" => delta,
    "alpha_3" => alpha_3, "alpha_4" => alpha_4, "alpha_5" => alpha_5,
    "phi_13" => phi_13, "phi_21" => phi_21, "phi_22" => phi_22,
    "phi_31" => phi_31, "phi_33" => phi_33, "phi_41" => phi_41,
    "phi_42" => phi_42, "phi_51" => phi_51, "phi_52" => phi_52, "phi_53" => phi_53,
});

impl UpaParameters {
    /// The fitted parameter set `P`.
    pub fn preset_p() -> Self {
        Self {
            d_c: 3.5e-4,
            d_u: 2.5e-3,
            d_p: 3.5e-3,
            d_m: 4.91e-3,
            chi_u: 3.05e-2,
            chi_p: 3.75e-2,
            chi_v: 2.85e-2,
            mu_1: 0.25,
            mu_2: 0.15,
            delta: 8.15,
            alpha_3: 0.215,
            alpha_4: 0.5,
            alpha_5: 0.5,
            phi_13: 0.0,
            phi_21: 0.75,
            phi_22: 0.55,
            phi_31: 0.75,
            phi_33: 0.3,
            phi_41: 0.75,
            phi_42: 0.55,
            phi_51: 0.0,
            phi_52: 0.11,
            phi_53: 0.75,
        }
    }

    /// `P` with the larger cancer-cell diffusivity that gives smooth solutions.
    pub fn preset_smooth() -> Self {
        Self {
            d_c: 5.3e-3,
            ..Self::preset_p()
        }
    }
}

/// Parameters of the reduced chemotaxis model `(c, u)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReducedParameters {
    #[serde(rename = "D_c")]
    pub d_c: f64,
    #[serde(rename = "D_u")]
    pub d_u: f64,
    pub chi: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
}

parameter_table!(ReducedParameters {
    "D_c" => d_c, "D_u" => d_u, "chi" => chi, "mu" => mu, "alpha" => alpha, "beta" => beta,
});

impl Default for ReducedParameters {
    fn default() -> Self {
        Self {
            d_c: 5.25e-3,
            d_u: 2.5e-3,
            chi: 4e-2,
            mu: 0.1,
            alpha: 0.115,
            beta: 0.4,
        }
    }
}

impl ReducedParameters {
    /// The spatially homogeneous positive steady state `(1, alpha / beta)`.
    pub fn steady_state(&self) -> [f64; 2] {
        [1.0, self.alpha / self.beta]
    }
}

/// Reaction part of a species system.
#[derive(Clone, Debug, PartialEq)]
pub enum Reaction {
    None,
    Upa(UpaParameters),
    Reduced(ReducedParameters),
    /// `mu * w * (1 - w)` applied to every component.
    Logistic { mu: f64 },
    /// `R(w) = M w` with a row-major `n x n` matrix.
    Linear(Vec<f64>),
}

pub fn upa_reaction(p: &UpaParameters, w: &[f64], out: &mut [f64]) {
    let (c, v, u, pa, m) = (w[0], w[1], w[2], w[3], w[4]);
    out[0] = p.phi_13 * c * u + p.mu_1 * c * (1.0 - c);
    out[1] = -p.delta * v * m + p.phi_21 * u * pa - p.phi_22 * v * pa + p.mu_2 * v * (1.0 - v);
    out[2] = -p.phi_31 * pa * u - p.phi_33 * c * u + p.alpha_3 * c;
    out[3] = -p.phi_41 * pa * u - p.phi_42 * pa * v + p.alpha_4 * m;
    out[4] = -p.phi_51 * pa * u + p.phi_52 * pa * v + p.phi_53 * u * c - p.alpha_5 * m;
}

/// Row-major 5x5 Jacobian of [`upa_reaction`].
pub fn upa_reaction_jacobian(p: &UpaParameters, w: &[f64], jac: &mut [f64]) {
    let (c, v, u, pa, m) = (w[0], w[1], w[2], w[3], w[4]);
    jac[..25].fill(0.0);
    let mut set = |r: usize, s: usize, x: f64| jac[r * 5 + s] = x;
    // columns: c v u p m
    set(0, 0, p.phi_13 * u + p.mu_1 * (1.0 - 2.0 * c));
    set(0, 2, p.phi_13 * c);

    set(1, 1, -p.delta * m - p.phi_22 * pa + p.mu_2 * (1.0 - 2.0 * v));
    set(1, 2, p.phi_21 * pa);
    set(1, 3, p.phi_21 * u - p.phi_22 * v);
    set(1, 4, -p.delta * v);

    set(2, 0, -p.phi_33 * u + p.alpha_3);
    set(2, 2, -p.phi_31 * pa - p.phi_33 * c);
    set(2, 3, -p.phi_31 * u);

    set(3, 1, -p.phi_42 * pa);
    set(3, 2, -p.phi_41 * pa);
    set(3, 3, -p.phi_41 * u - p.phi_42 * v);
    set(3, 4, p.alpha_4);

    set(4, 0, p.phi_53 * u);
    set(4, 1, p.phi_52 * pa);
    set(4, 2, -p.phi_51 * pa + p.phi_53 * c);
    set(4, 3, -p.phi_51 * u + p.phi_52 * v);
    set(4, 4, -p.alpha_5);
}

pub fn reduced_reaction(p: &ReducedParameters, w: &[f64], out: &mut [f64]) {
    out[0] = p.mu * w[0] * (1.0 - w[0]);
    out[1] = p.alpha * w[0] - p.beta * w[1];
}

pub fn reduced_reaction_jacobian(p: &ReducedParameters, w: &[f64], jac: &mut [f64]) {
    jac[0] = p.mu * (1.0 - 2.0 * w[0]);
    jac[1] = 0.0;
    jac[2] = p.alpha;
    jac[3] = -p.beta;
}

/// Saturation of a taxis velocity: the identity up to magnitude `s`, then a
/// smooth cap approaching `s + 1`.
#[inline]
pub fn saturate(x: f64, s: f64) -> f64 {
    let a = x.abs();
    if a <= s {
        x
    } else {
        let e = a - s;
        (e / (1.0 + e * e).sqrt() + s).copysign(x)
    }
}

/// Vector form: `Q(chi g)` for a gradient `g`.
pub fn saturated_flux_q(g: &[f64], chi: f64, s: f64) -> Vec<f64> {
    let norm = chi * g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm <= s {
        return g.iter().map(|x| chi * x).collect();
    }
    let e = norm - s;
    let magnitude = e / (1.0 + e * e).sqrt() + s;
    g.iter().map(|x| magnitude * chi * x / norm).collect()
}

/// Model definition consumed by the discretization: diffusivities, the taxis
/// matrix `X[s][r]` (sensitivity of species `s` to the gradient of `r`), the
/// reaction and an optional saturation cap on taxis velocities.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeciesSystem {
    names: Vec<String>,
    diffusivities: Vec<f64>,
    taxis: Vec<f64>,
    reaction: Reaction,
    saturation: Option<f64>,
}

impl SpeciesSystem {
    pub fn new(
        names: Vec<String>,
        diffusivities: Vec<f64>,
        taxis: Vec<f64>,
        reaction: Reaction,
        saturation: Option<f64>,
    ) -> Result<Self> {
        let n = names.len();
        if n == 0 || diffusivities.len() != n || taxis.len() != n * n {
            return Err(Error::Parameter("species system dimensions are inconsistent".into()));
        }
        if diffusivities.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::Parameter("diffusivities must be finite and nonnegative".into()));
        }
        if taxis.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parameter("taxis coefficients must be finite".into()));
        }
        if let Some(s) = saturation {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Parameter(format!("saturation cap S = {s} must be positive")));
            }
        }
        let expected = match &reaction {
            Reaction::Upa(p) => {
                p.validate()?;
                Some(5)
            }
            Reaction::Reduced(p) => {
                p.validate()?;
                Some(2)
            }
            Reaction::Linear(m) => Some((m.len() as f64).sqrt() as usize).filter(|k| k * k == m.len()),
            Reaction::None | Reaction::Logistic { .. } => None,
        };
        if let Some(k) = expected {
            if k != n {
                return Err(Error::Parameter(format!("reaction expects {k} species, system has {n}")));
            }
        } else if matches!(reaction, Reaction::Linear(_)) {
            return Err(Error::Parameter("linear reaction matrix is not square".into()));
        }
        Ok(Self {
            names,
            diffusivities,
            taxis,
            reaction,
            saturation,
        })
    }

    pub fn upa(p: &UpaParameters) -> Result<Self> {
        let mut taxis = vec![0.0; 25];
        taxis[1] = p.chi_v;
        taxis[2] = p.chi_u;
        taxis[3] = p.chi_p;
        Self::new(
            ["c", "v", "u", "p", "m"].map(String::from).to_vec(),
            vec![p.d_c, 0.0, p.d_u, p.d_p, p.d_m],
            taxis,
            Reaction::Upa(p.clone()),
            None,
        )
    }

    pub fn reduced(p: &ReducedParameters, saturation: Option<f64>) -> Result<Self> {
        Self::new(
            vec!["c".into(), "u".into()],
            vec![p.d_c, p.d_u],
            vec![0.0, p.chi, 0.0, 0.0],
            Reaction::Reduced(p.clone()),
            saturation,
        )
    }

    pub fn n_species(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn diffusivities(&self) -> &[f64] {
        &self.diffusivities
    }

    pub fn max_diffusivity(&self) -> f64 {
        self.diffusivities.iter().copied().fold(0.0, f64::max)
    }

    pub fn taxis(&self, s: usize, r: usize) -> f64 {
        self.taxis[s * self.n_species() + r]
    }

    pub fn taxis_row(&self, s: usize) -> &[f64] {
        let n = self.n_species();
        &self.taxis[s * n..(s + 1) * n]
    }

    /// Species with a nonzero taxis row, i.e. those that are advected.
    pub fn advected_species(&self) -> Vec<usize> {
        (0..self.n_species())
            .filter(|&s| self.taxis_row(s).iter().any(|&x| x != 0.0))
            .collect()
    }

    pub fn reaction(&self) -> &Reaction {
        &self.reaction
    }

    pub fn saturation(&self) -> Option<f64> {
        self.saturation
    }

    pub fn with_saturation(mut self, saturation: Option<f64>) -> Result<Self> {
        if let Some(s) = saturation {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::Parameter(format!("saturation cap S = {s} must be positive")));
            }
        }
        self.saturation = saturation;
        Ok(self)
    }

    /// Copy of the system with every taxis coefficient set to zero.
    pub fn without_taxis(&self) -> Self {
        Self {
            taxis: vec![0.0; self.taxis.len()],
            ..self.clone()
        }
    }

    /// Applies the saturation cap (if any) to a raw taxis velocity.
    #[inline]
    pub fn limit_velocity(&self, p: f64) -> f64 {
        match self.saturation {
            Some(s) => saturate(p, s),
            None => p,
        }
    }

    /// Reaction rates of one cell.
    pub fn react(&self, w: &[f64], out: &mut [f64]) {
        match &self.reaction {
            Reaction::None => out.fill(0.0),
            Reaction::Upa(p) => upa_reaction(p, w, out),
            Reaction::Reduced(p) => reduced_reaction(p, w, out),
            Reaction::Logistic { mu } => {
                for (o, &x) in out.iter_mut().zip(w) {
                    *o = mu * x * (1.0 - x);
                }
            }
            Reaction::Linear(m) => {
                let n = w.len();
                for (r, o) in out.iter_mut().enumerate() {
                    *o = (0..n).map(|s| m[r * n + s] * w[s]).sum();
                }
            }
        }
    }

    /// Row-major reaction Jacobian of one cell.
    pub fn react_jacobian(&self, w: &[f64], jac: &mut [f64]) {
        let n = w.len();
        match &self.reaction {
            Reaction::None => jac.fill(0.0),
            Reaction::Upa(p) => upa_reaction_jacobian(p, w, jac),
            Reaction::Reduced(p) => reduced_reaction_jacobian(p, w, jac),
            Reaction::Logistic { mu } => {
                jac.fill(0.0);
                for s in 0..n {
                    jac[s * n + s] = mu * (1.0 - 2.0 * w[s]);
                }
            }
            Reaction::Linear(m) => jac.copy_from_slice(m),
        }
    }

    /// True when the reaction Jacobian does not depend on the state.
    pub fn reaction_is_linear(&self) -> bool {
        matches!(self.reaction, Reaction::None | Reaction::Linear(_))
    }
}

/// Outcome of checking a trajectory against the two computable consequences of
/// the boundedness theorem for the saturated reduced model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundReport {
    pub samples: usize,
    /// Smallest slack `bound - value` seen for the mass bound.
    pub worst_mass_margin: f64,
    /// Smallest slack seen for the comparison bound on `max u`.
    pub worst_u_margin: f64,
    pub violations: Vec<BoundViolation>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundViolation {
    pub time: f64,
    pub which: &'static str,
    pub value: f64,
    pub bound: f64,
}

/// Tracks `||c||_1 <= ||c_0||_1 + t mu |Omega| / 4` and
/// `max u <= e^{-beta t} max u_0 + (alpha / beta)(1 - e^{-beta t}) sup_s max c(s)`.
#[derive(Clone, Debug)]
pub struct BoundMonitor {
    mu: f64,
    alpha: f64,
    beta: f64,
    domain_length: f64,
    c0_mass: f64,
    u0_max: f64,
    sup_c: f64,
    tolerance: f64,
    report: BoundReport,
}

impl BoundMonitor {
    /// `tolerance` absorbs floating-point round-off; it is relative to the bound.
    pub fn new(p: &ReducedParameters, widths: &[f64], c0: &[f64], u0: &[f64], tolerance: f64) -> Self {
        let mut monitor = Self {
            mu: p.mu,
            alpha: p.alpha,
            beta: p.beta,
            domain_length: widths.iter().sum(),
            c0_mass: l1(widths, c0),
            u0_max: u0.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            sup_c: f64::NEG_INFINITY,
            tolerance,
            report: BoundReport {
                worst_mass_margin: f64::INFINITY,
                worst_u_margin: f64::INFINITY,
                ..Default::default()
            },
        };
        monitor.observe(0.0, widths, c0, u0);
        monitor
    }

    pub fn observe(&mut self, t: f64, widths: &[f64], c: &[f64], u: &[f64]) {
        let max_c = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.sup_c = self.sup_c.max(max_c);
        let mass = l1(widths, c);
        let mass_bound = self.c0_mass + t * self.mu * self.domain_length / 4.0;
        let decay = (-self.beta * t).exp();
        let u_bound = decay * self.u0_max + self.alpha / self.beta * (1.0 - decay) * self.sup_c.max(0.0);
        let max_u = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        let r = &mut self.report;
        r.samples += 1;
        for (which, value, bound, worst) in [
            ("mass", mass, mass_bound, &mut r.worst_mass_margin),
            ("u-envelope", max_u, u_bound, &mut r.worst_u_margin),
        ] {
            let margin = bound - value;
            *worst = worst.min(margin);
            if margin < -self.tolerance * bound.abs().max(1.0) {
                r.violations.push(BoundViolation { time: t, which, value, bound });
            }
        }
    }

    pub fn report(&self) -> &BoundReport {
        &self.report
    }
}

fn l1(widths: &[f64], values: &[f64]) -> f64 {
    widths.iter().zip(values).map(|(h, x)| h * x.abs()).sum()
}
