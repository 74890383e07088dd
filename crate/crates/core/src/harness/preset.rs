use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid1D, Grid2D};
use crate::model::{ReducedParameters, SpeciesSystem, UpaParameters};
use crate::time_integration::Method;

/// Width of the Gaussian cell accumulation at the left boundary.
pub const GAUSSIAN_WIDTH: f64 = 5e-3;

/// Default flux cap of the reduced preset.
pub const REDUCED_SATURATION: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PresetName {
    #[serde(rename = "I")]
    I,
    #[serde(rename = "II")]
    II,
    #[serde(rename = "2D")]
    TwoD,
    #[serde(rename = "REDUCED")]
    Reduced,
}

impl PresetName {
    pub fn label(self) -> &'static str {
        match self {
            PresetName::I => "I",
            PresetName::II => "II",
            PresetName::TwoD => "2D",
            PresetName::Reduced => "REDUCED",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "I" | "1" => Ok(PresetName::I),
            "II" | "2" => Ok(PresetName::II),
            "2D" => Ok(PresetName::TwoD),
            "REDUCED" => Ok(PresetName::Reduced),
            _ => Err(Error::Config(format!("unknown preset `{s}` (expected I, II, 2D or REDUCED)"))),
        }
    }
}

/// Problem sizes: quick enough for continuous integration, or the full sizes
/// of the published benchmarks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Ci,
    Paper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelParameters {
    Upa(UpaParameters),
    Reduced {
        parameters: ReducedParameters,
        saturation: Option<f64>,
    },
}

impl ModelParameters {
    pub fn system(&self) -> Result<SpeciesSystem> {
        match self {
            ModelParameters::Upa(p) => SpeciesSystem::upa(p),
            ModelParameters::Reduced { parameters, saturation } => SpeciesSystem::reduced(parameters, *saturation),
        }
    }

    pub fn n_species(&self) -> usize {
        match self {
            ModelParameters::Upa(_) => 5,
            ModelParameters::Reduced { .. } => 2,
        }
    }

    /// Every parameter by symbol name, plus `S` for a saturated reduced model.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        match self {
            ModelParameters::Upa(p) => p.entries(),
            ModelParameters::Reduced { parameters, saturation } => {
                let mut e = parameters.entries();
                if let Some(s) = saturation {
                    e.push(("S", *s));
                }
                e
            }
        }
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        match self {
            ModelParameters::Upa(p) => p.set(name, value),
            ModelParameters::Reduced { saturation, .. } if name == "S" => {
                if !(value.is_finite() && value > 0.0) {
                    return Err(Error::Parameter(format!("S = {value} must be positive")));
                }
                *saturation = Some(value);
                Ok(())
            }
            ModelParameters::Reduced { parameters, .. } => parameters.set(name, value),
        }
    }

    pub fn has(&self, name: &str) -> bool {
        match self {
            ModelParameters::Upa(_) => UpaParameters::NAMES.contains(&name),
            ModelParameters::Reduced { .. } => name == "S" || ReducedParameters::NAMES.contains(&name),
        }
    }
}

/// A benchmark setup: model, domain, initial data and run defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub name: PresetName,
    pub parameters: ModelParameters,
    /// Full simulation domain (an interval, or the side of a square in 2D).
    pub domain: (f64, f64),
    /// Narrowed domain used by convergence studies and the AMR benchmark.
    pub comparison_domain: (f64, f64),
    pub t_end: f64,
    pub method: Method,
    pub cells: usize,
}

impl ExperimentPreset {
    pub fn new(name: PresetName, scale: Scale) -> Self {
        let paper = scale == Scale::Paper;
        match name {
            PresetName::I => Self {
                name,
                parameters: ModelParameters::Upa(UpaParameters::preset_p()),
                domain: (0.0, 10.0),
                comparison_domain: (0.0, 5.0),
                t_end: if paper { 60.0 } else { 10.0 },
                method: Method::Imex3,
                cells: 2000,
            },
            PresetName::II => Self {
                name,
                parameters: ModelParameters::Upa(UpaParameters::preset_smooth()),
                domain: (0.0, 10.0),
                comparison_domain: (0.0, 5.0),
                t_end: if paper { 50.0 } else { 20.0 },
                method: Method::Imex3,
                cells: 2000,
            },
            PresetName::TwoD => {
                let half = if paper { 15.0 } else { 7.5 };
                Self {
                    name,
                    parameters: ModelParameters::Upa(UpaParameters::preset_p()),
                    domain: (-half, half),
                    comparison_domain: (0.0, 5.0),
                    t_end: if paper { 200.0 } else { 50.0 },
                    method: Method::Imex3,
                    cells: if paper { 600 } else { 150 },
                }
            }
            PresetName::Reduced => Self {
                name,
                parameters: ModelParameters::Reduced {
                    parameters: ReducedParameters::default(),
                    saturation: Some(REDUCED_SATURATION),
                },
                domain: (0.0, 10.0),
                comparison_domain: (0.0, 10.0),
                t_end: 10.0,
                method: Method::Imex3,
                cells: 400,
            },
        }
    }

    pub fn system(&self) -> Result<SpeciesSystem> {
        self.parameters.system()
    }

    pub fn n_species(&self) -> usize {
        self.parameters.n_species()
    }

    pub fn is_two_dimensional(&self) -> bool {
        self.name == PresetName::TwoD
    }

    /// Point values of the initial data at `x` (1D presets).
    pub fn initial_value(&self, x: f64) -> Vec<f64> {
        match self.name {
            PresetName::I | PresetName::II => {
                let e = (-x * x / GAUSSIAN_WIDTH).exp();
                vec![e, 1.0 - 0.5 * e, 0.5 * e, 0.05 * e, 0.0]
            }
            PresetName::Reduced => {
                let mid = 0.5 * (self.domain.0 + self.domain.1);
                let c = (-(x - mid) * (x - mid)).exp();
                vec![c, 0.5 * c]
            }
            PresetName::TwoD => self.initial_value_2d(x, 0.0),
        }
    }

    /// Point values of the indicator initial data at `(x1, x2)` (2D preset).
    pub fn initial_value_2d(&self, x1: f64, x2: f64) -> Vec<f64> {
        let c = if x2 >= interface_curve(x1) { 1.0 } else { 0.0 };
        vec![c, 1.0 - c, 0.5 * c, 0.05 * c, 0.0]
    }

    /// Initial state on `grid`, sampled at cell centres.
    pub fn initial_state(&self, grid: &Grid1D) -> Vec<f64> {
        grid.centers().iter().flat_map(|&x| self.initial_value(x)).collect()
    }

    pub fn initial_state_2d(&self, grid: &Grid2D) -> Vec<f64> {
        let mut w = Vec::with_capacity(grid.len() * self.n_species());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.center(i, j);
                w.extend(self.initial_value_2d(x, y));
            }
        }
        w
    }

    pub fn grid(&self, cells: usize) -> Result<Grid1D> {
        Grid1D::uniform(self.domain.0, self.domain.1, cells)
    }

    pub fn comparison_grid(&self, cells: usize) -> Result<Grid1D> {
        Grid1D::uniform(self.comparison_domain.0, self.comparison_domain.1, cells)
    }
}

/// Lower edge of the initially invaded region in the 2D preset.
pub fn interface_curve(x: f64) -> f64 {
    if x < 0.0 {
        4.0 + 0.7 * (0.9 * x).sin()
    } else if x <= 5.0 {
        7.0 * (0.9 * x).sin() + 0.008 * x.powi(3) + 4.0
    } else {
        5.0 + 0.7 * 4.5f64.sin() + 0.7 * (0.9 * (x - 5.0)).sin()
    }
}
