use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::preset::{ExperimentPreset, PresetName, Scale};
use crate::amr::{AmrConfig, MonitorKind, MonitorSpec};
use crate::error::{Error, Result};
use crate::time_integration::{Method, StepController};

/// Numerical and benchmark keys accepted besides the model parameters.
pub const NUMERIC_KEYS: &[&str] = &[
    "preset",
    "method",
    "cells",
    "cfl",
    "t_end",
    "tau_max",
    "paper_scale",
    "reference_cells",
    "reference_method",
    "study_cells",
    "monitor",
    "c_ref",
    "c_coa",
    "n_ref",
    "n_coa",
    "l_max",
    "smooth",
    "cadence",
    "initial_cells",
    "sample_interval",
    "snapshot_times",
];

/// Flat key/value settings of a run. Unset fields fall back to the preset.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunConfig {
    pub preset: Option<PresetName>,
    pub method: Option<Method>,
    pub cells: Option<usize>,
    pub cfl: Option<f64>,
    pub t_end: Option<f64>,
    pub tau_max: Option<f64>,
    pub paper_scale: Option<bool>,
    pub reference_cells: Option<usize>,
    pub reference_method: Option<Method>,
    pub study_cells: Option<Vec<usize>>,
    pub monitor: Option<MonitorKind>,
    pub c_ref: Option<f64>,
    pub c_coa: Option<f64>,
    pub n_ref: Option<usize>,
    pub n_coa: Option<usize>,
    pub l_max: Option<u32>,
    pub smooth: Option<bool>,
    pub cadence: Option<usize>,
    pub initial_cells: Option<usize>,
    pub sample_interval: Option<f64>,
    pub snapshot_times: Option<Vec<f64>>,
    /// Model parameters by symbol name (`D_c`, `chi_u`, `phi_21`, `S`, ...).
    pub parameters: BTreeMap<String, f64>,
}

fn bad(key: &str, what: &str, v: &toml::Value) -> Error {
    Error::Config(format!("`{key}` must be {what}, got {v}"))
}

fn float(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(bad(key, "a number", v)),
    }
}

fn count(key: &str, v: &toml::Value) -> Result<usize> {
    match v {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(bad(key, "a nonnegative integer", v)),
    }
}

fn flag(key: &str, v: &toml::Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| bad(key, "true or false", v))
}

fn text<'a>(key: &str, v: &'a toml::Value) -> Result<&'a str> {
    v.as_str().ok_or_else(|| bad(key, "a string", v))
}

fn list<T>(key: &str, v: &toml::Value, item: impl Fn(&str, &toml::Value) -> Result<T>) -> Result<Vec<T>> {
    v.as_array()
        .ok_or_else(|| bad(key, "an array", v))?
        .iter()
        .map(|x| item(key, x))
        .collect()
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let table: toml::Table = s.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut c = RunConfig::default();
        for (key, v) in &table {
            let k = key.as_str();
            match k {
                "preset" => c.preset = Some(text(k, v)?.parse()?),
                "method" => c.method = Some(text(k, v)?.parse()?),
                "reference_method" => c.reference_method = Some(text(k, v)?.parse()?),
                "cells" => c.cells = Some(count(k, v)?),
                "reference_cells" => c.reference_cells = Some(count(k, v)?),
                "initial_cells" => c.initial_cells = Some(count(k, v)?),
                "n_ref" => c.n_ref = Some(count(k, v)?),
                "n_coa" => c.n_coa = Some(count(k, v)?),
                "cadence" => c.cadence = Some(count(k, v)?),
                "l_max" => c.l_max = Some(count(k, v)? as u32),
                "cfl" => c.cfl = Some(float(k, v)?),
                "t_end" => c.t_end = Some(float(k, v)?),
                "tau_max" => c.tau_max = Some(float(k, v)?),
                "c_ref" => c.c_ref = Some(float(k, v)?),
                "c_coa" => c.c_coa = Some(float(k, v)?),
                "sample_interval" => c.sample_interval = Some(float(k, v)?),
                "paper_scale" => c.paper_scale = Some(flag(k, v)?),
                "smooth" => c.smooth = Some(flag(k, v)?),
                "study_cells" => c.study_cells = Some(list(k, v, count)?),
                "snapshot_times" => c.snapshot_times = Some(list(k, v, float)?),
                "monitor" => {
                    c.monitor = Some(match text(k, v)? {
                        "gradient" => MonitorKind::Gradient,
                        "velocity_error" => MonitorKind::VelocityError,
                        other => return Err(Error::Config(format!("unknown monitor `{other}`"))),
                    })
                }
                _ => {
                    c.parameters.insert(key.clone(), float(k, v)?);
                }
            }
        }
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// `top` wins wherever it sets a value.
    pub fn overlay(mut self, top: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if top.$f.is_some() { self.$f = top.$f; } )* };
        }
        take!(
            preset, method, cells, cfl, t_end, tau_max, paper_scale, reference_cells, reference_method, study_cells,
            monitor, c_ref, c_coa, n_ref, n_coa, l_max, smooth, cadence, initial_cells, sample_interval,
            snapshot_times
        );
        self.parameters.extend(top.parameters);
        self
    }

    pub fn scale(&self) -> Scale {
        if self.paper_scale.unwrap_or(false) {
            Scale::Paper
        } else {
            Scale::Ci
        }
    }

    /// The preset with every override applied.
    pub fn resolve_preset(&self, default: PresetName) -> Result<ExperimentPreset> {
        let mut p = ExperimentPreset::new(self.preset.unwrap_or(default), self.scale());
        for (name, &value) in &self.parameters {
            if !p.parameters.has(name) {
                return Err(Error::Config(format!("unknown key `{name}` for preset {}", p.name)));
            }
            p.parameters.set(name, value).map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(m) = self.method {
            p.method = m;
        }
        if let Some(n) = self.cells {
            p.cells = n;
        }
        if let Some(t) = self.t_end {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("t_end = {t} must be finite and nonnegative")));
            }
            p.t_end = t;
        }
        Ok(p)
    }

    pub fn controller(&self) -> Result<StepController> {
        let mut c = StepController::default();
        if let Some(cfl) = self.cfl {
            if !(cfl > 0.0 && cfl.is_finite()) {
                return Err(Error::Config(format!("cfl = {cfl} must be positive")));
            }
            c.cfl = cfl;
        }
        if let Some(t) = self.tau_max {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("tau_max = {t} must be positive")));
            }
            c.tau_max = t;
        }
        Ok(c)
    }

    pub fn amr_config(&self) -> Result<AmrConfig> {
        let kind = self.monitor.unwrap_or(MonitorKind::Gradient);
        let mut monitor = match kind {
            MonitorKind::Gradient => MonitorSpec::gradient(),
            MonitorKind::VelocityError => MonitorSpec::velocity_error(),
        };
        monitor.c_ref = self.c_ref.unwrap_or(monitor.c_ref);
        monitor.c_coa = self.c_coa.unwrap_or(monitor.c_coa);
        let d = AmrConfig::default();
        let config = AmrConfig {
            monitor,
            n_ref: self.n_ref.unwrap_or(d.n_ref),
            n_coa: self.n_coa.unwrap_or(d.n_coa),
            l_max: self.l_max.unwrap_or(d.l_max),
            smooth: self.smooth.unwrap_or(d.smooth),
            cadence: self.cadence.unwrap_or(d.cadence),
        };
        config.validate()?;
        Ok(config)
    }
}
