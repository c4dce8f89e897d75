//! Experiment configuration: a flat JSON object with frequencies in Hz,
//! optionally overridden by `key=value` pairs from the command line.

use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::hilbert::DEFAULT_DIMENSION_CAP;
use crate::model::{BoseHubbardParams, SystemParams};
use crate::protocol::{default_eps_grid, default_u_grid, Frame};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("config is not valid JSON: {0}")]
    Syntax(String),
    #[error("config must be a JSON object of key/value pairs")]
    NotAnObject,
    #[error("override `{0}` must have the form key=value")]
    BadOverride(String),
    #[error("key `{key}`: {message}")]
    Key { key: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    FullJc,
    BoseHubbard,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameChoice {
    Rotating,
    Lab,
}

impl From<FrameChoice> for Frame {
    fn from(f: FrameChoice) -> Self {
        match f {
            FrameChoice::Rotating => Frame::Rotating,
            FrameChoice::Lab => Frame::Lab,
        }
    }
}

/// Every recognised key. Frequencies and rates are plain (not angular) Hz.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub omega0_hz: f64,
    pub delta_hz: f64,
    pub g_hz: f64,
    pub j_hz: f64,
    pub kappa_hz: f64,
    pub gamma_q_hz: f64,
    /// Polariton damping; `(kappa + gamma_q) / 2` when absent.
    pub gamma_p_hz: Option<f64>,
    pub epsilon_hz: f64,
    pub delta_omega0_hz: Vec<f64>,
    pub delta_g_hz: Vec<f64>,

    pub model: ModelChoice,
    /// Bose-Hubbard interaction; derived from the polariton ladder when absent.
    pub u_over_j: Option<f64>,
    pub photon_cutoff: u32,
    pub excitation_cutoff: Option<u32>,
    pub dimension_cap: usize,
    pub tol: f64,
    pub frame: FrameChoice,
    pub dissipation: bool,
    /// Extra trajectory samples inside each pulse segment.
    pub samples_per_segment: usize,

    pub sectors: Vec<u32>,
    /// Clustering tolerance for degeneracies, relative to `g`.
    pub degeneracy_tol_over_g: f64,

    pub eps_over_j_list: Vec<f64>,
    pub u_over_j_grid: Vec<f64>,
    pub sweep_gamma_p_over_j: f64,
    pub gamma_p_over_j_list: Vec<f64>,
    pub eps_over_j_grid: Vec<f64>,
    pub sweep_u_over_j: f64,

    pub delta_g_over_g_list: Vec<f64>,
    pub delta_omega0_over_g_grid: Vec<f64>,

    pub delta_final_over_g: f64,
    pub adiabaticity_ratios: Vec<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            omega0_hz: 10e9,
            delta_hz: 0.0,
            g_hz: 100e6,
            j_hz: 50e6,
            kappa_hz: 10e3,
            gamma_q_hz: 100e3,
            gamma_p_hz: None,
            epsilon_hz: 5e6,
            delta_omega0_hz: Vec::new(),
            delta_g_hz: Vec::new(),
            model: ModelChoice::BoseHubbard,
            u_over_j: None,
            photon_cutoff: 2,
            excitation_cutoff: None,
            dimension_cap: DEFAULT_DIMENSION_CAP,
            tol: 1e-8,
            frame: FrameChoice::Rotating,
            dissipation: true,
            samples_per_segment: 0,
            sectors: vec![0, 1, 2],
            degeneracy_tol_over_g: 1e-9,
            eps_over_j_list: vec![0.02, 0.04, 0.1],
            u_over_j_grid: default_u_grid(),
            sweep_gamma_p_over_j: 2e-4,
            gamma_p_over_j_list: vec![0.0, 2e-4, 2e-3, 0.01],
            eps_over_j_grid: default_eps_grid(),
            sweep_u_over_j: 2.0,
            delta_g_over_g_list: vec![0.1, 0.0, -0.1],
            delta_omega0_over_g_grid: (0..=20).map(|k| -0.1 + 0.01 * k as f64).collect(),
            delta_final_over_g: 10.0,
            adiabaticity_ratios: vec![0.01, 10.0],
        }
    }
}

fn hz(x: f64) -> f64 {
    TAU * x
}

impl ExperimentConfig {
    /// Reads `path` (if any), applies `overrides` and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.display().to_string(),
                source,
            })?,
            None => String::new(),
        };
        Self::parse(&text, overrides)
    }

    /// Parses JSON text (blank means `{}`) with `key=value` overrides. Override
    /// values are read as JSON, falling back to a plain string.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut map = if text.trim().is_empty() {
            Map::new()
        } else {
            match serde_json::from_str::<Value>(text)
                .map_err(|e| ConfigError::Syntax(e.to_string()))?
            {
                Value::Object(m) => m,
                _ => return Err(ConfigError::NotAnObject),
            }
        };
        for item in overrides {
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| ConfigError::BadOverride(item.clone()))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(ConfigError::BadOverride(item.clone()));
            }
            let value = serde_json::from_str(raw.trim())
                .unwrap_or_else(|_| Value::String(raw.trim().to_string()));
            map.insert(key.to_string(), value);
        }
        let de = Value::Object(map);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let message = e.into_inner().to_string();
            match message.strip_prefix("unknown field ") {
                Some(rest) => ConfigError::Key {
                    key: rest.split('`').nth(1).unwrap_or(&key).to_string(),
                    message: "unknown key".into(),
                },
                None => ConfigError::Key { key, message },
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("omega0_hz", self.omega0_hz),
            ("j_hz", self.j_hz),
            ("tol", self.tol),
        ];
        for (key, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ConfigError::Key {
                    key: key.into(),
                    message: format!("must be finite and positive, got {v}"),
                });
            }
        }
        let non_negative = [
            ("g_hz", self.g_hz),
            ("kappa_hz", self.kappa_hz),
            ("gamma_q_hz", self.gamma_q_hz),
            ("epsilon_hz", self.epsilon_hz),
            ("gamma_p_hz", self.gamma_p_hz.unwrap_or(0.0)),
            ("degeneracy_tol_over_g", self.degeneracy_tol_over_g),
            ("sweep_gamma_p_over_j", self.sweep_gamma_p_over_j),
        ];
        for (key, v) in non_negative {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ConfigError::Key {
                    key: key.into(),
                    message: format!("must be finite and non-negative, got {v}"),
                });
            }
        }
        if !self.delta_hz.is_finite() {
            return Err(ConfigError::Key {
                key: "delta_hz".into(),
                message: "must be finite".into(),
            });
        }
        for (key, v) in [
            ("delta_omega0_hz", &self.delta_omega0_hz),
            ("delta_g_hz", &self.delta_g_hz),
        ] {
            if !v.is_empty() && v.len() != 4 {
                return Err(ConfigError::Key {
                    key: key.into(),
                    message: format!("needs 4 entries, got {}", v.len()),
                });
            }
        }
        if self.photon_cutoff == 0 {
            return Err(ConfigError::Key {
                key: "photon_cutoff".into(),
                message: "must be at least 1".into(),
            });
        }
        let lists = [
            ("eps_over_j_list", &self.eps_over_j_list),
            ("eps_over_j_grid", &self.eps_over_j_grid),
            ("adiabaticity_ratios", &self.adiabaticity_ratios),
        ];
        for (key, v) in lists {
            if v.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
                return Err(ConfigError::Key {
                    key: key.into(),
                    message: "entries must be finite and positive".into(),
                });
            }
        }
        if self.gamma_p_over_j_list.iter().any(|x| !(*x >= 0.0)) {
            return Err(ConfigError::Key {
                key: "gamma_p_over_j_list".into(),
                message: "entries must be non-negative".into(),
            });
        }
        Ok(())
    }

    /// Non-fatal sanity notes on the physical parameters.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = self.system_params().warnings();
        if self.epsilon_hz > self.j_hz {
            out.push(format!(
                "epsilon ({:e} Hz) exceeds J ({:e} Hz)",
                self.epsilon_hz, self.j_hz
            ));
        } else if self.epsilon_hz > 0.2 * self.j_hz {
            out.push(format!(
                "epsilon/J = {:.3} is above J/5; off-resonant leakage grows",
                self.epsilon_hz / self.j_hz
            ));
        }
        out
    }

    /// Lattice parameters in rad/s.
    pub fn system_params(&self) -> SystemParams {
        SystemParams {
            omega0: hz(self.omega0_hz),
            delta: hz(self.delta_hz),
            g: hz(self.g_hz),
            hopping: hz(self.j_hz),
            kappa: hz(self.kappa_hz),
            gamma_q: hz(self.gamma_q_hz),
            delta_omega0: self.delta_omega0_hz.iter().map(|&x| hz(x)).collect(),
            delta_g: self.delta_g_hz.iter().map(|&x| hz(x)).collect(),
        }
    }

    pub fn epsilon(&self) -> f64 {
        hz(self.epsilon_hz)
    }

    /// Lower-polariton Bose-Hubbard parameters, with the `u_over_j` and
    /// `gamma_p_hz` overrides applied.
    pub fn bose_hubbard_params(&self) -> crate::error::Result<BoseHubbardParams> {
        let params = self.system_params();
        let mut bh = BoseHubbardParams::from_system(&params)?;
        if let Some(u) = self.u_over_j {
            bh.interaction = u * params.hopping;
        }
        if let Some(gp) = self.gamma_p_hz {
            bh.gamma_p = hz(gp);
        }
        Ok(bh)
    }
}
