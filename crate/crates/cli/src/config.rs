//! JSON parameter files.
//!
//! Frequencies are given as f = ω/2π in Hz, angles in degrees. Conversion to
//! the library's rad/s happens once, here.

use std::collections::BTreeMap;
use std::path::Path;

use optospec_core::fitting::{FitConfig, FitParam};
use optospec_core::model::{angle_from_couplings, hz, to_hz, FrequencyGrid, GAMMA_FLOOR};
use optospec_core::oracle::welch::hop_length;
use optospec_core::oracle::{SimConfig, Window};
use optospec_core::{presets, Error as CoreError, ParamsBuilder, SystemParams};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

const TOP_KEYS: &[&str] = &[
    "kappa_hz",
    "delta_hz",
    "omega_x_hz",
    "omega_y_hz",
    "gamma_x_hz",
    "gamma_y_hz",
    "Gamma_x_hz",
    "Gamma_y_hz",
    "g_max_hz",
    "theta_deg",
    "g_x_hz",
    "g_y_hz",
    "eta",
    "grid",
    "sim",
    "fit",
];
const GRID_KEYS: &[&str] = &["f_min_hz", "f_max_hz", "points"];
const SIM_KEYS: &[&str] = &[
    "dt_s",
    "duration_s",
    "segments",
    "segment_length",
    "overlap",
    "window",
    "burn_in_s",
    "noise",
    "initial",
    "trajectories",
    "seed",
];
const FIT_KEYS: &[&str] = &["free", "per_panel", "bounds", "max_iterations", "tolerance"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub kappa_hz: f64,
    pub delta_hz: f64,
    pub omega_x_hz: f64,
    pub omega_y_hz: f64,
    #[serde(default = "default_gamma_hz")]
    pub gamma_x_hz: f64,
    #[serde(default = "default_gamma_hz")]
    pub gamma_y_hz: f64,
    #[serde(rename = "Gamma_x_hz")]
    pub decoherence_x_hz: f64,
    #[serde(rename = "Gamma_y_hz")]
    pub decoherence_y_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_max_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_deg: Option<f64>,
    /// Alternative to (g_max_hz, theta_deg).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_x_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_y_hz: Option<f64>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSection>,
}

fn default_gamma_hz() -> f64 {
    to_hz(GAMMA_FLOOR)
}

fn default_eta() -> f64 {
    presets::DEFAULT_ETA
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub points: usize,
}

impl GridSpec {
    /// Evenly spaced frequencies in Hz, written out verbatim.
    pub fn frequencies_hz(&self) -> Vec<f64> {
        let span = self.f_max_hz - self.f_min_hz;
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| self.f_min_hz + span * i as f64 / last)
            .collect()
    }

    pub fn build(&self) -> Result<(Vec<f64>, FrequencyGrid), CliError> {
        if self.points < 2 {
            return Err(CliError::config("grid.points", "need at least 2 points"));
        }
        if !(self.f_min_hz.is_finite() && self.f_max_hz.is_finite() && self.f_max_hz > self.f_min_hz) {
            return Err(CliError::config("grid.f_max_hz", "must exceed f_min_hz"));
        }
        let f = self.frequencies_hz();
        let grid = FrequencyGrid::new(f.iter().map(|&f| hz(f)).collect())
            .map_err(|e| CliError::config("grid", e.to_string()))?;
        Ok((f, grid))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    /// Total Welch segments; sets the duration when `duration_s` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segment_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Window>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<[f64; 6]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectories: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub const DEFAULT_SEGMENTS: usize = 200;
pub const DEFAULT_SEGMENT_LENGTH: usize = 1 << 14;

impl SimSection {
    /// Concrete simulator settings. `seed` overrides the file's seed.
    pub fn resolve(&self, p: &SystemParams, seed: Option<u64>) -> Result<SimConfig, CliError> {
        let seed = seed.or(self.seed).unwrap_or(0);
        let segment = self.segment_length.unwrap_or(DEFAULT_SEGMENT_LENGTH);
        let segments = self.segments.unwrap_or(DEFAULT_SEGMENTS);
        let mut cfg = SimConfig::for_segments(p, segments, segment, seed);
        if let Some(dt) = self.dt_s {
            cfg.dt = dt;
        }
        if let Some(o) = self.overlap {
            cfg.overlap = o;
        }
        cfg.trajectories = self.trajectories.unwrap_or(1);
        cfg.duration = match self.duration_s {
            Some(d) => d,
            None => {
                let n = cfg.trajectories.max(1);
                let per_traj = segments.div_ceil(n);
                let samples = segment + per_traj.saturating_sub(1) * hop_length(segment, cfg.overlap);
                (samples * n) as f64 * cfg.dt
            }
        };
        cfg.window = self.window.unwrap_or_default();
        cfg.burn_in = self.burn_in_s;
        cfg.noise = self.noise.unwrap_or(true);
        cfg.initial = self.initial;
        cfg.validate(p).map_err(|e| CliError::config("sim", e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FitSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free: Option<Vec<FitParam>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_panel: Option<Vec<FitParam>>,
    /// Bounds in display units: Hz for rates, degrees for θ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BTreeMap<FitParam, [f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

/// Display units of a fit parameter: Hz for rates, degrees for θ.
pub fn to_display(param: FitParam, v: f64) -> f64 {
    match param {
        FitParam::Theta => v.to_degrees(),
        FitParam::Eta => v,
        _ => to_hz(v),
    }
}

pub fn from_display(param: FitParam, v: f64) -> f64 {
    match param {
        FitParam::Theta => v.to_radians(),
        FitParam::Eta => v,
        _ => hz(v),
    }
}

/// Config key a fit parameter corresponds to.
pub fn display_name(param: FitParam) -> String {
    match param {
        FitParam::Theta => "theta_deg".into(),
        FitParam::Eta => "eta".into(),
        p => format!("{}_hz", p.name()),
    }
}

impl FitSection {
    pub fn resolve(&self) -> Result<FitConfig, CliError> {
        let mut cfg = FitConfig::default();
        if let Some(f) = &self.free {
            cfg.free = f.clone();
        }
        if let Some(f) = &self.per_panel {
            cfg.per_panel = f.clone();
        }
        if let Some(b) = &self.bounds {
            for (&param, &[lo, hi]) in b {
                cfg.bounds
                    .insert(param, (from_display(param, lo), from_display(param, hi)));
            }
        }
        if let Some(n) = self.max_iterations {
            cfg.max_iterations = n;
        }
        if let Some(t) = self.tolerance {
            cfg.tolerance = t;
        }
        cfg.validate().map_err(|e| CliError::config("fit", e.to_string()))?;
        Ok(cfg)
    }
}

/// Map a library parameter name onto the config key the user wrote.
fn config_key(field: &str) -> String {
    match field {
        "theta" => "theta_deg".into(),
        "eta" => "eta".into(),
        f => format!("{f}_hz"),
    }
}

impl ConfigFile {
    pub fn load(path: &Path, allow_unknown: bool) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, allow_unknown)
    }

    pub fn parse(text: &str, allow_unknown: bool) -> Result<Self, CliError> {
        let mut value: Value = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("malformed JSON: {e}")))?;
        let Some(top) = value.as_object_mut() else {
            return Err(CliError::Config("config must be a JSON object".into()));
        };
        prune(top, "", TOP_KEYS, allow_unknown)?;
        for (section, keys) in [("grid", GRID_KEYS), ("sim", SIM_KEYS), ("fit", FIT_KEYS)] {
            if let Some(obj) = top.get_mut(section).and_then(Value::as_object_mut) {
                prune(obj, section, keys, allow_unknown)?;
            }
        }
        serde_path_to_error::deserialize(value).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                CliError::Config(inner.to_string())
            } else {
                CliError::config(&path, inner.to_string())
            }
        })
    }

    pub fn params(&self) -> Result<SystemParams, CliError> {
        let (g_max, theta) = match (self.g_max_hz, self.theta_deg, self.g_x_hz, self.g_y_hz) {
            (Some(g), Some(t), None, None) => (hz(g), t.to_radians()),
            (None, None, Some(gx), Some(gy)) => {
                angle_from_couplings(hz(gx), hz(gy), hz(self.omega_x_hz), hz(self.omega_y_hz))
                    .map_err(|e| CliError::config("g_x_hz", e.to_string()))?
            }
            (Some(_), None, None, None) => {
                return Err(CliError::config("theta_deg", "missing"));
            }
            (None, Some(_), None, None) | (None, None, None, None) => {
                return Err(CliError::config("g_max_hz", "missing"));
            }
            (None, None, Some(_), None) => return Err(CliError::config("g_y_hz", "missing")),
            (None, None, None, Some(_)) => return Err(CliError::config("g_x_hz", "missing")),
            _ => {
                return Err(CliError::config(
                    "g_x_hz",
                    "give either g_max_hz and theta_deg or g_x_hz and g_y_hz, not both",
                ))
            }
        };
        ParamsBuilder {
            kappa: hz(self.kappa_hz),
            delta: hz(self.delta_hz),
            omega_x: hz(self.omega_x_hz),
            omega_y: hz(self.omega_y_hz),
            gamma_x: hz(self.gamma_x_hz),
            gamma_y: hz(self.gamma_y_hz),
            decoherence_x: hz(self.decoherence_x_hz),
            decoherence_y: hz(self.decoherence_y_hz),
            g_max,
            theta,
            eta: self.eta,
        }
        .build()
        .map_err(|e| match e {
            CoreError::InvalidParameter { field, reason } => CliError::config(&config_key(field), reason),
            other => CliError::Config(other.to_string()),
        })
    }

    /// The same operating point written back out with every parameter explicit.
    pub fn resolved(&self, p: &SystemParams) -> ResolvedConfig {
        // Keep the numbers as typed unless the library changed them (floors,
        // fitted estimates), so the record does not pick up unit round-off.
        let rate = |typed: f64, actual: f64| if hz(typed) == actual { typed } else { to_hz(actual) };
        let (g_max_hz, theta_deg) = match (self.g_max_hz, self.theta_deg) {
            (Some(g), Some(t)) if hz(g) == p.g_max() && t.to_radians() == p.theta() => (g, t),
            _ => (to_hz(p.g_max()), p.theta().to_degrees()),
        };
        let c = p.couplings();
        ResolvedConfig {
            kappa_hz: rate(self.kappa_hz, p.kappa()),
            delta_hz: rate(self.delta_hz, p.delta()),
            omega_x_hz: rate(self.omega_x_hz, p.omega_x()),
            omega_y_hz: rate(self.omega_y_hz, p.omega_y()),
            gamma_x_hz: rate(self.gamma_x_hz, p.gamma_x()),
            gamma_y_hz: rate(self.gamma_y_hz, p.gamma_y()),
            decoherence_x_hz: rate(self.decoherence_x_hz, p.decoherence_x()),
            decoherence_y_hz: rate(self.decoherence_y_hz, p.decoherence_y()),
            g_max_hz,
            theta_deg,
            eta: p.eta(),
            derived: Derived {
                g_x_hz: to_hz(c.g_x),
                g_y_hz: to_hz(c.g_y),
                g_b_hz: to_hz(c.g_b),
                omega_b_hz: to_hz(c.omega_b),
                omega_d_hz: to_hz(c.omega_d),
            },
            grid: self.grid,
            sim: self.sim.clone(),
            fit: self.fit.clone(),
        }
    }
}

fn prune(
    obj: &mut Map<String, Value>,
    section: &str,
    known: &[&str],
    allow_unknown: bool,
) -> Result<(), CliError> {
    let unknown: Vec<String> = obj
        .keys()
        .filter(|k| !known.contains(&k.as_str()))
        .cloned()
        .collect();
    for key in unknown {
        let path = if section.is_empty() {
            key.clone()
        } else {
            format!("{section}.{key}")
        };
        if !allow_unknown {
            return Err(CliError::config(&path, "unknown key"));
        }
        log::warn!("ignoring unknown config key `{path}`");
        obj.remove(&key);
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Derived {
    pub g_x_hz: f64,
    pub g_y_hz: f64,
    pub g_b_hz: f64,
    pub omega_b_hz: f64,
    pub omega_d_hz: f64,
}

/// Fully explicit parameter set recorded next to every output.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub kappa_hz: f64,
    pub delta_hz: f64,
    pub omega_x_hz: f64,
    pub omega_y_hz: f64,
    pub gamma_x_hz: f64,
    pub gamma_y_hz: f64,
    #[serde(rename = "Gamma_x_hz")]
    pub decoherence_x_hz: f64,
    #[serde(rename = "Gamma_y_hz")]
    pub decoherence_y_hz: f64,
    pub g_max_hz: f64,
    pub theta_deg: f64,
    pub eta: f64,
    pub derived: Derived,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSection>,
}
