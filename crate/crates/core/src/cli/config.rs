//! JSON config files and list/range parsing for the CLI.

use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context};
use serde::Deserialize;

use crate::experiments::Snr;
use crate::init::InitConfig;
use crate::sensing::ModelKind;
use crate::solver::{SolverConfig, WeightScheme};

/// Top-level config file. Every key is optional; unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: Option<ModelKind>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub masks: Option<usize>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub snr: Option<String>,
    pub threshold: Option<f64>,
    pub ratios: Option<RatioList>,
    pub snrs: Option<Vec<Snr>>,
    pub mn: Option<Vec<f64>>,
    #[serde(default)]
    pub init: InitOverrides,
    #[serde(default)]
    pub solver: SolverOverrides,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Ratios given either as a JSON array or as a range string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RatioList {
    Values(Vec<f64>),
    Text(String),
}

impl RatioList {
    pub fn resolve(&self) -> anyhow::Result<Vec<f64>> {
        match self {
            RatioList::Values(v) => Ok(v.clone()),
            RatioList::Text(t) => parse_ratios(t),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitOverrides {
    pub subset_fraction: Option<f64>,
    pub gamma: Option<f64>,
    pub power_iters: Option<usize>,
    pub eig_tol: Option<f64>,
}

impl InitOverrides {
    pub fn apply(&self, cfg: &mut InitConfig) {
        if let Some(v) = self.subset_fraction {
            cfg.subset_fraction = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = self.power_iters {
            cfg.power_iters = v;
        }
        if let Some(v) = self.eig_tol {
            cfg.eig_tol = v;
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    pub step_size: Option<f64>,
    pub weight_scheme: Option<WeightScheme>,
    pub max_iters: Option<usize>,
    pub stop_tol: Option<f64>,
    pub trace_distance: Option<bool>,
}

impl SolverOverrides {
    pub fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(v) = self.step_size {
            cfg.step_size = v;
        }
        if let Some(v) = self.weight_scheme {
            cfg.weight_scheme = v;
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.stop_tol {
            cfg.stop_tol = v;
        }
        if let Some(v) = self.trace_distance {
            cfg.trace_distance = v;
        }
    }
}

/// Parses `start:stop:step` (stop included up to 1e-9) or a comma list.
pub fn parse_ratios(text: &str) -> anyhow::Result<Vec<f64>> {
    let parts: Vec<&str> = text.split(':').collect();
    let values = match parts.as_slice() {
        [start, stop, step] => {
            let start: f64 = start
                .trim()
                .parse()
                .with_context(|| format!("bad range start in '{text}'"))?;
            let stop: f64 = stop
                .trim()
                .parse()
                .with_context(|| format!("bad range stop in '{text}'"))?;
            let step: f64 = step
                .trim()
                .parse()
                .with_context(|| format!("bad range step in '{text}'"))?;
            if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
                bail!("range '{text}' needs finite start ≤ stop and step > 0");
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| start + i as f64 * step).collect()
        }
        [_] => parse_list::<f64>(text)?,
        _ => bail!("expected 'start:stop:step' or a comma list, got '{text}'"),
    };
    if values.is_empty() || values.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        bail!("ratios must be positive and finite, got '{text}'");
    }
    Ok(values)
}

pub fn parse_list<T>(text: &str) -> anyhow::Result<Vec<T>>
where
    T: FromStr,
    T::Err: std::fmt::Display,
{
    let items: Vec<T> = text
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|e| anyhow::anyhow!("invalid list item '{}': {e}", s.trim()))
        })
        .collect::<anyhow::Result<_>>()?;
    if items.is_empty() {
        bail!("empty list");
    }
    Ok(items)
}
