//! Optional TOML settings file. Every field is a default that a command-line
//! flag overrides; table presets sit below both.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Settings {
    pub seed: Option<u64>,
    pub sigma: Option<f64>,
    #[serde(default)]
    pub metrics: MetricsSettings,
    #[serde(default)]
    pub crps: CrpsSettings,
    #[serde(default)]
    pub attack: AttackSettings,
    #[serde(default)]
    pub reproduce: ReproduceSettings,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSettings {
    pub challenges: Option<usize>,
    pub repeats: Option<usize>,
    pub reference: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrpsSettings {
    pub count: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackSettings {
    pub l: Option<String>,
    pub hidden: Option<Vec<usize>>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub lr: Option<f64>,
    pub trials: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproduceSettings {
    pub instances: Option<usize>,
    pub challenges: Option<usize>,
    pub repeats: Option<usize>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub lr: Option<f64>,
    pub trials: Option<usize>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text)
            .map_err(copuf::Error::from)
            .with_context(|| format!("parsing {}", path.display()))
    }
}
