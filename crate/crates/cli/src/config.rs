//! JSON experiment configuration. Every field is optional; command-line
//! flags take precedence over values given here.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub trace: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub rwm: RwmSection,
    pub net: NetSection,
    pub transmission_range: Option<f64>,
    pub sample_interval: Option<f64>,
    pub samples: Option<usize>,
    pub split: Option<usize>,
    pub policies: Option<Vec<String>>,
    pub grid: GridSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RwmSection {
    pub v_min: Option<f64>,
    pub v_max: Option<f64>,
    pub pause_max: Option<f64>,
    pub duration: Option<f64>,
    /// `WIDTHxHEIGHT` in metres.
    pub territory: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    pub n_input: Option<usize>,
    pub n_hidden: Option<usize>,
    pub n_feedback: Option<usize>,
    pub horizon: Option<usize>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub series: Option<usize>,
    pub n_input_min: Option<usize>,
    pub n_input_max: Option<usize>,
    pub n_hidden_min: Option<usize>,
    pub n_hidden_max: Option<usize>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_parses() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"seed": 3, "net": {"epochs": 10}, "rwm": {"territory": "500x400"}}"#).unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(cfg.net.epochs, Some(10));
        assert_eq!(cfg.rwm.territory.as_deref(), Some("500x400"));
        assert!(cfg.split.is_none());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sed": 3}"#).is_err());
    }
}
