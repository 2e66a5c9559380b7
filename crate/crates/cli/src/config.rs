//! Run configuration: one strict JSON document drives every command.
//! Unknown keys are rejected so sweep-config typos fail loudly instead of
//! silently running defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use oscmodes::clustering::GmmOptions;
use oscmodes::error::{Error, Result};
use oscmodes::synthgen::SynthConfig;
use oscmodes::vae::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyParams {
    /// Consecutive cycles pooled into one query distribution.
    pub group_size: usize,
}

impl Default for ClassifyParams {
    fn default() -> Self {
        ClassifyParams { group_size: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClusterMethod {
    #[serde(rename = "gmm-dtw")]
    GmmDtw,
    #[serde(rename = "gmm")]
    Gmm,
    #[serde(rename = "kshape")]
    KShape,
}

impl ClusterMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ClusterMethod::GmmDtw => "gmm-dtw",
            ClusterMethod::Gmm => "gmm",
            ClusterMethod::KShape => "kshape",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gmm-dtw" => Ok(ClusterMethod::GmmDtw),
            "gmm" => Ok(ClusterMethod::Gmm),
            "kshape" => Ok(ClusterMethod::KShape),
            other => Err(Error::Data(format!(
                "unknown cluster method {other:?} (expected gmm-dtw, gmm, or kshape)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterParams {
    pub method: ClusterMethod,
    /// Cluster count; `None` uses the number of modes in the manifest.
    pub k: Option<usize>,
    /// DTW-feature compaction dimensions; `None` means min(8, n − 1).
    pub pca_dims: Option<usize>,
    /// Feed raw DTW rows to the mixture instead of compacting.
    pub raw_features: bool,
    pub gmm_tol: f64,
    pub gmm_max_iter: usize,
    pub gmm_reg: f64,
    pub kshape_max_iter: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        let gmm = GmmOptions::default();
        ClusterParams {
            method: ClusterMethod::GmmDtw,
            k: None,
            pca_dims: None,
            raw_features: false,
            gmm_tol: gmm.tol,
            gmm_max_iter: gmm.max_iter,
            gmm_reg: gmm.reg,
            kshape_max_iter: 100,
        }
    }
}

impl ClusterParams {
    pub fn gmm_options(&self) -> GmmOptions {
        GmmOptions { tol: self.gmm_tol, max_iter: self.gmm_max_iter, reg: self.gmm_reg }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaParams {
    pub k_max: usize,
}

impl Default for PcaParams {
    fn default() -> Self {
        PcaParams { k_max: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivityParams {
    pub batch_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
}

impl Default for SensitivityParams {
    fn default() -> Self {
        SensitivityParams {
            batch_sizes: vec![16, 32, 64, 128],
            learning_rates: vec![1e-4, 5e-4, 1e-3, 5e-3],
        }
    }
}

/// The full run configuration; every command reads the sections it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub classify: ClassifyParams,
    pub cluster: ClusterParams,
    pub pca: PcaParams,
    pub sensitivity: SensitivityParams,
    /// Fixed oscillation period in samples; `None` estimates it from the
    /// dominant spectral peak of the first training matrix.
    pub period: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("config {}: {e}", path.display())))?;
        config.synth.validate()?;
        config.train.validate()?;
        Ok(config)
    }

    /// Apply the `--seed` override: one master seed drives both the
    /// generator and the training stream.
    pub fn override_seed(&mut self, seed: Option<u64>) {
        if let Some(seed) = seed {
            self.synth.seed = seed;
            self.train.seed = seed;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn default_config_round_trips() {
        let config = RunConfig::default();
        let json = serde_json::to_string_pretty(&config).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(br#"{"synth": {"flames": 2}, "typo_key": 1}"#).unwrap();
        let err = RunConfig::load(f.path()).unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
        assert!(err.to_string().contains("typo_key"), "{err}");
    }

    #[test]
    fn nested_unknown_keys_are_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(br#"{"train": {"batchsize": 32}}"#).unwrap();
        assert!(RunConfig::load(f.path()).is_err());
    }

    #[test]
    fn partial_config_fills_defaults() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(br#"{"synth": {"flames": 3, "seed": 9}}"#).unwrap();
        let config = RunConfig::load(f.path()).unwrap();
        assert_eq!(config.synth.flames, 3);
        assert_eq!(config.synth.seed, 9);
        assert_eq!(config.train.batch_size, 64);
        assert_eq!(config.cluster.method, ClusterMethod::GmmDtw);
    }
}
