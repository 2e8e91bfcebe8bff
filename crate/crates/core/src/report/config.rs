use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ReportError;
use crate::detect::{AutoencoderConfig, IForestConfig, LofConfig, Normalization};
use crate::features::NGramParams;
use crate::preprocess::PreprocessConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderSettings {
    /// One model is trained per rate.
    pub rates: Vec<f64>,
    pub epochs: usize,
    pub minibatch: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Scores above this multiple of the score RMS are flagged.
    pub rms_multiplier: f64,
}

impl Default for AutoencoderSettings {
    fn default() -> Self {
        AutoencoderSettings {
            rates: vec![0.25, 0.5, 0.75],
            epochs: 5,
            minibatch: 1024,
            learning_rate: 0.01,
            seed: 0,
            rms_multiplier: 3.0,
        }
    }
}

impl AutoencoderSettings {
    pub fn model(&self, rate: f64) -> AutoencoderConfig {
        AutoencoderConfig {
            compression_rate: rate,
            epochs: self.epochs,
            minibatch: self.minibatch,
            learning_rate: self.learning_rate,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompilerInducedConfig {
    pub delta: f64,
    pub normalization: Normalization,
}

impl Default for CompilerInducedConfig {
    fn default() -> Self {
        CompilerInducedConfig { delta: 0.8, normalization: Normalization::Max }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportSettings {
    /// Longest source excerpt, in lines, before truncation.
    pub excerpt_lines: usize,
}

impl Default for ReportSettings {
    fn default() -> Self {
        ReportSettings { excerpt_lines: 60 }
    }
}

/// Every tunable value of a pipeline run. Missing sections and fields take
/// their defaults; unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub tree_ngrams: NGramParams,
    pub bytecode_ngrams: NGramParams,
    pub preprocess: PreprocessConfig,
    pub lof: LofConfig,
    pub iforest: IForestConfig,
    pub autoencoder: AutoencoderSettings,
    pub compiler_induced: CompilerInducedConfig,
    pub report: ReportSettings,
}

impl PipelineConfig {
    /// Reads TOML, or JSON when the file name ends in `.json`.
    pub fn load(path: &Path) -> Result<PipelineConfig, ReportError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ReportError::Config(format!("{}: {e}", path.display())))?;
        let config: PipelineConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| ReportError::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| ReportError::Config(format!("{}: {e}", path.display())))?
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ReportError> {
        let fail = |m: String| Err(ReportError::Config(m));
        for c in [self.lof.contamination, self.iforest.contamination] {
            if !(c > 0.0 && c <= 0.5) {
                return fail(format!("contamination must be in (0, 0.5], got {c}"));
            }
        }
        if self.lof.n_neighbors == 0 {
            return fail("lof.n_neighbors must be positive".into());
        }
        if self.iforest.n_estimators == 0 || self.iforest.subsample == 0 {
            return fail("iforest.n_estimators and iforest.subsample must be positive".into());
        }
        for p in [&self.tree_ngrams, &self.bytecode_ngrams] {
            if p.n_max == 0 || p.window < p.n_max {
                return fail(format!("need 1 <= n_max <= window, got n_max {} window {}", p.n_max, p.window));
            }
            if !(p.max_df_ratio > 0.0 && p.max_df_ratio <= 1.0) {
                return fail(format!("max_df_ratio must be in (0, 1], got {}", p.max_df_ratio));
            }
        }
        if self.autoencoder.rates.is_empty() {
            return fail("autoencoder.rates must not be empty".into());
        }
        for &rate in &self.autoencoder.rates {
            self.autoencoder.model(rate).validate().map_err(|e| ReportError::Config(e.to_string()))?;
        }
        if self.autoencoder.rms_multiplier.is_nan() || self.autoencoder.rms_multiplier <= 0.0 {
            return fail("autoencoder.rms_multiplier must be positive".into());
        }
        if self.compiler_induced.delta.is_nan() || self.compiler_induced.delta < 0.0 {
            return fail("compiler_induced.delta must be non-negative".into());
        }
        if self.report.excerpt_lines == 0 {
            return fail("report.excerpt_lines must be positive".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).unwrap_or_default()
    }
}
