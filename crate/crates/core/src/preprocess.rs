//! Standardization and principal component analysis of dense vectors.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureMeta, FeatureSet, FeatureVector, CATALOG};

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("need at least {needed} vectors, got {got}")]
    TooFewVectors { needed: usize, got: usize },
    #[error("expected dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("all points are identical; covariance is zero")]
    DegenerateCovariance,
    #[error("k must be in 1..={max}, got {k}")]
    InvalidK { k: usize, max: usize },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

fn check_dims(vectors: &[Vec<f64>], dim: usize) -> Result<(), PreprocessError> {
    match vectors.iter().find(|v| v.len() != dim) {
        Some(v) => Err(PreprocessError::DimensionMismatch { expected: dim, found: v.len() }),
        None => Ok(()),
    }
}

/// Per-dimension standardization with population standard deviation.
/// Zero-variance dimensions map to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Dimensions passed through unchanged.
    #[serde(default)]
    pub passthrough: Vec<usize>,
}

impl Scaler {
    pub fn fit(vectors: &[Vec<f64>]) -> Result<Scaler, PreprocessError> {
        Scaler::fit_with(vectors, &[])
    }

    /// Fits, leaving the listed dimensions untouched by the transform.
    pub fn fit_with(vectors: &[Vec<f64>], passthrough: &[usize]) -> Result<Scaler, PreprocessError> {
        if vectors.len() < 2 {
            return Err(PreprocessError::TooFewVectors { needed: 2, got: vectors.len() });
        }
        let dim = vectors[0].len();
        check_dims(vectors, dim)?;
        let n = vectors.len() as f64;
        let mut mean = vec![0.0; dim];
        for v in vectors {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for v in vectors {
            for ((s, x), m) in var.iter_mut().zip(v).zip(&mean) {
                *s += (x - m) * (x - m);
            }
        }
        let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
        let mut passthrough = passthrough.to_vec();
        passthrough.sort_unstable();
        passthrough.dedup();
        Ok(Scaler { mean, std, passthrough })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    pub fn transform(&self, vector: &[f64]) -> Result<Vec<f64>, PreprocessError> {
        if vector.len() != self.dimension() {
            return Err(PreprocessError::DimensionMismatch { expected: self.dimension(), found: vector.len() });
        }
        Ok(vector
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                if self.passthrough.binary_search(&i).is_ok() {
                    x
                } else if self.std[i] > 0.0 {
                    (x - self.mean[i]) / self.std[i]
                } else {
                    0.0
                }
            })
            .collect())
    }

    pub fn transform_all(&self, vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, PreprocessError> {
        vectors.par_iter().map(|v| self.transform(v)).collect()
    }
}

/// Principal components of the population covariance, sorted by
/// decreasing variance, each oriented so its largest-magnitude entry is
/// non-negative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub k: usize,
    pub mean: Vec<f64>,
    /// k rows of unit-length directions.
    pub components: Vec<Vec<f64>>,
    /// Eigenvalues of all components, descending.
    pub eigenvalues: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
}

impl PcaModel {
    pub fn fit(vectors: &[Vec<f64>], k: usize) -> Result<PcaModel, PreprocessError> {
        let n = vectors.len();
        if n == 0 {
            return Err(PreprocessError::TooFewVectors { needed: 1, got: 0 });
        }
        let dim = vectors[0].len();
        check_dims(vectors, dim)?;
        let max = dim.min(n);
        if k == 0 || k > max {
            return Err(PreprocessError::InvalidK { k, max });
        }
        let mut mean = vec![0.0; dim];
        for v in vectors {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let centered = DMatrix::from_fn(n, dim, |r, c| vectors[r][c] - mean[c]);
        let covariance = (centered.transpose() * &centered) / n as f64;
        let total: f64 = covariance.diagonal().iter().sum();
        if total <= 0.0 {
            return Err(PreprocessError::DegenerateCovariance);
        }
        let eigen = SymmetricEigen::new(covariance);
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]).then(a.cmp(&b)));
        let eigenvalues: Vec<f64> = order.iter().map(|&i| eigen.eigenvalues[i].max(0.0)).collect();
        let components: Vec<Vec<f64>> = order[..k]
            .iter()
            .map(|&i| {
                let mut c: Vec<f64> = eigen.eigenvectors.column(i).iter().copied().collect();
                let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
                c.iter_mut().for_each(|x| *x /= norm);
                canonicalize_sign(&mut c);
                c
            })
            .collect();
        let explained_variance_ratio = eigenvalues[..k].iter().map(|l| l / total).collect();
        Ok(PcaModel { k, mean, components, eigenvalues, explained_variance_ratio })
    }

    pub fn cumulative_explained_variance(&self) -> f64 {
        self.explained_variance_ratio.iter().sum()
    }

    pub fn transform(&self, vector: &[f64]) -> Result<Vec<f64>, PreprocessError> {
        if vector.len() != self.mean.len() {
            return Err(PreprocessError::DimensionMismatch { expected: self.mean.len(), found: vector.len() });
        }
        Ok(self
            .components
            .iter()
            .map(|c| c.iter().zip(vector).zip(&self.mean).map(|((w, x), m)| w * (x - m)).sum())
            .collect())
    }

    pub fn transform_all(&self, vectors: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, PreprocessError> {
        vectors.par_iter().map(|v| self.transform(v)).collect()
    }
}

/// Flips `v` so that its entry of largest magnitude (first on ties) is
/// non-negative.
pub fn canonicalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub const MODEL_VERSION: u32 = 1;

/// The fitted transforms, stored next to the transformed vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessModel {
    pub version: u32,
    pub scaler: Scaler,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pca: Option<PcaModel>,
}

impl PreprocessModel {
    pub fn transform(&self, vector: &[f64]) -> Result<Vec<f64>, PreprocessError> {
        let scaled = self.scaler.transform(vector)?;
        match &self.pca {
            Some(pca) => pca.transform(&scaled),
            None => Ok(scaled),
        }
    }
}

pub fn model_path(vectors: &Path) -> PathBuf {
    let mut name = vectors.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".model.json");
    vectors.with_file_name(name)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    /// Components kept; 0 disables PCA.
    pub pca_k: usize,
    /// Whether binary metrics are standardized like quantitative ones.
    pub scale_binary: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig { pca_k: 20, scale_binary: true }
    }
}

/// Scales and projects a dense feature set.
pub fn preprocess(set: &FeatureSet, config: &PreprocessConfig) -> Result<(FeatureSet, PreprocessModel), PreprocessError> {
    let dense = set.dense();
    let passthrough: Vec<usize> = if config.scale_binary || set.meta.dimension != CATALOG.len() {
        Vec::new()
    } else {
        CATALOG.iter().enumerate().filter(|(_, m)| m.binary).map(|(i, _)| i).collect()
    };
    let scaler = Scaler::fit_with(&dense, &passthrough)?;
    let scaled = scaler.transform_all(&dense)?;
    let (pca, output) = if config.pca_k > 0 {
        let pca = PcaModel::fit(&scaled, config.pca_k)?;
        let projected = pca.transform_all(&scaled)?;
        (Some(pca), projected)
    } else {
        (None, scaled)
    };
    let dimension = output.first().map_or(0, Vec::len);
    let out = FeatureSet {
        meta: FeatureMeta { dimension, count: output.len(), vocabulary: None, ..set.meta.clone() },
        unit_ids: set.unit_ids.clone(),
        vectors: output.into_iter().map(FeatureVector::Dense).collect(),
    };
    Ok((out, PreprocessModel { version: MODEL_VERSION, scaler, pca }))
}

impl PreprocessModel {
    pub fn save(&self, path: &Path) -> Result<(), PreprocessError> {
        let io = |e: &dyn std::fmt::Display| PreprocessError::Io { path: path.display().to_string(), message: e.to_string() };
        let json = serde_json::to_string_pretty(self).map_err(|e| io(&e))?;
        fs::write(path, json + "\n").map_err(|e| io(&e))
    }

    pub fn load(path: &Path) -> Result<PreprocessModel, PreprocessError> {
        let io = |e: &dyn std::fmt::Display| PreprocessError::Io { path: path.display().to_string(), message: e.to_string() };
        let text = fs::read_to_string(path).map_err(|e| io(&e))?;
        let model: PreprocessModel = serde_json::from_str(&text).map_err(|e| io(&e))?;
        if model.version != MODEL_VERSION {
            return Err(io(&format!("unsupported model version {}", model.version)));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaler_examples() {
        let data = vec![vec![0.0, 5.0, 1.0], vec![2.0, 5.0, 0.0]];
        let scaler = Scaler::fit(&data).unwrap();
        assert_eq!(scaler.transform(&data[0]).unwrap(), [-1.0, 0.0, 1.0]);
        assert_eq!(scaler.transform(&data[1]).unwrap(), [1.0, 0.0, -1.0]);
        assert!(matches!(scaler.transform(&[1.0]), Err(PreprocessError::DimensionMismatch { .. })));
        assert!(matches!(Scaler::fit(&data[..1]), Err(PreprocessError::TooFewVectors { .. })));
        let kept = Scaler::fit_with(&data, &[2]).unwrap();
        assert_eq!(kept.transform(&data[0]).unwrap(), [-1.0, 0.0, 1.0]);
        assert_eq!(kept.transform(&[0.0, 0.0, 7.0]).unwrap()[2], 7.0);
    }

    #[test]
    fn rank_one_pca() {
        let data: Vec<Vec<f64>> = (0..10).map(|i| {
            let t = i as f64 - 3.0;
            vec![1.0 + 2.0 * t, -t, 0.5 * t]
        }).collect();
        let pca = PcaModel::fit(&data, 1).unwrap();
        assert!((pca.explained_variance_ratio[0] - 1.0).abs() < 1e-9);
        let c = &pca.components[0];
        let norm = (4.0f64 + 1.0 + 0.25).sqrt();
        for (got, want) in c.iter().zip([2.0 / norm, -1.0 / norm, 0.5 / norm]) {
            assert!((got - want).abs() < 1e-9);
        }
    }

    #[test]
    fn pca_errors() {
        let same = vec![vec![1.0, 2.0]; 5];
        assert!(matches!(PcaModel::fit(&same, 1), Err(PreprocessError::DegenerateCovariance)));
        let data = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(PcaModel::fit(&data, 3), Err(PreprocessError::InvalidK { .. })));
        assert!(matches!(PcaModel::fit(&data, 0), Err(PreprocessError::InvalidK { .. })));
    }

    #[test]
    fn components_are_eigenvectors() {
        let data: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let a = (i as f64 * 0.37).sin();
                let b = (i as f64 * 1.3).cos();
                vec![a, a + 0.1 * b, b, 2.0 * b - a]
            })
            .collect();
        let pca = PcaModel::fit(&data, 3).unwrap();
        let n = data.len() as f64;
        for (c, lambda) in pca.components.iter().zip(&pca.eigenvalues) {
            for row in 0..4 {
                let mut cv = 0.0;
                for col in 0..4 {
                    let cov: f64 = data.iter().map(|v| (v[row] - pca.mean[row]) * (v[col] - pca.mean[col])).sum::<f64>() / n;
                    cv += cov * c[col];
                }
                assert!((cv - lambda * c[row]).abs() < 1e-9);
            }
            let max = c.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(max >= 0.0);
        }
        assert!(pca.explained_variance_ratio.windows(2).all(|w| w[0] >= w[1]));
        assert!(pca.cumulative_explained_variance() <= 1.0 + 1e-12);
    }

    #[test]
    fn sign_canonicalization() {
        let mut v = vec![0.1, -0.9, 0.3];
        canonicalize_sign(&mut v);
        assert_eq!(v, [-0.1, 0.9, -0.3]);
    }
}
