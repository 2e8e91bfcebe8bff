//! Outlier detectors, anomaly selection rules and the compiler-induced
//! divergence rule.

mod autoencoder;
mod compiler;
mod iforest;
mod lof;

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use autoencoder::{autoencoder_scores, hidden_width, Autoencoder, AutoencoderConfig, Gradients, ModelSummary};
pub use compiler::{compiler_induced_detect, divergence, CompilerInduced, Direction, Divergence, Normalization};
pub use iforest::{expected_path_length, iforest_fit_score, IForestConfig, IsolationForest};
pub use lof::{lof, lof_scores, LofConfig};

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("all points are identical")]
    DegenerateData,
    #[error("expected dimension {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training loss became {loss} in epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize, loss: f64 },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

/// Scores of one detector over a set of units.
///
/// `scores` grow with anomalousness for every detector. For Isolation
/// Forest, `normality` holds the normalized mean isolation depth and
/// `scores` hold `2^(-normality)`. `flagged` lists unit ids from most to
/// least anomalous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScoreSet {
    pub detector: String,
    pub unit_ids: Vec<String>,
    pub scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normality: Option<Vec<f64>>,
    /// Score of the last flagged unit for quantile selection, the RMS
    /// cutoff for threshold selection.
    pub threshold: f64,
    pub flagged: Vec<String>,
}

impl AnomalyScoreSet {
    pub fn score_of(&self, unit_id: &str) -> Option<f64> {
        self.unit_ids.iter().position(|u| u == unit_id).map(|i| self.scores[i])
    }

    pub fn save(&self, path: &Path) -> Result<(), DetectError> {
        let io = |m: String| DetectError::Io { path: path.display().to_string(), message: m };
        let json = serde_json::to_string_pretty(self).map_err(|e| io(e.to_string()))?;
        fs::write(path, json + "\n").map_err(|e| io(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<AnomalyScoreSet, DetectError> {
        let io = |m: String| DetectError::Io { path: path.display().to_string(), message: m };
        let text = fs::read_to_string(path).map_err(|e| io(e.to_string()))?;
        let set: AnomalyScoreSet = serde_json::from_str(&text).map_err(|e| io(e.to_string()))?;
        if set.unit_ids.len() != set.scores.len() {
            return Err(io("unit_ids and scores differ in length".into()));
        }
        Ok(set)
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn check_ids(points: usize, unit_ids: &[String]) -> Result<(), DetectError> {
    if points == unit_ids.len() {
        Ok(())
    } else {
        Err(DetectError::InvalidConfig(format!("{points} points but {} unit ids", unit_ids.len())))
    }
}

pub(crate) fn check_contamination(c: f64) -> Result<(), DetectError> {
    if c > 0.0 && c <= 0.5 {
        Ok(())
    } else {
        Err(DetectError::InvalidConfig(format!("contamination must be in (0, 0.5], got {c}")))
    }
}

/// Number of units a contamination fraction selects out of `n`.
pub fn contamination_count(contamination: f64, n: usize) -> usize {
    (((contamination * n as f64) - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Flags the `ceil(contamination * n)` highest scores, ties broken by
/// unit id. Returns the flagged ids, most anomalous first, and the score
/// of the last one.
pub fn select_top(scores: &[f64], unit_ids: &[String], contamination: f64) -> (Vec<String>, f64) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then_with(|| unit_ids[a].cmp(&unit_ids[b])));
    order.truncate(contamination_count(contamination, scores.len()));
    let threshold = order.last().map_or(f64::INFINITY, |&i| scores[i]);
    (order.into_iter().map(|i| unit_ids[i].clone()).collect(), threshold)
}

/// `multiplier * sqrt(mean(s^2))` and the indices of scores strictly above
/// it.
pub fn rms_threshold(scores: &[f64], multiplier: f64) -> (f64, Vec<usize>) {
    if scores.is_empty() {
        return (0.0, Vec::new());
    }
    let rms = (scores.iter().map(|s| s * s).sum::<f64>() / scores.len() as f64).sqrt();
    let threshold = multiplier * rms;
    let flagged = scores.iter().enumerate().filter(|(_, &s)| s > threshold).map(|(i, _)| i).collect();
    (threshold, flagged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rms_examples() {
        let (t, f) = rms_threshold(&[2.0; 10], 3.0);
        assert!((t - 6.0).abs() < 1e-12);
        assert!(f.is_empty());
        let (t, f) = rms_threshold(&[1.0, 1.0, 1.0, 10.0], 3.0);
        assert!((t - 3.0 * 25.75f64.sqrt()).abs() < 1e-12);
        assert!(f.is_empty());
        let mut scores = vec![1.0; 99];
        scores.push(100.0);
        assert_eq!(rms_threshold(&scores, 3.0).1, [99]);
    }

    #[test]
    fn top_selection_breaks_ties_by_id() {
        let ids: Vec<String> = ["d", "c", "b", "a"].iter().map(|s| s.to_string()).collect();
        let (flagged, threshold) = select_top(&[1.0, 5.0, 5.0, 0.0], &ids, 0.25);
        assert_eq!(flagged, ["b"]);
        assert_eq!(threshold, 5.0);
        assert_eq!(contamination_count(0.001, 1000), 1);
        assert_eq!(contamination_count(0.0001, 10_000), 1);
        assert_eq!(contamination_count(0.001, 5000), 5);
        assert_eq!(contamination_count(0.5, 3), 2);
    }

    #[test]
    fn score_set_round_trip() {
        let set = AnomalyScoreSet {
            detector: "lof".into(),
            unit_ids: vec!["a".into(), "b".into()],
            scores: vec![0.1 + 0.2, 1.0 / 3.0],
            normality: None,
            threshold: 1.0 / 3.0,
            flagged: vec!["b".into()],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        set.save(&path).unwrap();
        assert_eq!(AnomalyScoreSet::load(&path).unwrap(), set);
        assert_eq!(set.score_of("b"), Some(1.0 / 3.0));
    }
}
