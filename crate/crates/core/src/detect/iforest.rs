use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{select_top, AnomalyScoreSet, DetectError};

const EULER_GAMMA: f64 = 0.5772156649;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IForestConfig {
    pub n_estimators: usize,
    /// Points drawn per tree; clipped to the sample count.
    pub subsample: usize,
    pub contamination: f64,
    pub seed: u64,
}

impl Default for IForestConfig {
    fn default() -> Self {
        IForestConfig { n_estimators: 200, subsample: 256, contamination: 0.0001, seed: 0 }
    }
}

/// Average path length of an unsuccessful search in a binary search tree
/// of `n` points.
pub fn expected_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let m = (n - 1) as f64;
            2.0 * (m.ln() + EULER_GAMMA) - 2.0 * m / n as f64
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Split { feature: usize, value: f64, left: Box<Node>, right: Box<Node> },
    Leaf { size: usize },
}

#[derive(Debug, Clone)]
pub struct IsolationForest {
    trees: Vec<Node>,
    subsample: usize,
    dimension: usize,
}

impl IsolationForest {
    pub fn fit(points: &[Vec<f64>], config: &IForestConfig) -> Result<IsolationForest, DetectError> {
        let n = points.len();
        if config.n_estimators == 0 || config.subsample == 0 {
            return Err(DetectError::InvalidConfig("n_estimators and subsample must be positive".into()));
        }
        if n < 2 {
            return Err(DetectError::TooFewPoints { needed: 2, got: n });
        }
        let dimension = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != dimension) {
            return Err(DetectError::DimensionMismatch { expected: dimension, found: p.len() });
        }
        if points.iter().all(|p| p == &points[0]) {
            return Err(DetectError::DegenerateData);
        }
        let psi = config.subsample.min(n);
        let height_limit = (psi as f64).log2().ceil() as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let trees = (0..config.n_estimators)
            .map(|_| {
                let rows = sample(&mut rng, n, psi).into_vec();
                build(points, rows, 0, height_limit, &mut rng)
            })
            .collect();
        Ok(IsolationForest { trees, subsample: psi, dimension })
    }

    /// Mean isolation depth over the trees divided by the expected path
    /// length of the subsample size. Smaller is more anomalous.
    pub fn normality(&self, point: &[f64]) -> Result<f64, DetectError> {
        if point.len() != self.dimension {
            return Err(DetectError::DimensionMismatch { expected: self.dimension, found: point.len() });
        }
        let total: f64 = self.trees.iter().map(|t| path_length(t, point)).sum();
        Ok(total / self.trees.len() as f64 / expected_path_length(self.subsample))
    }

    /// `2^(-normality)`, in (0, 1]; larger is more anomalous.
    pub fn score(&self, point: &[f64]) -> Result<f64, DetectError> {
        Ok((-self.normality(point)?).exp2())
    }
}

fn build(points: &[Vec<f64>], rows: Vec<usize>, depth: usize, limit: usize, rng: &mut ChaCha8Rng) -> Node {
    if depth >= limit || rows.len() <= 1 {
        return Node::Leaf { size: rows.len() };
    }
    let dim = points[rows[0]].len();
    let ranges: Vec<(usize, f64, f64)> = (0..dim)
        .filter_map(|f| {
            let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                (lo.min(points[r][f]), hi.max(points[r][f]))
            });
            (hi > lo).then_some((f, lo, hi))
        })
        .collect();
    if ranges.is_empty() {
        return Node::Leaf { size: rows.len() };
    }
    let (feature, lo, hi) = ranges[rng.gen_range(0..ranges.len())];
    let value = rng.gen_range(lo..hi);
    let (left, right): (Vec<usize>, Vec<usize>) = rows.into_iter().partition(|&r| points[r][feature] < value);
    Node::Split {
        feature,
        value,
        left: Box::new(build(points, left, depth + 1, limit, rng)),
        right: Box::new(build(points, right, depth + 1, limit, rng)),
    }
}

fn path_length(mut node: &Node, point: &[f64]) -> f64 {
    let mut depth = 0.0;
    loop {
        match node {
            Node::Leaf { size } => return depth + expected_path_length(*size),
            Node::Split { feature, value, left, right } => {
                node = if point[*feature] < *value { left } else { right };
                depth += 1.0;
            }
        }
    }
}

/// Fits a forest on `points`, scores every point and flags the
/// `ceil(contamination * n)` points of lowest normality.
pub fn iforest_fit_score(
    points: &[Vec<f64>],
    unit_ids: &[String],
    config: &IForestConfig,
) -> Result<AnomalyScoreSet, DetectError> {
    super::check_ids(points.len(), unit_ids)?;
    super::check_contamination(config.contamination)?;
    let forest = IsolationForest::fit(points, config)?;
    let normality: Vec<f64> = points.par_iter().map(|p| forest.normality(p)).collect::<Result<_, _>>()?;
    let scores: Vec<f64> = normality.iter().map(|h| (-h).exp2()).collect();
    let (flagged, threshold) = select_top(&scores, unit_ids, config.contamination);
    Ok(AnomalyScoreSet {
        detector: "iforest".into(),
        unit_ids: unit_ids.to_vec(),
        scores,
        normality: Some(normality),
        threshold,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Box-Muller standard normal.
    fn normal<R: Rng>(rng: &mut R) -> f64 {
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("u{i:05}")).collect()
    }

    #[test]
    fn expected_path_length_values() {
        assert_eq!(expected_path_length(1), 0.0);
        assert_eq!(expected_path_length(2), 1.0);
        let h2 = 2f64.ln() + EULER_GAMMA;
        assert!((expected_path_length(3) - (2.0 * h2 - 4.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn planted_outlier_has_minimum_normality() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut points: Vec<Vec<f64>> = (0..200)
            .map(|i| {
                let offset = if i < 100 { 0.0 } else { 10.0 };
                vec![offset + normal(&mut rng), normal(&mut rng)]
            })
            .collect();
        points.push(vec![50.0, 50.0]);
        let config = IForestConfig { seed: 3, ..IForestConfig::default() };
        let set = iforest_fit_score(&points, &ids(201), &config).unwrap();
        let normality = set.normality.as_ref().unwrap();
        let min = normality.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(normality[200], min);
        assert_eq!(set.flagged, [ids(201)[200].clone()]);
    }

    #[test]
    fn deterministic_per_seed() {
        let points: Vec<Vec<f64>> = (0..300).map(|i| vec![(i as f64 * 0.3).sin(), (i as f64).cos()]).collect();
        let config = IForestConfig { seed: 11, ..IForestConfig::default() };
        let a = iforest_fit_score(&points, &ids(300), &config).unwrap();
        let b = iforest_fit_score(&points, &ids(300), &config).unwrap();
        assert!(a.scores.iter().zip(&b.scores).all(|(x, y)| x.to_bits() == y.to_bits()));
        let c = iforest_fit_score(&points, &ids(300), &IForestConfig { seed: 12, ..config }).unwrap();
        assert_ne!(a.scores, c.scores);
    }

    #[test]
    fn contamination_count() {
        let points: Vec<Vec<f64>> = (0..10_000).map(|i| vec![(i as f64 * 0.37).sin(), (i % 97) as f64]).collect();
        let config = IForestConfig { n_estimators: 20, ..IForestConfig::default() };
        let set = iforest_fit_score(&points, &ids(10_000), &config).unwrap();
        assert_eq!(set.flagged.len(), 1);
    }

    #[test]
    fn degenerate_data() {
        let points = vec![vec![1.0, 2.0]; 100];
        assert!(matches!(
            iforest_fit_score(&points, &ids(100), &IForestConfig::default()),
            Err(DetectError::DegenerateData)
        ));
    }

    #[test]
    fn scores_are_in_unit_interval() {
        let points: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let set = iforest_fit_score(&points, &ids(50), &IForestConfig { contamination: 0.1, ..Default::default() }).unwrap();
        assert!(set.scores.iter().all(|&s| s > 0.0 && s <= 1.0));
        assert_eq!(set.flagged.len(), 5);
    }
}
