use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{euclidean, select_top, AnomalyScoreSet, DetectError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LofConfig {
    pub n_neighbors: usize,
    pub contamination: f64,
}

impl Default for LofConfig {
    fn default() -> Self {
        LofConfig { n_neighbors: 20, contamination: 0.001 }
    }
}

/// Raw Local Outlier Factor per point.
///
/// The k-distance neighborhood of a point holds every other point within
/// its k-distance, so ties can make it larger than k. Points whose
/// neighbors all coincide with them have infinite local reachability
/// density; a ratio of two infinite densities counts as 1, a finite
/// density over an infinite one as 0. Infinite factors are reported as
/// `f64::MAX`.
pub fn lof(points: &[Vec<f64>], k: usize) -> Result<Vec<f64>, DetectError> {
    let n = points.len();
    if k == 0 {
        return Err(DetectError::InvalidConfig("n_neighbors must be positive".into()));
    }
    if n < k + 1 {
        return Err(DetectError::TooFewPoints { needed: k + 1, got: n });
    }
    let dim = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(DetectError::DimensionMismatch { expected: dim, found: p.len() });
    }

    // (neighbor indices, their distances) and the k-distance of each point.
    let neighborhoods: Vec<(Vec<(usize, f64)>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut dists: Vec<(usize, f64)> =
                (0..n).filter(|&j| j != i).map(|j| (j, euclidean(&points[i], &points[j]))).collect();
            let mut sorted: Vec<f64> = dists.iter().map(|d| d.1).collect();
            let (_, kth, _) = sorted.select_nth_unstable_by(k - 1, f64::total_cmp);
            let k_distance = *kth;
            dists.retain(|d| d.1 <= k_distance);
            (dists, k_distance)
        })
        .collect();

    let lrd: Vec<f64> = neighborhoods
        .par_iter()
        .map(|(neighbors, _)| {
            let total: f64 = neighbors.iter().map(|&(j, d)| d.max(neighborhoods[j].1)).sum();
            let mean = total / neighbors.len() as f64;
            if mean > 0.0 {
                1.0 / mean
            } else {
                f64::INFINITY
            }
        })
        .collect();

    Ok(neighborhoods
        .par_iter()
        .enumerate()
        .map(|(i, (neighbors, _))| {
            let sum: f64 = neighbors
                .iter()
                .map(|&(j, _)| match (lrd[j].is_infinite(), lrd[i].is_infinite()) {
                    (true, true) => 1.0,
                    (false, true) => 0.0,
                    _ => lrd[j] / lrd[i],
                })
                .sum();
            let score = sum / neighbors.len() as f64;
            if score.is_finite() {
                score
            } else {
                f64::MAX
            }
        })
        .collect())
}

/// Scores points with LOF and flags the top `ceil(contamination * n)`.
pub fn lof_scores(points: &[Vec<f64>], unit_ids: &[String], config: &LofConfig) -> Result<AnomalyScoreSet, DetectError> {
    super::check_ids(points.len(), unit_ids)?;
    super::check_contamination(config.contamination)?;
    let scores = lof(points, config.n_neighbors)?;
    let (flagged, threshold) = select_top(&scores, unit_ids, config.contamination);
    Ok(AnomalyScoreSet {
        detector: "lof".into(),
        unit_ids: unit_ids.to_vec(),
        scores,
        normality: None,
        threshold,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("u{i:04}")).collect()
    }

    #[test]
    fn identical_points_score_one() {
        let points = vec![vec![1.0, 1.0]; 10];
        assert!(lof(&points, 3).unwrap().iter().all(|&s| s == 1.0));
    }

    #[test]
    fn far_point_is_strict_maximum() {
        let mut points: Vec<Vec<f64>> =
            (0..50).map(|i| vec![(i % 7) as f64 * 0.1, (i / 7) as f64 * 0.1]).collect();
        points.push(vec![100.0, 0.0]);
        let scores = lof(&points, 5).unwrap();
        let far = scores[50];
        assert!(scores[..50].iter().all(|&s| s < far));
    }

    #[test]
    fn hand_computed_line() {
        // 0, 1, 2, 10 on a line with k = 1.
        let points: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 10.0].iter().map(|&x| vec![x]).collect();
        let scores = lof(&points, 1).unwrap();
        // k-distances 1, 1, 1, 8; lrd 1, 1, 1, 1/8.
        assert_eq!(scores, [1.0, 1.0, 1.0, 8.0]);
    }

    #[test]
    fn duplicates_next_to_spread_points() {
        let mut points = vec![vec![0.0]; 3];
        points.push(vec![5.0]);
        let scores = lof(&points, 2).unwrap();
        assert_eq!(&scores[..3], &[1.0, 1.0, 1.0]);
        assert_eq!(scores[3], f64::MAX);
    }

    #[test]
    fn contamination_count() {
        let points: Vec<Vec<f64>> = (0..1000).map(|i| vec![(i as f64).sin(), (i as f64 * 0.7).cos()]).collect();
        let set = lof_scores(&points, &ids(1000), &LofConfig::default()).unwrap();
        assert_eq!(set.flagged.len(), 1);
    }

    #[test]
    fn errors() {
        let points = vec![vec![0.0]; 3];
        assert!(matches!(lof(&points, 3), Err(DetectError::TooFewPoints { .. })));
        assert!(matches!(lof(&[vec![0.0], vec![1.0, 2.0]], 1), Err(DetectError::DimensionMismatch { .. })));
        let bad = LofConfig { contamination: 0.0, ..LofConfig::default() };
        assert!(lof_scores(&points, &ids(3), &bad).is_err());
    }
}
