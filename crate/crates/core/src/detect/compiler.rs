use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::AnomalyScoreSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// Ordinary source compiled into unusual bytecode.
    BytecodeLoud,
    /// Unusual source compiled into ordinary bytecode.
    SourceLoud,
}

impl Direction {
    pub fn flipped(self) -> Direction {
        match self {
            Direction::BytecodeLoud => Direction::SourceLoud,
            Direction::SourceLoud => Direction::BytecodeLoud,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Divide each score set by its maximum.
    Max,
    /// Compare raw scores.
    None,
}

/// The delta rule on one pair of comparable scores.
pub fn divergence(tree_score: f64, bytecode_score: f64, delta: f64) -> Option<Direction> {
    let diff = bytecode_score - tree_score;
    if diff.abs() <= delta {
        None
    } else if diff > 0.0 {
        Some(Direction::BytecodeLoud)
    } else {
        Some(Direction::SourceLoud)
    }
}

/// A class whose bytecode score and source score disagree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub class_id: String,
    /// Linked functions that have a tree score.
    pub function_ids: Vec<String>,
    /// The function whose score represents the class on the tree side.
    pub representative_id: String,
    pub tree_score: f64,
    pub bytecode_score: f64,
    pub raw_tree_score: f64,
    pub raw_bytecode_score: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CompilerInduced {
    pub divergences: Vec<Divergence>,
    /// Classes that had both a bytecode score and at least one scored
    /// linked function.
    pub compared: usize,
}

fn normalized(set: &AnomalyScoreSet, mode: Normalization) -> HashMap<&str, (f64, f64)> {
    let max = set.scores.iter().copied().fold(0.0f64, f64::max);
    set.unit_ids
        .iter()
        .zip(&set.scores)
        .map(|(id, &s)| {
            let n = match mode {
                Normalization::Max if max > 0.0 => s / max,
                Normalization::Max => 0.0,
                Normalization::None => s,
            };
            (id.as_str(), (n, s))
        })
        .collect()
}

/// Compares each linked class's bytecode score with the largest score of
/// its linked functions and reports pairs further apart than `delta`.
/// `links` maps class ids to function ids. Output is ordered by class id.
pub fn compiler_induced_detect(
    tree_scores: &AnomalyScoreSet,
    bytecode_scores: &AnomalyScoreSet,
    links: &[(String, Vec<String>)],
    delta: f64,
    normalization: Normalization,
) -> CompilerInduced {
    let tree = normalized(tree_scores, normalization);
    let bytecode = normalized(bytecode_scores, normalization);
    let mut out = CompilerInduced::default();
    for (class_id, functions) in links {
        let Some(&(byte, raw_byte)) = bytecode.get(class_id.as_str()) else { continue };
        let scored: Vec<(&String, (f64, f64))> =
            functions.iter().filter_map(|f| tree.get(f.as_str()).map(|&s| (f, s))).collect();
        let Some(&(rep, (tree_score, raw_tree))) =
            scored.iter().max_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then_with(|| b.0.cmp(a.0)))
        else {
            continue;
        };
        out.compared += 1;
        if let Some(direction) = divergence(tree_score, byte, delta) {
            let mut function_ids: Vec<String> = scored.iter().map(|(f, _)| (*f).clone()).collect();
            function_ids.sort();
            function_ids.dedup();
            out.divergences.push(Divergence {
                class_id: class_id.clone(),
                function_ids,
                representative_id: rep.clone(),
                tree_score,
                bytecode_score: byte,
                raw_tree_score: raw_tree,
                raw_bytecode_score: raw_byte,
                direction,
            });
        }
    }
    if out.compared == 0 {
        log::warn!("no class had both a bytecode score and a scored linked function");
    }
    out.divergences.sort_by(|a, b| a.class_id.cmp(&b.class_id));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(pairs: &[(&str, f64)]) -> AnomalyScoreSet {
        AnomalyScoreSet {
            detector: "test".into(),
            unit_ids: pairs.iter().map(|p| p.0.to_string()).collect(),
            scores: pairs.iter().map(|p| p.1).collect(),
            normality: None,
            threshold: 0.0,
            flagged: vec![],
        }
    }

    #[test]
    fn pair_rule() {
        assert_eq!(divergence(0.05, 0.95, 0.8), Some(Direction::BytecodeLoud));
        assert_eq!(divergence(0.95, 0.05, 0.8), Some(Direction::SourceLoud));
        assert_eq!(divergence(0.5, 0.5, 0.8), None);
        assert_eq!(divergence(0.0, 0.8, 0.8), None);
    }

    #[test]
    fn class_uses_max_of_linked_functions() {
        let tree = set(&[("f1", 0.1), ("f2", 1.5), ("f3", 10.0), ("top", 1.0)]);
        let byte = set(&[("A", 10.0), ("B", 10.0), ("C", 0.5), ("D", 3.0)]);
        let links = vec![
            ("A".to_string(), vec!["f1".to_string(), "f2".to_string()]),
            ("B".to_string(), vec!["f3".to_string()]),
            ("C".to_string(), vec!["f3".to_string()]),
            ("D".to_string(), vec!["missing".to_string()]),
            ("E".to_string(), vec!["f1".to_string()]),
        ];
        let result = compiler_induced_detect(&tree, &byte, &links, 0.8, Normalization::Max);
        assert_eq!(result.compared, 3);
        let flagged: Vec<_> = result.divergences.iter().map(|d| (d.class_id.as_str(), d.direction)).collect();
        assert_eq!(flagged, [("A", Direction::BytecodeLoud), ("C", Direction::SourceLoud)]);
        assert_eq!(result.divergences[0].representative_id, "f2");
        assert!((result.divergences[0].tree_score - 0.15).abs() < 1e-12);
        assert_eq!(result.divergences[0].raw_bytecode_score, 10.0);
    }

    #[test]
    fn no_links_is_empty() {
        let result = compiler_induced_detect(&set(&[("f", 1.0)]), &set(&[("A", 1.0)]), &[], 0.8, Normalization::Max);
        assert_eq!(result, CompilerInduced::default());
    }

    #[test]
    fn raw_mode() {
        let tree = set(&[("f", 1.0)]);
        let byte = set(&[("A", 5.0)]);
        let links = vec![("A".to_string(), vec!["f".to_string()])];
        assert!(compiler_induced_detect(&tree, &byte, &links, 0.8, Normalization::Max).divergences.is_empty());
        assert_eq!(compiler_induced_detect(&tree, &byte, &links, 0.8, Normalization::None).divergences.len(), 1);
    }
}
