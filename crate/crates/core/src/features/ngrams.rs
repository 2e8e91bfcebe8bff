//! Tree and bytecode N-grams, document-frequency vocabularies and sparse
//! count vectors.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::parser::SyntaxNode;

/// An ordered sequence of labels: node kinds along a parent-child chain,
/// or consecutive bytecode mnemonics.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NGram(pub Vec<String>);

impl NGram {
    pub fn new<S: Into<String>>(items: impl IntoIterator<Item = S>) -> Self {
        NGram(items.into_iter().map(Into::into).collect())
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for NGram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" > "))
    }
}

/// Multiset of N-grams.
pub type NGramCounts = BTreeMap<NGram, u32>;

/// Counts every downward parent-child chain of 1..=`n_max` nodes.
pub fn extract_tree_ngrams(tree: &SyntaxNode, n_max: usize) -> NGramCounts {
    let mut counts = NGramCounts::new();
    if n_max == 0 {
        return counts;
    }
    // Each stack entry carries the labels of up to n_max-1 nearest ancestors;
    // a node contributes the grams that end at it.
    let mut stack: Vec<(&SyntaxNode, Vec<&'static str>)> = vec![(tree, Vec::new())];
    while let Some((node, ancestors)) = stack.pop() {
        let label = node.kind.as_str();
        for len in 0..=ancestors.len() {
            let start = ancestors.len() - len;
            let gram = NGram::new(ancestors[start..].iter().copied().chain(std::iter::once(label)));
            *counts.entry(gram).or_insert(0) += 1;
        }
        if node.children.is_empty() {
            continue;
        }
        let mut next = ancestors;
        next.push(label);
        if next.len() > n_max - 1 {
            next.remove(0);
        }
        for child in node.children.iter().rev() {
            stack.push((child, next.clone()));
        }
    }
    counts
}

/// Counts every contiguous subsequence of 1..=`n_max` instructions once
/// per start position. The window slides one instruction at a time and
/// emits only the grams beginning at its head, so the result does not
/// depend on `window` as long as `window >= n_max`.
pub fn extract_bytecode_ngrams(instructions: &[String], n_max: usize, window: usize) -> Result<NGramCounts, FeatureError> {
    if n_max == 0 || window < n_max {
        return Err(FeatureError::InvalidParameter(format!(
            "window ({window}) must be at least N_max ({n_max}) and N_max at least 1"
        )));
    }
    if instructions.is_empty() {
        return Err(FeatureError::EmptySequence);
    }
    let mut counts = NGramCounts::new();
    for head in 0..instructions.len() {
        let frame = &instructions[head..instructions.len().min(head + window)];
        for len in 1..=n_max.min(frame.len()) {
            *counts.entry(NGram(frame[..len].to_vec())).or_insert(0) += 1;
        }
    }
    Ok(counts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Tree,
    Bytecode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabularyEntry {
    pub gram: NGram,
    pub index: usize,
    pub df: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGramVocabulary {
    pub domain: Domain,
    pub min_df: usize,
    pub max_df_ratio: f64,
    pub corpus_size: usize,
    /// Sorted by index.
    pub entries: Vec<VocabularyEntry>,
    #[serde(skip)]
    lookup: HashMap<NGram, usize>,
}

impl NGramVocabulary {
    pub fn new(domain: Domain, min_df: usize, max_df_ratio: f64, corpus_size: usize, entries: Vec<VocabularyEntry>) -> Self {
        let mut vocab = NGramVocabulary { domain, min_df, max_df_ratio, corpus_size, entries, lookup: HashMap::new() };
        vocab.reindex();
        vocab
    }

    /// Rebuilds the gram lookup; needed after deserialization.
    pub fn reindex(&mut self) {
        self.entries.sort_by_key(|e| e.index);
        self.lookup = self.entries.iter().map(|e| (e.gram.clone(), e.index)).collect();
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_of(&self, gram: &NGram) -> Option<usize> {
        self.lookup.get(gram).copied()
    }
}

/// Keeps grams with `min_df <= df <= max_df_ratio * n`, where df is the
/// number of units containing the gram. Indices go by descending df, ties
/// by gram order.
pub fn build_vocabulary(
    counts: &[NGramCounts],
    domain: Domain,
    min_df: usize,
    max_df_ratio: f64,
) -> Result<NGramVocabulary, FeatureError> {
    if counts.is_empty() {
        return Err(FeatureError::EmptyCorpus);
    }
    if !(max_df_ratio > 0.0 && max_df_ratio <= 1.0) {
        return Err(FeatureError::InvalidParameter(format!("max_df_ratio must be in (0, 1], got {max_df_ratio}")));
    }
    let mut df: BTreeMap<&NGram, usize> = BTreeMap::new();
    for unit in counts {
        for (gram, &count) in unit {
            if count > 0 {
                *df.entry(gram).or_insert(0) += 1;
            }
        }
    }
    let ceiling = max_df_ratio * counts.len() as f64 + 1e-9;
    let mut kept: Vec<(&NGram, usize)> =
        df.into_iter().filter(|&(_, d)| d >= min_df && (d as f64) <= ceiling).collect();
    if kept.is_empty() {
        return Err(FeatureError::EmptyVocabulary);
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let entries = kept
        .into_iter()
        .enumerate()
        .map(|(index, (gram, df))| VocabularyEntry { gram: gram.clone(), index, df })
        .collect();
    Ok(NGramVocabulary::new(domain, min_df, max_df_ratio, counts.len(), entries))
}

/// A sparse vector with strictly increasing indices and positive values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub dimension: usize,
    pub pairs: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn zeros(dimension: usize) -> Self {
        SparseVector { dimension, pairs: Vec::new() }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.dimension];
        for &(i, v) in &self.pairs {
            dense[i] = v;
        }
        dense
    }

    pub fn is_valid(&self) -> bool {
        self.pairs.windows(2).all(|w| w[0].0 < w[1].0)
            && self.pairs.iter().all(|&(i, v)| i < self.dimension && v > 0.0 && v.is_finite())
    }
}

/// Projects counts onto the vocabulary, dropping out-of-vocabulary grams.
pub fn vectorize(counts: &NGramCounts, vocab: &NGramVocabulary) -> SparseVector {
    let mut pairs: Vec<(usize, f64)> = counts
        .iter()
        .filter(|(_, &c)| c > 0)
        .filter_map(|(gram, &c)| vocab.index_of(gram).map(|i| (i, f64::from(c))))
        .collect();
    pairs.sort_by_key(|p| p.0);
    SparseVector { dimension: vocab.len(), pairs }
}
