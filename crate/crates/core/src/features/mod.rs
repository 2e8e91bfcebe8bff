//! Explicit metric vectors and implicit N-gram vectors.

mod metrics;
mod ngrams;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;

pub use metrics::{compute_metrics, metric_index, MetricDef, MetricGroup, MetricVector, CATALOG, CATALOG_VERSION, METRIC_COUNT};
pub use ngrams::{
    build_vocabulary, extract_bytecode_ngrams, extract_tree_ngrams, vectorize, Domain, NGram, NGramCounts,
    NGramVocabulary, SparseVector, VocabularyEntry,
};

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("instruction sequence is empty")]
    EmptySequence,
    #[error("no units to vectorize")]
    EmptyCorpus,
    #[error("document-frequency filtering removed every N-gram")]
    EmptyVocabulary,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl FeatureError {
    fn io(path: &Path, message: impl ToString) -> Self {
        FeatureError::Io { path: path.display().to_string(), message: message.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureMode {
    Metrics,
    TreeNgrams,
    BytecodeNgrams,
}

impl std::str::FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "metrics" => Ok(FeatureMode::Metrics),
            "tree-ngrams" => Ok(FeatureMode::TreeNgrams),
            "bytecode-ngrams" => Ok(FeatureMode::BytecodeNgrams),
            other => Err(format!("unknown feature mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NGramParams {
    pub n_max: usize,
    pub window: usize,
    pub min_df: usize,
    pub max_df_ratio: f64,
}

impl Default for NGramParams {
    fn default() -> Self {
        NGramParams { n_max: 3, window: 3, min_df: 5, max_df_ratio: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureVector {
    Dense(Vec<f64>),
    Sparse(SparseVector),
}

impl FeatureVector {
    pub fn dimension(&self) -> usize {
        match self {
            FeatureVector::Dense(v) => v.len(),
            FeatureVector::Sparse(s) => s.dimension,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            FeatureVector::Dense(v) => v.clone(),
            FeatureVector::Sparse(s) => s.to_dense(),
        }
    }
}

/// Metadata stored next to a vector file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub mode: FeatureMode,
    pub dimension: usize,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalog_version: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ngram: Option<NGramParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vocabulary: Option<NGramVocabulary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub meta: FeatureMeta,
    pub unit_ids: Vec<String>,
    pub vectors: Vec<FeatureVector>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    unit_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dimension: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pairs: Option<Vec<(usize, f64)>>,
}

/// Path of the metadata sidecar for a vector file.
pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    path.with_file_name(name)
}

impl FeatureSet {
    pub fn dense(&self) -> Vec<Vec<f64>> {
        self.vectors.iter().map(FeatureVector::to_dense).collect()
    }

    /// Writes one record per line to `path` and metadata (including the
    /// vocabulary with its df table) to the sidecar.
    pub fn save(&self, path: &Path) -> Result<(), FeatureError> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| FeatureError::io(dir, e))?;
        }
        let file = fs::File::create(path).map_err(|e| FeatureError::io(path, e))?;
        let mut out = BufWriter::new(file);
        for (unit_id, vector) in self.unit_ids.iter().zip(&self.vectors) {
            let record = match vector {
                FeatureVector::Dense(v) => {
                    Record { unit_id: unit_id.clone(), values: Some(v.clone()), dimension: None, pairs: None }
                }
                FeatureVector::Sparse(s) => Record {
                    unit_id: unit_id.clone(),
                    values: None,
                    dimension: Some(s.dimension),
                    pairs: Some(s.pairs.clone()),
                },
            };
            serde_json::to_writer(&mut out, &record).map_err(|e| FeatureError::io(path, e))?;
            out.write_all(b"\n").map_err(|e| FeatureError::io(path, e))?;
        }
        out.flush().map_err(|e| FeatureError::io(path, e))?;
        let meta = meta_path(path);
        let json = serde_json::to_string_pretty(&self.meta).map_err(|e| FeatureError::io(&meta, e))?;
        fs::write(&meta, json + "\n").map_err(|e| FeatureError::io(&meta, e))
    }

    pub fn load(path: &Path) -> Result<FeatureSet, FeatureError> {
        let meta_file = meta_path(path);
        let text = fs::read_to_string(&meta_file).map_err(|e| FeatureError::io(&meta_file, e))?;
        let mut meta: FeatureMeta = serde_json::from_str(&text).map_err(|e| FeatureError::io(&meta_file, e))?;
        if let Some(vocab) = meta.vocabulary.as_mut() {
            vocab.reindex();
        }
        let text = fs::read_to_string(path).map_err(|e| FeatureError::io(path, e))?;
        let mut unit_ids = Vec::new();
        let mut vectors = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fail = |m: String| FeatureError::io(path, format!("line {}: {m}", idx + 1));
            let record: Record = serde_json::from_str(line).map_err(|e| fail(e.to_string()))?;
            let vector = match (record.values, record.dimension, record.pairs) {
                (Some(values), None, None) => FeatureVector::Dense(values),
                (None, Some(dimension), Some(pairs)) => {
                    let sparse = SparseVector { dimension, pairs };
                    if !sparse.is_valid() {
                        return Err(fail("sparse pairs must be sorted, positive and in range".into()));
                    }
                    FeatureVector::Sparse(sparse)
                }
                _ => return Err(fail("expected `values` or `dimension` with `pairs`".into())),
            };
            if vector.dimension() != meta.dimension {
                return Err(fail(format!("dimension {} differs from {}", vector.dimension(), meta.dimension)));
            }
            unit_ids.push(record.unit_id);
            vectors.push(vector);
        }
        if vectors.len() != meta.count {
            return Err(FeatureError::io(path, format!("expected {} vectors, found {}", meta.count, vectors.len())));
        }
        Ok(FeatureSet { meta, unit_ids, vectors })
    }
}

/// Vectorizes the function units (metrics, tree N-grams) or the class
/// units (bytecode N-grams) of a corpus, in corpus order.
pub fn extract_features(corpus: &Corpus, mode: FeatureMode, params: &NGramParams) -> Result<FeatureSet, FeatureError> {
    match mode {
        FeatureMode::Metrics => {
            let functions: Vec<_> = corpus.functions.iter().filter_map(|u| u.tree().map(|t| (u, t))).collect();
            if functions.is_empty() {
                return Err(FeatureError::EmptyCorpus);
            }
            let vectors: Vec<FeatureVector> =
                functions.par_iter().map(|(_, t)| FeatureVector::Dense(compute_metrics(t).values)).collect();
            Ok(FeatureSet {
                meta: FeatureMeta {
                    mode,
                    dimension: METRIC_COUNT,
                    count: vectors.len(),
                    catalog_version: Some(CATALOG_VERSION.to_string()),
                    ngram: None,
                    vocabulary: None,
                },
                unit_ids: functions.iter().map(|(u, _)| u.unit_id.clone()).collect(),
                vectors,
            })
        }
        FeatureMode::TreeNgrams => {
            let functions: Vec<_> = corpus.functions.iter().filter_map(|u| u.tree().map(|t| (u, t))).collect();
            if functions.is_empty() {
                return Err(FeatureError::EmptyCorpus);
            }
            if params.n_max == 0 {
                return Err(FeatureError::InvalidParameter("N_max must be at least 1".into()));
            }
            let counts: Vec<NGramCounts> = functions.par_iter().map(|(_, t)| extract_tree_ngrams(t, params.n_max)).collect();
            let ids = functions.iter().map(|(u, _)| u.unit_id.clone()).collect();
            sparse_set(mode, ids, &counts, Domain::Tree, params)
        }
        FeatureMode::BytecodeNgrams => {
            if corpus.classes.is_empty() {
                return Err(FeatureError::EmptyCorpus);
            }
            let counts: Vec<NGramCounts> = corpus
                .classes
                .par_iter()
                .map(|c| extract_bytecode_ngrams(&c.instructions, params.n_max, params.window))
                .collect::<Result<_, _>>()?;
            let ids = corpus.classes.iter().map(|c| c.unit_id.clone()).collect();
            sparse_set(mode, ids, &counts, Domain::Bytecode, params)
        }
    }
}

fn sparse_set(
    mode: FeatureMode,
    unit_ids: Vec<String>,
    counts: &[NGramCounts],
    domain: Domain,
    params: &NGramParams,
) -> Result<FeatureSet, FeatureError> {
    let vocab = build_vocabulary(counts, domain, params.min_df, params.max_df_ratio)?;
    let vectors: Vec<FeatureVector> = counts.par_iter().map(|c| FeatureVector::Sparse(vectorize(c, &vocab))).collect();
    Ok(FeatureSet {
        meta: FeatureMeta {
            mode,
            dimension: vocab.len(),
            count: vectors.len(),
            catalog_version: None,
            ngram: Some(params.clone()),
            vocabulary: Some(vocab),
        },
        unit_ids,
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{extract_functions, BytecodeUnit, IngestConfig};
    use crate::parser::parse_source;

    fn corpus() -> Corpus {
        let src = "fun a() { x() }\nfun b() { y(1) }\nfun c() = 1\nfun d(p: Int) { if (p > 0) z() }\n";
        let functions = extract_functions(&parse_source(src).unwrap(), "m.kt", "m", Some(src));
        let classes = vec![
            BytecodeUnit::new("A".into(), vec!["iload_1".into(), "ireturn".into()], vec![], String::new()),
            BytecodeUnit::new("B".into(), vec!["aload_0".into(), "areturn".into()], vec![], String::new()),
        ];
        Corpus::from_units(functions, classes, IngestConfig::default())
    }

    #[test]
    fn metric_features_round_trip() {
        let set = extract_features(&corpus(), FeatureMode::Metrics, &NGramParams::default()).unwrap();
        assert_eq!(set.vectors.len(), 4);
        assert_eq!(set.meta.dimension, 51);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.jsonl");
        set.save(&path).unwrap();
        assert!(meta_path(&path).ends_with("metrics.jsonl.meta.json"));
        assert_eq!(FeatureSet::load(&path).unwrap(), set);
    }

    #[test]
    fn ngram_features_round_trip() {
        let params = NGramParams { min_df: 1, max_df_ratio: 1.0, ..NGramParams::default() };
        let set = extract_features(&corpus(), FeatureMode::TreeNgrams, &params).unwrap();
        let vocab = set.meta.vocabulary.as_ref().unwrap();
        assert_eq!(vocab.entries[0].df, 4);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tree.jsonl");
        set.save(&path).unwrap();
        let loaded = FeatureSet::load(&path).unwrap();
        assert_eq!(loaded.vectors, set.vectors);
        assert_eq!(loaded.meta.vocabulary.as_ref().unwrap().index_of(&vocab.entries[3].gram), Some(3));

        let bytecode = extract_features(&corpus(), FeatureMode::BytecodeNgrams, &params).unwrap();
        assert_eq!(bytecode.unit_ids.len(), 2);
        assert_eq!(bytecode.meta.dimension, 6);
    }

    #[test]
    fn empty_corpus() {
        let empty = Corpus::from_units(vec![], vec![], IngestConfig::default());
        for mode in [FeatureMode::Metrics, FeatureMode::TreeNgrams, FeatureMode::BytecodeNgrams] {
            assert!(matches!(extract_features(&empty, mode, &NGramParams::default()), Err(FeatureError::EmptyCorpus)));
        }
    }

    #[test]
    fn mode_names() {
        assert_eq!("tree-ngrams".parse::<FeatureMode>().unwrap(), FeatureMode::TreeNgrams);
        assert!("words".parse::<FeatureMode>().is_err());
        assert_eq!(serde_json::to_string(&FeatureMode::BytecodeNgrams).unwrap(), "\"bytecode-ngrams\"");
    }
}
