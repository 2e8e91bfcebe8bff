mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use codeanomaly::corpus::{Corpus, IngestConfig};
use codeanomaly::features::{
    build_vocabulary, compute_metrics, extract_bytecode_ngrams, extract_features, extract_tree_ngrams, vectorize,
    Domain, FeatureMode, FeatureSet, FeatureVector, NGram, NGramCounts, NGramParams, CATALOG, METRIC_COUNT,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture_corpus() -> Corpus {
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/in_subset");
    Corpus::ingest(&IngestConfig { src: Some(src), trees: None, bytecode: None }).unwrap()
}

fn metrics_of(corpus: &Corpus, name: &str) -> BTreeMap<&'static str, f64> {
    let unit = corpus.functions.iter().find(|u| u.short_name() == name).unwrap();
    let m = compute_metrics(unit.tree().unwrap());
    CATALOG.iter().zip(m.values).map(|(d, v)| (d.name, v)).collect()
}

fn as_map(counts: &NGramCounts) -> BTreeMap<Vec<String>, u32> {
    counts.iter().map(|(g, &c)| (g.0.clone(), c)).collect()
}

#[test]
fn hand_counted_metrics() {
    let corpus = fixture_corpus();

    let m = metrics_of(&corpus, "countdown");
    assert_eq!(m["parameter_count"], 1.0);
    assert_eq!(m["loop_count"], 2.0);
    assert_eq!(m["local_variable_count"], 2.0);
    assert_eq!(m["return_count"], 1.0);
    assert_eq!(m["when_count"], 0.0);
    assert_eq!(m["lines_of_code"], 12.0);
    assert_eq!(m["has_suspend_modifier"], 0.0);

    let m = metrics_of(&corpus, "classify");
    assert_eq!(m["when_count"], 1.0);
    assert_eq!(m["when_branches"], 3.0);
    assert_eq!(m["nested_function_count"], 1.0);

    let m = metrics_of(&corpus, "safeRoot");
    assert_eq!(m["try_count"], 1.0);
    assert_eq!(m["max_try_depth"], 1.0);
    assert_eq!(m["catch_count"], 1.0);
    assert_eq!(m["throw_count"], 1.0);
    assert_eq!(m["lambda_count"], 1.0);

    let m = metrics_of(&corpus, "describe");
    assert_eq!(m["if_count"], 1.0);
    assert_eq!(m["template_entry_count"], 3.0);
}

#[test]
fn metric_vectors_cover_the_catalog() {
    let corpus = fixture_corpus();
    let set = extract_features(&corpus, FeatureMode::Metrics, &NGramParams::default()).unwrap();
    assert_eq!(set.meta.dimension, METRIC_COUNT);
    assert_eq!(set.vectors.len(), corpus.functions.len());
    for v in &set.vectors {
        let dense = v.to_dense();
        assert_eq!(dense.len(), METRIC_COUNT);
        assert!(dense.iter().all(|x| x.is_finite() && *x >= 0.0));
        for (def, x) in CATALOG.iter().zip(&dense) {
            if def.binary {
                assert!(*x == 0.0 || *x == 1.0, "{}", def.name);
            }
        }
    }
}

#[test]
fn vector_files_round_trip() {
    let corpus = fixture_corpus();
    let tmp = tempfile::tempdir().unwrap();
    let params = NGramParams { min_df: 1, max_df_ratio: 1.0, ..NGramParams::default() };
    for mode in [FeatureMode::Metrics, FeatureMode::TreeNgrams] {
        let set = extract_features(&corpus, mode, &params).unwrap();
        let path = tmp.path().join("v.jsonl");
        set.save(&path).unwrap();
        assert_eq!(FeatureSet::load(&path).unwrap(), set);
    }
}

#[test]
fn tree_vectors_match_recount() {
    let corpus = fixture_corpus();
    let params = NGramParams { min_df: 2, max_df_ratio: 0.9, ..NGramParams::default() };
    let set = extract_features(&corpus, FeatureMode::TreeNgrams, &params).unwrap();
    let vocab = set.meta.vocabulary.as_ref().unwrap();
    for (id, v) in set.unit_ids.iter().zip(&set.vectors) {
        let chains = support::tree_chains(corpus.function(id).unwrap().tree().unwrap(), 3);
        let dense = v.to_dense();
        for entry in &vocab.entries {
            assert_eq!(dense[entry.index], f64::from(chains.get(&entry.gram.0).copied().unwrap_or(0)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn tree_ngrams_equal_brute_force(seed in any::<u64>(), budget in 1usize..80, n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tree = support::random_tree(&mut rng, budget);
        let counts = extract_tree_ngrams(&tree, n);
        prop_assert_eq!(as_map(&counts), support::tree_chains(&tree, n));
        let unigrams: u32 = counts.iter().filter(|(g, _)| g.arity() == 1).map(|(_, c)| c).sum();
        prop_assert_eq!(unigrams as usize, tree.node_count());
    }

    #[test]
    fn bytecode_ngrams_equal_brute_force(seed in any::<u64>(), len in 1usize..120, n in 1usize..5, extra in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seq = support::random_mnemonics(&mut rng, len, 5);
        let counts = extract_bytecode_ngrams(&seq, n, n + extra).unwrap();
        prop_assert_eq!(as_map(&counts), support::contiguous(&seq, n));
        // a sequence of length L has max(0, L - k + 1) grams of length k
        for k in 1..=n {
            let total: u32 = counts.iter().filter(|(g, _)| g.arity() == k).map(|(_, c)| c).sum();
            prop_assert_eq!(total as usize, (len + 1).saturating_sub(k));
        }
    }

    #[test]
    fn vocabulary_filter_and_vector_mass(
        seed in any::<u64>(),
        units in 1usize..25,
        min_df in 1usize..4,
        ratio in 0.05f64..=1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts: Vec<NGramCounts> = (0..units)
            .map(|i| extract_bytecode_ngrams(&support::random_mnemonics(&mut rng, 3 + i % 7, 6), 2, 2).unwrap())
            .collect();
        let mut df: BTreeMap<&NGram, usize> = BTreeMap::new();
        for c in &counts {
            for g in c.keys() {
                *df.entry(g).or_default() += 1;
            }
        }
        let expected: BTreeSet<&NGram> = df
            .iter()
            .filter(|(_, &d)| d >= min_df && d as f64 <= ratio * units as f64 + 1e-9)
            .map(|(g, _)| *g)
            .collect();
        match build_vocabulary(&counts, Domain::Bytecode, min_df, ratio) {
            Err(_) => prop_assert!(expected.is_empty()),
            Ok(vocab) => {
                let got: BTreeSet<&NGram> = vocab.entries.iter().map(|e| &e.gram).collect();
                prop_assert_eq!(&got, &expected);
                let indices: Vec<usize> = vocab.entries.iter().map(|e| e.index).collect();
                prop_assert_eq!(indices, (0..vocab.len()).collect::<Vec<_>>());
                for e in &vocab.entries {
                    prop_assert_eq!(e.df, df[&e.gram]);
                }
                for c in &counts {
                    let v = vectorize(c, &vocab);
                    prop_assert!(v.is_valid());
                    let mass: f64 = v.pairs.iter().map(|p| p.1).sum();
                    let in_vocab: u32 = c.iter().filter(|(g, _)| expected.contains(g)).map(|(_, n)| n).sum();
                    prop_assert_eq!(mass, f64::from(in_vocab));
                    let as_feature = FeatureVector::Sparse(v.clone());
                    prop_assert_eq!(as_feature.to_dense().iter().sum::<f64>(), mass);
                }
            }
        }
    }
}

/// The metric deltas from adding one `k -> name` branch to a when.
fn branch_delta(branches: usize) -> BTreeMap<&'static str, f64> {
    let source = |n: usize| {
        let mut s = String::from("fun f(x: Int) = when (x) {\n");
        for i in 0..n {
            s.push_str(&format!("{i} -> v{i}\n"));
        }
        s.push_str("else -> z\n}\n");
        s
    };
    let metrics = |n: usize| {
        let file = codeanomaly::parser::parse_source(&source(n)).unwrap();
        let units = codeanomaly::corpus::extract_functions(&file, "f.kt", "f", Some(&source(n)));
        compute_metrics(units[0].tree().unwrap()).values
    };
    let (before, after) = (metrics(branches), metrics(branches + 1));
    CATALOG
        .iter()
        .zip(before.iter().zip(&after))
        .filter(|(_, (b, a))| a != b)
        .map(|(d, (b, a))| (d.name, a - b))
        .collect()
}

#[test]
fn adding_a_when_branch_moves_only_branch_and_size_metrics() {
    for branches in [1, 4, 9] {
        let delta = branch_delta(branches);
        assert_eq!(delta.get("when_branches"), Some(&1.0), "{delta:?}");
        assert_eq!(delta.get("cyclomatic_complexity"), Some(&1.0));
        assert_eq!(delta.get("lines_of_code"), Some(&1.0));
        // WHEN_ENTRY, WHEN_CONDITION, LITERAL, IDENTIFIER
        assert_eq!(delta.get("node_count"), Some(&4.0));
        assert_eq!(delta.get("literal_count"), Some(&1.0));
        assert_eq!(delta.get("identifier_count"), Some(&1.0));
        assert_eq!(delta.get("unique_identifier_count"), Some(&1.0));
        let allowed = [
            "when_branches",
            "cyclomatic_complexity",
            "lines_of_code",
            "node_count",
            "literal_count",
            "identifier_count",
            "unique_identifier_count",
            "token_count",
            "max_children",
        ];
        for name in delta.keys() {
            assert!(allowed.contains(name), "{name} changed: {delta:?}");
        }
        assert!(delta.values().all(|d| *d > 0.0));
    }
}

#[test]
fn window_shorter_than_n_is_rejected() {
    let seq: Vec<String> = ["aload_0", "areturn"].iter().map(|s| s.to_string()).collect();
    assert!(extract_bytecode_ngrams(&seq, 3, 2).is_err());
    assert!(extract_bytecode_ngrams(&seq, 0, 2).is_err());
    assert!(extract_bytecode_ngrams(&[], 2, 2).is_err());
}
