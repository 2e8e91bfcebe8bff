//! Experiment drivers. Every stage writes its output into the run
//! directory and the next stage reads it back from there.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::time::Instant;

use super::{
    emit_report, format_origin, sort_records, truncate_excerpt, AnomalyRecord, DetectorEntry, Experiment,
    PipelineConfig, RecordKind, Report, ReportError, ReportFormat, RunManifest, StageTiming, SCHEMA_VERSION,
};
use crate::corpus::{CodeUnit, Corpus};
use crate::detect::{autoencoder_scores, compiler_induced_detect, iforest_fit_score, lof_scores, AnomalyScoreSet, Divergence};
use crate::features::{extract_features, FeatureMode, FeatureSet, NGramParams};
use crate::parser::print_tree;
use crate::preprocess::{model_path, preprocess};

pub const REPORT_FILE: &str = "report.json";
pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";

struct Run<'a> {
    out: &'a Path,
    manifest: RunManifest,
}

impl<'a> Run<'a> {
    fn start(experiment: Experiment, corpus: &Corpus, config: &PipelineConfig, out: &'a Path) -> Result<Self, ReportError> {
        config.validate()?;
        if corpus.functions.is_empty() {
            return Err(ReportError::EmptyCorpus);
        }
        fs::create_dir_all(out).map_err(|e| ReportError::io(out, e))?;
        let mut seeds = BTreeMap::new();
        match experiment {
            Experiment::Explicit => {
                seeds.insert("iforest".to_string(), config.iforest.seed);
            }
            Experiment::Implicit | Experiment::CompilerInduced => {
                seeds.insert("autoencoder".to_string(), config.autoencoder.seed);
            }
        }
        let mut counts = BTreeMap::new();
        counts.insert("functions".to_string(), corpus.functions.len());
        counts.insert("classes".to_string(), corpus.classes.len());
        counts.insert("linked_classes".to_string(), corpus.manifest.linked_class_count);
        Ok(Run {
            out,
            manifest: RunManifest {
                experiment,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                corpus_id: corpus.manifest.corpus_id.clone(),
                config: config.clone(),
                seeds,
                counts,
                outputs: Vec::new(),
                tag_extensions: Vec::new(),
                audit: Vec::new(),
                timings: Vec::new(),
            },
        })
    }

    fn timed<T>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> Result<T, ReportError>) -> Result<T, ReportError> {
        let start = Instant::now();
        let result = f(self);
        self.manifest.timings.push(StageTiming { stage: stage.to_string(), seconds: start.elapsed().as_secs_f64() });
        result
    }

    fn output(&mut self, name: &str) -> std::path::PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.out.join(name)
    }

    fn features(&mut self, corpus: &Corpus, mode: FeatureMode, params: &NGramParams, file: &str) -> Result<FeatureSet, ReportError> {
        let stage = format!("features:{}", file);
        self.timed(&stage.clone(), |run| {
            let set = extract_features(corpus, mode, params).map_err(ReportError::stage(stage.clone()))?;
            let path = run.output(file);
            run.manifest.outputs.push(format!("{file}.meta.json"));
            set.save(&path).map_err(ReportError::stage(stage.clone()))?;
            let set = FeatureSet::load(&path).map_err(ReportError::stage(stage))?;
            let key = file.trim_end_matches(".jsonl");
            run.manifest.counts.insert(format!("vectors:{key}"), set.meta.count);
            run.manifest.counts.insert(format!("dimension:{key}"), set.meta.dimension);
            Ok(set)
        })
    }

    fn scores(&mut self, stage: &str, file: &str, compute: impl FnOnce() -> Result<AnomalyScoreSet, ReportError>) -> Result<AnomalyScoreSet, ReportError> {
        self.timed(stage, |run| {
            let set = compute()?;
            let path = run.output(file);
            set.save(&path).map_err(ReportError::stage(stage))?;
            let set = AnomalyScoreSet::load(&path).map_err(ReportError::stage(stage))?;
            run.manifest.counts.insert(format!("flagged:{}", set.detector), set.flagged.len());
            Ok(set)
        })
    }

    fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<(), ReportError> {
        let path = self.output(name);
        let json = serde_json::to_string_pretty(value).map_err(|e| ReportError::io(&path, e))?;
        fs::write(&path, json + "\n").map_err(|e| ReportError::io(&path, e))
    }

    fn finish(mut self, mut records: Vec<AnomalyRecord>) -> Result<Report, ReportError> {
        sort_records(&mut records);
        self.manifest.counts.insert("records".to_string(), records.len());
        self.manifest.outputs.push(REPORT_FILE.to_string());
        self.manifest.outputs.push(RUN_MANIFEST_FILE.to_string());
        let report = Report { schema_version: SCHEMA_VERSION, manifest: self.manifest, records };
        let path = self.out.join(REPORT_FILE);
        fs::write(&path, emit_report(&report, ReportFormat::Json)).map_err(|e| ReportError::io(&path, e))?;
        let path = self.out.join(RUN_MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&report.manifest).map_err(|e| ReportError::io(&path, e))?;
        fs::write(&path, json + "\n").map_err(|e| ReportError::io(&path, e))?;
        Ok(report)
    }
}

fn excerpt_of(unit: &CodeUnit, max_lines: usize) -> String {
    let text = match (&unit.source, unit.tree()) {
        (Some(source), _) => source.clone(),
        (None, Some(tree)) => print_tree(tree),
        (None, None) => String::new(),
    };
    truncate_excerpt(&text, max_lines)
}

/// One record per unit flagged by any of `sets`, listing the detectors
/// that flagged it.
fn syntax_records(corpus: &Corpus, sets: &[AnomalyScoreSet], config: &PipelineConfig) -> Vec<AnomalyRecord> {
    let units: HashMap<&str, &CodeUnit> = corpus.functions.iter().map(|u| (u.unit_id.as_str(), u)).collect();
    let mut entries: BTreeMap<&str, Vec<DetectorEntry>> = BTreeMap::new();
    for set in sets {
        let index: HashMap<&str, usize> = set.unit_ids.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
        for id in &set.flagged {
            entries.entry(id.as_str()).or_default().push(DetectorEntry {
                name: set.detector.clone(),
                score: set.scores[index[id.as_str()]],
                threshold: set.threshold,
                normalized: None,
                scored_unit: None,
            });
        }
    }
    entries
        .into_iter()
        .map(|(id, detectors)| {
            let unit = units.get(id);
            AnomalyRecord {
                unit_id: id.to_string(),
                kind: RecordKind::SyntaxTree,
                name: unit.map_or_else(String::new, |u| u.display_name.clone()),
                detectors,
                direction: None,
                tags: Vec::new(),
                origin: unit.map_or_else(String::new, |u| format_origin(&u.origin)),
                excerpt: unit.map_or_else(String::new, |u| excerpt_of(u, config.report.excerpt_lines)),
                linked: Vec::new(),
            }
        })
        .collect()
}

/// Metrics, scaling and PCA, then LOF and Isolation Forest; reports the
/// union of their flags.
pub fn run_explicit(corpus: &Corpus, config: &PipelineConfig, out: &Path) -> Result<Report, ReportError> {
    let mut run = Run::start(Experiment::Explicit, corpus, config, out)?;
    run.features(corpus, FeatureMode::Metrics, &config.tree_ngrams, "metrics.jsonl")?;
    let projected = run.timed("preprocess", |run| {
        let stage = "preprocess";
        let metrics = FeatureSet::load(&run.out.join("metrics.jsonl")).map_err(ReportError::stage(stage))?;
        let (projected, model) = preprocess(&metrics, &config.preprocess).map_err(ReportError::stage(stage))?;
        let path = run.output("metrics.pca.jsonl");
        run.manifest.outputs.push("metrics.pca.jsonl.meta.json".into());
        run.manifest.outputs.push("metrics.pca.jsonl.model.json".into());
        projected.save(&path).map_err(ReportError::stage(stage))?;
        model.save(&model_path(&path)).map_err(ReportError::stage(stage))?;
        FeatureSet::load(&path).map_err(ReportError::stage(stage))
    })?;
    let points = projected.dense();
    let lof = run.scores("detect:lof", "scores.lof.json", || {
        lof_scores(&points, &projected.unit_ids, &config.lof).map_err(ReportError::stage("detect:lof"))
    })?;
    let iforest = run.scores("detect:iforest", "scores.iforest.json", || {
        iforest_fit_score(&points, &projected.unit_ids, &config.iforest).map_err(ReportError::stage("detect:iforest"))
    })?;
    let records = syntax_records(corpus, &[lof, iforest], config);
    run.finish(records)
}

fn rate_label(rate: f64) -> String {
    format!("autoencoder-{rate}")
}

/// Tree N-gram vectors scored by one autoencoder per compression rate;
/// reports the union of the RMS-threshold flags.
pub fn run_implicit(corpus: &Corpus, config: &PipelineConfig, out: &Path) -> Result<Report, ReportError> {
    let mut run = Run::start(Experiment::Implicit, corpus, config, out)?;
    let vectors = run.features(corpus, FeatureMode::TreeNgrams, &config.tree_ngrams, "tree_ngrams.jsonl")?;
    let mut sets = Vec::new();
    for &rate in &config.autoencoder.rates {
        let label = rate_label(rate);
        let stage = format!("detect:{label}");
        let mut summary = None;
        let set = run.scores(&stage, &format!("scores.{label}.json"), || {
            let (set, model) = autoencoder_scores(
                &vectors.vectors,
                &vectors.unit_ids,
                &config.autoencoder.model(rate),
                config.autoencoder.rms_multiplier,
            )
            .map_err(ReportError::stage(stage.clone()))?;
            summary = Some(model);
            Ok(set)
        })?;
        run.write_json(&format!("model.{label}.json"), &summary)?;
        sets.push(set);
    }
    let records = syntax_records(corpus, &sets, config);
    run.finish(records)
}

/// Trains one autoencoder per compression rate on each side, compares
/// each linked class's bytecode score with its functions' tree scores and
/// reports the classes where they diverge.
pub fn run_compiler_induced(corpus: &Corpus, config: &PipelineConfig, out: &Path) -> Result<Report, ReportError> {
    config.validate()?;
    if corpus.functions.is_empty() {
        return Err(ReportError::EmptyCorpus);
    }
    let links = corpus.links();
    if links.is_empty() {
        return Err(ReportError::NoLinkedUnits);
    }
    let mut run = Run::start(Experiment::CompilerInduced, corpus, config, out)?;
    run.write_json("links.json", &links)?;
    let tree = run.features(corpus, FeatureMode::TreeNgrams, &config.tree_ngrams, "tree_ngrams.jsonl")?;
    let bytecode = run.features(corpus, FeatureMode::BytecodeNgrams, &config.bytecode_ngrams, "bytecode_ngrams.jsonl")?;
    let cic = &config.compiler_induced;
    let mut found: BTreeMap<String, Vec<(String, Divergence)>> = BTreeMap::new();
    let mut compared = 0;
    for &rate in &config.autoencoder.rates {
        let label = rate_label(rate);
        let mut side_scores = Vec::new();
        for (side, set) in [("tree", &tree), ("bytecode", &bytecode)] {
            let name = format!("{side}/{label}");
            let stage = format!("detect:{name}");
            let mut summary = None;
            let scores = run.scores(&stage, &format!("scores.{side}.{label}.json"), || {
                let (mut scores, model) = autoencoder_scores(
                    &set.vectors,
                    &set.unit_ids,
                    &config.autoencoder.model(rate),
                    config.autoencoder.rms_multiplier,
                )
                .map_err(ReportError::stage(stage.clone()))?;
                scores.detector = name.clone();
                summary = Some(model);
                Ok(scores)
            })?;
            run.write_json(&format!("model.{side}.{label}.json"), &summary)?;
            side_scores.push(scores);
        }
        let result = run.timed(&format!("compare:{label}"), |_| {
            Ok(compiler_induced_detect(&side_scores[0], &side_scores[1], &links, cic.delta, cic.normalization))
        })?;
        compared = compared.max(result.compared);
        run.manifest.counts.insert(format!("compared:{label}"), result.compared);
        run.manifest.counts.insert(format!("divergent:{label}"), result.divergences.len());
        run.write_json(&format!("divergences.{label}.json"), &result.divergences)?;
        for d in result.divergences {
            found.entry(d.class_id.clone()).or_default().push((label.clone(), d));
        }
    }
    if compared == 0 {
        return Err(ReportError::NoLinkedUnits);
    }
    let units: HashMap<&str, &CodeUnit> = corpus.functions.iter().map(|u| (u.unit_id.as_str(), u)).collect();
    let records = found
        .into_iter()
        .map(|(class_id, hits)| {
            let class = corpus.class(&class_id);
            let strongest = hits
                .iter()
                .max_by(|a, b| {
                    let gap = |d: &Divergence| (d.bytecode_score - d.tree_score).abs();
                    gap(&a.1).total_cmp(&gap(&b.1)).then_with(|| b.0.cmp(&a.0))
                })
                .map(|(_, d)| d)
                .expect("at least one divergence");
            let representative = units.get(strongest.representative_id.as_str());
            let mut linked: Vec<String> = hits.iter().flat_map(|(_, d)| d.function_ids.iter().cloned()).collect();
            linked.sort();
            linked.dedup();
            let detectors = hits
                .iter()
                .flat_map(|(label, d)| {
                    [
                        DetectorEntry {
                            name: format!("tree/{label}"),
                            score: d.raw_tree_score,
                            threshold: cic.delta,
                            normalized: Some(d.tree_score),
                            scored_unit: Some(d.representative_id.clone()),
                        },
                        DetectorEntry {
                            name: format!("bytecode/{label}"),
                            score: d.raw_bytecode_score,
                            threshold: cic.delta,
                            normalized: Some(d.bytecode_score),
                            scored_unit: None,
                        },
                    ]
                })
                .collect();
            AnomalyRecord {
                unit_id: class_id.clone(),
                kind: RecordKind::CompilerInduced,
                name: class.map_or_else(String::new, |c| c.class_name.clone()),
                detectors,
                direction: Some(strongest.direction),
                tags: Vec::new(),
                origin: representative.map_or_else(String::new, |u| format_origin(&u.origin)),
                excerpt: representative.map_or_else(String::new, |u| excerpt_of(u, config.report.excerpt_lines)),
                linked,
            }
        })
        .collect();
    run.finish(records)
}

pub fn run_experiment(
    experiment: Experiment,
    corpus: &Corpus,
    config: &PipelineConfig,
    out: &Path,
) -> Result<Report, ReportError> {
    match experiment {
        Experiment::Explicit => run_explicit(corpus, config, out),
        Experiment::Implicit => run_implicit(corpus, config, out),
        Experiment::CompilerInduced => run_compiler_induced(corpus, config, out),
    }
}
