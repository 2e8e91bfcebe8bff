//! Anomaly records, the tag vocabulary, report emission and the three
//! experiment pipelines.

mod config;
mod markdown;
mod pipeline;
mod tags;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Origin;
use crate::detect::Direction;

pub use config::{AutoencoderSettings, CompilerInducedConfig, PipelineConfig, ReportSettings};
pub use markdown::{parse_markdown, render_markdown};
pub use pipeline::{run_compiler_induced, run_experiment, run_explicit, run_implicit, REPORT_FILE, RUN_MANIFEST_FILE};
pub use tags::{normalize_tag, TagVocabulary, STANDARD_TAGS};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("the corpus has no function units")]
    EmptyCorpus,
    #[error("no bytecode class is linked to a scored function")]
    NoLinkedUnits,
    #[error("stage `{stage}` failed")]
    Stage {
        stage: String,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("unknown tag `{0}`")]
    UnknownTag(String),
    #[error("no record for unit `{0}`")]
    UnknownUnit(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("markdown line {line}: {message}")]
    Markdown { line: usize, message: String },
}

impl ReportError {
    pub(crate) fn stage<E: std::error::Error + Send + Sync + 'static>(stage: impl Into<String>) -> impl FnOnce(E) -> ReportError {
        let stage = stage.into();
        move |e| ReportError::Stage { stage, source: Box::new(e) }
    }

    pub(crate) fn io(path: &Path, e: impl fmt::Display) -> ReportError {
        ReportError::Io { path: path.display().to_string(), message: e.to_string() }
    }

    /// 2 for configuration and usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ReportError::Config(_) | ReportError::UnknownTag(_) => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Explicit,
    Implicit,
    CompilerInduced,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::Explicit => "explicit",
            Experiment::Implicit => "implicit",
            Experiment::CompilerInduced => "compiler-induced",
        })
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "explicit" => Ok(Experiment::Explicit),
            "implicit" => Ok(Experiment::Implicit),
            "compiler-induced" => Ok(Experiment::CompilerInduced),
            other => Err(format!("unknown experiment `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordKind {
    SyntaxTree,
    CompilerInduced,
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordKind::SyntaxTree => "syntax-tree",
            RecordKind::CompilerInduced => "compiler-induced",
        })
    }
}

impl FromStr for RecordKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "syntax-tree" => Ok(RecordKind::SyntaxTree),
            "compiler-induced" => Ok(RecordKind::CompilerInduced),
            other => Err(format!("unknown record kind `{other}`")),
        }
    }
}

/// One detector's verdict on a record.
///
/// For compiler-induced records `score` is the raw score from the tree or
/// bytecode score file, `normalized` the value the delta rule compared,
/// `threshold` the delta, and `scored_unit` the unit the score belongs to
/// when it is not the record's own unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorEntry {
    pub name: String,
    pub score: f64,
    pub threshold: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scored_unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyRecord {
    pub unit_id: String,
    pub kind: RecordKind,
    pub name: String,
    pub detectors: Vec<DetectorEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
    #[serde(default)]
    pub tags: Vec<String>,
    pub origin: String,
    pub excerpt: String,
    /// Function units linked to a compiler-induced class record.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub linked: Vec<String>,
}

impl AnomalyRecord {
    pub fn max_score(&self) -> f64 {
        self.detectors.iter().map(|d| d.score).fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Report order: kind, then descending max score, then unit id.
pub fn sort_records(records: &mut [AnomalyRecord]) {
    records.sort_by(|a, b| {
        a.kind
            .cmp(&b.kind)
            .then_with(|| b.max_score().total_cmp(&a.max_score()))
            .then_with(|| a.unit_id.cmp(&b.unit_id))
    });
}

pub fn format_origin(origin: &Origin) -> String {
    match origin.span {
        Some(span) => format!("{}:{}-{}", origin.path, span.start, span.end),
        None => origin.path.clone(),
    }
}

/// The first `max_lines` lines of `text`, followed by a marker line when
/// anything was cut.
pub fn truncate_excerpt(text: &str, max_lines: usize) -> String {
    let lines: Vec<&str> = text.split('\n').collect();
    if lines.len() <= max_lines {
        return text.to_string();
    }
    let mut out = lines[..max_lines].join("\n");
    out.push_str(&format!("\n... ({} more lines)", lines.len() - max_lines));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

/// Everything needed to reproduce a run. Timings are only written to the
/// separate run manifest file, so reports of identical runs are identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: Experiment,
    pub tool_version: String,
    pub corpus_id: String,
    pub config: PipelineConfig,
    pub seeds: BTreeMap<String, u64>,
    pub counts: BTreeMap<String, usize>,
    /// Files written by the run, relative to its output directory.
    pub outputs: Vec<String>,
    /// Free-form tags accepted into the vocabulary.
    #[serde(default)]
    pub tag_extensions: Vec<String>,
    #[serde(default)]
    pub audit: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub timings: Vec<StageTiming>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub manifest: RunManifest,
    pub records: Vec<AnomalyRecord>,
}

impl Report {
    pub fn load(path: &Path) -> Result<Report, ReportError> {
        let text = std::fs::read_to_string(path).map_err(|e| ReportError::io(path, e))?;
        let report: Report = serde_json::from_str(&text).map_err(|e| ReportError::io(path, e))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(ReportError::io(path, format!("unsupported schema version {}", report.schema_version)));
        }
        Ok(report)
    }

    pub fn save(&self, path: &Path) -> Result<(), ReportError> {
        std::fs::write(path, emit_report(self, ReportFormat::Json)).map_err(|e| ReportError::io(path, e))
    }

    /// Adds tags to every record of `unit_id`. Known tags are stored under
    /// their canonical name. Unknown tags fail in strict mode and are
    /// otherwise accepted as free-form extensions. Repeating a call
    /// changes nothing.
    pub fn tag(&mut self, unit_id: &str, tags: &[String], strict: bool) -> Result<(), ReportError> {
        if !self.records.iter().any(|r| r.unit_id == unit_id) {
            return Err(ReportError::UnknownUnit(unit_id.to_string()));
        }
        let mut vocabulary = TagVocabulary::standard();
        for extension in &self.manifest.tag_extensions {
            vocabulary.extend(extension);
        }
        let mut resolved = Vec::new();
        for tag in tags {
            match vocabulary.resolve(tag) {
                Some(name) => resolved.push(name),
                None if strict => return Err(ReportError::UnknownTag(tag.clone())),
                None => {
                    let name = tag.split_whitespace().collect::<Vec<_>>().join(" ");
                    if name.is_empty() {
                        return Err(ReportError::UnknownTag(tag.clone()));
                    }
                    vocabulary.extend(&name);
                    self.manifest.tag_extensions.push(name.clone());
                    resolved.push(name);
                }
            }
        }
        let mut added = Vec::new();
        for record in self.records.iter_mut().filter(|r| r.unit_id == unit_id) {
            for name in &resolved {
                if !record.tags.contains(name) {
                    record.tags.push(name.clone());
                    if !added.contains(name) {
                        added.push(name.clone());
                    }
                }
            }
            record.tags.sort_by_key(|t| (vocabulary.rank(t).unwrap_or(usize::MAX), t.clone()));
        }
        if !added.is_empty() {
            self.manifest.audit.push(format!("tagged {unit_id}: {}", added.join(", ")));
        }
        Ok(())
    }
}

/// Serializes a report. Records are put in report order and timings are
/// left out, so identical runs emit identical bytes.
pub fn emit_report(report: &Report, format: ReportFormat) -> String {
    let mut report = report.clone();
    report.manifest.timings.clear();
    sort_records(&mut report.records);
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        ReportFormat::Markdown => render_markdown(&report),
    }
}
