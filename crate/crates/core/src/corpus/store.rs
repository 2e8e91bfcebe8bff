//! Corpus directories: `manifest.json`, `functions.jsonl`, `classes.jsonl`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{
    collect_sources, content_hash, dedup_units, ingest_source, link_units, parse_listing, parse_trees, BytecodeUnit,
    CodeUnit, CorpusError, Diagnostic, Skip,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FUNCTIONS_FILE: &str = "functions.jsonl";
pub const CLASSES_FILE: &str = "classes.jsonl";
pub const LINKS_FILE: &str = "links.json";

/// Inputs of an ingest run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestConfig {
    /// Directory scanned recursively for `.kt` files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub src: Option<PathBuf>,
    /// Neutral-format tree file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trees: Option<PathBuf>,
    /// Bytecode listing file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bytecode: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub corpus_id: String,
    pub function_count: usize,
    pub class_count: usize,
    pub linked_class_count: usize,
    pub config: IngestConfig,
    #[serde(default)]
    pub skipped: Vec<Skip>,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub manifest: CorpusManifest,
    pub functions: Vec<CodeUnit>,
    pub classes: Vec<BytecodeUnit>,
}

impl Corpus {
    /// Builds a corpus from in-memory units: deduplicates functions and
    /// classes, links classes to functions and derives the manifest.
    pub fn from_units(functions: Vec<CodeUnit>, classes: Vec<BytecodeUnit>, config: IngestConfig) -> Corpus {
        let functions = dedup_units(functions);
        let mut seen = std::collections::HashSet::new();
        let mut classes: Vec<BytecodeUnit> = classes.into_iter().filter(|c| seen.insert(c.unit_id.clone())).collect();
        link_units(&functions, &mut classes);
        let mut id_material = String::new();
        for id in functions.iter().map(|u| &u.unit_id).chain(classes.iter().map(|c| &c.unit_id)) {
            id_material.push_str(id);
            id_material.push('\n');
        }
        let manifest = CorpusManifest {
            corpus_id: content_hash(id_material.as_bytes())[..16].to_string(),
            function_count: functions.len(),
            class_count: classes.len(),
            linked_class_count: classes.iter().filter(|c| !c.source_link.is_empty()).count(),
            config,
            skipped: Vec::new(),
            diagnostics: Vec::new(),
        };
        Corpus { manifest, functions, classes }
    }

    /// Runs every configured ingestion step.
    pub fn ingest(config: &IngestConfig) -> Result<Corpus, CorpusError> {
        let mut functions = Vec::new();
        let mut skipped = Vec::new();
        if let Some(src) = &config.src {
            let paths = collect_sources(src)?;
            let ingest = ingest_source(&paths);
            functions.extend(ingest.units);
            skipped = ingest.skipped;
        }
        if let Some(trees) = &config.trees {
            let text = fs::read_to_string(trees).map_err(|e| CorpusError::io(trees, e))?;
            let mut units = parse_trees(&text, &trees.display().to_string())?;
            units.sort_by(|a, b| a.unit_id.cmp(&b.unit_id));
            functions.extend(units);
        }
        functions.sort_by(|a, b| a.unit_id.cmp(&b.unit_id));
        let mut classes = Vec::new();
        let mut diagnostics = Vec::new();
        if let Some(listing) = &config.bytecode {
            let text = fs::read_to_string(listing).map_err(|e| CorpusError::io(listing, e))?;
            let ingest = parse_listing(&text, &listing.display().to_string())?;
            for d in &ingest.diagnostics {
                log::warn!("{}:{}: {}", listing.display(), d.line, d.message);
            }
            classes = ingest.units;
            diagnostics = ingest.diagnostics;
        }
        let mut corpus = Corpus::from_units(functions, classes, config.clone());
        corpus.manifest.skipped = skipped;
        corpus.manifest.diagnostics = diagnostics;
        Ok(corpus)
    }

    pub fn save(&self, dir: &Path) -> Result<(), CorpusError> {
        fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
        write_jsonl(&dir.join(FUNCTIONS_FILE), &self.functions)?;
        write_jsonl(&dir.join(CLASSES_FILE), &self.classes)?;
        let links = dir.join(LINKS_FILE);
        let json = serde_json::to_string_pretty(&self.links()).map_err(|e| CorpusError::io(&links, e.into()))?;
        fs::write(&links, json + "\n").map_err(|e| CorpusError::io(&links, e))?;
        let path = dir.join(MANIFEST_FILE);
        let json = serde_json::to_string_pretty(&self.manifest).map_err(|e| CorpusError::io(&path, e.into()))?;
        fs::write(&path, json + "\n").map_err(|e| CorpusError::io(&path, e))
    }

    /// Loads a saved corpus and checks the manifest counts.
    pub fn load(dir: &Path) -> Result<Corpus, CorpusError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CorpusError::io(&path, e))?;
        let manifest: CorpusManifest =
            serde_json::from_str(&text).map_err(|e| CorpusError::format(&path, e.line(), e.to_string()))?;
        let functions: Vec<CodeUnit> = read_jsonl(&dir.join(FUNCTIONS_FILE))?;
        let classes: Vec<BytecodeUnit> = read_jsonl(&dir.join(CLASSES_FILE))?;
        if functions.len() != manifest.function_count || classes.len() != manifest.class_count {
            return Err(CorpusError::Inconsistent(
                dir.display().to_string(),
                format!(
                    "manifest lists {} functions and {} classes, found {} and {}",
                    manifest.function_count,
                    manifest.class_count,
                    functions.len(),
                    classes.len()
                ),
            ));
        }
        Ok(Corpus { manifest, functions, classes })
    }

    pub fn function(&self, unit_id: &str) -> Option<&CodeUnit> {
        self.functions.iter().find(|u| u.unit_id == unit_id)
    }

    pub fn class(&self, unit_id: &str) -> Option<&BytecodeUnit> {
        self.classes.iter().find(|c| c.unit_id == unit_id)
    }

    /// Class ids paired with the function ids they link to, for every
    /// linked class.
    pub fn links(&self) -> Vec<(String, Vec<String>)> {
        self.classes
            .iter()
            .filter(|c| !c.source_link.is_empty())
            .map(|c| (c.unit_id.clone(), c.source_link.clone()))
            .collect()
    }
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CorpusError> {
    let file = fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut out, item).map_err(|e| CorpusError::io(path, e.into()))?;
        out.write_all(b"\n").map_err(|e| CorpusError::io(path, e))?;
    }
    out.flush().map_err(|e| CorpusError::io(path, e))
}

pub(crate) fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    let mut items = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut de = serde_json::Deserializer::from_str(line);
        de.disable_recursion_limit();
        let item = T::deserialize(&mut de).map_err(|e| CorpusError::format(path, idx + 1, e.to_string()))?;
        items.push(item);
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ingest_save_load() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("src");
        fs::create_dir_all(src.join("sub")).unwrap();
        fs::write(src.join("a.kt"), "package p\nclass A {\n fun f() = 1\n}\nfun g() {}\n").unwrap();
        fs::write(src.join("sub/b.kt"), "fun g() {}\n").unwrap();
        fs::write(src.join("bad.kt"), "fun (\n").unwrap();
        let listing = dir.path().join("classes.txt");
        fs::write(&listing, "class p.A\nmethod f\niconst_1\nireturn\n\nclass p.AKt\nmethod g\nreturn\n").unwrap();
        let config = IngestConfig { src: Some(src), trees: None, bytecode: Some(listing) };
        let corpus = Corpus::ingest(&config).unwrap();
        assert_eq!(corpus.manifest.function_count, 2);
        assert_eq!(corpus.manifest.class_count, 2);
        assert_eq!(corpus.manifest.linked_class_count, 2);
        assert_eq!(corpus.manifest.skipped.len(), 1);

        let out = dir.path().join("corpus");
        corpus.save(&out).unwrap();
        let loaded = Corpus::load(&out).unwrap();
        assert_eq!(loaded, corpus);
        assert_eq!(Corpus::ingest(&config).unwrap().manifest.corpus_id, corpus.manifest.corpus_id);

        fs::write(out.join(CLASSES_FILE), "").unwrap();
        assert!(matches!(Corpus::load(&out), Err(CorpusError::Inconsistent(..))));
    }
}
