//! Ingestion of source files, serialized trees and bytecode listings into
//! analysis units, plus deduplication, source/bytecode linking and corpus
//! persistence.

mod bytecode;
mod store;
mod trees;

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::parser::{parse_source, NodeKind, Span, SyntaxNode};

pub use bytecode::{
    is_known_mnemonic, javap_to_listing, parse_listing, write_listing, BytecodeIngest, BytecodeUnit, Diagnostic,
    JVM_OPCODES,
};
pub use store::{Corpus, CorpusManifest, IngestConfig, CLASSES_FILE, FUNCTIONS_FILE, LINKS_FILE, MANIFEST_FILE};
pub use trees::{parse_trees, write_trees};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format { path: String, line: usize, message: String },
    #[error("corpus at {0} is inconsistent: {1}")]
    Inconsistent(String, String),
}

impl CorpusError {
    pub(crate) fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CorpusError::Io { path: path.as_ref().display().to_string(), source }
    }

    pub(crate) fn format(path: impl AsRef<Path>, line: usize, message: impl Into<String>) -> Self {
        CorpusError::Format { path: path.as_ref().display().to_string(), line, message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    Function,
    Class,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
}

/// An analysis unit on the syntax-tree side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeUnit {
    pub unit_id: String,
    pub kind: UnitKind,
    pub origin: Origin,
    pub display_name: String,
    /// JVM class the unit compiles into, used for bytecode linking.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner: Option<String>,
    /// Source lines covered by the unit, when ingested from source.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<SyntaxNode>,
}

impl CodeUnit {
    pub fn function(tree: SyntaxNode, origin: Origin, display_name: String, owner: Option<String>) -> Self {
        CodeUnit {
            unit_id: tree_id(&tree),
            kind: UnitKind::Function,
            origin,
            display_name,
            owner,
            source: None,
            tree: Some(tree),
        }
    }

    /// The unit's tree. Function units always carry one.
    pub fn tree(&self) -> Option<&SyntaxNode> {
        self.tree.as_ref()
    }

    /// Unqualified function name.
    pub fn short_name(&self) -> &str {
        self.display_name.rsplit('.').next().unwrap_or_default()
    }
}

pub(crate) fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Content hash of a tree ignoring spans.
pub fn tree_id(tree: &SyntaxNode) -> String {
    fn feed(node: &SyntaxNode, hasher: &mut Sha256) {
        hasher.update(node.kind.as_str().as_bytes());
        match &node.text {
            Some(text) => {
                hasher.update([1]);
                hasher.update((text.len() as u64).to_le_bytes());
                hasher.update(text.as_bytes());
            }
            None => hasher.update([0]),
        }
        hasher.update((node.children.len() as u64).to_le_bytes());
        for child in &node.children {
            feed(child, hasher);
        }
    }
    let mut hasher = Sha256::new();
    feed(tree, &mut hasher);
    hex::encode(hasher.finalize())
}

/// A source file that was not turned into units.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub path: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SourceIngest {
    pub units: Vec<CodeUnit>,
    pub skipped: Vec<Skip>,
}

/// Parses each file in parallel and extracts one unit per function
/// declaration, including member, nested and local functions. Unreadable
/// or unparsable files are logged and skipped. Units are ordered by
/// `unit_id`, ties in input order.
pub fn ingest_source<P: AsRef<Path> + Sync>(paths: &[P]) -> SourceIngest {
    let per_file: Vec<Result<Vec<CodeUnit>, Skip>> = paths.par_iter().map(|p| ingest_file(p.as_ref())).collect();
    let mut out = SourceIngest::default();
    for result in per_file {
        match result {
            Ok(units) => out.units.extend(units),
            Err(skip) => {
                log::warn!("skipping {}: {}", skip.path, skip.reason);
                out.skipped.push(skip);
            }
        }
    }
    out.units.sort_by(|a, b| a.unit_id.cmp(&b.unit_id));
    out
}

fn ingest_file(path: &Path) -> Result<Vec<CodeUnit>, Skip> {
    let display = path.display().to_string();
    let skip = |reason: String| Skip { path: display.clone(), reason };
    let text = fs::read_to_string(path).map_err(|e| skip(e.to_string()))?;
    let tree = parse_source(&text).map_err(|e| skip(e.to_string()))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("File");
    Ok(extract_functions(&tree, &display, stem, Some(&text)))
}

/// Walks a FILE tree and returns a unit for every FUNCTION node.
pub fn extract_functions(file: &SyntaxNode, path: &str, file_stem: &str, text: Option<&str>) -> Vec<CodeUnit> {
    let package = file
        .child(NodeKind::PackageDirective)
        .map(|p| p.children.iter().map(|c| c.text()).collect::<Vec<_>>().join("."))
        .unwrap_or_default();
    let lines: Vec<&str> = text.map(|t| t.lines().collect()).unwrap_or_default();
    let mut walker = Walker {
        package,
        facade: facade_class_name(file_stem),
        classes: Vec::new(),
        names: Vec::new(),
        path,
        lines,
        has_text: text.is_some(),
        out: Vec::new(),
    };
    walker.walk(file);
    walker.out
}

/// JVM name of the class holding a file's top-level functions.
pub fn facade_class_name(file_stem: &str) -> String {
    let mut chars = file_stem.chars();
    let mut name: String = match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    };
    name = name.chars().map(|c| if c.is_alphanumeric() || c == '_' { c } else { '_' }).collect();
    name.push_str("Kt");
    name
}

struct Walker<'a> {
    package: String,
    facade: String,
    classes: Vec<String>,
    names: Vec<String>,
    path: &'a str,
    lines: Vec<&'a str>,
    has_text: bool,
    out: Vec<CodeUnit>,
}

impl Walker<'_> {
    fn qualify(&self, simple: &str) -> String {
        if self.package.is_empty() {
            simple.to_string()
        } else {
            format!("{}.{simple}", self.package)
        }
    }

    fn walk(&mut self, node: &SyntaxNode) {
        match node.kind {
            NodeKind::Class | NodeKind::Interface | NodeKind::ObjectDeclaration => {
                let name = node.name().unwrap_or("Companion").to_string();
                self.classes.push(name.clone());
                self.names.push(name);
                self.walk_children(node);
                self.names.pop();
                self.classes.pop();
            }
            NodeKind::Function => {
                let name = node.name().unwrap_or("<anonymous>").to_string();
                let mut display = self.names.join(".");
                if !display.is_empty() {
                    display.push('.');
                }
                display.push_str(&name);
                let owner = if self.classes.is_empty() {
                    self.qualify(&self.facade)
                } else {
                    self.qualify(&self.classes.join("$"))
                };
                let mut unit = CodeUnit::function(
                    node.clone(),
                    Origin { path: self.path.to_string(), span: node.span },
                    display,
                    Some(owner),
                );
                if self.has_text {
                    unit.source = node.span.map(|s| self.excerpt(s));
                }
                self.out.push(unit);
                self.names.push(name);
                self.walk_children(node);
                self.names.pop();
            }
            _ => self.walk_children(node),
        }
    }

    fn walk_children(&mut self, node: &SyntaxNode) {
        for child in &node.children {
            self.walk(child);
        }
    }

    fn excerpt(&self, span: Span) -> String {
        let start = (span.start as usize).saturating_sub(1).min(self.lines.len());
        let end = (span.end as usize).clamp(start, self.lines.len());
        self.lines[start..end].join("\n")
    }
}

/// Keeps the first unit for every distinct span-free tree.
pub fn dedup_units(units: Vec<CodeUnit>) -> Vec<CodeUnit> {
    let mut seen = HashSet::new();
    units.into_iter().filter(|u| seen.insert(u.unit_id.clone())).collect()
}

/// Recursively lists `.kt` files under `dir` in path order.
pub fn collect_sources(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let mut paths = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| dir.to_path_buf());
            CorpusError::io(path, std::io::Error::other(e.to_string()))
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "kt") {
            paths.push(entry.into_path());
        }
    }
    Ok(paths)
}

/// Fills `source_link` on each class with the functions compiled into it.
///
/// A class links to the functions whose owner equals its name. Synthetic
/// classes such as `Foo$bar$1` are stripped at `$` boundaries to the
/// longest known owner; if the next segment names a function of that
/// owner, only that function is linked.
pub fn link_units(functions: &[CodeUnit], classes: &mut [BytecodeUnit]) {
    let mut by_owner: HashMap<&str, Vec<&CodeUnit>> = HashMap::new();
    for unit in functions {
        if let Some(owner) = unit.owner.as_deref() {
            by_owner.entry(owner).or_default().push(unit);
        }
    }
    for class in classes.iter_mut() {
        class.source_link.clear();
        let segments: Vec<&str> = class.class_name.split('$').collect();
        for cut in (1..=segments.len()).rev() {
            let prefix = segments[..cut].join("$");
            let Some(owned) = by_owner.get(prefix.as_str()) else { continue };
            let named: Vec<&&CodeUnit> = match segments.get(cut) {
                Some(next) => owned.iter().filter(|u| u.short_name() == *next).collect(),
                None => Vec::new(),
            };
            let chosen: Vec<&&CodeUnit> = if named.is_empty() { owned.iter().collect() } else { named };
            class.source_link = chosen.iter().map(|u| u.unit_id.clone()).collect();
            class.source_link.sort();
            class.source_link.dedup();
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn units_of(src: &str, stem: &str) -> Vec<CodeUnit> {
        let tree = parse_source(src).unwrap();
        extract_functions(&tree, &format!("{stem}.kt"), stem, Some(src))
    }

    #[test]
    fn extracts_member_nested_and_top_level_functions() {
        let src = "package a.b\n\nfun top() {\n    fun local() {}\n}\n\nclass Foo {\n    fun bar() = 1\n    object Inner {\n        fun baz() {}\n    }\n}\n";
        let units = units_of(src, "util");
        let names: Vec<_> = units.iter().map(|u| u.display_name.as_str()).collect();
        assert_eq!(names, ["top", "top.local", "Foo.bar", "Foo.Inner.baz"]);
        let owners: Vec<_> = units.iter().map(|u| u.owner.as_deref().unwrap()).collect();
        assert_eq!(owners, ["a.b.UtilKt", "a.b.UtilKt", "a.b.Foo", "a.b.Foo$Inner"]);
        assert_eq!(units[0].origin.span, Some(Span::new(3, 5)));
        assert_eq!(units[0].source.as_deref(), Some("fun top() {\n    fun local() {}\n}"));
        assert!(units.iter().all(|u| u.kind == UnitKind::Function && u.tree.is_some()));
    }

    #[test]
    fn ids_ignore_spans_but_not_identifiers() {
        let a = &units_of("fun f() { g() }", "a")[0];
        let b = &units_of("\n\n\nfun f() {\n g()\n}", "b")[0];
        let c = &units_of("fun f() { h() }", "c")[0];
        assert_eq!(a.unit_id, b.unit_id);
        assert_ne!(a.unit_id, c.unit_id);
        assert_eq!(a.unit_id.len(), 64);
    }

    #[test]
    fn dedup_keeps_first() {
        let mut units = units_of("fun f() {}", "a");
        units.extend(units_of("fun f() {}", "b"));
        units.extend(units_of("fun g() {}", "c"));
        let kept = dedup_units(units);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].origin.path, "a.kt");
    }

    #[test]
    fn facade_names() {
        assert_eq!(facade_class_name("util"), "UtilKt");
        assert_eq!(facade_class_name("my-file"), "My_fileKt");
    }

    #[test]
    fn links_members_and_synthetic_classes() {
        let mut units = units_of("package p\nclass Foo {\n fun bar() {}\n fun qux() {}\n}\nfun top() {}\n", "main");
        units.sort_by(|a, b| a.display_name.cmp(&b.display_name));
        let id = |name: &str| units.iter().find(|u| u.display_name == name).unwrap().unit_id.clone();
        let mut classes = vec![
            BytecodeUnit::new("p.Foo".into(), vec!["return".into()], vec![], String::new()),
            BytecodeUnit::new("p.Foo$bar$1".into(), vec!["return".into()], vec![], String::new()),
            BytecodeUnit::new("p.MainKt".into(), vec!["return".into()], vec![], String::new()),
            BytecodeUnit::new("q.Other".into(), vec!["return".into()], vec![], String::new()),
        ];
        link_units(&units, &mut classes);
        let mut foo = vec![id("Foo.bar"), id("Foo.qux")];
        foo.sort();
        assert_eq!(classes[0].source_link, foo);
        assert_eq!(classes[1].source_link, vec![id("Foo.bar")]);
        assert_eq!(classes[2].source_link, vec![id("top")]);
        assert!(classes[3].source_link.is_empty());
    }
}
