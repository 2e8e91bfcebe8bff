//! Neutral tree format: one JSON record per line, each a FUNCTION-rooted
//! `{kind, children, text?, span?}` tree. The root may also carry
//! `origin` (a path string), `name` and `owner`.

use std::io::Write;

use serde::Deserialize;
use serde_json::{Map, Value};

use super::{CodeUnit, CorpusError, Origin};
use crate::parser::{NodeKind, SyntaxNode};

/// Parses neutral-format text. `path` is used for error messages and as
/// the default origin.
pub fn parse_trees(text: &str, path: &str) -> Result<Vec<CodeUnit>, CorpusError> {
    let mut units = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let record = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String| CorpusError::format(path, record, format!("record {record}: {message}"));
        let mut de = serde_json::Deserializer::from_str(line);
        de.disable_recursion_limit();
        let value = Value::deserialize(&mut de).map_err(|e| fail(e.to_string()))?;
        let Value::Object(mut map) = value else {
            return Err(fail("expected an object".into()));
        };
        let origin = take_string(&mut map, "origin");
        let owner = take_string(&mut map, "owner");
        let name = take_string(&mut map, "name");
        let tree = SyntaxNode::deserialize(Value::Object(map)).map_err(|e| fail(e.to_string()))?;
        tree.validate().map_err(fail)?;
        if tree.kind != NodeKind::Function {
            return Err(fail(format!("root must be FUNCTION, found {}", tree.kind)));
        }
        let display = name.or_else(|| tree.name().map(str::to_string)).unwrap_or_else(|| "<anonymous>".into());
        let span = tree.span;
        units.push(CodeUnit::function(tree, Origin { path: origin.unwrap_or_else(|| path.to_string()), span }, display, owner));
    }
    Ok(units)
}

fn take_string(map: &mut Map<String, Value>, key: &str) -> Option<String> {
    match map.remove(key) {
        Some(Value::String(s)) => Some(s),
        _ => None,
    }
}

/// Writes function units in the neutral format.
pub fn write_trees<W: Write>(units: &[CodeUnit], mut out: W) -> std::io::Result<()> {
    for unit in units {
        let Some(tree) = unit.tree() else { continue };
        let mut value = serde_json::to_value(tree).map_err(std::io::Error::other)?;
        if let Value::Object(map) = &mut value {
            map.insert("origin".into(), Value::String(unit.origin.path.clone()));
            map.insert("name".into(), Value::String(unit.display_name.clone()));
            if let Some(owner) = &unit.owner {
                map.insert("owner".into(), Value::String(owner.clone()));
            }
        }
        serde_json::to_writer(&mut out, &value).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
