//! Markdown rendering of reports and the matching reader.
//!
//! Each record is a `###` section holding a field list, a detector table
//! and the excerpt in a fenced block. Numbers are written in their
//! shortest round-trip form, so a parsed record equals the original.

use super::{AnomalyRecord, DetectorEntry, RecordKind, Report, ReportError};
use crate::detect::Direction;

fn fence_for(text: &str) -> String {
    let mut longest = 0;
    let mut run = 0;
    for c in text.chars() {
        if c == '`' {
            run += 1;
            longest = longest.max(run);
        } else {
            run = 0;
        }
    }
    "`".repeat((longest + 1).max(3))
}

fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::BytecodeLoud => "bytecode-loud",
        Direction::SourceLoud => "source-loud",
    }
}

pub fn render_markdown(report: &Report) -> String {
    let m = &report.manifest;
    let mut out = String::from("# Anomaly report\n\n");
    out.push_str(&format!("- schema_version: {}\n", report.schema_version));
    out.push_str(&format!("- experiment: {}\n", m.experiment));
    out.push_str(&format!("- corpus_id: {}\n", m.corpus_id));
    out.push_str(&format!("- records: {}\n", report.records.len()));
    let mut section = None;
    for r in &report.records {
        if section != Some(r.kind) {
            section = Some(r.kind);
            out.push_str(match r.kind {
                RecordKind::SyntaxTree => "\n## Syntax-tree anomalies\n",
                RecordKind::CompilerInduced => "\n## Compiler-induced anomalies\n",
            });
        }
        out.push_str(&format!("\n### {}\n\n", r.name));
        out.push_str(&format!("- unit_id: `{}`\n", r.unit_id));
        out.push_str(&format!("- kind: {}\n", r.kind));
        out.push_str(&format!("- origin: {}\n", r.origin));
        if let Some(d) = r.direction {
            out.push_str(&format!("- direction: {}\n", direction_name(d)));
        }
        out.push_str(&format!("- tags: {}\n", serde_json::to_string(&r.tags).expect("tags serialize")));
        if !r.linked.is_empty() {
            out.push_str(&format!("- linked: {}\n", serde_json::to_string(&r.linked).expect("ids serialize")));
        }
        out.push_str("\n| detector | score | threshold | normalized | unit |\n| --- | --- | --- | --- | --- |\n");
        for d in &r.detectors {
            let normalized = d.normalized.map_or("-".to_string(), |v| v.to_string());
            let unit = d.scored_unit.as_deref().unwrap_or("-");
            out.push_str(&format!("| {} | {} | {} | {} | {} |\n", d.name, d.score, d.threshold, normalized, unit));
        }
        let fence = fence_for(&r.excerpt);
        out.push_str(&format!("\n{fence}kotlin\n{}\n{fence}\n", r.excerpt));
    }
    out
}

fn number(text: &str, line: usize) -> Result<f64, ReportError> {
    text.parse().map_err(|_| ReportError::Markdown { line, message: format!("bad number `{text}`") })
}

/// Reads the records back from [`render_markdown`] output.
pub fn parse_markdown(text: &str) -> Result<Vec<AnomalyRecord>, ReportError> {
    let lines: Vec<&str> = text.split('\n').collect();
    let mut records: Vec<AnomalyRecord> = Vec::new();
    let mut i = 0;
    let err = |line: usize, message: String| ReportError::Markdown { line: line + 1, message };
    while i < lines.len() {
        let line = lines[i];
        if let Some(name) = line.strip_prefix("### ") {
            records.push(AnomalyRecord {
                unit_id: String::new(),
                kind: RecordKind::SyntaxTree,
                name: name.to_string(),
                detectors: vec![],
                direction: None,
                tags: vec![],
                origin: String::new(),
                excerpt: String::new(),
                linked: vec![],
            });
            i += 1;
            continue;
        }
        let Some(record) = records.last_mut() else {
            i += 1;
            continue;
        };
        if let Some(field) = line.strip_prefix("- ") {
            let (key, value) = field.split_once(": ").ok_or_else(|| err(i, format!("bad field `{field}`")))?;
            match key {
                "unit_id" => record.unit_id = value.trim_matches('`').to_string(),
                "kind" => record.kind = value.parse().map_err(|m| err(i, m))?,
                "origin" => record.origin = value.to_string(),
                "direction" => {
                    record.direction = Some(match value {
                        "bytecode-loud" => Direction::BytecodeLoud,
                        "source-loud" => Direction::SourceLoud,
                        other => return Err(err(i, format!("unknown direction `{other}`"))),
                    })
                }
                "tags" => record.tags = serde_json::from_str(value).map_err(|e| err(i, e.to_string()))?,
                "linked" => record.linked = serde_json::from_str(value).map_err(|e| err(i, e.to_string()))?,
                other => return Err(err(i, format!("unknown field `{other}`"))),
            }
        } else if line.starts_with("| ") && !line.starts_with("| detector") && !line.starts_with("| ---") {
            let cells: Vec<&str> = line.trim_matches('|').split(" | ").map(str::trim).collect();
            if cells.len() != 5 {
                return Err(err(i, format!("expected 5 cells, found {}", cells.len())));
            }
            record.detectors.push(DetectorEntry {
                name: cells[0].to_string(),
                score: number(cells[1], i + 1)?,
                threshold: number(cells[2], i + 1)?,
                normalized: if cells[3] == "-" { None } else { Some(number(cells[3], i + 1)?) },
                scored_unit: (cells[4] != "-").then(|| cells[4].to_string()),
            });
        } else if line.starts_with("```") {
            let fence: String = line.chars().take_while(|&c| c == '`').collect();
            let start = i + 1;
            let end = (start..lines.len())
                .find(|&j| lines[j] == fence)
                .ok_or_else(|| err(i, "unterminated code block".into()))?;
            record.excerpt = lines[start..end].join("\n");
            i = end;
        }
        i += 1;
    }
    if let Some(r) = records.iter().find(|r| r.unit_id.is_empty()) {
        return Err(ReportError::Markdown { line: 0, message: format!("record `{}` has no unit_id", r.name) });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::super::tests::{record, report};
    use super::super::{emit_report, ReportFormat};
    use super::*;

    #[test]
    fn round_trip() {
        let mut a = record("a1", RecordKind::SyntaxTree, &[("lof", 0.1 + 0.2), ("iforest", f64::MAX)]);
        a.tags = vec!["When expression".into(), "odd | tag \"q\"".into()];
        a.excerpt = "val s = \"\"\"\n```\n````x\n\"\"\"\n".into();
        let mut b = record("b2", RecordKind::CompilerInduced, &[("tree/autoencoder-0.5", 1e-300)]);
        b.direction = Some(Direction::SourceLoud);
        b.detectors[0].normalized = Some(1.0 / 3.0);
        b.detectors[0].scored_unit = Some("f9".into());
        b.linked = vec!["f1".into(), "f9".into()];
        b.excerpt = String::new();
        let mut c = record("c3", RecordKind::SyntaxTree, &[("lof", 2.0)]);
        c.excerpt = "\n".into();
        let r = report(vec![b, a, c]);
        let md = emit_report(&r, ReportFormat::Markdown);
        let parsed = parse_markdown(&md).unwrap();
        let mut expected = r.records.clone();
        super::super::sort_records(&mut expected);
        assert_eq!(parsed, expected);
    }

    #[test]
    fn fences_outgrow_backtick_runs() {
        assert_eq!(fence_for("plain"), "```");
        assert_eq!(fence_for("a ```` b"), "`````");
    }

    #[test]
    fn malformed_input() {
        assert!(parse_markdown("### x\n\n- kind: weird\n").is_err());
        assert!(parse_markdown("### x\n- unit_id: `a`\n```kotlin\nopen\n").is_err());
        assert!(parse_markdown("### x\n- origin: y\n").is_err());
        assert_eq!(parse_markdown("# Nothing\n").unwrap(), vec![]);
    }
}
