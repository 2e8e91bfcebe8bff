use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_codeanomaly")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A small generated corpus, ingested with its bytecode listing.
fn corpus(dir: &Path) -> std::path::PathBuf {
    let src = dir.join("synth");
    let corpus = dir.join("corpus");
    ok(&["synth", "--out", p(&src), "--functions", "300", "--seed", "3"]);
    ok(&[
        "ingest",
        "--src",
        p(&src.join("src")),
        "--bytecode",
        p(&src.join("classes.txt")),
        "--out",
        p(&corpus),
    ]);
    corpus
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn stage_commands_chain() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let corpus = corpus(dir);

    let metrics = dir.join("metrics.jsonl");
    ok(&["features", "--corpus", p(&corpus), "--mode", "metrics", "--out", p(&metrics)]);
    let pca = dir.join("pca.jsonl");
    ok(&["preprocess", "--vectors", p(&metrics), "--pca-k", "5", "--out", p(&pca)]);
    assert!(dir.join("pca.jsonl.model.json").exists());

    let lof = dir.join("lof.json");
    ok(&["detect", "--vectors", p(&pca), "--algo", "lof", "--contamination", "0.01", "--k", "10", "--out", p(&lof)]);
    let scores = json(&lof);
    assert_eq!(scores["detector"], "lof");
    let n = scores["scores"].as_array().map(|a| a.len()).or_else(|| scores["scores"].as_object().map(|o| o.len()));
    assert!(n.unwrap() > 300);
    // ceil(0.01 * n) units
    let flagged = scores["flagged"].as_array().unwrap().len();
    assert_eq!(flagged, (0.01 * n.unwrap() as f64).ceil() as usize);

    let iforest = dir.join("if.json");
    ok(&["detect", "--vectors", p(&pca), "--algo", "iforest", "--trees", "50", "--seed", "1", "--out", p(&iforest)]);
    assert_eq!(json(&iforest)["detector"], "iforest");

    let tree = dir.join("tree.jsonl");
    let bytecode = dir.join("bytecode.jsonl");
    ok(&["features", "--corpus", p(&corpus), "--mode", "tree-ngrams", "--out", p(&tree)]);
    ok(&["features", "--corpus", p(&corpus), "--mode", "bytecode-ngrams", "--min-df", "2", "--out", p(&bytecode)]);
    let ta = dir.join("ta.json");
    let ba = dir.join("ba.json");
    ok(&["detect", "--vectors", p(&tree), "--algo", "autoencoder", "--epochs", "2", "--out", p(&ta)]);
    ok(&["detect", "--vectors", p(&bytecode), "--algo", "autoencoder", "--epochs", "2", "--out", p(&ba)]);
    assert!(dir.join("ta.json.model.json").exists());

    let ci = dir.join("ci.json");
    ok(&[
        "detect",
        "compiler-induced",
        "--tree-scores",
        p(&ta),
        "--bytecode-scores",
        p(&ba),
        "--links",
        p(&corpus),
        "--out",
        p(&ci),
    ]);
    assert!(json(&ci)["compared"].as_u64().unwrap() > 0);

    // The links file saved with the corpus works in place of the directory.
    let ci2 = dir.join("ci2.json");
    ok(&[
        "detect",
        "compiler-induced",
        "--tree-scores",
        p(&ta),
        "--bytecode-scores",
        p(&ba),
        "--links",
        p(&corpus.join("links.json")),
        "--out",
        p(&ci2),
    ]);
    assert_eq!(json(&ci), json(&ci2));
}

#[test]
fn pipeline_report_and_tagging() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let corpus = corpus(dir);
    let out = dir.join("run");
    ok(&["pipeline", "run", "--corpus", p(&corpus), "--experiment", "explicit", "--out", p(&out)]);
    let report_path = out.join("report.json");
    assert!(out.join("run_manifest.json").exists());
    let report = json(&report_path);
    let records = report["records"].as_array().unwrap();
    assert!(!records.is_empty());
    let unit = records[0]["unit_id"].as_str().unwrap().to_string();

    let md = ok(&["pipeline", "report", "--records", p(&report_path), "--format", "markdown"]);
    assert!(md.starts_with("# Anomaly report"));
    assert!(md.contains(&unit));
    let without = ok(&["pipeline", "report", "--records", p(&report_path), "--format", "markdown", "--exclude", &unit]);
    assert!(!without.contains(&unit));
    let as_json = ok(&["pipeline", "report", "--records", p(&report_path), "--format", "json"]);
    assert_eq!(serde_json::from_str::<serde_json::Value>(&as_json).unwrap(), report);

    ok(&["tag", "--report", p(&report_path), "--unit", &unit, "--tag", "\"when expression\"", "--tag", "Lambdas"]);
    let once = fs::read_to_string(&report_path).unwrap();
    ok(&["tag", "--report", p(&report_path), "--unit", &unit, "--tag", "lambdas", "--tag", "When expression"]);
    assert_eq!(once, fs::read_to_string(&report_path).unwrap());
    assert_eq!(json(&report_path)["records"][0]["tags"], serde_json::json!(["When expression", "Lambdas"]));

    let strict = run(&["tag", "--report", p(&report_path), "--unit", &unit, "--tag", "not a tag", "--strict"]);
    assert_eq!(strict.status.code(), Some(2));
    let missing = run(&["tag", "--report", p(&report_path), "--unit", "nope", "--tag", "Lambdas"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();

    let bad = dir.join("bad.toml");
    fs::write(&bad, "[lof]\ncontamination = 0.9\n").unwrap();
    let out = run(&["pipeline", "run", "--corpus", p(dir), "--experiment", "explicit", "--config", p(&bad), "--out", p(dir)]);
    assert_eq!(out.status.code(), Some(2));

    let unknown = dir.join("unknown.toml");
    fs::write(&unknown, "[lof]\nneighbours = 3\n").unwrap();
    let out = run(&["pipeline", "run", "--corpus", p(dir), "--experiment", "explicit", "--config", p(&unknown), "--out", p(dir)]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&["pipeline", "run", "--corpus", p(&dir.join("missing")), "--experiment", "implicit", "--out", p(dir)]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["pipeline", "run", "--experiment", "sideways"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compiler_induced_needs_links() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    let src = dir.join("synth");
    let corpus = dir.join("corpus");
    ok(&["synth", "--out", p(&src), "--functions", "200", "--no-planted"]);
    ok(&["ingest", "--src", p(&src.join("src")), "--out", p(&corpus)]);
    let out = run(&["pipeline", "run", "--corpus", p(&corpus), "--experiment", "compiler-induced", "--out", p(&dir.join("o"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("linked"));
}

#[test]
fn utility_commands() {
    let grammar: serde_json::Value = serde_json::from_str(&ok(&["grammar"])).unwrap();
    assert!(grammar.is_object());
    let config = ok(&["config"]);
    assert!(config.contains("[lof]") && config.contains("[autoencoder]"));

    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("default.toml");
    fs::write(&path, &config).unwrap();
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    // A valid config gets past validation and fails on the missing corpus.
    let out = run(&["pipeline", "run", "--corpus", p(&empty), "--experiment", "explicit", "--config", p(&path), "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn convert_javap_output() {
    let tmp = TempDir::new().unwrap();
    let input = tmp.path().join("Foo.javap");
    fs::write(
        &input,
        "Compiled from \"Foo.kt\"\npublic final class Foo {\n  public final int bar();\n    Code:\n       0: iconst_1\n       1: ireturn\n}\n",
    )
    .unwrap();
    let out = tmp.path().join("classes.txt");
    ok(&["convert-javap", "--input", p(&input), "--out", p(&out)]);
    let listing = fs::read_to_string(&out).unwrap();
    assert!(listing.contains("Foo"));
    assert!(listing.contains("iconst_1") && listing.contains("ireturn"));
}
