//! Seeded generator of template-derived Kotlin corpora with planted
//! anomalies and matching bytecode listings.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct SynthConfig {
    /// Ordinary functions to generate.
    pub functions: usize,
    pub seed: u64,
    /// Add the planted anomalous functions and classes.
    pub planted: bool,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig { functions: 5000, seed: 0, planted: true }
    }
}

#[derive(Debug, Clone, Default)]
pub struct SynthCorpus {
    /// Relative path and text of each source file.
    pub files: Vec<(String, String)>,
    /// Bytecode listing of every generated class.
    pub listing: String,
    /// Display names of functions with extreme metric values.
    pub planted_explicit: Vec<String>,
    /// Display name of the function with an unusual N-gram profile.
    pub planted_implicit: Option<String>,
    /// Class whose bytecode is unusual while its source is ordinary.
    pub planted_bytecode_class: Option<String>,
}

impl SynthCorpus {
    /// Writes the sources under `dir/src` and the listing to
    /// `dir/classes.txt`.
    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        for (path, text) in &self.files {
            let path = dir.join("src").join(path);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, text)?;
        }
        fs::write(dir.join("classes.txt"), &self.listing)
    }
}

const VERBS: [&str; 12] = ["load", "parse", "merge", "compute", "render", "update", "check", "build", "scan", "count", "apply", "reduce"];
const NOUNS: [&str; 12] = ["Item", "Order", "Value", "Node", "Entry", "Total", "Range", "Score", "Batch", "Token", "Frame", "Index"];
const MONITOR: [&str; 14] = [
    "aload_0", "dup", "astore", "monitorenter", "iload_1", "istore", "aload", "monitorexit", "goto", "astore", "aload",
    "monitorexit", "aload", "athrow",
];
const WORDS: [&str; 8] = ["alpha", "beta", "gamma", "delta", "ready", "done", "value", "count"];

struct Gen {
    rng: ChaCha8Rng,
    counter: usize,
}

/// A generated function: source text and the instructions it compiles to.
struct Function {
    name: String,
    text: String,
    code: Vec<&'static str>,
}

impl Gen {
    fn fresh(&mut self, prefix: &str) -> String {
        self.counter += 1;
        format!("{prefix}{}", self.counter)
    }

    fn operand(&mut self, vars: &[String]) -> String {
        if vars.is_empty() || self.rng.gen_bool(0.3) {
            self.rng.gen_range(1..50).to_string()
        } else {
            vars.choose(&mut self.rng).expect("non-empty").clone()
        }
    }

    fn expr(&mut self, vars: &[String]) -> String {
        let a = self.operand(vars);
        let b = self.operand(vars);
        let k = self.rng.gen_range(2..9);
        match self.rng.gen_range(0..4) {
            0 => format!("{a} + {b} * {k}"),
            1 => format!("{a} - {k}"),
            2 => format!("maxOf({a}, {b})"),
            _ => format!("({a} + {b}) / {k}"),
        }
    }

    fn cond(&mut self, vars: &[String]) -> String {
        let a = self.operand(vars);
        let b = self.operand(vars);
        let k = self.rng.gen_range(0..40);
        match self.rng.gen_range(0..3) {
            0 => format!("{a} > {k}"),
            1 => format!("{a} == {b} && {b} != {k}"),
            _ => format!("{a} <= {k} || {b} > {a}"),
        }
    }

    fn block(&mut self, vars: &mut Vec<String>, depth: usize, indent: usize, out: &mut Function) -> String {
        let count = self.rng.gen_range(1..=3);
        let mut text = String::new();
        for _ in 0..count {
            text.push_str(&self.statement(vars, depth, indent, out));
        }
        text
    }

    fn statement(&mut self, vars: &mut Vec<String>, depth: usize, indent: usize, out: &mut Function) -> String {
        let pad = "    ".repeat(indent);
        let kinds = if depth >= 2 { 6 } else { 11 };
        if self.rng.gen_bool(0.02) {
            let v = self.fresh("lock");
            out.code.extend(MONITOR);
            return format!("{pad}val {v} = synchronized(this) {{ {} }}\n", self.expr(vars));
        }
        match self.rng.gen_range(0..kinds) {
            0 => {
                let v = self.fresh("v");
                let e = self.expr(vars);
                out.code.extend(["iload_1", "iload_2", "bipush", "imul", "iadd", "istore_3"]);
                vars.push(v.clone());
                format!("{pad}val {v} = {e}\n")
            }
            1 => {
                let v = self.fresh("acc");
                let e = self.expr(vars);
                out.code.extend(["iconst_0", "istore", "iload", "iload_1", "iadd", "istore"]);
                let text = format!("{pad}var {v} = 0\n{pad}{v} += {e}\n");
                vars.push(v);
                text
            }
            2 => {
                let w = WORDS.choose(&mut self.rng).expect("non-empty");
                let v = self.operand(vars);
                out.code.extend(["getstatic", "new", "dup", "invokespecial", "ldc", "invokevirtual", "iload", "invokevirtual", "invokevirtual", "invokevirtual"]);
                format!("{pad}println(\"{w} ${{{v}}}\")\n")
            }
            3 => {
                let v = self.fresh("s");
                let w = WORDS.choose(&mut self.rng).expect("non-empty");
                let o = self.operand(vars);
                out.code.extend(["new", "dup", "invokespecial", "ldc", "invokevirtual", "iload", "invokevirtual", "invokevirtual", "astore"]);
                format!("{pad}val {v} = \"{w}\" + {o}.toString()\n")
            }
            4 => {
                let c = self.cond(vars);
                out.code.extend(["iload_1", "ifne", "new", "dup", "ldc", "invokespecial", "athrow"]);
                format!("{pad}require({c})\n")
            }
            5 => {
                let v = self.fresh("xs");
                let k = self.rng.gen_range(2..6);
                let t = self.rng.gen_range(0..20);
                out.code.extend(["iconst_3", "anewarray", "dup", "iconst_0", "iconst_1", "invokestatic", "aastore", "invokestatic", "invokedynamic", "invokestatic", "invokedynamic", "invokestatic", "astore"]);
                format!("{pad}val {v} = listOf(1, 2, 3).map {{ it * {k} }}.filter {{ it > {t} }}\n")
            }
            6 => {
                let c = self.cond(vars);
                out.code.extend(["iload_1", "bipush", "if_icmple"]);
                let then = self.block(vars, depth + 1, indent + 1, out);
                out.code.push("goto");
                let other = self.block(vars, depth + 1, indent + 1, out);
                format!("{pad}if ({c}) {{\n{then}{pad}}} else {{\n{other}{pad}}}\n")
            }
            7 => {
                let i = self.fresh("i");
                let n = self.rng.gen_range(2..20);
                out.code.extend(["iconst_0", "istore", "iload", "bipush", "if_icmpge"]);
                vars.push(i.clone());
                let body = self.block(vars, depth + 1, indent + 1, out);
                vars.pop();
                out.code.extend(["iinc", "goto"]);
                format!("{pad}for ({i} in 0 until {n}) {{\n{body}{pad}}}\n")
            }
            8 => {
                let c = self.fresh("c");
                let n = self.rng.gen_range(2..10);
                out.code.extend(["iconst_0", "istore", "iload", "bipush", "if_icmpge", "iinc", "goto"]);
                format!("{pad}var {c} = 0\n{pad}while ({c} < {n}) {{\n{pad}    {c} += 1\n{pad}}}\n")
            }
            9 => {
                let subject = self.operand(vars);
                let branches = self.rng.gen_range(2..=4);
                out.code.extend(["iload_1", "tableswitch"]);
                let mut text = format!("{pad}when ({subject}) {{\n");
                for b in 0..branches {
                    let e = self.expr(vars);
                    out.code.extend(["getstatic", "iload", "invokevirtual", "goto"]);
                    text.push_str(&format!("{pad}    {b} -> println({e})\n"));
                }
                text.push_str(&format!("{pad}    else -> println(\"other\")\n{pad}}}\n"));
                text
            }
            _ => {
                let e = self.expr(vars);
                out.code.extend(["iload_1", "invokestatic", "pop", "goto", "astore", "getstatic", "aload", "invokevirtual"]);
                format!("{pad}try {{\n{pad}    check({e} >= 0)\n{pad}}} catch (e: Exception) {{\n{pad}    println(e)\n{pad}}}\n")
            }
        }
    }

    fn function(&mut self, indent: usize) -> Function {
        let verb = VERBS.choose(&mut self.rng).expect("non-empty");
        let noun = NOUNS.choose(&mut self.rng).expect("non-empty");
        let name = self.fresh(&format!("{verb}{noun}"));
        let params: Vec<String> = (0..self.rng.gen_range(0..=4)).map(|i| format!("p{i}")).collect();
        let mut out = Function { name: name.clone(), text: String::new(), code: Vec::new() };
        let mut vars = params.clone();
        let pad = "    ".repeat(indent);
        let statements = self.rng.gen_range(1..=10);
        let mut body = String::new();
        for _ in 0..statements {
            body.push_str(&self.statement(&mut vars, 0, indent + 1, &mut out));
        }
        let returns = self.rng.gen_bool(0.5);
        if returns {
            let e = self.expr(&vars);
            body.push_str(&format!("{pad}    return {e}\n"));
            out.code.extend(["iload_1", "iload_2", "iadd", "ireturn"]);
        } else {
            out.code.push("return");
        }
        let signature: Vec<String> = params.iter().map(|p| format!("{p}: Int")).collect();
        let ret = if returns { ": Int" } else { "" };
        out.text = format!("{pad}fun {name}({}){ret} {{\n{body}{pad}}}\n", signature.join(", "));
        out
    }
}

fn capitalize(stem: &str) -> String {
    let mut chars = stem.chars();
    chars.next().map(|c| c.to_uppercase().chain(chars).collect()).unwrap_or_default()
}

fn listing_class(out: &mut String, name: &str, methods: &[(String, Vec<&str>)]) {
    out.push_str(&format!("class {name}\n"));
    for (method, code) in methods {
        out.push_str(&format!("method {method}\n"));
        for insn in code {
            out.push_str(insn);
            out.push('\n');
        }
    }
    out.push('\n');
}

fn planted_explicit() -> Vec<(String, String)> {
    let mut planted = Vec::new();

    let mut text = String::from("fun plantedHugeWhen(code: Int): Int {\n    return when (code) {\n");
    for i in 0..800 {
        text.push_str(&format!("        {i} -> {}\n", i * 7 % 13));
    }
    text.push_str("        else -> -1\n    }\n}\n");
    planted.push(("plantedHugeWhen".to_string(), text));

    let params: Vec<String> = (0..150).map(|i| format!("a{i}: Int")).collect();
    let sum: Vec<String> = (0..150).map(|i| format!("a{i}")).collect();
    planted.push((
        "plantedManyParameters".to_string(),
        format!("fun plantedManyParameters({}): Int {{\n    return {}\n}}\n", params.join(", "), sum.join(" + ")),
    ));

    let mut text = String::from("fun plantedDeepNesting(x: Int): Int {\n");
    for d in 0..30 {
        text.push_str(&format!("{}if (x > {d}) {{\n", "    ".repeat(d + 1)));
    }
    text.push_str(&format!("{}return x\n", "    ".repeat(31)));
    for d in (0..30).rev() {
        text.push_str(&format!("{}}}\n", "    ".repeat(d + 1)));
    }
    text.push_str("    return 0\n}\n");
    planted.push(("plantedDeepNesting".to_string(), text));

    let chain: String = (0..300).map(|i| format!(".plus({})", i % 10)).collect();
    planted.push(("plantedLongChain".to_string(), format!("fun plantedLongChain(x: Int): Int {{\n    return x{chain}\n}}\n")));

    let mut text = String::from("fun plantedManyLoops(n: Int): Int {\n    var total = 0\n");
    for i in 0..200 {
        text.push_str(&format!("    for (k{i} in 0 until n) {{\n        total += k{i}\n    }}\n"));
    }
    text.push_str("    return total\n}\n");
    planted.push(("plantedManyLoops".to_string(), text));
    planted
}

fn planted_implicit() -> String {
    let mut text = String::from("fun plantedUniqueStructure(items: List<Int>): Int {\n    var total = 0\n");
    for i in 0..2500 {
        text.push_str(&format!(
            "    items.forEach {{ item -> if (item > {}) {{ total += item }} else {{ total -= {} }} }}\n",
            i % 17,
            i % 5
        ));
    }
    text.push_str("    return total\n}\n");
    text
}

/// Generates a corpus of `config.functions` ordinary functions spread over
/// files of one class each plus a few top-level functions.
pub fn generate(config: &SynthConfig) -> SynthCorpus {
    let mut gen = Gen { rng: ChaCha8Rng::seed_from_u64(config.seed), counter: 0 };
    let mut corpus = SynthCorpus::default();
    let mut remaining = config.functions;
    let mut file_index = 0;
    while remaining > 0 {
        let package = format!("gen.m{}", file_index % 10);
        let stem = format!("gen{file_index}");
        let class = format!("{}{file_index}", NOUNS[file_index % NOUNS.len()]);
        let members = gen.rng.gen_range(2..=6).min(remaining);
        let mut text = format!("package {package}\n\nclass {class} {{\n");
        let mut methods = vec![("<init>".to_string(), vec!["aload_0", "invokespecial", "return"])];
        for m in 0..members {
            let f = gen.function(1);
            if m > 0 {
                text.push('\n');
            }
            text.push_str(&f.text);
            methods.push((f.name, f.code));
        }
        text.push_str("}\n");
        listing_class(&mut corpus.listing, &format!("{package}.{class}"), &methods);
        remaining -= members;
        let top = gen.rng.gen_range(0..=2).min(remaining);
        let mut facade = Vec::new();
        for _ in 0..top {
            let f = gen.function(0);
            text.push('\n');
            text.push_str(&f.text);
            facade.push((f.name, f.code));
        }
        remaining -= top;
        if !facade.is_empty() {
            listing_class(&mut corpus.listing, &format!("{package}.{}Kt", capitalize(&stem)), &facade);
        }
        corpus.files.push((format!("gen/m{}/{stem}.kt", file_index % 10), text));
        file_index += 1;
    }
    if config.planted {
        let mut text = String::from("package planted\n\n");
        for (name, body) in planted_explicit() {
            text.push_str(&body);
            text.push('\n');
            corpus.planted_explicit.push(name);
        }
        text.push_str(&planted_implicit());
        corpus.planted_implicit = Some("plantedUniqueStructure".to_string());
        corpus.files.push(("planted/planted.kt".to_string(), text));
        listing_class(
            &mut corpus.listing,
            "planted.PlantedKt",
            &[("plantedUniqueStructure".to_string(), vec!["aload_0", "invokeinterface", "astore_1", "iload_2", "ireturn"])],
        );

        let f = gen.function(1);
        let class = "planted.Wrapper";
        let mut code = f.code.clone();
        for _ in 0..400 {
            code.extend(MONITOR);
        }
        corpus.files.push((
            "planted/wrapper.kt".to_string(),
            format!("package planted\n\nclass Wrapper {{\n{}}}\n", f.text),
        ));
        listing_class(&mut corpus.listing, class, &[("<init>".to_string(), vec!["aload_0", "invokespecial", "return"]), (f.name, code)]);
        corpus.planted_bytecode_class = Some(class.to_string());
    }
    corpus
}
