//! Bytecode listing format and the converter from `javap -c` output.
//!
//! Listing format:
//!
//! ```text
//! class com.example.Foo
//! method <init>
//! aload_0
//! invokespecial #1
//! return
//! method bar
//! iload_1
//! ireturn
//!
//! class com.example.Bar
//! ...
//! ```
//!
//! A blank line terminates a class. Anything after the mnemonic on an
//! instruction line is an operand and is dropped. Lines starting with `#`
//! are comments.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{content_hash, CorpusError};

/// A class and the concatenated instruction mnemonics of its methods, in
/// declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BytecodeUnit {
    pub unit_id: String,
    pub class_name: String,
    pub instructions: Vec<String>,
    /// Method names in declaration order with their instruction counts.
    #[serde(default)]
    pub methods: Vec<(String, usize)>,
    /// Ids of the function units this class was compiled from.
    #[serde(default)]
    pub source_link: Vec<String>,
    /// Listing path and the line of the `class` header.
    #[serde(default)]
    pub origin: String,
}

impl BytecodeUnit {
    pub fn new(class_name: String, instructions: Vec<String>, methods: Vec<(String, usize)>, origin: String) -> Self {
        let mut material = class_name.clone();
        for insn in &instructions {
            material.push('\n');
            material.push_str(insn);
        }
        BytecodeUnit {
            unit_id: content_hash(material.as_bytes()),
            class_name,
            instructions,
            methods,
            source_link: Vec::new(),
            origin,
        }
    }
}

/// A non-fatal observation made while reading a listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BytecodeIngest {
    pub units: Vec<BytecodeUnit>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Parses the listing format. Unknown mnemonics are kept verbatim and
/// reported as diagnostics; classes without instructions are skipped.
pub fn parse_listing(text: &str, origin: &str) -> Result<BytecodeIngest, CorpusError> {
    struct Open {
        name: String,
        header_line: usize,
        instructions: Vec<String>,
        methods: Vec<(String, usize)>,
    }

    let mut out = BytecodeIngest::default();
    let mut current: Option<Open> = None;

    let close = |open: Option<Open>, out: &mut BytecodeIngest| {
        if let Some(open) = open {
            if open.instructions.is_empty() {
                out.diagnostics.push(Diagnostic {
                    line: open.header_line,
                    message: format!("class {} has no instructions; skipped", open.name),
                });
            } else {
                out.units.push(BytecodeUnit::new(
                    open.name,
                    open.instructions,
                    open.methods,
                    format!("{origin}:{}", open.header_line),
                ));
            }
        }
    };

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            close(current.take(), &mut out);
            continue;
        }
        let mut words = line.split_whitespace();
        let head = words.next().unwrap_or_default();
        match head {
            "class" => {
                let name = words.next().ok_or_else(|| CorpusError::format(origin, line_no, "class header without a name"))?;
                close(current.take(), &mut out);
                current = Some(Open { name: name.to_string(), header_line: line_no, instructions: Vec::new(), methods: Vec::new() });
            }
            "method" => {
                let open = current
                    .as_mut()
                    .ok_or_else(|| CorpusError::format(origin, line_no, "method header outside a class"))?;
                let name = words.next().ok_or_else(|| CorpusError::format(origin, line_no, "method header without a name"))?;
                open.methods.push((name.to_string(), 0));
            }
            mnemonic => {
                let open = current
                    .as_mut()
                    .ok_or_else(|| CorpusError::format(origin, line_no, "instruction outside a class"))?;
                let Some(method) = open.methods.last_mut() else {
                    return Err(CorpusError::format(origin, line_no, "instruction before any method header"));
                };
                let normalized = mnemonic.to_ascii_lowercase();
                if is_known_mnemonic(&normalized) {
                    open.instructions.push(normalized);
                } else {
                    out.diagnostics.push(Diagnostic { line: line_no, message: format!("unknown mnemonic `{mnemonic}`") });
                    open.instructions.push(mnemonic.to_string());
                }
                method.1 += 1;
            }
        }
    }
    close(current.take(), &mut out);
    Ok(out)
}

/// Renders units back into the listing format.
pub fn write_listing(units: &[BytecodeUnit]) -> String {
    let mut out = String::new();
    for unit in units {
        out.push_str(&format!("class {}\n", unit.class_name));
        let mut rest = unit.instructions.as_slice();
        let methods: Vec<(String, usize)> = if unit.methods.is_empty() {
            vec![("code".to_string(), unit.instructions.len())]
        } else {
            unit.methods.clone()
        };
        for (name, count) in methods {
            out.push_str(&format!("method {name}\n"));
            let (head, tail) = rest.split_at(count.min(rest.len()));
            for insn in head {
                out.push_str(insn);
                out.push('\n');
            }
            rest = tail;
        }
        out.push('\n');
    }
    out
}

static CLASS_HEADER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?:[a-z]+\s+)*(?:class|interface|enum)\s+([\w.$]+)").expect("valid regex")
});
static METHOD_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s+(?:[\w.$<>\[\],?]+\s+)*?([\w.$<>]+)\(.*\)[^;]*;\s*$").expect("valid regex"));
static INSTRUCTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s+\d+:\s+([a-z_0-9]+)").expect("valid regex"));

/// Converts `javap -c` disassembly into the listing format.
///
/// Recognizes class headers (`public final class a.b.C {`), method headers
/// (indented declarations ending in `;`, with constructors named
/// `<init>` and static initializers `<clinit>`) and numbered instruction
/// lines (`   4: invokevirtual #12  // Method ...`). Everything else is
/// ignored.
pub fn javap_to_listing(javap: &str) -> String {
    let mut out = String::new();
    let mut class_name: Option<String> = None;
    let mut in_class = false;
    for line in javap.lines() {
        if let Some(caps) = CLASS_HEADER.captures(line) {
            if in_class {
                out.push('\n');
            }
            let name = caps[1].to_string();
            out.push_str(&format!("class {name}\n"));
            class_name = Some(name);
            in_class = true;
            continue;
        }
        if line.trim() == "}" && in_class {
            out.push('\n');
            in_class = false;
            continue;
        }
        if !in_class {
            continue;
        }
        if line.trim_start().starts_with("static {}") {
            out.push_str("method <clinit>\n");
            continue;
        }
        if let Some(caps) = INSTRUCTION.captures(line) {
            out.push_str(&caps[1]);
            out.push('\n');
            continue;
        }
        if let Some(caps) = METHOD_HEADER.captures(line) {
            let qualified = &caps[1];
            let mut name = qualified.rsplit('.').next().unwrap_or(qualified).to_string();
            if class_name.as_deref() == Some(qualified) {
                name = "<init>".to_string();
            }
            out.push_str(&format!("method {name}\n"));
        }
    }
    if in_class {
        out.push('\n');
    }
    out
}

pub fn is_known_mnemonic(name: &str) -> bool {
    JVM_OPCODES.binary_search(&name).is_ok()
}

/// All JVM instruction mnemonics, sorted.
pub const JVM_OPCODES: &[&str] = &[
    "aaload", "aastore", "aconst_null", "aload", "aload_0", "aload_1", "aload_2", "aload_3",
    "anewarray", "areturn", "arraylength", "astore", "astore_0", "astore_1", "astore_2",
    "astore_3", "athrow", "baload", "bastore", "bipush", "breakpoint", "caload", "castore",
    "checkcast", "d2f", "d2i", "d2l", "dadd", "daload", "dastore", "dcmpg", "dcmpl", "dconst_0",
    "dconst_1", "ddiv", "dload", "dload_0", "dload_1", "dload_2", "dload_3", "dmul", "dneg",
    "drem", "dreturn", "dstore", "dstore_0", "dstore_1", "dstore_2", "dstore_3", "dsub", "dup",
    "dup2", "dup2_x1", "dup2_x2", "dup_x1", "dup_x2", "f2d", "f2i", "f2l", "fadd", "faload",
    "fastore", "fcmpg", "fcmpl", "fconst_0", "fconst_1", "fconst_2", "fdiv", "fload", "fload_0",
    "fload_1", "fload_2", "fload_3", "fmul", "fneg", "frem", "freturn", "fstore", "fstore_0",
    "fstore_1", "fstore_2", "fstore_3", "fsub", "getfield", "getstatic", "goto", "goto_w", "i2b",
    "i2c", "i2d", "i2f", "i2l", "i2s", "iadd", "iaload", "iand", "iastore", "iconst_0",
    "iconst_1", "iconst_2", "iconst_3", "iconst_4", "iconst_5", "iconst_m1", "idiv", "if_acmpeq",
    "if_acmpne", "if_icmpeq", "if_icmpge", "if_icmpgt", "if_icmple", "if_icmplt", "if_icmpne",
    "ifeq", "ifge", "ifgt", "ifle", "iflt", "ifne", "ifnonnull", "ifnull", "iinc", "iload",
    "iload_0", "iload_1", "iload_2", "iload_3", "impdep1", "impdep2", "imul", "ineg",
    "instanceof", "invokedynamic", "invokeinterface", "invokespecial", "invokestatic",
    "invokevirtual", "ior", "irem", "ireturn", "ishl", "ishr", "istore", "istore_0", "istore_1",
    "istore_2", "istore_3", "isub", "iushr", "ixor", "jsr", "jsr_w", "l2d", "l2f", "l2i", "ladd",
    "laload", "land", "lastore", "lcmp", "lconst_0", "lconst_1", "ldc", "ldc2_w", "ldc_w", "ldiv",
    "lload", "lload_0", "lload_1", "lload_2", "lload_3", "lmul", "lneg", "lookupswitch", "lor",
    "lrem", "lreturn", "lshl", "lshr", "lstore", "lstore_0", "lstore_1", "lstore_2", "lstore_3",
    "lsub", "lushr", "lxor", "monitorenter", "monitorexit", "multianewarray", "new", "newarray",
    "nop", "pop", "pop2", "putfield", "putstatic", "ret", "return", "saload", "sastore", "sipush",
    "swap", "tableswitch", "wide",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opcode_table_is_sorted_and_unique() {
        assert!(JVM_OPCODES.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(JVM_OPCODES.len(), 205);
    }

    #[test]
    fn class_with_two_methods() {
        let listing = "class a.Foo\nmethod one\niload_1\niload_2\niadd\nmethod two\niconst_0\nireturn\n";
        let ingest = parse_listing(listing, "x.txt").unwrap();
        assert_eq!(ingest.units.len(), 1);
        let unit = &ingest.units[0];
        assert_eq!(unit.instructions, ["iload_1", "iload_2", "iadd", "iconst_0", "ireturn"]);
        assert_eq!(unit.methods, [("one".to_string(), 3), ("two".to_string(), 2)]);
        assert!(ingest.diagnostics.is_empty());
    }

    #[test]
    fn empty_listing_and_order() {
        assert!(parse_listing("", "x").unwrap().units.is_empty());
        let listing = "class B\nmethod m\nnop\n\nclass A\nmethod m\nreturn\n";
        let names: Vec<_> = parse_listing(listing, "x").unwrap().units.into_iter().map(|u| u.class_name).collect();
        assert_eq!(names, ["B", "A"]);
    }

    #[test]
    fn operands_stripped_and_unknown_kept() {
        let listing = "class A\nmethod m\nINVOKEVIRTUAL #12 // Method foo\nfrobnicate 3\n";
        let ingest = parse_listing(listing, "x").unwrap();
        assert_eq!(ingest.units[0].instructions, ["invokevirtual", "frobnicate"]);
        assert_eq!(ingest.diagnostics.len(), 1);
        assert_eq!(ingest.diagnostics[0].line, 4);
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(parse_listing("nop\n", "x"), Err(CorpusError::Format { line: 1, .. })));
        assert!(matches!(parse_listing("class A\nnop\n", "x"), Err(CorpusError::Format { line: 2, .. })));
        assert!(matches!(parse_listing("method m\n", "x"), Err(CorpusError::Format { .. })));
        let ingest = parse_listing("class Empty\n\nclass A\nmethod m\nnop\n", "x").unwrap();
        assert_eq!(ingest.units.len(), 1);
        assert_eq!(ingest.diagnostics.len(), 1);
    }

    #[test]
    fn listing_round_trip() {
        let listing = "class A\nmethod m\nnop\nreturn\nmethod n\nareturn\n\n";
        let units = parse_listing(listing, "x").unwrap().units;
        assert_eq!(write_listing(&units), listing);
    }

    #[test]
    fn converts_javap_output() {
        let javap = r#"Compiled from "Foo.kt"
public final class com.example.Foo {
  public com.example.Foo();
    Code:
       0: aload_0
       1: invokespecial #8                  // Method java/lang/Object."<init>":()V
       4: return

  public final int bar(int, java.util.List<java.lang.String>);
    Code:
       0: iload_1
       1: iconst_2
       2: imul
       3: ireturn

  static {};
    Code:
       0: iconst_0
       1: putstatic     #20                 // Field x:I
       4: return
}
"#;
        let listing = javap_to_listing(javap);
        assert_eq!(
            listing,
            "class com.example.Foo\nmethod <init>\naload_0\ninvokespecial\nreturn\nmethod bar\n\
             iload_1\niconst_2\nimul\nireturn\nmethod <clinit>\niconst_0\nputstatic\nreturn\n\n"
        );
        let units = parse_listing(&listing, "foo").unwrap().units;
        assert_eq!(units[0].instructions.len(), 10);
    }
}
