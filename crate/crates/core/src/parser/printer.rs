//! Renders syntax trees back to source text in the supported subset.
//!
//! Output is canonical rather than faithful: one statement per line, no
//! comments, single spaces around binary operators. Re-parsing the output
//! of a parsed tree yields a tree with the same kinds and texts.

use super::syntax::{NodeKind, SyntaxNode};

pub fn print_tree(node: &SyntaxNode) -> String {
    let mut out = String::new();
    Printer { out: &mut out }.node(node);
    out
}

struct Printer<'a> {
    out: &'a mut String,
}

impl Printer<'_> {
    fn push(&mut self, s: &str) {
        self.out.push_str(s);
    }

    fn join(&mut self, nodes: &[SyntaxNode], sep: &str) {
        for (i, n) in nodes.iter().enumerate() {
            if i > 0 {
                self.push(sep);
            }
            self.node(n);
        }
    }

    fn nth(&mut self, nodes: &[SyntaxNode], i: usize) {
        if let Some(n) = nodes.get(i) {
            self.node(n);
        }
    }

    fn lines(&mut self, nodes: &[SyntaxNode]) {
        if nodes.is_empty() {
            self.push("{}");
            return;
        }
        self.push("{\n");
        for n in nodes {
            self.node(n);
            self.push("\n");
        }
        self.push("}");
    }

    fn node(&mut self, n: &SyntaxNode) {
        use NodeKind::*;
        let c = &n.children;
        match n.kind {
            File => self.join(c, "\n"),
            PackageDirective | ImportDirective => {
                self.push(if n.kind == PackageDirective { "package " } else { "import " });
                self.join(c, ".");
            }
            Class | Interface | ObjectDeclaration => self.class_like(n),
            ClassBody => {
                let entries: Vec<_> = c.iter().filter(|m| m.kind == EnumEntry).cloned().collect();
                let members: Vec<_> = c.iter().filter(|m| m.kind != EnumEntry).cloned().collect();
                if entries.is_empty() {
                    self.lines(&members);
                    return;
                }
                self.push("{\n");
                self.join(&entries, ",\n");
                if !members.is_empty() {
                    self.push(";\n");
                    for m in &members {
                        self.node(m);
                        self.push("\n");
                    }
                } else {
                    self.push("\n");
                }
                self.push("}");
            }
            EnumEntry | SupertypeEntry | Annotation | TypeParameter | TypeReference | Parameter
            | ValueArgument | WhenCondition => self.sequence(n),
            ClassInitializer => {
                self.push("init ");
                self.join(c, " ");
            }
            SupertypeList => self.join(c, ", "),
            Function => self.function(n),
            Property => self.property(n),
            PropertyDelegate | DefaultValue | ReceiverType | WhenSubject => self.join(c, ""),
            ModifierList => self.join(c, " "),
            TypeParameterList | TypeArgumentList => {
                self.push("<");
                self.join(c, ", ");
                self.push(">");
            }
            ParameterList | ValueArgumentList => {
                self.push("(");
                self.join(c, ", ");
                self.push(")");
            }
            FunctionType => {
                let Some((ret, params)) = c.split_last() else { return };
                self.push("(");
                self.join(params, ", ");
                self.push(") -> ");
                self.node(ret);
            }
            Block => self.lines(c),
            Assignment | BinaryExpr | IsExpr | AsExpr => self.join(c, " "),
            ForLoop => {
                self.push("for (");
                self.nth(c, 0);
                self.push(" in ");
                self.nth(c, 1);
                self.push(") ");
                self.nth(c, 2);
            }
            WhileLoop => {
                self.push("while (");
                self.nth(c, 0);
                self.push(") ");
                self.nth(c, 1);
            }
            DoWhileLoop => {
                self.push("do ");
                self.nth(c, 0);
                self.push(" while (");
                self.nth(c, 1);
                self.push(")");
            }
            IfExpr => {
                self.push("if (");
                self.nth(c, 0);
                self.push(") ");
                self.nth(c, 1);
                if let Some(otherwise) = c.get(2) {
                    self.push(" else ");
                    self.node(otherwise);
                }
            }
            WhenExpr => {
                self.push("when ");
                let entries = match c.first() {
                    Some(subject) if subject.kind == WhenSubject => {
                        self.push("(");
                        self.node(subject);
                        self.push(") ");
                        &c[1..]
                    }
                    _ => &c[..],
                };
                self.lines(entries);
            }
            WhenEntry => {
                let Some((body, conditions)) = c.split_last() else { return };
                self.join(conditions, ", ");
                self.push(" -> ");
                self.node(body);
            }
            TryExpr => {
                self.push("try ");
                self.join(c, " ");
            }
            CatchClause => {
                self.push("catch (");
                self.nth(c, 0);
                self.push(") ");
                self.nth(c, 1);
            }
            FinallyClause => {
                self.push("finally ");
                self.nth(c, 0);
            }
            Return | Throw => {
                self.push(if n.kind == Return { "return" } else { "throw" });
                if let Some(value) = c.first() {
                    self.push(" ");
                    self.node(value);
                }
            }
            Break => self.push("break"),
            Continue => self.push("continue"),
            PrefixExpr => {
                self.nth(c, 0);
                let mut operand = String::new();
                Printer { out: &mut operand }.nth(c, 1);
                if operand.starts_with(['+', '-', '!']) {
                    self.push(" ");
                }
                self.push(&operand);
            }
            PostfixExpr | StringTemplate => self.join(c, ""),
            CallExpr => {
                for (i, part) in c.iter().enumerate() {
                    if i > 0 && part.kind == Lambda {
                        self.push(" ");
                    }
                    self.node(part);
                }
            }
            DotQualifiedExpr => self.join(c, "."),
            SafeAccessExpr => self.join(c, "?."),
            IndexingExpr => {
                self.nth(c, 0);
                self.push("[");
                self.join(c.get(1..).unwrap_or_default(), ", ");
                self.push("]");
            }
            CallableReference => {
                if c.len() > 1 {
                    self.nth(c, 0);
                }
                self.push("::");
                if let Some(name) = c.last() {
                    self.node(name);
                }
            }
            Lambda => {
                let Some((body, params)) = c.split_last() else {
                    self.push("{}");
                    return;
                };
                self.push("{");
                if let Some(list) = params.first() {
                    self.push(" ");
                    self.join(&list.children, ", ");
                    self.push(" ->");
                }
                if body.children.is_empty() {
                    self.push(if params.is_empty() { "}" } else { " }" });
                } else {
                    self.push("\n");
                    for s in &body.children {
                        self.node(s);
                        self.push("\n");
                    }
                    self.push("}");
                }
            }
            Parenthesized => {
                self.push("(");
                self.join(c, "");
                self.push(")");
            }
            ShortTemplateEntry => {
                self.push("$");
                self.join(c, "");
            }
            LongTemplateEntry => {
                self.push("${");
                self.join(c, "");
                self.push("}");
            }
            Modifier | Operator | StringPart | Literal | Identifier | ThisExpr | Keyword
            | StarProjection | Else | Nullable => self.push(n.text()),
            ArgumentName => {
                self.push(n.text());
                self.push(" = ");
            }
        }
    }

    /// Nodes whose children print in order with kind-specific glue.
    fn sequence(&mut self, n: &SyntaxNode) {
        use NodeKind::*;
        if n.kind == Annotation {
            self.push("@");
        }
        let function_type_nullable =
            n.kind == TypeReference && n.child(FunctionType).is_some() && n.child(Nullable).is_some();
        let mut prev: Option<NodeKind> = None;
        for child in &n.children {
            match (n.kind, child.kind) {
                (_, ModifierList) => {
                    self.node(child);
                    self.push(" ");
                    prev = Some(child.kind);
                    continue;
                }
                (Parameter, Keyword) => {
                    self.node(child);
                    self.push(" ");
                    prev = Some(child.kind);
                    continue;
                }
                (TypeReference, FunctionType) if function_type_nullable => {
                    self.push("(");
                    self.node(child);
                    self.push(")");
                    prev = Some(child.kind);
                    continue;
                }
                (TypeReference | Annotation, Identifier) if prev == Some(Identifier) || prev == Some(TypeArgumentList) => {
                    self.push(".")
                }
                (Parameter | TypeParameter, TypeReference) => self.push(": "),
                (Parameter, DefaultValue) => self.push(" = "),
                (WhenCondition, _) if prev == Some(Operator) => self.push(" "),
                (ValueArgument, _) if prev == Some(Operator) => {}
                _ => {}
            }
            self.node(child);
            prev = Some(child.kind);
        }
    }

    fn class_like(&mut self, n: &SyntaxNode) {
        use NodeKind::*;
        let keyword = match n.kind {
            Class => "class",
            Interface => "interface",
            _ => "object",
        };
        if let Some(m) = n.child(ModifierList) {
            self.node(m);
            self.push(" ");
        }
        self.push(keyword);
        for child in &n.children {
            match child.kind {
                ModifierList => {}
                Identifier => {
                    self.push(" ");
                    self.node(child);
                }
                TypeParameterList | ParameterList => self.node(child),
                SupertypeList => {
                    self.push(" : ");
                    self.node(child);
                }
                _ => {
                    self.push(" ");
                    self.node(child);
                }
            }
        }
    }

    fn function(&mut self, n: &SyntaxNode) {
        use NodeKind::*;
        if let Some(m) = n.child(ModifierList) {
            self.node(m);
            self.push(" ");
        }
        self.push("fun ");
        if let Some(tp) = n.child(TypeParameterList) {
            self.node(tp);
            self.push(" ");
        }
        let mut seen_params = false;
        for child in &n.children {
            match child.kind {
                ModifierList | TypeParameterList => {}
                ReceiverType if !seen_params => {
                    self.node(child);
                    self.push(".");
                }
                Identifier if !seen_params => self.node(child),
                ParameterList if !seen_params => {
                    seen_params = true;
                    self.node(child);
                }
                TypeReference => {
                    self.push(": ");
                    self.node(child);
                }
                Block => {
                    self.push(" ");
                    self.node(child);
                }
                _ => {
                    self.push(" = ");
                    self.node(child);
                }
            }
        }
    }

    fn property(&mut self, n: &SyntaxNode) {
        use NodeKind::*;
        let mut seen_name = false;
        for child in &n.children {
            match child.kind {
                ModifierList | TypeParameterList if !seen_name => {
                    self.node(child);
                    self.push(" ");
                }
                Keyword if !seen_name => {
                    self.node(child);
                    self.push(" ");
                }
                ReceiverType if !seen_name => {
                    self.node(child);
                    self.push(".");
                }
                Identifier if !seen_name => {
                    seen_name = true;
                    self.node(child);
                }
                TypeReference if seen_name => {
                    self.push(": ");
                    self.node(child);
                }
                PropertyDelegate => {
                    self.push(" by ");
                    self.node(child);
                }
                _ => {
                    self.push(" = ");
                    self.node(child);
                }
            }
        }
    }
}
