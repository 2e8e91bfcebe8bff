//! The software-metric catalog and its computation over function trees.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::parser::{print_tree, tokenize, NodeKind, SyntaxNode, TokenKind};

/// Bumped whenever a metric is added, removed, reordered or redefined.
pub const CATALOG_VERSION: &str = "metrics-v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricGroup {
    /// Size of the function.
    General,
    /// Control flow and nesting.
    Structural,
    /// Signature-level properties.
    External,
    /// Counts of particular language elements.
    Elements,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MetricDef {
    pub name: &'static str,
    pub group: MetricGroup,
    pub binary: bool,
    pub description: &'static str,
}

const fn q(name: &'static str, group: MetricGroup, description: &'static str) -> MetricDef {
    MetricDef { name, group, binary: false, description }
}

const fn b(name: &'static str, group: MetricGroup, description: &'static str) -> MetricDef {
    MetricDef { name, group, binary: true, description }
}

use MetricGroup::{Elements, External, General, Structural};

pub const METRIC_COUNT: usize = 51;

pub const CATALOG: [MetricDef; METRIC_COUNT] = [
    q("lines_of_code", General, "source lines spanned by the function, or lines of its canonical rendering"),
    q("token_count", General, "tokens in the canonical rendering"),
    q("node_count", General, "syntax tree nodes"),
    q("tree_height", General, "syntax tree height counted in nodes"),
    q("statement_count", General, "statements in all blocks"),
    q("identifier_count", General, "identifier occurrences"),
    q("unique_identifier_count", General, "distinct identifier texts"),
    q("literal_count", General, "literal constants"),
    q("distinct_node_kinds", General, "distinct node kinds in the tree"),
    q("max_children", General, "largest number of children of a node"),
    q("max_nesting_depth", Structural, "deepest nesting of if, when, loops, try and lambdas"),
    q("cyclomatic_complexity", Structural, "1 + decision points"),
    q("when_count", Structural, "when expressions"),
    q("when_branches", Structural, "when entries including else"),
    q("if_count", Structural, "if expressions"),
    q("loop_count", Structural, "for, while and do-while loops"),
    q("try_count", Structural, "try expressions"),
    q("max_try_depth", Structural, "deepest nesting of try expressions"),
    q("catch_count", Structural, "catch clauses"),
    q("return_count", Structural, "return expressions"),
    q("throw_count", Structural, "throw expressions"),
    q("jump_count", Structural, "break and continue expressions"),
    q("nested_function_count", Structural, "functions declared inside the function"),
    q("local_variable_count", Structural, "local val and var declarations"),
    q("local_class_count", Structural, "classes, interfaces and objects declared inside the function"),
    q("parameter_count", External, "value parameters"),
    q("type_parameter_count", External, "type parameters"),
    q("annotation_count", External, "annotations on the declaration"),
    q("default_parameter_count", External, "parameters with a default value"),
    q("modifier_count", External, "modifiers on the declaration"),
    q("vararg_parameter_count", External, "vararg parameters"),
    q("function_type_parameter_count", External, "parameters of function type"),
    q("nullable_parameter_count", External, "parameters of nullable type"),
    b("has_suspend_modifier", External, "1 if the function is suspend"),
    b("is_extension_function", External, "1 if the function has a receiver type"),
    q("call_count", Elements, "call expressions"),
    q("max_call_chain_length", Elements, "longest chain of qualified calls"),
    q("lambda_count", Elements, "lambda literals"),
    q("string_literal_count", Elements, "string literals and templates"),
    q("template_entry_count", Elements, "string template entries"),
    q("multiline_string_count", Elements, "raw triple-quoted strings"),
    q("empty_string_count", Elements, "empty string literals"),
    q("binary_operator_count", Elements, "binary expressions"),
    q("logical_operator_count", Elements, "&& and || operators"),
    q("keyword_count", Elements, "keyword tokens in the canonical rendering"),
    q("assignment_count", Elements, "assignments including compound ones"),
    q("dot_qualified_count", Elements, "dot-qualified expressions"),
    q("safe_call_count", Elements, "safe-access expressions"),
    q("elvis_count", Elements, "elvis operators"),
    q("not_null_assertion_count", Elements, "!! assertions"),
    q("type_cast_count", Elements, "as and as? casts"),
];

pub fn metric_index(name: &str) -> Option<usize> {
    CATALOG.iter().position(|m| m.name == name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub values: Vec<f64>,
    pub catalog_version: String,
}

impl MetricVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        metric_index(name).and_then(|i| self.values.get(i).copied())
    }
}

#[derive(Default)]
struct Tally {
    node_count: usize,
    statement_count: usize,
    identifier_count: usize,
    identifiers: HashSet<String>,
    literal_count: usize,
    kinds: HashSet<NodeKind>,
    max_children: usize,
    max_nesting: usize,
    decisions: usize,
    when_count: usize,
    when_branches: usize,
    if_count: usize,
    loop_count: usize,
    try_count: usize,
    max_try_depth: usize,
    catch_count: usize,
    return_count: usize,
    throw_count: usize,
    jump_count: usize,
    nested_functions: usize,
    local_variables: usize,
    local_classes: usize,
    calls: usize,
    max_call_chain: usize,
    lambdas: usize,
    strings: usize,
    template_entries: usize,
    multiline_strings: usize,
    empty_strings: usize,
    binary: usize,
    logical: usize,
    assignments: usize,
    dot_qualified: usize,
    safe_calls: usize,
    elvis: usize,
    not_null: usize,
    casts: usize,
}

fn operator(node: &SyntaxNode) -> &str {
    node.children.get(1).map(|c| c.text()).unwrap_or_default()
}

fn call_chain(mut node: &SyntaxNode) -> usize {
    let mut length = 0;
    loop {
        match node.kind {
            NodeKind::DotQualifiedExpr | NodeKind::SafeAccessExpr => {
                if node.children.get(1).is_some_and(|s| s.kind == NodeKind::CallExpr) {
                    length += 1;
                }
                match node.children.first() {
                    Some(receiver) => node = receiver,
                    None => return length,
                }
            }
            NodeKind::CallExpr => return length + 1,
            _ => return length,
        }
    }
}

fn is_nesting(kind: NodeKind) -> bool {
    use NodeKind::*;
    matches!(kind, IfExpr | WhenExpr | ForLoop | WhileLoop | DoWhileLoop | TryExpr | Lambda)
}

impl Tally {
    fn visit(&mut self, node: &SyntaxNode, nesting: usize, try_depth: usize, is_root: bool) {
        use NodeKind::*;
        self.node_count += 1;
        self.kinds.insert(node.kind);
        self.max_children = self.max_children.max(node.children.len());
        self.max_nesting = self.max_nesting.max(nesting);
        self.max_try_depth = self.max_try_depth.max(try_depth);
        match node.kind {
            Block => self.statement_count += node.children.len(),
            Identifier => {
                self.identifier_count += 1;
                self.identifiers.insert(node.text().to_string());
            }
            Literal => {
                self.literal_count += 1;
                let text = node.text();
                if text.starts_with('"') {
                    self.strings += 1;
                    if text.starts_with("\"\"\"") {
                        self.multiline_strings += 1;
                    }
                    if text == "\"\"" || text == "\"\"\"\"\"\"" {
                        self.empty_strings += 1;
                    }
                }
            }
            StringTemplate => {
                self.strings += 1;
                if node.children.first().is_some_and(|p| p.text().starts_with("\"\"\"")) {
                    self.multiline_strings += 1;
                }
            }
            ShortTemplateEntry | LongTemplateEntry => self.template_entries += 1,
            WhenExpr => self.when_count += 1,
            WhenEntry => {
                self.when_branches += 1;
                if node.children.first().is_some_and(|c| c.kind != Else) {
                    self.decisions += 1;
                }
            }
            IfExpr => {
                self.if_count += 1;
                self.decisions += 1;
            }
            ForLoop | WhileLoop | DoWhileLoop => {
                self.loop_count += 1;
                self.decisions += 1;
            }
            TryExpr => self.try_count += 1,
            CatchClause => {
                self.catch_count += 1;
                self.decisions += 1;
            }
            Return => self.return_count += 1,
            Throw => self.throw_count += 1,
            Break | Continue => self.jump_count += 1,
            Function if !is_root => self.nested_functions += 1,
            Property => self.local_variables += 1,
            Class | Interface | ObjectDeclaration => self.local_classes += 1,
            CallExpr => self.calls += 1,
            Lambda => self.lambdas += 1,
            BinaryExpr => {
                self.binary += 1;
                match operator(node) {
                    "&&" | "||" => {
                        self.logical += 1;
                        self.decisions += 1;
                    }
                    "?:" => {
                        self.elvis += 1;
                        self.decisions += 1;
                    }
                    _ => {}
                }
            }
            Assignment => self.assignments += 1,
            DotQualifiedExpr | SafeAccessExpr => {
                if node.kind == DotQualifiedExpr {
                    self.dot_qualified += 1;
                } else {
                    self.safe_calls += 1;
                }
                self.max_call_chain = self.max_call_chain.max(call_chain(node));
            }
            PostfixExpr if operator(node) == "!!" => self.not_null += 1,
            AsExpr => self.casts += 1,
            _ => {}
        }
        let nesting = nesting + usize::from(is_nesting(node.kind));
        let try_depth = try_depth + usize::from(node.kind == TryExpr);
        for child in &node.children {
            self.visit(child, nesting, try_depth, false);
        }
    }
}

struct Signature {
    parameters: usize,
    type_parameters: usize,
    annotations: usize,
    defaults: usize,
    modifiers: usize,
    varargs: usize,
    function_types: usize,
    nullable: usize,
    suspend: bool,
    extension: bool,
}

fn signature(root: &SyntaxNode) -> Signature {
    use NodeKind::*;
    let params: Vec<&SyntaxNode> = root
        .child(ParameterList)
        .map(|l| l.children.iter().filter(|p| p.kind == Parameter).collect())
        .unwrap_or_default();
    let modifier_list = root.child(ModifierList);
    let modifiers: Vec<&str> = modifier_list
        .map(|m| m.children.iter().filter(|c| c.kind == Modifier).map(|c| c.text()).collect())
        .unwrap_or_default();
    let has_modifier = |p: &SyntaxNode, name: &str| {
        p.child(ModifierList).is_some_and(|m| m.children.iter().any(|c| c.kind == Modifier && c.text() == name))
    };
    Signature {
        parameters: params.len(),
        type_parameters: root.child(TypeParameterList).map_or(0, |l| l.children.len()),
        annotations: modifier_list.map_or(0, |m| m.children.iter().filter(|c| c.kind == Annotation).count()),
        defaults: params.iter().filter(|p| p.child(DefaultValue).is_some()).count(),
        modifiers: modifiers.len(),
        varargs: params.iter().filter(|p| has_modifier(p, "vararg")).count(),
        function_types: params
            .iter()
            .filter(|p| p.child(TypeReference).is_some_and(|t| t.child(FunctionType).is_some()))
            .count(),
        nullable: params
            .iter()
            .filter(|p| p.child(TypeReference).is_some_and(|t| t.child(Nullable).is_some()))
            .count(),
        suspend: modifiers.contains(&"suspend"),
        extension: root.child(ReceiverType).is_some(),
    }
}

/// Computes the catalog over a FUNCTION-rooted tree. Lines come from the
/// root span when present, otherwise from the canonical rendering.
pub fn compute_metrics(tree: &SyntaxNode) -> MetricVector {
    let mut tally = Tally::default();
    tally.visit(tree, 0, 0, true);
    let sig = signature(tree);
    let rendered = print_tree(tree);
    let (token_count, keyword_count) = match tokenize(&rendered) {
        Ok(tokens) => (tokens.len(), tokens.iter().filter(|t| t.kind == TokenKind::Keyword).count()),
        Err(_) => (tree.descendants().filter(|n| n.is_leaf()).count(), 0),
    };
    let lines = match tree.span {
        Some(span) => span.line_count() as usize,
        None => rendered.lines().count().max(1),
    };
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let values = CATALOG
        .iter()
        .map(|m| {
            let v = match m.name {
                "lines_of_code" => lines,
                "token_count" => token_count,
                "node_count" => tally.node_count,
                "tree_height" => tree.height(),
                "statement_count" => tally.statement_count,
                "identifier_count" => tally.identifier_count,
                "unique_identifier_count" => tally.identifiers.len(),
                "literal_count" => tally.literal_count,
                "distinct_node_kinds" => tally.kinds.len(),
                "max_children" => tally.max_children,
                "max_nesting_depth" => tally.max_nesting,
                "cyclomatic_complexity" => 1 + tally.decisions,
                "when_count" => tally.when_count,
                "when_branches" => tally.when_branches,
                "if_count" => tally.if_count,
                "loop_count" => tally.loop_count,
                "try_count" => tally.try_count,
                "max_try_depth" => tally.max_try_depth,
                "catch_count" => tally.catch_count,
                "return_count" => tally.return_count,
                "throw_count" => tally.throw_count,
                "jump_count" => tally.jump_count,
                "nested_function_count" => tally.nested_functions,
                "local_variable_count" => tally.local_variables,
                "local_class_count" => tally.local_classes,
                "parameter_count" => sig.parameters,
                "type_parameter_count" => sig.type_parameters,
                "annotation_count" => sig.annotations,
                "default_parameter_count" => sig.defaults,
                "modifier_count" => sig.modifiers,
                "vararg_parameter_count" => sig.varargs,
                "function_type_parameter_count" => sig.function_types,
                "nullable_parameter_count" => sig.nullable,
                "has_suspend_modifier" => return flag(sig.suspend),
                "is_extension_function" => return flag(sig.extension),
                "call_count" => tally.calls,
                "max_call_chain_length" => tally.max_call_chain,
                "lambda_count" => tally.lambdas,
                "string_literal_count" => tally.strings,
                "template_entry_count" => tally.template_entries,
                "multiline_string_count" => tally.multiline_strings,
                "empty_string_count" => tally.empty_strings,
                "binary_operator_count" => tally.binary,
                "logical_operator_count" => tally.logical,
                "keyword_count" => keyword_count,
                "assignment_count" => tally.assignments,
                "dot_qualified_count" => tally.dot_qualified,
                "safe_call_count" => tally.safe_calls,
                "elvis_count" => tally.elvis,
                "not_null_assertion_count" => tally.not_null,
                "type_cast_count" => tally.casts,
                other => unreachable!("metric {other} has no definition"),
            };
            v as f64
        })
        .collect();
    MetricVector { values, catalog_version: CATALOG_VERSION.to_string() }
}
