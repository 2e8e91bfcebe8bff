use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

macro_rules! node_kinds {
    ($($variant:ident => $name:literal,)*) => {
        /// Closed catalog of syntax-tree node kinds.
        ///
        /// Shared by the bundled parser and the neutral tree format, so trees
        /// from either source are interchangeable.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum NodeKind {
            $($variant,)*
        }

        impl NodeKind {
            pub const ALL: &'static [NodeKind] = &[$(NodeKind::$variant,)*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(NodeKind::$variant => $name,)*
                }
            }
        }

        impl FromStr for NodeKind {
            type Err = UnknownNodeKind;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok(NodeKind::$variant),)*
                    other => Err(UnknownNodeKind(other.to_string())),
                }
            }
        }
    };
}

node_kinds! {
    File => "FILE",
    PackageDirective => "PACKAGE_DIRECTIVE",
    ImportDirective => "IMPORT_DIRECTIVE",
    Class => "CLASS",
    Interface => "INTERFACE",
    ObjectDeclaration => "OBJECT_DECLARATION",
    ClassBody => "CLASS_BODY",
    EnumEntry => "ENUM_ENTRY",
    ClassInitializer => "CLASS_INITIALIZER",
    SupertypeList => "SUPERTYPE_LIST",
    SupertypeEntry => "SUPERTYPE_ENTRY",
    Function => "FUNCTION",
    Property => "PROPERTY",
    PropertyDelegate => "PROPERTY_DELEGATE",
    ModifierList => "MODIFIER_LIST",
    Modifier => "MODIFIER",
    Annotation => "ANNOTATION",
    TypeParameterList => "TYPE_PARAMETER_LIST",
    TypeParameter => "TYPE_PARAMETER",
    ParameterList => "PARAMETER_LIST",
    Parameter => "PARAMETER",
    DefaultValue => "DEFAULT_VALUE",
    ReceiverType => "RECEIVER_TYPE",
    TypeReference => "TYPE_REFERENCE",
    FunctionType => "FUNCTION_TYPE",
    TypeArgumentList => "TYPE_ARGUMENT_LIST",
    Nullable => "NULLABLE",
    StarProjection => "STAR_PROJECTION",
    Block => "BLOCK",
    Assignment => "ASSIGNMENT",
    ForLoop => "FOR_LOOP",
    WhileLoop => "WHILE_LOOP",
    DoWhileLoop => "DO_WHILE_LOOP",
    IfExpr => "IF_EXPR",
    WhenExpr => "WHEN_EXPR",
    WhenSubject => "WHEN_SUBJECT",
    WhenEntry => "WHEN_ENTRY",
    WhenCondition => "WHEN_CONDITION",
    Else => "ELSE",
    TryExpr => "TRY_EXPR",
    CatchClause => "CATCH_CLAUSE",
    FinallyClause => "FINALLY_CLAUSE",
    Return => "RETURN",
    Throw => "THROW",
    Break => "BREAK",
    Continue => "CONTINUE",
    BinaryExpr => "BINARY_EXPR",
    PrefixExpr => "PREFIX_EXPR",
    PostfixExpr => "POSTFIX_EXPR",
    IsExpr => "IS_EXPR",
    AsExpr => "AS_EXPR",
    Operator => "OPERATOR",
    CallExpr => "CALL_EXPR",
    ValueArgumentList => "VALUE_ARGUMENT_LIST",
    ValueArgument => "VALUE_ARGUMENT",
    ArgumentName => "ARGUMENT_NAME",
    DotQualifiedExpr => "DOT_QUALIFIED_EXPR",
    SafeAccessExpr => "SAFE_ACCESS_EXPR",
    IndexingExpr => "INDEXING_EXPR",
    CallableReference => "CALLABLE_REFERENCE",
    Lambda => "LAMBDA",
    Parenthesized => "PARENTHESIZED",
    StringTemplate => "STRING_TEMPLATE",
    StringPart => "STRING_PART",
    ShortTemplateEntry => "SHORT_TEMPLATE_ENTRY",
    LongTemplateEntry => "LONG_TEMPLATE_ENTRY",
    Literal => "LITERAL",
    Identifier => "IDENTIFIER",
    ThisExpr => "THIS_EXPR",
    Keyword => "KEYWORD",
}

impl NodeKind {
    /// Kinds whose nodes are leaves carrying token text.
    pub fn is_text_leaf(self) -> bool {
        matches!(
            self,
            NodeKind::Modifier
                | NodeKind::Operator
                | NodeKind::StringPart
                | NodeKind::Literal
                | NodeKind::Identifier
                | NodeKind::ThisExpr
                | NodeKind::Keyword
                | NodeKind::ArgumentName
                | NodeKind::Nullable
                | NodeKind::StarProjection
                | NodeKind::Else
        )
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownNodeKind(pub String);

impl fmt::Display for UnknownNodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown node kind `{}`", self.0)
    }
}

impl std::error::Error for UnknownNodeKind {}

impl Serialize for NodeKind {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for NodeKind {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Inclusive source line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "(u32, u32)", into = "(u32, u32)")]
pub struct Span {
    pub start: u32,
    pub end: u32,
}

impl Span {
    pub fn new(start: u32, end: u32) -> Self {
        Span { start, end }
    }

    pub fn line_count(&self) -> u32 {
        self.end.saturating_sub(self.start) + 1
    }

    pub fn cover(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

impl From<(u32, u32)> for Span {
    fn from((start, end): (u32, u32)) -> Self {
        Span { start, end }
    }
}

impl From<Span> for (u32, u32) {
    fn from(span: Span) -> Self {
        (span.start, span.end)
    }
}

/// A node of a labeled ordered syntax tree. Only leaves carry text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntaxNode {
    pub kind: NodeKind,
    #[serde(default)]
    pub children: Vec<SyntaxNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<Span>,
}

impl SyntaxNode {
    pub fn new(kind: NodeKind, children: Vec<SyntaxNode>) -> Self {
        let span = children
            .iter()
            .filter_map(|c| c.span)
            .reduce(Span::cover);
        SyntaxNode { kind, children, text: None, span }
    }

    pub fn leaf(kind: NodeKind, text: impl Into<String>) -> Self {
        SyntaxNode { kind, children: Vec::new(), text: Some(text.into()), span: None }
    }

    pub fn empty(kind: NodeKind) -> Self {
        SyntaxNode { kind, children: Vec::new(), text: None, span: None }
    }

    pub fn with_span(mut self, span: Span) -> Self {
        self.span = Some(span);
        self
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn text(&self) -> &str {
        self.text.as_deref().unwrap_or("")
    }

    pub fn child(&self, kind: NodeKind) -> Option<&SyntaxNode> {
        self.children.iter().find(|c| c.kind == kind)
    }

    /// Name of a declaration: its first direct IDENTIFIER child.
    pub fn name(&self) -> Option<&str> {
        self.child(NodeKind::Identifier).map(|n| n.text())
    }

    /// Pre-order traversal of this subtree, including `self`.
    pub fn descendants(&self) -> Descendants<'_> {
        Descendants { stack: vec![self] }
    }

    pub fn node_count(&self) -> usize {
        self.descendants().count()
    }

    /// Height counted in nodes: a single leaf has height 1.
    pub fn height(&self) -> usize {
        let mut max = 0;
        let mut stack = vec![(self, 1usize)];
        while let Some((node, depth)) = stack.pop() {
            max = max.max(depth);
            stack.extend(node.children.iter().map(|c| (c, depth + 1)));
        }
        max
    }

    /// Copy of the tree with all spans removed.
    pub fn without_spans(&self) -> SyntaxNode {
        SyntaxNode {
            kind: self.kind,
            children: self.children.iter().map(SyntaxNode::without_spans).collect(),
            text: self.text.clone(),
            span: None,
        }
    }

    /// Checks the structural invariants: only leaves carry text.
    pub fn validate(&self) -> Result<(), String> {
        for node in self.descendants() {
            if node.text.is_some() && !node.children.is_empty() {
                return Err(format!("{} node carries text but has children", node.kind));
            }
        }
        Ok(())
    }
}

pub struct Descendants<'a> {
    stack: Vec<&'a SyntaxNode>,
}

impl<'a> Iterator for Descendants<'a> {
    type Item = &'a SyntaxNode;

    fn next(&mut self) -> Option<Self::Item> {
        let node = self.stack.pop()?;
        self.stack.extend(node.children.iter().rev());
        Some(node)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for kind in NodeKind::ALL {
            assert_eq!(kind.as_str().parse::<NodeKind>().unwrap(), *kind);
        }
        assert_eq!(
            "TYPEALIAS".parse::<NodeKind>().unwrap_err().to_string(),
            "unknown node kind `TYPEALIAS`"
        );
    }

    #[test]
    fn height_and_count() {
        let tree = SyntaxNode::new(
            NodeKind::Function,
            vec![
                SyntaxNode::leaf(NodeKind::Identifier, "f"),
                SyntaxNode::empty(NodeKind::ParameterList),
                SyntaxNode::empty(NodeKind::Block),
            ],
        );
        assert_eq!(tree.node_count(), 4);
        assert_eq!(tree.height(), 2);
        assert_eq!(tree.name(), Some("f"));
        let kinds: Vec<_> = tree.descendants().map(|n| n.kind).collect();
        assert_eq!(
            kinds,
            [NodeKind::Function, NodeKind::Identifier, NodeKind::ParameterList, NodeKind::Block]
        );
    }

    #[test]
    fn json_shape() {
        let node = SyntaxNode::leaf(NodeKind::Identifier, "x").with_span(Span::new(3, 3));
        let json = serde_json::to_string(&node).unwrap();
        assert_eq!(json, r#"{"kind":"IDENTIFIER","children":[],"text":"x","span":[3,3]}"#);
        let back: SyntaxNode = serde_json::from_str(r#"{"kind":"BLOCK"}"#).unwrap();
        assert_eq!(back, SyntaxNode::empty(NodeKind::Block));
    }
}
