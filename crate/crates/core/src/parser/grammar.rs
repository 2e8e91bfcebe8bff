//! Recursive-descent parser for the supported Kotlin subset.
//!
//! Newlines are significant outside parentheses and brackets: statements
//! end at a line break, and most binary operators must stay on the line of
//! their left operand. Member access, safe calls, elvis and the logical
//! operators may continue on the next line.

use std::fmt;

use thiserror::Error;

use super::lexer::{Token, TokenKind};
use super::syntax::{NodeKind, Span, SyntaxNode};

/// Soft keywords accepted in modifier position.
pub const MODIFIERS: &[&str] = &[
    "public", "private", "protected", "internal", "abstract", "final", "open", "override",
    "suspend", "inline", "noinline", "crossinline", "tailrec", "operator", "infix", "external",
    "data", "enum", "sealed", "companion", "inner", "annotation", "lateinit", "const", "vararg",
    "reified", "value", "out",
];

const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct SyntaxError {
    pub line: u32,
    pub column: u32,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: expected ", self.line, self.column)?;
        match self.expected.as_slice() {
            [one] => write!(f, "{one}")?,
            many => write!(f, "one of {}", many.join(", "))?,
        }
        write!(f, ", found {}", self.found)
    }
}

type PResult<T> = Result<T, SyntaxError>;

/// Parses a comment-free or comment-bearing token list into a FILE tree.
pub fn parse(tokens: &[Token]) -> PResult<SyntaxNode> {
    let tokens: Vec<Token> = tokens.iter().filter(|t| t.kind != TokenKind::Comment).cloned().collect();
    let mut parser = Parser { tokens, pos: 0, depth: 0, nl_insensitive: false };
    parser.file()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    depth: usize,
    nl_insensitive: bool,
}

#[derive(Clone, Copy)]
struct Checkpoint {
    pos: usize,
    depth: usize,
    nl_insensitive: bool,
}

impl Parser {
    // ---- token access -------------------------------------------------

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, n: usize) -> Option<&Token> {
        self.tokens.get(self.pos + n)
    }

    fn at(&self, kind: TokenKind, text: &str) -> bool {
        self.peek().is_some_and(|t| t.is(kind, text))
    }

    fn at_punct(&self, text: &str) -> bool {
        self.at(TokenKind::Punctuation, text)
    }

    fn at_op(&self, text: &str) -> bool {
        self.at(TokenKind::Operator, text)
    }

    fn at_kw(&self, text: &str) -> bool {
        self.at(TokenKind::Keyword, text)
    }

    fn at_kind(&self, kind: TokenKind) -> bool {
        self.peek().is_some_and(|t| t.kind == kind)
    }

    fn at_ident(&self) -> bool {
        self.at_kind(TokenKind::Identifier)
    }

    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    /// True when a line break separates the current token from the previous one.
    fn newline_before(&self) -> bool {
        match (self.pos.checked_sub(1).and_then(|i| self.tokens.get(i)), self.peek()) {
            (Some(prev), Some(cur)) => cur.line > prev.end_line(),
            _ => false,
        }
    }

    /// Whether an operator at the current token may continue the expression.
    fn continues_line(&self) -> bool {
        self.nl_insensitive || !self.newline_before()
    }

    fn advance(&mut self) -> Token {
        let token = self.tokens[self.pos].clone();
        self.pos += 1;
        token
    }

    fn error<S: AsRef<str>>(&self, expected: &[S]) -> SyntaxError {
        let (line, column, found) = match self.peek() {
            Some(t) => (t.line, t.column, format!("`{}`", t.text)),
            None => {
                let (line, column) = self
                    .tokens
                    .last()
                    .map(|t| (t.end_line(), t.column + t.text.len() as u32))
                    .unwrap_or((1, 1));
                (line, column, "end of input".to_string())
            }
        };
        SyntaxError {
            line,
            column,
            expected: expected.iter().map(|s| s.as_ref().to_string()).collect(),
            found,
        }
    }

    fn expect(&mut self, kind: TokenKind, text: &str) -> PResult<Token> {
        if self.at(kind, text) {
            Ok(self.advance())
        } else {
            Err(self.error(&[format!("`{text}`")]))
        }
    }

    fn expect_punct(&mut self, text: &str) -> PResult<Token> {
        self.expect(TokenKind::Punctuation, text)
    }

    fn expect_ident(&mut self) -> PResult<SyntaxNode> {
        if self.at_ident() {
            Ok(self.leaf(NodeKind::Identifier))
        } else {
            Err(self.error(&["identifier"]))
        }
    }

    // ---- node construction --------------------------------------------

    fn leaf(&mut self, kind: NodeKind) -> SyntaxNode {
        let token = self.advance();
        let span = Span::new(token.line, token.end_line());
        SyntaxNode::leaf(kind, token.text).with_span(span)
    }

    fn leaf_with_text(&mut self, kind: NodeKind, text: &str, start: usize) -> SyntaxNode {
        SyntaxNode::leaf(kind, text).with_span(self.span_from(start))
    }

    fn span_from(&self, start: usize) -> Span {
        let first = &self.tokens[start.min(self.tokens.len() - 1)];
        let last = &self.tokens[self.pos.saturating_sub(1).max(start)];
        Span::new(first.line, last.end_line())
    }

    fn node(&self, kind: NodeKind, children: Vec<SyntaxNode>, start: usize) -> SyntaxNode {
        let mut node = SyntaxNode::new(kind, children);
        if !self.tokens.is_empty() && self.pos > start {
            node.span = Some(self.span_from(start));
        }
        node
    }

    // ---- control helpers ----------------------------------------------

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint { pos: self.pos, depth: self.depth, nl_insensitive: self.nl_insensitive }
    }

    fn restore(&mut self, cp: Checkpoint) {
        self.pos = cp.pos;
        self.depth = cp.depth;
        self.nl_insensitive = cp.nl_insensitive;
    }

    /// Runs `f`, rewinding to the starting token if it fails.
    fn speculate<T>(&mut self, f: impl FnOnce(&mut Self) -> PResult<T>) -> Option<T> {
        let cp = self.checkpoint();
        match f(self) {
            Ok(v) => Some(v),
            Err(_) => {
                self.restore(cp);
                None
            }
        }
    }

    fn nested<T>(&mut self, f: impl FnOnce(&mut Self) -> PResult<T>) -> PResult<T> {
        if self.depth >= MAX_DEPTH {
            return Err(self.error(&["shallower nesting"]));
        }
        self.depth += 1;
        let result = f(self);
        self.depth -= 1;
        result
    }

    fn with_newlines<T>(&mut self, insensitive: bool, f: impl FnOnce(&mut Self) -> PResult<T>) -> PResult<T> {
        let saved = self.nl_insensitive;
        self.nl_insensitive = insensitive;
        let result = f(self);
        self.nl_insensitive = saved;
        result
    }

    /// Consumes statement separators; errors unless the current token
    /// starts a new line, is `closer`, or is end of input.
    fn end_statement(&mut self, closer: Option<&str>) -> PResult<()> {
        let mut separated = false;
        while self.at_punct(";") {
            self.advance();
            separated = true;
        }
        if separated || self.at_end() || self.newline_before() {
            return Ok(());
        }
        if let Some(c) = closer {
            if self.at_punct(c) {
                return Ok(());
            }
        }
        let mut expected = vec!["newline".to_string(), "`;`".to_string()];
        if let Some(c) = closer {
            expected.push(format!("`{c}`"));
        }
        Err(self.error(&expected))
    }

    // ---- declarations ---------------------------------------------------

    fn file(&mut self) -> PResult<SyntaxNode> {
        let mut children = Vec::new();
        while self.at_punct(";") {
            self.advance();
        }
        if self.at_kw("package") {
            let start = self.pos;
            self.advance();
            let segments = self.dotted_name(false)?;
            children.push(self.node(NodeKind::PackageDirective, segments, start));
            self.end_statement(None)?;
        }
        while self.at_kw("import") {
            let start = self.pos;
            self.advance();
            let segments = self.dotted_name(true)?;
            children.push(self.node(NodeKind::ImportDirective, segments, start));
            self.end_statement(None)?;
        }
        while !self.at_end() {
            children.push(self.declaration()?);
            self.end_statement(None)?;
        }
        let mut file = SyntaxNode::new(NodeKind::File, children);
        if let (Some(first), Some(last)) = (self.tokens.first(), self.tokens.last()) {
            file.span = Some(Span::new(first.line, last.end_line()));
        }
        Ok(file)
    }

    fn dotted_name(&mut self, allow_star: bool) -> PResult<Vec<SyntaxNode>> {
        let mut segments = vec![self.expect_ident()?];
        while self.at_op(".") {
            self.advance();
            if allow_star && self.at_op("*") {
                segments.push(self.leaf(NodeKind::StarProjection));
                break;
            }
            segments.push(self.expect_ident()?);
        }
        Ok(segments)
    }

    fn starts_declaration(&self) -> bool {
        if self.at_punct("@") {
            return true;
        }
        match self.peek() {
            Some(t) if t.kind == TokenKind::Keyword => {
                matches!(t.text.as_str(), "fun" | "val" | "var" | "class" | "interface" | "object" | "typealias")
            }
            Some(t) if t.kind == TokenKind::Identifier => self.is_modifier_here(),
            _ => false,
        }
    }

    /// A soft keyword counts as a modifier only when followed by something
    /// that can continue a declaration.
    fn is_modifier_here(&self) -> bool {
        let Some(t) = self.peek() else { return false };
        if t.kind != TokenKind::Identifier || !MODIFIERS.contains(&t.text.as_str()) {
            return false;
        }
        match self.peek_at(1) {
            Some(next) if next.line == t.end_line() || next.kind == TokenKind::Keyword => match next.kind {
                TokenKind::Identifier => true,
                TokenKind::Keyword => {
                    matches!(next.text.as_str(), "fun" | "val" | "var" | "class" | "interface" | "object" | "in")
                }
                TokenKind::Punctuation => next.text == "@",
                _ => false,
            },
            _ => false,
        }
    }

    fn modifiers(&mut self) -> PResult<Option<SyntaxNode>> {
        let start = self.pos;
        let mut items = Vec::new();
        loop {
            if self.at_punct("@") {
                items.push(self.annotation()?);
            } else if self.is_modifier_here() {
                items.push(self.leaf(NodeKind::Modifier));
            } else {
                break;
            }
        }
        Ok(if items.is_empty() { None } else { Some(self.node(NodeKind::ModifierList, items, start)) })
    }

    fn annotation(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        self.expect_punct("@")?;
        let mut children = self.dotted_name(false)?;
        if self.at_punct("(") && !self.newline_before() {
            children.push(self.value_arguments()?);
        }
        Ok(self.node(NodeKind::Annotation, children, start))
    }

    fn declaration(&mut self) -> PResult<SyntaxNode> {
        self.nested(|p| {
            let start = p.pos;
            let modifiers = p.modifiers()?;
            let Some(t) = p.peek() else {
                return Err(p.error(&["declaration"]));
            };
            match (t.kind, t.text.as_str()) {
                (TokenKind::Keyword, "fun") => p.function(start, modifiers),
                (TokenKind::Keyword, "val" | "var") => p.property(start, modifiers),
                (TokenKind::Keyword, "class") => p.class_like(start, modifiers, NodeKind::Class),
                (TokenKind::Keyword, "interface") => p.class_like(start, modifiers, NodeKind::Interface),
                (TokenKind::Keyword, "object") => p.class_like(start, modifiers, NodeKind::ObjectDeclaration),
                _ => Err(p.error(&["`fun`", "`val`", "`var`", "`class`", "`interface`", "`object`"])),
            }
        })
    }

    fn function(&mut self, start: usize, modifiers: Option<SyntaxNode>) -> PResult<SyntaxNode> {
        self.expect(TokenKind::Keyword, "fun")?;
        let mut children: Vec<SyntaxNode> = modifiers.into_iter().collect();
        if self.at_op("<") {
            children.push(self.type_parameters()?);
        }
        let (receiver, name) = self.receiver_and_name()?;
        children.extend(receiver);
        children.push(name);
        children.push(self.value_parameters()?);
        if self.at_punct(":") {
            self.advance();
            children.push(self.type_ref()?);
        }
        if self.at_punct("{") {
            children.push(self.block()?);
        } else if self.at_op("=") {
            self.advance();
            children.push(self.expression()?);
        }
        Ok(self.node(NodeKind::Function, children, start))
    }

    /// Parses `Receiver.name` or `name`, returning the optional RECEIVER_TYPE.
    fn receiver_and_name(&mut self) -> PResult<(Option<SyntaxNode>, SyntaxNode)> {
        let start = self.pos;
        let mut segments = Vec::new();
        loop {
            let ident = self.expect_ident()?;
            let seg_has_args = self.at_op("<");
            segments.push(ident);
            if seg_has_args {
                segments.push(self.type_arguments()?);
            }
            if self.at_op("?") && self.peek_at(1).is_some_and(|t| t.is(TokenKind::Operator, ".")) {
                let q = self.pos;
                self.advance();
                segments.push(self.leaf_with_text(NodeKind::Nullable, "?", q));
                let receiver_end = self.pos;
                self.advance();
                let ty = SyntaxNode::new(NodeKind::TypeReference, segments).with_span(self.span_between(start, receiver_end));
                let receiver = SyntaxNode::new(NodeKind::ReceiverType, vec![ty]);
                let name = self.expect_ident()?;
                return Ok((Some(receiver), name));
            }
            if self.at_op(".") && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Identifier) {
                self.advance();
                continue;
            }
            break;
        }
        let name = segments.pop().expect("at least one segment");
        if name.kind != NodeKind::Identifier {
            return Err(self.error(&["declaration name"]));
        }
        if segments.is_empty() {
            return Ok((None, name));
        }
        let ty = SyntaxNode::new(NodeKind::TypeReference, segments);
        Ok((Some(SyntaxNode::new(NodeKind::ReceiverType, vec![ty])), name))
    }

    fn span_between(&self, start: usize, end_exclusive: usize) -> Span {
        let first = &self.tokens[start];
        let last = &self.tokens[end_exclusive.saturating_sub(1).max(start)];
        Span::new(first.line, last.end_line())
    }

    fn property(&mut self, start: usize, modifiers: Option<SyntaxNode>) -> PResult<SyntaxNode> {
        let mut children: Vec<SyntaxNode> = modifiers.into_iter().collect();
        children.push(self.leaf(NodeKind::Keyword));
        if self.at_op("<") {
            children.push(self.type_parameters()?);
        }
        if self.at_punct("(") {
            return Err(self.error(&["property name (destructuring declarations are not supported)"]));
        }
        let (receiver, name) = self.receiver_and_name()?;
        children.extend(receiver);
        children.push(name);
        if self.at_punct(":") {
            self.advance();
            children.push(self.type_ref()?);
        }
        if self.at_op("=") {
            self.advance();
            children.push(self.expression()?);
        } else if self.at_ident() && self.peek().is_some_and(|t| t.text == "by") {
            let delegate_start = self.pos;
            self.advance();
            let expr = self.expression()?;
            children.push(self.node(NodeKind::PropertyDelegate, vec![expr], delegate_start));
        }
        Ok(self.node(NodeKind::Property, children, start))
    }

    fn class_like(&mut self, start: usize, modifiers: Option<SyntaxNode>, kind: NodeKind) -> PResult<SyntaxNode> {
        let is_enum = modifiers
            .as_ref()
            .is_some_and(|m| m.children.iter().any(|c| c.kind == NodeKind::Modifier && c.text() == "enum"));
        let mut children: Vec<SyntaxNode> = modifiers.into_iter().collect();
        self.advance();
        if kind == NodeKind::ObjectDeclaration {
            if self.at_ident() {
                children.push(self.leaf(NodeKind::Identifier));
            }
        } else {
            children.push(self.expect_ident()?);
        }
        if kind != NodeKind::ObjectDeclaration && self.at_op("<") {
            children.push(self.type_parameters()?);
        }
        if kind == NodeKind::Class && self.at_punct("(") {
            children.push(self.value_parameters()?);
        }
        if self.at_punct(":") {
            self.advance();
            children.push(self.supertypes()?);
        }
        if self.at_punct("{") {
            children.push(self.class_body(is_enum)?);
        }
        Ok(self.node(kind, children, start))
    }

    fn supertypes(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        let mut entries = Vec::new();
        loop {
            let entry_start = self.pos;
            let mut parts = vec![self.type_ref()?];
            if self.at_punct("(") && !self.newline_before() {
                parts.push(self.value_arguments()?);
            }
            entries.push(self.node(NodeKind::SupertypeEntry, parts, entry_start));
            if self.at_punct(",") {
                self.advance();
            } else {
                break;
            }
        }
        Ok(self.node(NodeKind::SupertypeList, entries, start))
    }

    fn class_body(&mut self, is_enum: bool) -> PResult<SyntaxNode> {
        let start = self.pos;
        self.expect_punct("{")?;
        self.with_newlines(false, |p| {
            let mut members = Vec::new();
            if is_enum {
                while p.at_ident() || p.at_punct("@") {
                    let entry_start = p.pos;
                    let mut parts: Vec<SyntaxNode> = p.modifiers()?.into_iter().collect();
                    parts.push(p.expect_ident()?);
                    if p.at_punct("(") {
                        parts.push(p.value_arguments()?);
                    }
                    members.push(p.node(NodeKind::EnumEntry, parts, entry_start));
                    if p.at_punct(",") {
                        p.advance();
                    } else {
                        break;
                    }
                }
                if p.at_punct(";") {
                    p.advance();
                }
            }
            while !p.at_punct("}") {
                if p.at_end() {
                    return Err(p.error(&["`}`"]));
                }
                if p.at_ident() && p.peek().is_some_and(|t| t.text == "init")
                    && p.peek_at(1).is_some_and(|t| t.is(TokenKind::Punctuation, "{"))
                {
                    let init_start = p.pos;
                    p.advance();
                    let body = p.block()?;
                    members.push(p.node(NodeKind::ClassInitializer, vec![body], init_start));
                } else {
                    members.push(p.declaration()?);
                }
                p.end_statement(Some("}"))?;
            }
            p.advance();
            Ok(p.node(NodeKind::ClassBody, members, start))
        })
    }

    fn type_parameters(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        self.expect(TokenKind::Operator, "<")?;
        let mut params = Vec::new();
        loop {
            let param_start = self.pos;
            let mut parts: Vec<SyntaxNode> = self.modifiers()?.into_iter().collect();
            parts.push(self.expect_ident()?);
            if self.at_punct(":") {
                self.advance();
                parts.push(self.type_ref()?);
            }
            params.push(self.node(NodeKind::TypeParameter, parts, param_start));
            if self.at_punct(",") {
                self.advance();
            } else {
                break;
            }
        }
        self.expect(TokenKind::Operator, ">")?;
        Ok(self.node(NodeKind::TypeParameterList, params, start))
    }

    fn value_parameters(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        self.expect_punct("(")?;
        self.with_newlines(true, |p| {
            let mut params = Vec::new();
            while !p.at_punct(")") {
                params.push(p.parameter()?);
                if p.at_punct(",") {
                    p.advance();
                } else if !p.at_punct(")") {
                    return Err(p.error(&["`,`", "`)`"]));
                }
            }
            p.advance();
            Ok(p.node(NodeKind::ParameterList, params, start))
        })
    }

    fn parameter(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        let mut parts: Vec<SyntaxNode> = self.modifiers()?.into_iter().collect();
        if self.at_kw("val") || self.at_kw("var") {
            parts.push(self.leaf(NodeKind::Keyword));
        }
        parts.push(self.expect_ident()?);
        self.expect_punct(":")?;
        parts.push(self.type_ref()?);
        if self.at_op("=") {
            let default_start = self.pos;
            self.advance();
            let value = self.expression()?;
            parts.push(self.node(NodeKind::DefaultValue, vec![value], default_start));
        }
        Ok(self.node(NodeKind::Parameter, parts, start))
    }

    // ---- types ------------------------------------------------------------

    fn type_ref(&mut self) -> PResult<SyntaxNode> {
        self.nested(|p| {
            let start = p.pos;
            let mut parts = Vec::new();
            if p.at_ident() && p.peek().is_some_and(|t| t.text == "suspend")
                && p.peek_at(1).is_some_and(|t| t.is(TokenKind::Punctuation, "("))
            {
                let m = p.leaf(NodeKind::Modifier);
                parts.push(SyntaxNode::new(NodeKind::ModifierList, vec![m]));
            }
            if p.at_punct("(") {
                if let Some(ft) = p.speculate(Self::function_type) {
                    parts.push(ft);
                } else {
                    p.advance();
                    let inner = p.with_newlines(true, Self::type_ref)?;
                    p.expect_punct(")")?;
                    parts.extend(inner.children);
                    if !(p.at_op("?") && !parts.iter().any(|c| c.kind == NodeKind::Nullable)) {
                        return Ok(p.node(NodeKind::TypeReference, parts, start));
                    }
                    let q = p.pos;
                    p.advance();
                    parts.push(p.leaf_with_text(NodeKind::Nullable, "?", q));
                    return Ok(p.node(NodeKind::TypeReference, parts, start));
                }
            } else {
                loop {
                    parts.push(p.expect_ident()?);
                    if p.at_op("<") {
                        parts.push(p.type_arguments()?);
                    }
                    if p.at_op(".") && p.peek_at(1).is_some_and(|t| t.kind == TokenKind::Identifier) {
                        p.advance();
                    } else {
                        break;
                    }
                }
                if p.at_op("?") {
                    let q = p.pos;
                    p.advance();
                    parts.push(p.leaf_with_text(NodeKind::Nullable, "?", q));
                }
            }
            Ok(p.node(NodeKind::TypeReference, parts, start))
        })
    }

    fn function_type(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        self.expect_punct("(")?;
        let mut parts = self.with_newlines(true, |p| {
            let mut params = Vec::new();
            while !p.at_punct(")") {
                params.push(p.type_ref()?);
                if p.at_punct(",") {
                    p.advance();
                } else if !p.at_punct(")") {
                    return Err(p.error(&["`,`", "`)`"]));
                }
            }
            p.advance();
            Ok(params)
        })?;
        self.expect(TokenKind::Operator, "->")?;
        parts.push(self.type_ref()?);
        Ok(self.node(NodeKind::FunctionType, parts, start))
    }

    fn type_arguments(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        self.expect(TokenKind::Operator, "<")?;
        let mut args = Vec::new();
        loop {
            if self.at_op("*") {
                args.push(self.leaf(NodeKind::StarProjection));
            } else {
                let arg_start = self.pos;
                let variance = if self.at_kw("in") || (self.at_ident() && self.peek().is_some_and(|t| t.text == "out")
                    && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Identifier))
                {
                    let m = self.leaf(NodeKind::Modifier);
                    Some(SyntaxNode::new(NodeKind::ModifierList, vec![m]))
                } else {
                    None
                };
                let mut ty = self.type_ref()?;
                if let Some(v) = variance {
                    ty.children.insert(0, v);
                    ty.span = Some(self.span_from(arg_start));
                }
                args.push(ty);
            }
            if self.at_punct(",") {
                self.advance();
            } else {
                break;
            }
        }
        self.expect(TokenKind::Operator, ">")?;
        Ok(self.node(NodeKind::TypeArgumentList, args, start))
    }

    // ---- statements -------------------------------------------------------

    fn block(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        self.expect_punct("{")?;
        let statements = self.statements_until_brace()?;
        Ok(self.node(NodeKind::Block, statements, start))
    }

    /// Parses statements up to and including the closing `}`.
    fn statements_until_brace(&mut self) -> PResult<Vec<SyntaxNode>> {
        self.with_newlines(false, |p| {
            let mut statements = Vec::new();
            while p.at_punct(";") {
                p.advance();
            }
            while !p.at_punct("}") {
                if p.at_end() {
                    return Err(p.error(&["`}`"]));
                }
                statements.push(p.statement()?);
                p.end_statement(Some("}"))?;
            }
            p.advance();
            Ok(statements)
        })
    }

    fn statement(&mut self) -> PResult<SyntaxNode> {
        self.nested(|p| {
            if p.starts_declaration() {
                return p.declaration();
            }
            if p.at_kw("for") {
                return p.for_loop();
            }
            if p.at_kw("while") {
                return p.while_loop();
            }
            if p.at_kw("do") {
                return p.do_while_loop();
            }
            let start = p.pos;
            let expr = p.expression()?;
            let is_assign = p.peek().is_some_and(|t| {
                t.kind == TokenKind::Operator && matches!(t.text.as_str(), "=" | "+=" | "-=" | "*=" | "/=" | "%=")
            });
            if is_assign && p.continues_line() {
                if !matches!(
                    expr.kind,
                    NodeKind::Identifier
                        | NodeKind::DotQualifiedExpr
                        | NodeKind::SafeAccessExpr
                        | NodeKind::IndexingExpr
                        | NodeKind::Parenthesized
                ) {
                    return Err(p.error(&["newline", "`;`"]));
                }
                let op = p.leaf(NodeKind::Operator);
                let rhs = p.expression()?;
                return Ok(p.node(NodeKind::Assignment, vec![expr, op, rhs], start));
            }
            Ok(expr)
        })
    }

    fn control_body(&mut self) -> PResult<SyntaxNode> {
        if self.at_punct("{") {
            self.block()
        } else {
            self.statement()
        }
    }

    fn parenthesized_condition(&mut self) -> PResult<SyntaxNode> {
        self.expect_punct("(")?;
        let cond = self.with_newlines(true, Self::expression)?;
        self.expect_punct(")")?;
        Ok(cond)
    }

    fn for_loop(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        self.advance();
        self.expect_punct("(")?;
        let (variable, range) = self.with_newlines(true, |p| {
            let var_start = p.pos;
            if p.at_punct("(") {
                return Err(p.error(&["loop variable (destructuring is not supported)"]));
            }
            let mut parts = vec![p.expect_ident()?];
            if p.at_punct(":") {
                p.advance();
                parts.push(p.type_ref()?);
            }
            let variable = p.node(NodeKind::Parameter, parts, var_start);
            p.expect(TokenKind::Keyword, "in")?;
            let range = p.expression()?;
            Ok((variable, range))
        })?;
        self.expect_punct(")")?;
        let body = self.control_body()?;
        Ok(self.node(NodeKind::ForLoop, vec![variable, range, body], start))
    }

    fn while_loop(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        self.advance();
        let cond = self.parenthesized_condition()?;
        let body = self.control_body()?;
        Ok(self.node(NodeKind::WhileLoop, vec![cond, body], start))
    }

    fn do_while_loop(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        self.advance();
        let body = self.control_body()?;
        self.expect(TokenKind::Keyword, "while")?;
        let cond = self.parenthesized_condition()?;
        Ok(self.node(NodeKind::DoWhileLoop, vec![body, cond], start))
    }

    // ---- expressions ------------------------------------------------------

    fn expression(&mut self) -> PResult<SyntaxNode> {
        self.nested(Self::disjunction)
    }

    fn binary_level(
        &mut self,
        ops: &[&str],
        newline_ok: bool,
        next: fn(&mut Self) -> PResult<SyntaxNode>,
    ) -> PResult<SyntaxNode> {
        let start = self.pos;
        let mut lhs = next(self)?;
        while self.peek().is_some_and(|t| t.kind == TokenKind::Operator && ops.contains(&t.text.as_str()))
            && (newline_ok || self.continues_line())
        {
            let op = self.leaf(NodeKind::Operator);
            let rhs = next(self)?;
            lhs = self.node(NodeKind::BinaryExpr, vec![lhs, op, rhs], start);
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> PResult<SyntaxNode> {
        self.binary_level(&["||"], true, Self::conjunction)
    }

    fn conjunction(&mut self) -> PResult<SyntaxNode> {
        self.binary_level(&["&&"], true, Self::equality)
    }

    fn equality(&mut self) -> PResult<SyntaxNode> {
        self.binary_level(&["==", "!=", "===", "!=="], false, Self::comparison)
    }

    fn comparison(&mut self) -> PResult<SyntaxNode> {
        self.binary_level(&["<", ">", "<=", ">="], false, Self::named_check)
    }

    fn named_check(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        let mut lhs = self.elvis()?;
        loop {
            if !self.continues_line() {
                break;
            }
            let negated = self.at_op("!")
                && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Keyword && (t.text == "in" || t.text == "is"))
                && self.peek_at(1).is_some_and(|t| {
                    let bang = &self.tokens[self.pos];
                    t.line == bang.line && t.column == bang.column + 1
                });
            let keyword = if negated { self.peek_at(1) } else { self.peek() };
            let Some(word) = keyword.filter(|t| t.kind == TokenKind::Keyword).map(|t| t.text.clone()) else {
                break;
            };
            if word != "in" && word != "is" {
                break;
            }
            let op_start = self.pos;
            if negated {
                self.advance();
            }
            self.advance();
            let text = if negated { format!("!{word}") } else { word.clone() };
            let op = self.leaf_with_text(NodeKind::Operator, &text, op_start);
            if word == "is" {
                let ty = self.type_ref()?;
                lhs = self.node(NodeKind::IsExpr, vec![lhs, op, ty], start);
            } else {
                let rhs = self.elvis()?;
                lhs = self.node(NodeKind::BinaryExpr, vec![lhs, op, rhs], start);
            }
        }
        Ok(lhs)
    }

    fn elvis(&mut self) -> PResult<SyntaxNode> {
        self.binary_level(&["?:"], true, Self::infix_call)
    }

    fn infix_call(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        let mut lhs = self.range()?;
        while self.at_ident() && self.continues_line() && !self.is_modifier_here() {
            let op = self.leaf(NodeKind::Operator);
            let rhs = self.range()?;
            lhs = self.node(NodeKind::BinaryExpr, vec![lhs, op, rhs], start);
        }
        Ok(lhs)
    }

    fn range(&mut self) -> PResult<SyntaxNode> {
        self.binary_level(&["..", "..<"], false, Self::additive)
    }

    fn additive(&mut self) -> PResult<SyntaxNode> {
        self.binary_level(&["+", "-"], false, Self::multiplicative)
    }

    fn multiplicative(&mut self) -> PResult<SyntaxNode> {
        self.binary_level(&["*", "/", "%"], false, Self::as_expr)
    }

    fn as_expr(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        let mut lhs = self.prefix()?;
        while self.at_kw("as") && self.continues_line() {
            let op_start = self.pos;
            self.advance();
            let safe = self.at_op("?") && {
                let q = &self.tokens[self.pos];
                let kw = &self.tokens[self.pos - 1];
                q.line == kw.line && q.column == kw.column + 2
            };
            if safe {
                self.advance();
            }
            let op = self.leaf_with_text(NodeKind::Operator, if safe { "as?" } else { "as" }, op_start);
            let ty = self.type_ref()?;
            lhs = self.node(NodeKind::AsExpr, vec![lhs, op, ty], start);
        }
        Ok(lhs)
    }

    fn prefix(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        if self.peek().is_some_and(|t| t.kind == TokenKind::Operator && matches!(t.text.as_str(), "-" | "+" | "!" | "++" | "--")) {
            let op = self.leaf(NodeKind::Operator);
            let operand = self.nested(Self::prefix)?;
            return Ok(self.node(NodeKind::PrefixExpr, vec![op, operand], start));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        let mut expr = self.primary()?;
        loop {
            let same_line = !self.newline_before();
            if let Some(call) = self.call_suffix(expr.clone(), start)? {
                expr = call;
                continue;
            }
            if self.at_op(".") || self.at_op("?.") {
                let kind = if self.at_op(".") { NodeKind::DotQualifiedExpr } else { NodeKind::SafeAccessExpr };
                self.advance();
                let sel_start = self.pos;
                let selector = match self.peek() {
                    Some(t) if t.kind == TokenKind::Identifier => self.leaf(NodeKind::Identifier),
                    Some(t) if t.kind == TokenKind::Keyword && (t.text == "this" || t.text == "class") => {
                        self.leaf(NodeKind::Identifier)
                    }
                    _ => return Err(self.error(&["member name"])),
                };
                let selector = match self.call_suffix(selector.clone(), sel_start)? {
                    Some(call) => call,
                    None => selector,
                };
                expr = self.node(kind, vec![expr, selector], start);
                continue;
            }
            if !same_line && !self.nl_insensitive {
                break;
            }
            if self.at_punct("[") {
                self.advance();
                let indices = self.with_newlines(true, |p| {
                    let mut indices = vec![p.expression()?];
                    while p.at_punct(",") {
                        p.advance();
                        indices.push(p.expression()?);
                    }
                    p.expect_punct("]")?;
                    Ok(indices)
                })?;
                let mut children = vec![expr];
                children.extend(indices);
                expr = self.node(NodeKind::IndexingExpr, children, start);
            } else if self.peek().is_some_and(|t| t.kind == TokenKind::Operator && matches!(t.text.as_str(), "++" | "--" | "!!")) {
                let op = self.leaf(NodeKind::Operator);
                expr = self.node(NodeKind::PostfixExpr, vec![expr, op], start);
            } else if self.at_op("::") {
                self.advance();
                let name = self.callable_name()?;
                expr = self.node(NodeKind::CallableReference, vec![expr, name], start);
            } else {
                break;
            }
        }
        Ok(expr)
    }

    fn callable_name(&mut self) -> PResult<SyntaxNode> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Identifier || t.is(TokenKind::Keyword, "class") => {
                Ok(self.leaf(NodeKind::Identifier))
            }
            _ => Err(self.error(&["identifier", "`class`"])),
        }
    }

    /// Type arguments, value arguments and a trailing lambda applied to `callee`.
    fn call_suffix(&mut self, callee: SyntaxNode, start: usize) -> PResult<Option<SyntaxNode>> {
        if self.newline_before() {
            return Ok(None);
        }
        let mut parts = Vec::new();
        if self.at_op("<") && matches!(callee.kind, NodeKind::Identifier) {
            let args = self.speculate(|p| {
                let args = p.type_arguments()?;
                let follows_call = (p.at_punct("(") || p.at_punct("{") || p.at_op("::")) && !p.newline_before();
                if follows_call { Ok(args) } else { Err(p.error(&["`(`"])) }
            });
            if let Some(args) = args {
                parts.push(args);
            }
        }
        if self.at_punct("(") && !self.newline_before() {
            parts.push(self.value_arguments()?);
        }
        if self.at_punct("{") && !self.newline_before() {
            parts.push(self.lambda()?);
        }
        if parts.is_empty() {
            return Ok(None);
        }
        let mut children = vec![callee];
        children.extend(parts);
        Ok(Some(self.node(NodeKind::CallExpr, children, start)))
    }

    fn value_arguments(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        self.expect_punct("(")?;
        self.with_newlines(true, |p| {
            let mut args = Vec::new();
            while !p.at_punct(")") {
                let arg_start = p.pos;
                let mut parts = Vec::new();
                if p.at_ident() && p.peek_at(1).is_some_and(|t| t.is(TokenKind::Operator, "=")) {
                    parts.push(p.leaf(NodeKind::ArgumentName));
                    p.advance();
                }
                if p.at_op("*") {
                    parts.push(p.leaf(NodeKind::Operator));
                }
                parts.push(p.expression()?);
                args.push(p.node(NodeKind::ValueArgument, parts, arg_start));
                if p.at_punct(",") {
                    p.advance();
                } else if !p.at_punct(")") {
                    return Err(p.error(&["`,`", "`)`"]));
                }
            }
            p.advance();
            Ok(p.node(NodeKind::ValueArgumentList, args, start))
        })
    }

    fn lambda(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        self.expect_punct("{")?;
        let mut children = Vec::new();
        let params = self.speculate(|p| {
            let params_start = p.pos;
            let mut params = Vec::new();
            loop {
                let param_start = p.pos;
                let mut parts = vec![p.expect_ident()?];
                if p.at_punct(":") {
                    p.advance();
                    parts.push(p.type_ref()?);
                }
                params.push(p.node(NodeKind::Parameter, parts, param_start));
                if p.at_punct(",") {
                    p.advance();
                } else {
                    break;
                }
            }
            let list = p.node(NodeKind::ParameterList, params, params_start);
            p.expect(TokenKind::Operator, "->")?;
            Ok(list)
        });
        match params {
            Some(list) => children.push(list),
            None => {
                if self.at_op("->") {
                    self.advance();
                }
            }
        }
        let body_start = self.pos;
        let statements = self.statements_until_brace()?;
        let mut body = SyntaxNode::new(NodeKind::Block, statements);
        if self.pos > body_start + 1 {
            body.span = Some(self.span_between(body_start, self.pos - 1));
        }
        children.push(body);
        Ok(self.node(NodeKind::Lambda, children, start))
    }

    fn primary(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        let Some(token) = self.peek() else {
            return Err(self.error(&["expression"]));
        };
        match token.kind {
            TokenKind::Identifier => Ok(self.leaf(NodeKind::Identifier)),
            TokenKind::IntLiteral | TokenKind::FloatLiteral | TokenKind::CharLiteral | TokenKind::StringLiteral => {
                Ok(self.leaf(NodeKind::Literal))
            }
            TokenKind::StringFragment => self.string_template(),
            TokenKind::Punctuation if token.text == "(" => {
                self.advance();
                let inner = self.with_newlines(true, Self::expression)?;
                self.expect_punct(")")?;
                Ok(self.node(NodeKind::Parenthesized, vec![inner], start))
            }
            TokenKind::Punctuation if token.text == "{" => self.lambda(),
            TokenKind::Operator if token.text == "::" => {
                self.advance();
                let name = self.callable_name()?;
                Ok(self.node(NodeKind::CallableReference, vec![name], start))
            }
            TokenKind::Keyword => match token.text.as_str() {
                "true" | "false" | "null" => Ok(self.leaf(NodeKind::Literal)),
                "this" | "super" => Ok(self.leaf(NodeKind::ThisExpr)),
                "if" => self.if_expr(),
                "when" => self.when_expr(),
                "try" => self.try_expr(),
                "return" => {
                    self.advance();
                    let mut children = Vec::new();
                    if self.can_start_expression() && !self.newline_before() {
                        children.push(self.expression()?);
                    }
                    Ok(self.node(NodeKind::Return, children, start))
                }
                "throw" => {
                    self.advance();
                    let value = self.expression()?;
                    Ok(self.node(NodeKind::Throw, vec![value], start))
                }
                "break" | "continue" => {
                    let kind = if token.text == "break" { NodeKind::Break } else { NodeKind::Continue };
                    self.advance();
                    Ok(self.node(kind, Vec::new(), start))
                }
                _ => Err(self.error(&["expression"])),
            },
            _ => Err(self.error(&["expression"])),
        }
    }

    fn can_start_expression(&self) -> bool {
        let Some(t) = self.peek() else { return false };
        match t.kind {
            TokenKind::Punctuation => matches!(t.text.as_str(), "(" | "{"),
            TokenKind::Operator => matches!(t.text.as_str(), "-" | "+" | "!" | "++" | "--" | "::"),
            TokenKind::Keyword => matches!(
                t.text.as_str(),
                "true" | "false" | "null" | "this" | "super" | "if" | "when" | "try" | "return" | "throw" | "break" | "continue"
            ),
            TokenKind::TemplateExit | TokenKind::TemplateEntry | TokenKind::Comment => false,
            _ => true,
        }
    }

    fn string_template(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        let mut parts = vec![self.leaf(NodeKind::StringPart)];
        loop {
            if !self.at_kind(TokenKind::TemplateEntry) {
                break;
            }
            let entry_start = self.pos;
            let entry = self.advance();
            if entry.text == "$" {
                let name = match self.peek() {
                    Some(t) if t.kind == TokenKind::Identifier => self.leaf(NodeKind::Identifier),
                    Some(t) if t.is(TokenKind::Keyword, "this") => self.leaf(NodeKind::ThisExpr),
                    _ => return Err(self.error(&["identifier"])),
                };
                parts.push(self.node(NodeKind::ShortTemplateEntry, vec![name], entry_start));
            } else {
                let expr = self.with_newlines(true, Self::expression)?;
                if !self.at_kind(TokenKind::TemplateExit) {
                    return Err(self.error(&["`}`"]));
                }
                self.advance();
                parts.push(self.node(NodeKind::LongTemplateEntry, vec![expr], entry_start));
            }
            if self.at_kind(TokenKind::StringFragment) {
                parts.push(self.leaf(NodeKind::StringPart));
            }
        }
        Ok(self.node(NodeKind::StringTemplate, parts, start))
    }

    fn if_expr(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        self.advance();
        let cond = self.parenthesized_condition()?;
        let mut children = vec![cond];
        if self.at_kw("else") {
            return Err(self.error(&["if branch"]));
        }
        children.push(self.control_body()?);
        let cp = self.checkpoint();
        while self.at_punct(";") {
            self.advance();
        }
        if self.at_kw("else") {
            self.advance();
            children.push(self.control_body()?);
        } else {
            self.restore(cp);
        }
        Ok(self.node(NodeKind::IfExpr, children, start))
    }

    fn when_expr(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        self.advance();
        let mut children = Vec::new();
        if self.at_punct("(") {
            let subject_start = self.pos;
            let subject = self.parenthesized_condition()?;
            children.push(self.node(NodeKind::WhenSubject, vec![subject], subject_start));
        }
        self.expect_punct("{")?;
        let entries = self.with_newlines(false, |p| {
            let mut entries = Vec::new();
            while p.at_punct(";") {
                p.advance();
            }
            while !p.at_punct("}") {
                if p.at_end() {
                    return Err(p.error(&["`}`"]));
                }
                entries.push(p.when_entry()?);
                while p.at_punct(";") {
                    p.advance();
                }
            }
            p.advance();
            Ok(entries)
        })?;
        children.extend(entries);
        Ok(self.node(NodeKind::WhenExpr, children, start))
    }

    fn when_entry(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        let mut parts = Vec::new();
        if self.at_kw("else") {
            parts.push(self.leaf(NodeKind::Else));
        } else {
            loop {
                parts.push(self.when_condition()?);
                if self.at_punct(",") {
                    self.advance();
                } else {
                    break;
                }
            }
        }
        self.expect(TokenKind::Operator, "->")?;
        parts.push(self.control_body()?);
        Ok(self.node(NodeKind::WhenEntry, parts, start))
    }

    fn when_condition(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        let negated = self.at_op("!")
            && self.peek_at(1).is_some_and(|t| t.kind == TokenKind::Keyword && (t.text == "in" || t.text == "is"));
        let keyword = if negated { self.peek_at(1) } else { self.peek() };
        let word = keyword
            .filter(|t| t.kind == TokenKind::Keyword && (t.text == "in" || t.text == "is"))
            .map(|t| t.text.clone());
        let Some(word) = word else {
            let expr = self.expression()?;
            return Ok(self.node(NodeKind::WhenCondition, vec![expr], start));
        };
        if negated {
            self.advance();
        }
        self.advance();
        let text = if negated { format!("!{word}") } else { word.clone() };
        let op = self.leaf_with_text(NodeKind::Operator, &text, start);
        let operand = if word == "is" { self.type_ref()? } else { self.expression()? };
        Ok(self.node(NodeKind::WhenCondition, vec![op, operand], start))
    }

    fn try_expr(&mut self) -> PResult<SyntaxNode> {
        let start = self.pos;
        self.advance();
        let mut children = vec![self.block()?];
        while self.at_kw("catch") {
            let catch_start = self.pos;
            self.advance();
            self.expect_punct("(")?;
            let param = self.with_newlines(true, |p| {
                let param_start = p.pos;
                let name = p.expect_ident()?;
                p.expect_punct(":")?;
                let ty = p.type_ref()?;
                Ok(p.node(NodeKind::Parameter, vec![name, ty], param_start))
            })?;
            self.expect_punct(")")?;
            let body = self.block()?;
            children.push(self.node(NodeKind::CatchClause, vec![param, body], catch_start));
        }
        if self.at_kw("finally") {
            let finally_start = self.pos;
            self.advance();
            let body = self.block()?;
            children.push(self.node(NodeKind::FinallyClause, vec![body], finally_start));
        }
        if children.len() == 1 {
            return Err(self.error(&["`catch`", "`finally`"]));
        }
        Ok(self.node(NodeKind::TryExpr, children, start))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::lexer::tokenize;

    fn parse_src(src: &str) -> PResult<SyntaxNode> {
        parse(&tokenize(src).expect("lexes"))
    }

    fn shape(node: &SyntaxNode) -> String {
        let mut out = node.kind.as_str().to_string();
        if let Some(text) = &node.text {
            out.push_str(&format!("[{text}]"));
        }
        if !node.children.is_empty() {
            let inner: Vec<String> = node.children.iter().map(shape).collect();
            out.push_str(&format!("({})", inner.join(", ")));
        }
        out
    }

    #[test]
    fn empty_function() {
        let tree = parse_src("fun f() {}").unwrap();
        assert_eq!(shape(&tree), "FILE(FUNCTION(IDENTIFIER[f], PARAMETER_LIST, BLOCK))");
    }

    #[test]
    fn empty_file() {
        let tree = parse_src("").unwrap();
        assert_eq!(tree.kind, NodeKind::File);
        assert!(tree.children.is_empty());
    }

    #[test]
    fn when_with_two_branches() {
        let tree = parse_src("fun g(x: Int) = when(x) { 1 -> 1 else -> 0 }").unwrap();
        assert_eq!(
            shape(&tree),
            "FILE(FUNCTION(IDENTIFIER[g], PARAMETER_LIST(PARAMETER(IDENTIFIER[x], TYPE_REFERENCE(IDENTIFIER[Int]))), \
             WHEN_EXPR(WHEN_SUBJECT(IDENTIFIER[x]), WHEN_ENTRY(WHEN_CONDITION(LITERAL[1]), LITERAL[1]), \
             WHEN_ENTRY(ELSE[else], LITERAL[0]))))"
        );
    }

    #[test]
    fn precedence_and_calls() {
        let tree = parse_src("fun f() = a + b * c.d(1) ?: e").unwrap();
        let body = &tree.children[0].children[2];
        assert_eq!(
            shape(body),
            "BINARY_EXPR(BINARY_EXPR(IDENTIFIER[a], OPERATOR[+], BINARY_EXPR(IDENTIFIER[b], OPERATOR[*], \
             DOT_QUALIFIED_EXPR(IDENTIFIER[c], CALL_EXPR(IDENTIFIER[d], VALUE_ARGUMENT_LIST(VALUE_ARGUMENT(LITERAL[1])))))), \
             OPERATOR[?:], IDENTIFIER[e])"
        );
    }

    #[test]
    fn newline_terminates_statements() {
        let tree = parse_src("fun f() {\n  val a = 1\n  -a\n}").unwrap();
        let block = &tree.children[0].children[2];
        assert_eq!(block.children.len(), 2);
        assert_eq!(block.children[1].kind, NodeKind::PrefixExpr);
    }

    #[test]
    fn member_chain_across_lines() {
        let tree = parse_src("fun f() {\n  list\n    .map { it * 2 }\n    .filter { x -> x > 1 }\n}").unwrap();
        let block = &tree.children[0].children[2];
        assert_eq!(block.children.len(), 1);
        assert_eq!(block.children[0].kind, NodeKind::DotQualifiedExpr);
    }

    #[test]
    fn suspend_extension_generic_function() {
        let tree = parse_src("@Test suspend fun <T : Any> List<T>.firstOr(d: T = null!!): T? = firstOrNull() ?: d").unwrap();
        let function = &tree.children[0];
        let kinds: Vec<_> = function.children.iter().map(|c| c.kind).collect();
        assert_eq!(
            kinds,
            [
                NodeKind::ModifierList,
                NodeKind::TypeParameterList,
                NodeKind::ReceiverType,
                NodeKind::Identifier,
                NodeKind::ParameterList,
                NodeKind::TypeReference,
                NodeKind::BinaryExpr
            ]
        );
        assert_eq!(function.name(), Some("firstOr"));
    }

    #[test]
    fn generic_call_versus_comparison() {
        let tree = parse_src("fun f() {\n  val a = listOf<Int>(1)\n  val b = x < y\n}").unwrap();
        let block = &tree.children[0].children[2];
        let a_init = block.children[0].children.last().unwrap();
        assert_eq!(a_init.kind, NodeKind::CallExpr);
        assert_eq!(a_init.children[1].kind, NodeKind::TypeArgumentList);
        let b_init = block.children[1].children.last().unwrap();
        assert_eq!(b_init.kind, NodeKind::BinaryExpr);
    }

    #[test]
    fn string_template_node() {
        let tree = parse_src("val s = \"a${x}b$y\"").unwrap();
        let template = tree.children[0].children.last().unwrap();
        assert_eq!(
            shape(template),
            "STRING_TEMPLATE(STRING_PART[\"a], LONG_TEMPLATE_ENTRY(IDENTIFIER[x]), STRING_PART[b], \
             SHORT_TEMPLATE_ENTRY(IDENTIFIER[y]), STRING_PART[\"])"
        );
    }

    #[test]
    fn classes_and_members() {
        let src = "enum class Color(val rgb: Int) { RED(1), GREEN(2);\n fun hex() = rgb }\n\
                   data class P(val x: Int) : Base(x), Marker {\n  init { check(x > 0) }\n  companion object { const val Z = 0 }\n}";
        let tree = parse_src(src).unwrap();
        assert_eq!(tree.children.len(), 2);
        let body = tree.children[0].child(NodeKind::ClassBody).unwrap();
        assert_eq!(body.children.iter().filter(|c| c.kind == NodeKind::EnumEntry).count(), 2);
        assert!(tree.children[1].child(NodeKind::SupertypeList).is_some());
    }

    #[test]
    fn control_flow() {
        let src = "fun f(xs: List<Int>) {\n\
                   for (x in xs) { if (x !in 1..3) continue else break }\n\
                   var i = 0\n\
                   while (i < 10) i += 1\n\
                   do { i-- } while (i > 0)\n\
                   val y = try { g() } catch (e: Exception) { null } finally { h() }\n\
                   val z = y as? String ?: return\n}";
        let tree = parse_src(src).unwrap();
        let block = &tree.children[0].children[2];
        let kinds: Vec<_> = block.children.iter().map(|c| c.kind).collect();
        assert_eq!(
            kinds,
            [NodeKind::ForLoop, NodeKind::Property, NodeKind::WhileLoop, NodeKind::DoWhileLoop, NodeKind::Property, NodeKind::Property]
        );
    }

    #[test]
    fn syntax_errors_report_position() {
        let err = parse_src("fun f( {}").unwrap_err();
        assert_eq!((err.line, err.column), (1, 8));
        let err = parse_src("typealias X = Int").unwrap_err();
        assert!(err.expected.iter().any(|e| e == "`fun`"), "{err}");
        assert!(parse_src("fun f() { a b }").is_err());
        assert!(parse_src("fun f() { val (a, b) = p }").is_err());
    }

    #[test]
    fn deep_nesting_is_an_error_not_a_crash() {
        let src = format!("fun f() = {}1{}", "(".repeat(1000), ")".repeat(1000));
        assert!(parse_src(&src).is_err());
    }
}
