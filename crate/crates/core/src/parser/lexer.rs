use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Keyword,
    Identifier,
    #[serde(rename = "literal-int")]
    IntLiteral,
    #[serde(rename = "literal-float")]
    FloatLiteral,
    #[serde(rename = "literal-char")]
    CharLiteral,
    /// A complete string literal without interpolation, quotes included.
    #[serde(rename = "literal-string")]
    StringLiteral,
    /// A literal piece of a string template. The first piece carries the
    /// opening quotes and the last piece the closing quotes.
    StringFragment,
    /// `$` or `${` inside a string template.
    TemplateEntry,
    /// The `}` closing a `${` template entry.
    TemplateExit,
    Operator,
    Punctuation,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: u32,
    pub column: u32,
    /// Byte offset of the first character.
    pub offset: usize,
}

impl Token {
    /// Line of the last character of the token.
    pub fn end_line(&self) -> u32 {
        self.line + self.text.matches('\n').count() as u32
    }

    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("{line}:{column}: unterminated string literal")]
    UnterminatedString { line: u32, column: u32 },
    #[error("{line}:{column}: unterminated comment")]
    UnterminatedComment { line: u32, column: u32 },
    #[error("{line}:{column}: illegal character {ch:?}")]
    IllegalCharacter { ch: char, line: u32, column: u32 },
}

impl LexError {
    pub fn position(&self) -> (u32, u32) {
        match *self {
            LexError::UnterminatedString { line, column }
            | LexError::UnterminatedComment { line, column }
            | LexError::IllegalCharacter { line, column, .. } => (line, column),
        }
    }
}

pub const KEYWORDS: &[&str] = &[
    "as", "break", "catch", "class", "continue", "do", "else", "false", "finally", "for", "fun",
    "if", "import", "in", "interface", "is", "null", "object", "package", "return", "super", "this",
    "throw", "true", "try", "typealias", "typeof", "val", "var", "when", "while",
];

// Longest first, so the first prefix match is the maximal munch.
const OPERATORS: &[&str] = &[
    "===", "!==", "..<", "?.", "?:", "!!", "::", "..", "->", "==", "!=", "<=", ">=", "&&", "||",
    "++", "--", "+=", "-=", "*=", "/=", "%=", "+", "-", "*", "/", "%", "=", "<", ">", "!", "?",
    ".",
];

const PUNCTUATION: &[char] = &['(', ')', '{', '}', '[', ']', ',', ';', ':', '@'];

/// Splits source text into tokens. Whitespace is skipped; comments are
/// kept as `Comment` tokens so that token texts plus skipped whitespace
/// reproduce the input.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let mut lexer = Lexer::new(source);
    lexer.lex_code(false)?;
    Ok(lexer.tokens)
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
    line: u32,
    column: u32,
    tokens: Vec<Token>,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        let mut lexer = Lexer { src, pos: 0, line: 1, column: 1, tokens: Vec::new() };
        if src.starts_with("#!") {
            while let Some(c) = lexer.peek() {
                if c == '\n' {
                    break;
                }
                lexer.bump();
            }
        }
        lexer
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek_nth(&self, n: usize) -> Option<char> {
        self.rest().chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn bump_str(&mut self, s: &str) {
        for _ in s.chars() {
            self.bump();
        }
    }

    fn push(&mut self, kind: TokenKind, start: Mark) {
        let text = self.src[start.offset..self.pos].to_string();
        self.tokens.push(Token { kind, text, line: start.line, column: start.column, offset: start.offset });
    }

    fn mark(&self) -> Mark {
        Mark { offset: self.pos, line: self.line, column: self.column }
    }

    /// Lexes code until end of input, or, when `in_template`, until the
    /// brace closing a `${` entry.
    fn lex_code(&mut self, in_template: bool) -> Result<(), LexError> {
        let mut depth = 0usize;
        while let Some(c) = self.peek() {
            let start = self.mark();
            if c.is_whitespace() {
                self.bump();
            } else if self.rest().starts_with("//") {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
                self.push(TokenKind::Comment, start);
            } else if self.rest().starts_with("/*") {
                self.lex_block_comment(start)?;
            } else if c.is_ascii_digit() {
                self.lex_number(start);
            } else if c == '_' || c.is_alphabetic() {
                while matches!(self.peek(), Some(c) if c == '_' || c.is_alphanumeric()) {
                    self.bump();
                }
                let word = &self.src[start.offset..self.pos];
                let kind = if KEYWORDS.contains(&word) { TokenKind::Keyword } else { TokenKind::Identifier };
                self.push(kind, start);
            } else if c == '`' {
                self.bump();
                loop {
                    match self.bump() {
                        Some('`') => break,
                        Some('\n') | None => {
                            return Err(LexError::IllegalCharacter { ch: '`', line: start.line, column: start.column })
                        }
                        Some(_) => {}
                    }
                }
                self.push(TokenKind::Identifier, start);
            } else if c == '\'' {
                self.lex_char(start)?;
            } else if c == '"' {
                self.lex_string(start)?;
            } else if in_template && c == '}' && depth == 0 {
                self.bump();
                self.push(TokenKind::TemplateExit, start);
                return Ok(());
            } else if PUNCTUATION.contains(&c) {
                if c == '{' {
                    depth += 1;
                } else if c == '}' {
                    depth = depth.saturating_sub(1);
                }
                self.bump();
                self.push(TokenKind::Punctuation, start);
            } else if let Some(op) = OPERATORS.iter().find(|op| self.rest().starts_with(**op)) {
                self.bump_str(op);
                self.push(TokenKind::Operator, start);
            } else {
                return Err(LexError::IllegalCharacter { ch: c, line: start.line, column: start.column });
            }
        }
        Ok(())
    }

    fn lex_block_comment(&mut self, start: Mark) -> Result<(), LexError> {
        self.bump_str("/*");
        let mut nesting = 1;
        while nesting > 0 {
            if self.rest().starts_with("/*") {
                self.bump_str("/*");
                nesting += 1;
            } else if self.rest().starts_with("*/") {
                self.bump_str("*/");
                nesting -= 1;
            } else if self.bump().is_none() {
                return Err(LexError::UnterminatedComment { line: start.line, column: start.column });
            }
        }
        self.push(TokenKind::Comment, start);
        Ok(())
    }

    fn lex_number(&mut self, start: Mark) {
        let mut float = false;
        let hex = self.rest().starts_with("0x") || self.rest().starts_with("0X");
        let bin = self.rest().starts_with("0b") || self.rest().starts_with("0B");
        if hex || bin {
            self.bump();
            self.bump();
            while matches!(self.peek(), Some(c) if c.is_ascii_hexdigit() || c == '_') {
                self.bump();
            }
        } else {
            self.eat_digits();
            if self.peek() == Some('.') && matches!(self.peek_nth(1), Some(c) if c.is_ascii_digit()) {
                float = true;
                self.bump();
                self.eat_digits();
            }
            if matches!(self.peek(), Some('e' | 'E')) {
                let sign = matches!(self.peek_nth(1), Some('+' | '-'));
                let digit_at = if sign { 2 } else { 1 };
                if matches!(self.peek_nth(digit_at), Some(c) if c.is_ascii_digit()) {
                    float = true;
                    self.bump();
                    if sign {
                        self.bump();
                    }
                    self.eat_digits();
                }
            }
        }
        match self.peek() {
            Some('f' | 'F') if !hex => {
                float = true;
                self.bump();
            }
            Some('u' | 'U') => {
                self.bump();
                if self.peek() == Some('L') {
                    self.bump();
                }
            }
            Some('L') => {
                self.bump();
            }
            _ => {}
        }
        self.push(if float { TokenKind::FloatLiteral } else { TokenKind::IntLiteral }, start);
    }

    fn eat_digits(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_ascii_digit() || c == '_') {
            self.bump();
        }
    }

    fn lex_char(&mut self, start: Mark) -> Result<(), LexError> {
        self.bump();
        loop {
            match self.bump() {
                Some('\\') => {
                    self.bump();
                }
                Some('\'') => break,
                Some('\n') | None => {
                    return Err(LexError::UnterminatedString { line: start.line, column: start.column })
                }
                Some(_) => {}
            }
        }
        self.push(TokenKind::CharLiteral, start);
        Ok(())
    }

    fn lex_string(&mut self, start: Mark) -> Result<(), LexError> {
        let raw = self.rest().starts_with("\"\"\"");
        let quote = if raw { "\"\"\"" } else { "\"" };
        self.bump_str(quote);
        let unterminated = LexError::UnterminatedString { line: start.line, column: start.column };
        let mut fragment = start;
        let mut templated = false;
        loop {
            let rest = self.rest();
            if rest.starts_with(quote) {
                self.bump_str(quote);
                if raw {
                    // Extra quotes before the closing triple belong to the content.
                    while self.peek() == Some('"') {
                        self.bump();
                    }
                }
                let kind = if templated { TokenKind::StringFragment } else { TokenKind::StringLiteral };
                self.push(kind, fragment);
                return Ok(());
            }
            if rest.starts_with("${") {
                self.flush_fragment(fragment);
                templated = true;
                let entry = self.mark();
                self.bump_str("${");
                self.push(TokenKind::TemplateEntry, entry);
                self.lex_code(true)?;
                if self.tokens.last().map(|t| t.kind) != Some(TokenKind::TemplateExit) {
                    return Err(unterminated);
                }
                fragment = self.mark();
                continue;
            }
            if rest.starts_with('$') && matches!(self.peek_nth(1), Some(c) if c == '_' || c.is_alphabetic()) {
                self.flush_fragment(fragment);
                templated = true;
                let entry = self.mark();
                self.bump();
                self.push(TokenKind::TemplateEntry, entry);
                let ident = self.mark();
                while matches!(self.peek(), Some(c) if c == '_' || c.is_alphanumeric()) {
                    self.bump();
                }
                let word = &self.src[ident.offset..self.pos];
                let kind = if KEYWORDS.contains(&word) { TokenKind::Keyword } else { TokenKind::Identifier };
                self.push(kind, ident);
                fragment = self.mark();
                continue;
            }
            match self.peek() {
                None => return Err(unterminated),
                Some('\n') if !raw => return Err(unterminated),
                Some('\\') if !raw => {
                    self.bump();
                    if self.bump().is_none() {
                        return Err(unterminated);
                    }
                }
                Some(_) => {
                    self.bump();
                }
            }
        }
    }

    fn flush_fragment(&mut self, fragment: Mark) {
        if self.pos > fragment.offset {
            self.push(TokenKind::StringFragment, fragment);
        }
    }
}

#[derive(Clone, Copy)]
struct Mark {
    offset: usize,
    line: u32,
    column: u32,
}
