//! Lexer, parser and printer for a Kotlin-like language subset.

mod grammar;
mod lexer;
mod printer;
mod subset;
mod syntax;

use thiserror::Error;

pub use grammar::{parse, SyntaxError, MODIFIERS};
pub use lexer::{tokenize, LexError, Token, TokenKind, KEYWORDS};
pub use printer::print_tree;
pub use subset::{supported_subset, Grammar, Rule};
pub use syntax::{NodeKind, Span, SyntaxNode, UnknownNodeKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

/// Tokenizes and parses `source` into a FILE-rooted tree.
pub fn parse_source(source: &str) -> Result<SyntaxNode, ParseError> {
    let tokens = tokenize(source)?;
    Ok(parse(&tokens)?)
}
