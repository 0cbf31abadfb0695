//! AQL frontend: tokenizer, recursive-descent parser, and semantic analysis.
//!
//! Grammar (keywords case-insensitive, identifiers case-sensitive):
//!
//! ```text
//! query  := "select" ident "(" ident ")" "from" source [where] shape
//! source := ident | "between" "(" ident ("," int)+ ")"
//! where  := "where" cmp ("and" cmp)*
//! cmp    := ident op number          op := < | <= | > | >= | = | <>
//! shape  := grid | window | hier | circ
//! grid   := "grid" "as" "(" "partition" "by" (ident int [","])+ ")"
//! window := "fixed" "window" "as" "(" "partition" "by"
//!           (ident int "preceding" "and" int "following" [","])+ ["stride" int] ")"
//! hier   := "hierarchical" "as" "(" "radius" int "step" int ["mode" ("nested"|"disjoint")] ")"
//! circ   := "circular" "as" "(" "radius" int "step" int ["mode" ("nested"|"disjoint")] ")"
//! ```

mod analyze;
mod ast;
mod lexer;
mod parser;

use std::fmt;

use thiserror::Error;

pub use analyze::{
    analyze, explain, AggregationKind, GeometryParams, QueryObject, SemanticError, Window,
};
pub use ast::{
    Comparator, Conjunct, QueryAst, RingClause, RingMode, ShapeClause, Source, ValuePredicate,
    WindowItem,
};
pub use lexer::{tokenize, Keyword, Token, TokenKind};
pub use parser::parse;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Lexical,
    Syntax,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Byte offset into the query text.
    pub offset: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn lexical(offset: usize, message: String) -> Self {
        Self {
            kind: ParseErrorKind::Lexical,
            offset,
            message,
        }
    }

    pub(crate) fn syntax(offset: usize, message: String) -> Self {
        Self {
            kind: ParseErrorKind::Syntax,
            offset,
            message,
        }
    }

    /// Two-line caret diagram pointing at the error inside `query_text`.
    pub fn render(&self, query_text: &str) -> String {
        let prefix = query_text.get(..self.offset).unwrap_or(query_text);
        let line_start = prefix.rfind('\n').map_or(0, |i| i + 1);
        let line_end = query_text[line_start..]
            .find('\n')
            .map_or(query_text.len(), |i| line_start + i);
        let column = prefix[line_start..].chars().count();
        format!(
            "{self}\n  {}\n  {}^",
            &query_text[line_start..line_end],
            " ".repeat(column)
        )
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ParseErrorKind::Lexical => "lexical error",
            ParseErrorKind::Syntax => "syntax error",
        };
        write!(f, "{kind} at column {}: {}", self.offset + 1, self.message)
    }
}
