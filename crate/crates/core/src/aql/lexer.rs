use std::fmt;

use super::{Comparator, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Keyword {
    Select,
    From,
    Between,
    Where,
    And,
    Grid,
    As,
    Partition,
    By,
    Fixed,
    Window,
    Preceding,
    Following,
    Stride,
    Hierarchical,
    Circular,
    Radius,
    Step,
    Mode,
    Nested,
    Disjoint,
}

impl Keyword {
    const ALL: [Keyword; 21] = [
        Keyword::Select,
        Keyword::From,
        Keyword::Between,
        Keyword::Where,
        Keyword::And,
        Keyword::Grid,
        Keyword::As,
        Keyword::Partition,
        Keyword::By,
        Keyword::Fixed,
        Keyword::Window,
        Keyword::Preceding,
        Keyword::Following,
        Keyword::Stride,
        Keyword::Hierarchical,
        Keyword::Circular,
        Keyword::Radius,
        Keyword::Step,
        Keyword::Mode,
        Keyword::Nested,
        Keyword::Disjoint,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Keyword::Select => "select",
            Keyword::From => "from",
            Keyword::Between => "between",
            Keyword::Where => "where",
            Keyword::And => "and",
            Keyword::Grid => "grid",
            Keyword::As => "as",
            Keyword::Partition => "partition",
            Keyword::By => "by",
            Keyword::Fixed => "fixed",
            Keyword::Window => "window",
            Keyword::Preceding => "preceding",
            Keyword::Following => "following",
            Keyword::Stride => "stride",
            Keyword::Hierarchical => "hierarchical",
            Keyword::Circular => "circular",
            Keyword::Radius => "radius",
            Keyword::Step => "step",
            Keyword::Mode => "mode",
            Keyword::Nested => "nested",
            Keyword::Disjoint => "disjoint",
        }
    }

    fn lookup(word: &str) -> Option<Keyword> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(word))
    }

    pub fn is_reserved(word: &str) -> bool {
        Self::lookup(word).is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Keyword(Keyword),
    Ident(String),
    /// Numeric literal; `integer` is false when it has a fraction or exponent.
    Number {
        text: String,
        integer: bool,
    },
    LParen,
    RParen,
    Comma,
    Op(Comparator),
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Keyword(k) => write!(f, "keyword \"{}\"", k.as_str()),
            TokenKind::Ident(s) => write!(f, "identifier \"{s}\""),
            TokenKind::Number { text, .. } => write!(f, "number {text}"),
            TokenKind::LParen => f.write_str("\"(\""),
            TokenKind::RParen => f.write_str("\")\""),
            TokenKind::Comma => f.write_str("\",\""),
            TokenKind::Op(op) => write!(f, "\"{}\"", op.as_str()),
            TokenKind::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the token's first character.
    pub offset: usize,
}

pub fn tokenize(input: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = input.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        let kind = match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'(' => {
                i += 1;
                TokenKind::LParen
            }
            b')' => {
                i += 1;
                TokenKind::RParen
            }
            b',' => {
                i += 1;
                TokenKind::Comma
            }
            b'=' => {
                i += 1;
                TokenKind::Op(Comparator::Eq)
            }
            b'<' => match bytes.get(i + 1) {
                Some(b'=') => {
                    i += 2;
                    TokenKind::Op(Comparator::Le)
                }
                Some(b'>') => {
                    i += 2;
                    TokenKind::Op(Comparator::Ne)
                }
                _ => {
                    i += 1;
                    TokenKind::Op(Comparator::Lt)
                }
            },
            b'>' => {
                if bytes.get(i + 1) == Some(&b'=') {
                    i += 2;
                    TokenKind::Op(Comparator::Ge)
                } else {
                    i += 1;
                    TokenKind::Op(Comparator::Gt)
                }
            }
            b'0'..=b'9' | b'-' => {
                let (end, integer) = scan_number(bytes, i)
                    .ok_or_else(|| ParseError::lexical(start, "malformed number".to_string()))?;
                i = end;
                TokenKind::Number {
                    text: input[start..end].to_string(),
                    integer,
                }
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &input[start..i];
                match Keyword::lookup(word) {
                    Some(k) => TokenKind::Keyword(k),
                    None => TokenKind::Ident(word.to_string()),
                }
            }
            _ => {
                let ch = input[start..].chars().next().unwrap_or('?');
                return Err(ParseError::lexical(
                    start,
                    format!("unexpected character {ch:?}"),
                ));
            }
        };
        tokens.push(Token {
            kind,
            offset: start,
        });
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        offset: input.len(),
    });
    Ok(tokens)
}

/// `-?digits(.digits)?([eE][+-]?digits)?`; returns the end offset and whether it is an integer.
fn scan_number(bytes: &[u8], mut i: usize) -> Option<(usize, bool)> {
    let digits = |i: &mut usize| {
        let start = *i;
        while *i < bytes.len() && bytes[*i].is_ascii_digit() {
            *i += 1;
        }
        *i > start
    };
    if bytes[i] == b'-' {
        i += 1;
    }
    if !digits(&mut i) {
        return None;
    }
    let mut integer = true;
    if bytes.get(i) == Some(&b'.') {
        i += 1;
        integer = false;
        if !digits(&mut i) {
            return None;
        }
    }
    if matches!(bytes.get(i), Some(b'e' | b'E')) {
        i += 1;
        integer = false;
        if matches!(bytes.get(i), Some(b'+' | b'-')) {
            i += 1;
        }
        if !digits(&mut i) {
            return None;
        }
    }
    if bytes
        .get(i)
        .is_some_and(|b| b.is_ascii_alphabetic() || *b == b'_')
    {
        return None;
    }
    Some((i, integer))
}
