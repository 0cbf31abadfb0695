use super::lexer::{tokenize, Keyword, Token, TokenKind};
use super::{
    Conjunct, ParseError, QueryAst, RingClause, RingMode, ShapeClause, Source, ValuePredicate,
    WindowItem,
};

/// Parses one structural-aggregation query.
pub fn parse(query_text: &str) -> Result<QueryAst, ParseError> {
    let tokens = tokenize(query_text)?;
    let mut parser = Parser { tokens, pos: 0 };
    let ast = parser.query()?;
    parser.expect_eof()?;
    Ok(ast)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn peek_kind(&self) -> &TokenKind {
        &self.peek().kind
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, expected: &str) -> ParseError {
        let tok = self.peek();
        ParseError::syntax(
            tok.offset,
            format!("expected {expected}, found {}", tok.kind),
        )
    }

    fn at_keyword(&self, kw: Keyword) -> bool {
        self.peek_kind() == &TokenKind::Keyword(kw)
    }

    fn eat_keyword(&mut self, kw: Keyword) -> bool {
        if self.at_keyword(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn keyword(&mut self, kw: Keyword) -> Result<(), ParseError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(&format!("\"{}\"", kw.as_str())))
        }
    }

    fn punct(&mut self, kind: TokenKind) -> Result<(), ParseError> {
        if self.peek_kind() == &kind {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&kind.to_string()))
        }
    }

    fn eat(&mut self, kind: TokenKind) -> bool {
        if self.peek_kind() == &kind {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek_kind() {
            TokenKind::Ident(name) => {
                let name = name.clone();
                self.bump();
                Ok(name)
            }
            _ => Err(self.error("identifier")),
        }
    }

    fn at_ident(&self) -> bool {
        matches!(self.peek_kind(), TokenKind::Ident(_))
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        let tok = self.peek().clone();
        match &tok.kind {
            TokenKind::Number {
                text,
                integer: true,
            } => {
                let value = text.parse().map_err(|_| {
                    ParseError::syntax(tok.offset, format!("integer {text} is out of range"))
                })?;
                self.bump();
                Ok(value)
            }
            _ => Err(self.error("integer")),
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        let tok = self.peek().clone();
        match &tok.kind {
            TokenKind::Number { text, .. } => {
                let value: f64 = text
                    .parse()
                    .ok()
                    .filter(|v: &f64| v.is_finite())
                    .ok_or_else(|| {
                        ParseError::syntax(tok.offset, format!("number {text} is not finite"))
                    })?;
                self.bump();
                Ok(value)
            }
            _ => Err(self.error("number")),
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        if self.peek_kind() == &TokenKind::Eof {
            Ok(())
        } else {
            Err(self.error("end of input"))
        }
    }

    fn query(&mut self) -> Result<QueryAst, ParseError> {
        self.keyword(Keyword::Select)?;
        let aggregate = self.ident()?;
        self.punct(TokenKind::LParen)?;
        let argument = self.ident()?;
        self.punct(TokenKind::RParen)?;
        self.keyword(Keyword::From)?;
        let source = self.source()?;
        let predicate = if self.eat_keyword(Keyword::Where) {
            Some(self.predicate()?)
        } else {
            None
        };
        let shape = self.shape()?;
        Ok(QueryAst {
            aggregate,
            argument,
            source,
            predicate,
            shape,
        })
    }

    fn source(&mut self) -> Result<Source, ParseError> {
        if !self.eat_keyword(Keyword::Between) {
            return Ok(Source::Array(self.ident()?));
        }
        self.punct(TokenKind::LParen)?;
        let array = self.ident()?;
        let mut coords = Vec::new();
        let first_coord = self.peek().offset;
        self.punct(TokenKind::Comma)?;
        coords.push(self.int()?);
        while self.eat(TokenKind::Comma) {
            coords.push(self.int()?);
        }
        self.punct(TokenKind::RParen)?;
        if coords.len() % 2 != 0 {
            return Err(ParseError::syntax(
                first_coord,
                format!(
                    "between needs an even number of coordinates (lo... then hi...), got {}",
                    coords.len()
                ),
            ));
        }
        Ok(Source::Between { array, coords })
    }

    fn predicate(&mut self) -> Result<ValuePredicate, ParseError> {
        let mut conjuncts = vec![self.comparison()?];
        while self.eat_keyword(Keyword::And) {
            conjuncts.push(self.comparison()?);
        }
        Ok(ValuePredicate { conjuncts })
    }

    fn comparison(&mut self) -> Result<Conjunct, ParseError> {
        let attribute = self.ident()?;
        let comparator = match self.peek_kind() {
            TokenKind::Op(op) => *op,
            _ => return Err(self.error("comparison operator")),
        };
        self.bump();
        let constant = self.number()?;
        Ok(Conjunct {
            attribute,
            comparator,
            constant,
        })
    }

    fn shape(&mut self) -> Result<ShapeClause, ParseError> {
        match self.peek_kind() {
            TokenKind::Keyword(Keyword::Grid) => {
                self.bump();
                self.grid()
            }
            TokenKind::Keyword(Keyword::Fixed) => {
                self.bump();
                self.keyword(Keyword::Window)?;
                self.window()
            }
            TokenKind::Keyword(Keyword::Hierarchical) => {
                self.bump();
                Ok(ShapeClause::Hierarchical(self.ring()?))
            }
            TokenKind::Keyword(Keyword::Circular) => {
                self.bump();
                Ok(ShapeClause::Circular(self.ring()?))
            }
            _ => Err(self.error(
                "shape clause (\"grid\", \"fixed window\", \"hierarchical\" or \"circular\")",
            )),
        }
    }

    fn partition_by(&mut self) -> Result<(), ParseError> {
        self.keyword(Keyword::As)?;
        self.punct(TokenKind::LParen)?;
        self.keyword(Keyword::Partition)?;
        self.keyword(Keyword::By)
    }

    fn grid(&mut self) -> Result<ShapeClause, ParseError> {
        self.partition_by()?;
        let mut partitions = Vec::new();
        loop {
            let dim = self.ident()?;
            let size = self.int()?;
            partitions.push((dim, size));
            self.eat(TokenKind::Comma);
            if !self.at_ident() {
                break;
            }
        }
        self.punct(TokenKind::RParen)?;
        Ok(ShapeClause::Grid { partitions })
    }

    fn window(&mut self) -> Result<ShapeClause, ParseError> {
        self.partition_by()?;
        let mut windows = Vec::new();
        loop {
            let dim = self.ident()?;
            let preceding = self.int()?;
            self.keyword(Keyword::Preceding)?;
            self.keyword(Keyword::And)?;
            let following = self.int()?;
            self.keyword(Keyword::Following)?;
            windows.push(WindowItem {
                dim,
                preceding,
                following,
            });
            self.eat(TokenKind::Comma);
            if !self.at_ident() {
                break;
            }
        }
        let stride = if self.eat_keyword(Keyword::Stride) {
            Some(self.int()?)
        } else {
            None
        };
        self.punct(TokenKind::RParen)?;
        Ok(ShapeClause::Window { windows, stride })
    }

    fn ring(&mut self) -> Result<RingClause, ParseError> {
        self.keyword(Keyword::As)?;
        self.punct(TokenKind::LParen)?;
        self.keyword(Keyword::Radius)?;
        let radius = self.int()?;
        self.keyword(Keyword::Step)?;
        let step = self.int()?;
        let mode = if self.eat_keyword(Keyword::Mode) {
            if self.eat_keyword(Keyword::Nested) {
                Some(RingMode::Nested)
            } else if self.eat_keyword(Keyword::Disjoint) {
                Some(RingMode::Disjoint)
            } else {
                return Err(self.error("\"nested\" or \"disjoint\""));
            }
        } else {
            None
        };
        self.punct(TokenKind::RParen)?;
        Ok(RingClause { radius, step, mode })
    }
}
