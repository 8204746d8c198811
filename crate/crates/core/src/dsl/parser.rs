//! Recursive descent parser for the model language.
//!
//! Precedence, loosest to tightest: `+ -`, `* /`, unary minus, `^`
//! (right-associative). `pow(a, b)` is normalized to `a ^ b`.

use std::fmt;

use thiserror::Error;

use super::ast::{
    BinaryOperator, DistCall, Expression, ForLoop, ModelAst, Relation, Statement, VarRef,
};
use super::lexer::{tokenize, LexError};
use super::token::{SourceSpan, Token, TokenKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    pub span: SourceSpan,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: expected ", self.span)?;
        match self.expected.as_slice() {
            [one] => write!(f, "{one}")?,
            many => write!(f, "one of {}", many.join(", "))?,
        }
        write!(f, ", found {}", self.found)
    }
}

/// Any failure turning source text into an AST.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SyntaxError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

impl SyntaxError {
    pub fn span(&self) -> SourceSpan {
        match self {
            SyntaxError::Lex(e) => e.span,
            SyntaxError::Parse(e) => e.span,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Reject `=` as an assignment operator, as JAGS itself does.
    pub strict_jags: bool,
}

pub fn parse_model(source: &str) -> Result<ModelAst, SyntaxError> {
    parse_model_with(source, "<input>", ParseOptions::default())
}

pub fn parse_model_with(
    source: &str,
    source_name: &str,
    options: ParseOptions,
) -> Result<ModelAst, SyntaxError> {
    let mut p = Parser::new(source, options)?;
    let items = p.model()?;
    Ok(ModelAst {
        items,
        source_name: source_name.to_string(),
    })
}

/// Parse a standalone expression such as `10 + effect * X`.
pub fn parse_expression(source: &str) -> Result<Expression, SyntaxError> {
    let mut p = Parser::new(source, ParseOptions::default())?;
    let e = p.expression()?;
    p.expect_eof()?;
    Ok(e)
}

struct Parser<'s> {
    source: &'s str,
    tokens: Vec<Token>,
    pos: usize,
    options: ParseOptions,
}

type PResult<T> = Result<T, ParseError>;

impl<'s> Parser<'s> {
    fn new(source: &'s str, options: ParseOptions) -> Result<Self, LexError> {
        let tokens = tokenize(source)?
            .into_iter()
            .filter(|t| !t.is_trivia())
            .collect();
        Ok(Self {
            source,
            tokens,
            pos: 0,
            options,
        })
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<TokenKind> {
        self.peek().map(|t| t.kind)
    }

    fn advance(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eof_span(&self) -> SourceSpan {
        // Point at the last character so the span stays inside the source.
        let Some((offset, ch)) = self.source.char_indices().last() else {
            return SourceSpan::default();
        };
        let before = &self.source[..offset];
        let line = before.matches('\n').count() as u32 + 1;
        let line_start = before.rfind('\n').map_or(0, |i| i + 1);
        let column = self.source[line_start..offset].chars().count() as u32 + 1;
        SourceSpan::new(line, column, offset, ch.len_utf8())
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let (span, found) = match self.peek() {
            Some(t) => (t.span, format!("`{}`", t.text)),
            None => (self.eof_span(), "end of input".to_string()),
        };
        ParseError {
            span,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found,
        }
    }

    fn expect(&mut self, kind: TokenKind) -> PResult<Token> {
        if self.peek_kind() == Some(kind) {
            Ok(self.advance().expect("peeked"))
        } else {
            Err(self.error(&[kind.describe()]))
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        match self.peek() {
            None => Ok(()),
            Some(_) => Err(self.error(&["end of input"])),
        }
    }

    fn model(&mut self) -> PResult<Vec<Statement>> {
        self.expect(TokenKind::KeywordModel)?;
        self.expect(TokenKind::LBrace)?;
        let items = self.block_body()?;
        self.expect(TokenKind::RBrace)?;
        self.expect_eof()?;
        Ok(items)
    }

    fn block_body(&mut self) -> PResult<Vec<Statement>> {
        let mut items = Vec::new();
        loop {
            match self.peek_kind() {
                Some(TokenKind::RBrace) => return Ok(items),
                Some(TokenKind::KeywordFor) => items.push(Statement::Loop(self.for_loop()?)),
                Some(TokenKind::Identifier) => items.push(Statement::Relation(self.relation()?)),
                _ => return Err(self.error(&["identifier", "`for`", "`}`"])),
            }
        }
    }

    fn for_loop(&mut self) -> PResult<ForLoop> {
        let start = self.expect(TokenKind::KeywordFor)?.span;
        self.expect(TokenKind::LParen)?;
        let index_var = self.expect(TokenKind::Identifier)?.text;
        self.expect(TokenKind::KeywordIn)?;
        let lower = self.expression()?;
        self.expect(TokenKind::Colon)?;
        let upper = self.expression()?;
        self.expect(TokenKind::RParen)?;
        self.expect(TokenKind::LBrace)?;
        let body = self.block_body()?;
        let end = self.expect(TokenKind::RBrace)?.span;
        Ok(ForLoop {
            index_var,
            lower,
            upper,
            body,
            span: start.to(end),
        })
    }

    fn relation(&mut self) -> PResult<Relation> {
        let target = self.var_ref()?;
        match self.peek_kind() {
            Some(TokenKind::Tilde) => {
                self.advance();
                let name_tok = self.expect(TokenKind::Identifier)?;
                self.expect(TokenKind::LParen)?;
                let args = self.arguments()?;
                let end = self.expect(TokenKind::RParen)?.span;
                Ok(Relation::Stochastic {
                    target,
                    dist: DistCall {
                        name: name_tok.text,
                        args,
                        span: name_tok.span.to(end),
                    },
                })
            }
            Some(TokenKind::AssignArrow) => {
                self.advance();
                let expr = self.expression()?;
                Ok(Relation::Deterministic { target, expr })
            }
            Some(TokenKind::Equals) if !self.options.strict_jags => {
                self.advance();
                let expr = self.expression()?;
                Ok(Relation::Deterministic { target, expr })
            }
            _ if self.options.strict_jags => Err(self.error(&["`~`", "`<-`"])),
            _ => Err(self.error(&["`~`", "`<-`", "`=`"])),
        }
    }

    fn var_ref(&mut self) -> PResult<VarRef> {
        let tok = self.expect(TokenKind::Identifier)?;
        self.var_ref_after(tok)
    }

    fn var_ref_after(&mut self, tok: Token) -> PResult<VarRef> {
        let mut span = tok.span;
        let index = if self.peek_kind() == Some(TokenKind::LBracket) {
            self.advance();
            let idx = self.expression()?;
            span = span.to(self.expect(TokenKind::RBracket)?.span);
            Some(Box::new(idx))
        } else {
            None
        };
        Ok(VarRef {
            name: tok.text,
            index,
            span,
        })
    }

    fn arguments(&mut self) -> PResult<Vec<Expression>> {
        let mut args = Vec::new();
        if self.peek_kind() == Some(TokenKind::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.expression()?);
            if self.peek_kind() == Some(TokenKind::Comma) {
                self.advance();
            } else {
                return Ok(args);
            }
        }
    }

    fn expression(&mut self) -> PResult<Expression> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Plus) => BinaryOperator::Add,
                Some(TokenKind::Minus) => BinaryOperator::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expression::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> PResult<Expression> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Star) => BinaryOperator::Mul,
                Some(TokenKind::Slash) => BinaryOperator::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expression::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> PResult<Expression> {
        if self.peek_kind() == Some(TokenKind::Minus) {
            self.advance();
            let operand = self.unary()?;
            return Ok(match operand {
                Expression::Number(v) => Expression::Number(-v),
                other => Expression::binary(BinaryOperator::Sub, Expression::Number(0.0), other),
            });
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expression> {
        let base = self.primary()?;
        if self.peek_kind() == Some(TokenKind::Caret) {
            self.advance();
            let exponent = self.unary()?;
            return Ok(Expression::binary(BinaryOperator::Pow, base, exponent));
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<Expression> {
        match self.peek_kind() {
            Some(TokenKind::Number) => {
                let tok = self.advance().expect("peeked");
                let value: f64 = tok.text.parse().map_err(|_| ParseError {
                    span: tok.span,
                    expected: vec!["finite number".into()],
                    found: format!("`{}`", tok.text),
                })?;
                if !value.is_finite() {
                    return Err(ParseError {
                        span: tok.span,
                        expected: vec!["finite number".into()],
                        found: format!("`{}`", tok.text),
                    });
                }
                Ok(Expression::Number(value))
            }
            Some(TokenKind::Identifier) => {
                let tok = self.advance().expect("peeked");
                if self.peek_kind() == Some(TokenKind::LParen) {
                    self.advance();
                    let mut args = self.arguments()?;
                    let end = self.expect(TokenKind::RParen)?.span;
                    if tok.text == "pow" && args.len() == 2 {
                        let exponent = args.pop().expect("two args");
                        let base = args.pop().expect("two args");
                        return Ok(Expression::binary(BinaryOperator::Pow, base, exponent));
                    }
                    return Ok(Expression::Call {
                        name: tok.text,
                        args,
                        span: tok.span.to(end),
                    });
                }
                Ok(Expression::Var(self.var_ref_after(tok)?))
            }
            Some(TokenKind::LParen) => {
                self.advance();
                let e = self.expression()?;
                self.expect(TokenKind::RParen)?;
                Ok(e)
            }
            _ => Err(self.error(&["number", "identifier", "`(`", "`-`"])),
        }
    }
}
