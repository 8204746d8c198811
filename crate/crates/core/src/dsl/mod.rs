//! The JAGS-subset model language: lexer, parser, pretty-printer and static
//! checks.

mod ast;
mod format;
mod lexer;
mod parser;
mod semantics;
mod token;

pub use ast::{
    BinaryOperator, DistCall, Expression, ForLoop, ModelAst, Relation, Statement, VarRef,
};
pub use format::{format_expression, format_model};
pub use lexer::{tokenize, LexError};
pub use parser::{
    parse_expression, parse_model, parse_model_with, ParseError, ParseOptions, SyntaxError,
};
pub use semantics::{check_semantics, free_variables, has_errors, Diagnostic, Severity};
pub use token::{SourceSpan, Token, TokenKind};
