use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use super::samples::PosteriorSamples;
use crate::distributions::{Builtin, EvalError};
use crate::dsl::{parse_expression, Expression, SyntaxError};
use crate::graph::CompiledExpr;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryError {
    #[error("unknown parameter {0}")]
    UnknownParameter(String),
    #[error("unknown function {0}")]
    UnknownFunction(String),
    #[error("cannot parse query {text:?}: {message}")]
    Syntax { text: String, message: String },
    #[error("no posterior draws")]
    NoDraws,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    Gt,
    Lt,
}

impl Comparator {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::Gt => value > threshold,
            Comparator::Lt => value < threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Gt => ">",
            Comparator::Lt => "<",
        }
    }
}

fn compile_target(samples: &PosteriorSamples, e: &Expression) -> Result<CompiledExpr, QueryError> {
    Ok(match e {
        Expression::Number(v) => CompiledExpr::Const(*v),
        Expression::Var(v) => {
            let name = match v.index.as_deref() {
                None => v.name.clone(),
                Some(Expression::Number(k)) if k.fract() == 0.0 => {
                    format!("{}[{}]", v.name, *k as i64)
                }
                Some(_) => return Err(QueryError::UnknownParameter(v.name.clone())),
            };
            CompiledExpr::Node(
                samples
                    .index_of(&name)
                    .ok_or(QueryError::UnknownParameter(name))?,
            )
        }
        Expression::Binary { op, left, right } => CompiledExpr::Binary(
            *op,
            Box::new(compile_target(samples, left)?),
            Box::new(compile_target(samples, right)?),
        ),
        Expression::Call { name, args, .. } => {
            let f = Builtin::from_name(name)
                .ok_or_else(|| QueryError::UnknownFunction(name.clone()))?;
            if f.arity() != args.len() {
                return Err(QueryError::Syntax {
                    text: name.clone(),
                    message: format!(
                        "{name} expects {} argument(s), got {}",
                        f.arity(),
                        args.len()
                    ),
                });
            }
            CompiledExpr::Call(
                f,
                args.iter()
                    .map(|a| compile_target(samples, a))
                    .collect::<Result<_, _>>()?,
            )
        }
    })
}

/// Fraction of pooled draws where `target` compares strictly against
/// `threshold`. `target` is a monitored name (`beta1`, `mu[3]`) or an
/// arithmetic expression over monitored names (`beta1 - beta0`).
pub fn posterior_probability(
    samples: &PosteriorSamples,
    target: &str,
    comparator: Comparator,
    threshold: f64,
) -> Result<f64, QueryError> {
    let expr = parse_expression(target).map_err(|e: SyntaxError| QueryError::Syntax {
        text: target.to_string(),
        message: e.to_string(),
    })?;
    let compiled = compile_target(samples, &expr)?;
    let total = samples.n_pooled();
    if total == 0 {
        return Err(QueryError::NoDraws);
    }
    let mut hits = 0usize;
    for row in samples.draws.iter().flatten() {
        if comparator.holds(compiled.eval(row)?, threshold) {
            hits += 1;
        }
    }
    Ok(hits as f64 / total as f64)
}

/// Command-line query such as `beta1>5` or `beta1 < 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbQuery {
    pub target: String,
    pub comparator: Comparator,
    pub threshold: f64,
}

impl ProbQuery {
    pub fn evaluate(&self, samples: &PosteriorSamples) -> Result<f64, QueryError> {
        posterior_probability(samples, &self.target, self.comparator, self.threshold)
    }
}

impl FromStr for ProbQuery {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let syntax = |message: &str| QueryError::Syntax {
            text: s.to_string(),
            message: message.to_string(),
        };
        let pos = s
            .find(['>', '<'])
            .ok_or_else(|| syntax("expected `>` or `<`"))?;
        let comparator = if s[pos..].starts_with('>') {
            Comparator::Gt
        } else {
            Comparator::Lt
        };
        let target = s[..pos].trim();
        if target.is_empty() {
            return Err(syntax("missing parameter before the comparison"));
        }
        let rest = s[pos + 1..].trim();
        let threshold: f64 = rest
            .parse()
            .map_err(|_| syntax("threshold is not a number"))?;
        if threshold.is_nan() {
            return Err(syntax("threshold is not a number"));
        }
        parse_expression(target).map_err(|e| syntax(&e.to_string()))?;
        Ok(ProbQuery {
            target: target.to_string(),
            comparator,
            threshold,
        })
    }
}

impl fmt::Display for ProbQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "P({} {} {})",
            self.target,
            self.comparator.symbol(),
            self.threshold
        )
    }
}
