use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::Serialize;

use super::ast::{Expression, ModelAst, Relation, Statement};
use super::token::SourceSpan;
use crate::distributions::{Builtin, DistKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: SourceSpan,
    pub message: String,
}

impl Diagnostic {
    fn error(span: SourceSpan, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            span,
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}: {sev}: {}", self.span, self.message)
    }
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(|d| d.severity == Severity::Error)
}

struct Checker<'a> {
    defined: HashSet<&'a str>,
    data: &'a HashSet<String>,
    scope: Vec<&'a str>,
    out: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn expr(&mut self, e: &'a Expression) {
        e.for_each_var(&mut |v| {
            let name = v.name.as_str();
            if !(self.defined.contains(name)
                || self.data.contains(name)
                || self.scope.contains(&name))
            {
                self.out.push(Diagnostic::error(
                    v.span,
                    format!("undefined variable {name}"),
                ));
            }
        });
        e.for_each_call(&mut |name, argc, span| match Builtin::from_name(name) {
            None => self
                .out
                .push(Diagnostic::error(span, format!("unknown function {name}"))),
            Some(b) if b.arity() != argc => self.out.push(Diagnostic::error(
                span,
                format!("{name} expects {} argument(s), got {argc}", b.arity()),
            )),
            Some(_) => {}
        });
    }

    fn statements(&mut self, items: &'a [Statement]) {
        for item in items {
            match item {
                Statement::Relation(rel) => self.relation(rel),
                Statement::Loop(l) => {
                    self.expr(&l.lower);
                    self.expr(&l.upper);
                    if self.scope.contains(&l.index_var.as_str()) {
                        self.out.push(Diagnostic::error(
                            l.span,
                            format!("loop index {} shadows an enclosing loop index", l.index_var),
                        ));
                    }
                    self.scope.push(&l.index_var);
                    self.statements(&l.body);
                    self.scope.pop();
                }
            }
        }
    }

    fn relation(&mut self, rel: &'a Relation) {
        let target = rel.target();
        if self.scope.contains(&target.name.as_str()) {
            self.out.push(Diagnostic::error(
                target.span,
                format!("loop index {} cannot be assigned", target.name),
            ));
        }
        if let Some(idx) = &target.index {
            self.expr(idx);
        }
        match rel {
            Relation::Stochastic { dist, .. } => {
                match DistKind::from_name(&dist.name) {
                    None => self.out.push(Diagnostic::error(
                        dist.span,
                        format!("unknown distribution {}", dist.name),
                    )),
                    Some(k) if k.arity() != dist.args.len() => self.out.push(Diagnostic::error(
                        dist.span,
                        format!(
                            "{} requires {} argument(s), got {}",
                            dist.name,
                            k.arity(),
                            dist.args.len()
                        ),
                    )),
                    Some(_) => {}
                }
                for a in &dist.args {
                    self.expr(a);
                }
            }
            Relation::Deterministic { expr, .. } => self.expr(expr),
        }
    }
}

/// Static checks that need only the AST and the names supplied as data:
/// undefined variables, unknown distributions/functions, arity, loop-index
/// misuse. An empty result means the model is clean.
pub fn check_semantics(ast: &ModelAst, known_data_names: &HashSet<String>) -> Vec<Diagnostic> {
    let mut defined = HashSet::new();
    ast.walk_relations(&mut |rel, _| {
        defined.insert(rel.target().name.as_str());
    });
    let mut checker = Checker {
        defined,
        data: known_data_names,
        scope: Vec::new(),
        out: Vec::new(),
    };
    checker.statements(&ast.items);
    checker.out
}

/// Names the model reads but never defines: what a dataset has to supply.
/// Loop indices are excluded wherever they appear.
pub fn free_variables(ast: &ModelAst) -> BTreeSet<String> {
    fn visit<'a>(
        items: &'a [Statement],
        used: &mut Vec<&'a Expression>,
        loops: &mut HashSet<&'a str>,
    ) {
        for item in items {
            match item {
                Statement::Relation(rel) => {
                    if let Some(idx) = &rel.target().index {
                        used.push(idx);
                    }
                    match rel {
                        Relation::Stochastic { dist, .. } => used.extend(&dist.args),
                        Relation::Deterministic { expr, .. } => used.push(expr),
                    }
                }
                Statement::Loop(l) => {
                    used.push(&l.lower);
                    used.push(&l.upper);
                    loops.insert(&l.index_var);
                    visit(&l.body, used, loops);
                }
            }
        }
    }
    let mut used = Vec::new();
    let mut loops = HashSet::new();
    visit(&ast.items, &mut used, &mut loops);
    let mut defined = HashSet::new();
    ast.walk_relations(&mut |rel, _| {
        defined.insert(rel.target().name.as_str());
    });
    let mut free = BTreeSet::new();
    for e in used {
        e.for_each_var(&mut |v| {
            let name = v.name.as_str();
            if !defined.contains(name) && !loops.contains(name) {
                free.insert(name.to_string());
            }
        });
    }
    free
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;

    fn names(list: &[&str]) -> HashSet<String> {
        list.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn undefined_data_column() {
        let ast = parse_model("model { for (i in 1:n) { y[i] ~ dnorm(Z[i], 1) } }").unwrap();
        let d = check_semantics(&ast, &names(&["y", "n"]));
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].message, "undefined variable Z");
        assert_eq!(d[0].severity, Severity::Error);
        assert_eq!((d[0].span.line, d[0].span.column), (1, 39));
    }

    #[test]
    fn arity_error() {
        let ast = parse_model("model { x ~ dnorm(0) }").unwrap();
        let d = check_semantics(&ast, &HashSet::new());
        assert_eq!(d.len(), 1);
        assert!(
            d[0].message.contains("dnorm requires 2"),
            "{}",
            d[0].message
        );
    }

    #[test]
    fn unknown_names() {
        let ast = parse_model("model { x ~ dweird(0, 1)\n y <- foo(x) }").unwrap();
        let d = check_semantics(&ast, &HashSet::new());
        let msgs: Vec<&str> = d.iter().map(|d| d.message.as_str()).collect();
        assert_eq!(
            msgs,
            vec!["unknown distribution dweird", "unknown function foo"]
        );
    }

    #[test]
    fn shadowed_index() {
        let ast = parse_model("model { for (i in 1:2) { for (i in 1:2) { x[i] ~ dnorm(0, 1) } } }")
            .unwrap();
        let d = check_semantics(&ast, &HashSet::new());
        assert_eq!(d.len(), 1);
        assert!(d[0].message.contains("shadows"));
    }

    #[test]
    fn loop_index_out_of_scope() {
        let ast = parse_model("model { for (i in 1:2) { x[i] ~ dnorm(0, 1) }\n y <- i }").unwrap();
        let d = check_semantics(&ast, &HashSet::new());
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].message, "undefined variable i");
    }

    #[test]
    fn free_names() {
        let ast =
            parse_model("model { for (i in 1:n) { Y[i] ~ dnorm(b * X[i], 1) }\n b ~ dnorm(0, 1) }")
                .unwrap();
        let free: Vec<String> = free_variables(&ast).into_iter().collect();
        assert_eq!(free, ["X", "n"]);
    }

    #[test]
    fn forward_references_are_fine() {
        let ast = parse_model("model { y <- x * 2\n x ~ dnorm(0, 1) }").unwrap();
        assert!(check_semantics(&ast, &HashSet::new()).is_empty());
    }
}
