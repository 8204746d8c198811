use super::token::SourceSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOperator {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOperator {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOperator::Add => "+",
            BinaryOperator::Sub => "-",
            BinaryOperator::Mul => "*",
            BinaryOperator::Div => "/",
            BinaryOperator::Pow => "^",
        }
    }

    pub fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOperator::Add => a + b,
            BinaryOperator::Sub => a - b,
            BinaryOperator::Mul => a * b,
            BinaryOperator::Div => a / b,
            BinaryOperator::Pow => a.powf(b),
        }
    }
}

/// A variable reference such as `beta0` or `mu[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarRef {
    pub name: String,
    pub index: Option<Box<Expression>>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expression {
    Number(f64),
    Var(VarRef),
    Binary {
        op: BinaryOperator,
        left: Box<Expression>,
        right: Box<Expression>,
    },
    Call {
        name: String,
        args: Vec<Expression>,
        span: SourceSpan,
    },
}

impl Expression {
    pub fn binary(op: BinaryOperator, left: Expression, right: Expression) -> Self {
        Expression::Binary {
            op,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn var(name: impl Into<String>) -> Self {
        Expression::Var(VarRef {
            name: name.into(),
            index: None,
            span: SourceSpan::default(),
        })
    }

    pub fn indexed(name: impl Into<String>, index: Expression) -> Self {
        Expression::Var(VarRef {
            name: name.into(),
            index: Some(Box::new(index)),
            span: SourceSpan::default(),
        })
    }

    /// Visit every variable reference, including those inside index brackets.
    pub fn for_each_var<'a>(&'a self, f: &mut impl FnMut(&'a VarRef)) {
        match self {
            Expression::Number(_) => {}
            Expression::Var(v) => {
                f(v);
                if let Some(idx) = &v.index {
                    idx.for_each_var(f);
                }
            }
            Expression::Binary { left, right, .. } => {
                left.for_each_var(f);
                right.for_each_var(f);
            }
            Expression::Call { args, .. } => args.iter().for_each(|a| a.for_each_var(f)),
        }
    }

    pub fn for_each_call<'a>(&'a self, f: &mut impl FnMut(&'a str, usize, SourceSpan)) {
        match self {
            Expression::Number(_) => {}
            Expression::Var(v) => {
                if let Some(idx) = &v.index {
                    idx.for_each_call(f);
                }
            }
            Expression::Binary { left, right, .. } => {
                left.for_each_call(f);
                right.for_each_call(f);
            }
            Expression::Call { name, args, span } => {
                f(name, args.len(), *span);
                args.iter().for_each(|a| a.for_each_call(f));
            }
        }
    }

    /// Copy with every span reset, for structural comparison.
    pub fn without_spans(&self) -> Expression {
        let mut out = self.clone();
        out.clear_spans();
        out
    }

    fn clear_spans(&mut self) {
        match self {
            Expression::Number(_) => {}
            Expression::Var(v) => v.clear_spans(),
            Expression::Binary { left, right, .. } => {
                left.clear_spans();
                right.clear_spans();
            }
            Expression::Call { args, span, .. } => {
                *span = SourceSpan::default();
                args.iter_mut().for_each(Expression::clear_spans);
            }
        }
    }
}

impl VarRef {
    fn clear_spans(&mut self) {
        self.span = SourceSpan::default();
        if let Some(idx) = &mut self.index {
            idx.clear_spans();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistCall {
    pub name: String,
    pub args: Vec<Expression>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Relation {
    Stochastic { target: VarRef, dist: DistCall },
    Deterministic { target: VarRef, expr: Expression },
}

impl Relation {
    pub fn target(&self) -> &VarRef {
        match self {
            Relation::Stochastic { target, .. } | Relation::Deterministic { target, .. } => target,
        }
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self, Relation::Stochastic { .. })
    }

    /// Right-hand side expressions (distribution arguments or the defining
    /// expression).
    pub fn rhs(&self) -> Vec<&Expression> {
        match self {
            Relation::Stochastic { dist, .. } => dist.args.iter().collect(),
            Relation::Deterministic { expr, .. } => vec![expr],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForLoop {
    pub index_var: String,
    pub lower: Expression,
    pub upper: Expression,
    pub body: Vec<Statement>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    Relation(Relation),
    Loop(ForLoop),
}

impl Statement {
    fn clear_spans(&mut self) {
        match self {
            Statement::Relation(Relation::Stochastic { target, dist }) => {
                target.clear_spans();
                dist.span = SourceSpan::default();
                dist.args.iter_mut().for_each(Expression::clear_spans);
            }
            Statement::Relation(Relation::Deterministic { target, expr }) => {
                target.clear_spans();
                expr.clear_spans();
            }
            Statement::Loop(l) => {
                l.span = SourceSpan::default();
                l.lower.clear_spans();
                l.upper.clear_spans();
                l.body.iter_mut().for_each(Statement::clear_spans);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelAst {
    pub items: Vec<Statement>,
    pub source_name: String,
}

impl ModelAst {
    /// Copy with every span reset, for structural comparison.
    pub fn without_spans(&self) -> ModelAst {
        let mut out = self.clone();
        out.items.iter_mut().for_each(Statement::clear_spans);
        out
    }

    /// Depth-first walk over relations; `loops` holds the enclosing loops,
    /// outermost first.
    pub fn walk_relations<'a>(&'a self, f: &mut impl FnMut(&'a Relation, &[&'a ForLoop])) {
        fn go<'a>(
            items: &'a [Statement],
            stack: &mut Vec<&'a ForLoop>,
            f: &mut impl FnMut(&'a Relation, &[&'a ForLoop]),
        ) {
            for item in items {
                match item {
                    Statement::Relation(r) => f(r, stack),
                    Statement::Loop(l) => {
                        stack.push(l);
                        go(&l.body, stack, f);
                        stack.pop();
                    }
                }
            }
        }
        go(&self.items, &mut Vec::new(), f);
    }

    pub fn relation_count(&self) -> usize {
        let mut n = 0;
        self.walk_relations(&mut |_, _| n += 1);
        n
    }
}
