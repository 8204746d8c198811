//! Canonical pretty-printer. `parse_model(format_model(ast))` reproduces the
//! AST up to spans.

use std::fmt::Write;

use super::ast::{BinaryOperator, Expression, ModelAst, Relation, Statement, VarRef};

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expression) -> u8 {
    match e {
        Expression::Binary { op, .. } => match op {
            BinaryOperator::Add | BinaryOperator::Sub => PREC_SUM,
            BinaryOperator::Mul | BinaryOperator::Div => PREC_PRODUCT,
            BinaryOperator::Pow => 4,
        },
        _ => PREC_ATOM,
    }
}

fn write_operand(out: &mut String, e: &Expression, min_prec: u8) {
    if precedence(e) < min_prec {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expression) {
    match e {
        Expression::Number(v) => {
            if v.is_sign_negative() {
                let _ = write!(out, "({v})");
            } else {
                let _ = write!(out, "{v}");
            }
        }
        Expression::Var(v) => write_var(out, v),
        Expression::Binary { op, left, right } => {
            let (lp, rp) = match op {
                BinaryOperator::Add | BinaryOperator::Sub => (PREC_SUM, PREC_PRODUCT),
                BinaryOperator::Mul | BinaryOperator::Div => (PREC_PRODUCT, PREC_UNARY),
                BinaryOperator::Pow => (PREC_ATOM, PREC_UNARY),
            };
            write_operand(out, left, lp);
            let _ = write!(out, " {} ", op.symbol());
            write_operand(out, right, rp);
        }
        Expression::Call { name, args, .. } => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a);
            }
            out.push(')');
        }
    }
}

fn write_var(out: &mut String, v: &VarRef) {
    out.push_str(&v.name);
    if let Some(idx) = &v.index {
        out.push('[');
        write_expr(out, idx);
        out.push(']');
    }
}

pub fn format_expression(e: &Expression) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

fn write_statements(out: &mut String, items: &[Statement], depth: usize) {
    for item in items {
        let pad = "  ".repeat(depth);
        match item {
            Statement::Relation(Relation::Stochastic { target, dist }) => {
                out.push_str(&pad);
                write_var(out, target);
                out.push_str(" ~ ");
                write_expr(
                    out,
                    &Expression::Call {
                        name: dist.name.clone(),
                        args: dist.args.clone(),
                        span: dist.span,
                    },
                );
                out.push('\n');
            }
            Statement::Relation(Relation::Deterministic { target, expr }) => {
                out.push_str(&pad);
                write_var(out, target);
                out.push_str(" <- ");
                write_expr(out, expr);
                out.push('\n');
            }
            Statement::Loop(l) => {
                let _ = write!(out, "{pad}for ({} in ", l.index_var);
                write_expr(out, &l.lower);
                out.push(':');
                write_expr(out, &l.upper);
                out.push_str(") {\n");
                write_statements(out, &l.body, depth + 1);
                out.push_str(&pad);
                out.push_str("}\n");
            }
        }
    }
}

pub fn format_model(ast: &ModelAst) -> String {
    let mut out = String::from("model {\n");
    write_statements(&mut out, &ast.items, 1);
    out.push_str("}\n");
    out
}
