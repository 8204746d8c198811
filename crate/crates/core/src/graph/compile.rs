use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use thiserror::Error;

use super::dataset::Dataset;
use super::model::{
    apply_binary, CompiledDist, CompiledExpr, GraphModel, GraphNode, NodeDef, NodeId, NodeKind,
};
use crate::distributions::{Builtin, DistKind, EvalError};
use crate::dsl::{Expression, ModelAst, Relation, SourceSpan, Statement, VarRef};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error("directed cycle: {}", path.join(" -> "))]
    Cycle { path: Vec<String> },
    #[error("{span}: loop bound {message}")]
    LoopBound { span: SourceSpan, message: String },
    #[error("{span}: index {index} of {name} outside 1..{limit}")]
    IndexOutOfRange {
        name: String,
        index: i64,
        limit: usize,
        span: SourceSpan,
    },
    #[error("{span}: {name}[{index}] is never defined")]
    UndefinedElement {
        name: String,
        index: usize,
        span: SourceSpan,
    },
    #[error("{span}: indices may only be a loop index or an integer constant")]
    UnsupportedIndex { span: SourceSpan },
    #[error("{span}: {name} is defined more than once")]
    Redefined { name: String, span: SourceSpan },
    #[error("{span}: undefined variable {name}")]
    Undefined { name: String, span: SourceSpan },
    #[error("{span}: {name} is missing in the data but used in an expression")]
    MissingValue { name: String, span: SourceSpan },
    #[error("{span}: {name}: {message}")]
    Shape {
        name: String,
        message: String,
        span: SourceSpan,
    },
    #[error("{span}: unknown {what} {name}")]
    Unknown {
        what: &'static str,
        name: String,
        span: SourceSpan,
    },
    #[error("{span}: {name} expects {expected} argument(s), got {got}")]
    Arity {
        name: String,
        expected: usize,
        got: usize,
        span: SourceSpan,
    },
    #[error("{span}: {source}")]
    Eval { source: EvalError, span: SourceSpan },
}

type Bindings = Vec<(String, i64)>;

struct Instance<'a> {
    relation: &'a Relation,
    bindings: Bindings,
    index: Option<usize>,
}

fn lookup(bindings: &Bindings, name: &str) -> Option<i64> {
    bindings
        .iter()
        .rev()
        .find(|(n, _)| n == name)
        .map(|(_, v)| *v)
}

fn node_name(var: &str, index: Option<usize>) -> String {
    match index {
        Some(i) => format!("{var}[{i}]"),
        None => var.to_string(),
    }
}

struct Compiler<'a> {
    data: &'a Dataset,
    instances: Vec<Instance<'a>>,
    /// variable -> (is_array, index -> node id)
    variables: HashMap<&'a str, (bool, HashMap<Option<usize>, NodeId>)>,
}

impl<'a> Compiler<'a> {
    /// Evaluate a loop bound from literals, loop indices and data.
    fn static_value(
        &self,
        e: &Expression,
        bindings: &Bindings,
        span: SourceSpan,
    ) -> Result<f64, CompileError> {
        let bound_err = |message: String| CompileError::LoopBound { span, message };
        match e {
            Expression::Number(v) => Ok(*v),
            Expression::Var(v) => {
                if v.index.is_none() {
                    if let Some(b) = lookup(bindings, &v.name) {
                        return Ok(b as f64);
                    }
                    if let Some(s) = self.data.scalar(&v.name) {
                        return Ok(s);
                    }
                } else if let Some(col) = self.data.column(&v.name) {
                    let k =
                        self.resolve_index(v.index.as_deref().expect("indexed"), bindings, v.span)?;
                    if k < 1 || k as usize > col.len() {
                        return Err(CompileError::IndexOutOfRange {
                            name: v.name.clone(),
                            index: k,
                            limit: col.len(),
                            span: v.span,
                        });
                    }
                    if let Some(x) = col[k as usize - 1] {
                        return Ok(x);
                    }
                }
                Err(bound_err(format!(
                    "refers to {}, which is not a data value or enclosing loop index",
                    v.name
                )))
            }
            Expression::Binary { op, left, right } => {
                let a = self.static_value(left, bindings, span)?;
                let b = self.static_value(right, bindings, span)?;
                apply_binary(*op, a, b).map_err(|source| CompileError::Eval { source, span })
            }
            Expression::Call { name, args, .. } => {
                let f = Builtin::from_name(name)
                    .ok_or_else(|| bound_err(format!("calls unknown function {name}")))?;
                let vals = args
                    .iter()
                    .map(|a| self.static_value(a, bindings, span))
                    .collect::<Result<Vec<_>, _>>()?;
                f.apply(&vals)
                    .map_err(|source| CompileError::Eval { source, span })
            }
        }
    }

    fn resolve_index(
        &self,
        idx: &Expression,
        bindings: &Bindings,
        span: SourceSpan,
    ) -> Result<i64, CompileError> {
        match idx {
            Expression::Number(v) if v.fract() == 0.0 && v.abs() < 1e15 => Ok(*v as i64),
            Expression::Var(VarRef {
                name, index: None, ..
            }) => lookup(bindings, name).ok_or(CompileError::UnsupportedIndex { span }),
            _ => Err(CompileError::UnsupportedIndex { span }),
        }
    }

    fn bound(
        &self,
        e: &Expression,
        bindings: &Bindings,
        span: SourceSpan,
    ) -> Result<i64, CompileError> {
        let v = self.static_value(e, bindings, span)?;
        if v.fract() != 0.0 || v < 1.0 || v > i32::MAX as f64 {
            return Err(CompileError::LoopBound {
                span,
                message: format!("{v} is not a positive integer"),
            });
        }
        Ok(v as i64)
    }

    fn unroll(
        &mut self,
        items: &'a [Statement],
        bindings: &mut Bindings,
    ) -> Result<(), CompileError> {
        for item in items {
            match item {
                Statement::Relation(rel) => {
                    let target = rel.target();
                    let index = match &target.index {
                        None => None,
                        Some(idx) => {
                            let k = self.resolve_index(idx, bindings, target.span)?;
                            if k < 1 {
                                return Err(CompileError::IndexOutOfRange {
                                    name: target.name.clone(),
                                    index: k,
                                    limit: self.data.row_count(),
                                    span: target.span,
                                });
                            }
                            Some(k as usize)
                        }
                    };
                    self.instances.push(Instance {
                        relation: rel,
                        bindings: bindings.clone(),
                        index,
                    });
                }
                Statement::Loop(l) => {
                    let lo = self.bound(&l.lower, bindings, l.span)?;
                    let hi = self.bound(&l.upper, bindings, l.span)?;
                    for k in lo..=hi {
                        bindings.push((l.index_var.clone(), k));
                        self.unroll(&l.body, bindings)?;
                        bindings.pop();
                    }
                }
            }
        }
        Ok(())
    }

    fn expr(
        &self,
        e: &Expression,
        bindings: &Bindings,
        constants: &[Option<f64>],
    ) -> Result<CompiledExpr, CompileError> {
        Ok(match e {
            Expression::Number(v) => CompiledExpr::Const(*v),
            Expression::Var(v) => self.var(v, bindings, constants)?,
            Expression::Binary { op, left, right } => {
                let l = self.expr(left, bindings, constants)?;
                let r = self.expr(right, bindings, constants)?;
                match (l.as_const(), r.as_const()) {
                    (Some(a), Some(b)) => {
                        CompiledExpr::Const(apply_binary(*op, a, b).map_err(|source| {
                            CompileError::Eval {
                                source,
                                span: SourceSpan::default(),
                            }
                        })?)
                    }
                    _ => CompiledExpr::Binary(*op, Box::new(l), Box::new(r)),
                }
            }
            Expression::Call { name, args, span } => {
                let f = Builtin::from_name(name).ok_or_else(|| CompileError::Unknown {
                    what: "function",
                    name: name.clone(),
                    span: *span,
                })?;
                if f.arity() != args.len() {
                    return Err(CompileError::Arity {
                        name: name.clone(),
                        expected: f.arity(),
                        got: args.len(),
                        span: *span,
                    });
                }
                let args = args
                    .iter()
                    .map(|a| self.expr(a, bindings, constants))
                    .collect::<Result<Vec<_>, _>>()?;
                if args.iter().all(|a| a.as_const().is_some()) {
                    let vals: Vec<f64> = args.iter().filter_map(CompiledExpr::as_const).collect();
                    CompiledExpr::Const(f.apply(&vals).map_err(|source| CompileError::Eval {
                        source,
                        span: *span,
                    })?)
                } else {
                    CompiledExpr::Call(f, args)
                }
            }
        })
    }

    fn var(
        &self,
        v: &VarRef,
        bindings: &Bindings,
        constants: &[Option<f64>],
    ) -> Result<CompiledExpr, CompileError> {
        let index = match &v.index {
            Some(idx) => Some(self.resolve_index(idx, bindings, v.span)?),
            None => {
                if let Some(b) = lookup(bindings, &v.name) {
                    return Ok(CompiledExpr::Const(b as f64));
                }
                None
            }
        };
        if let Some((is_array, elems)) = self.variables.get(v.name.as_str()) {
            if *is_array != index.is_some() {
                return Err(CompileError::Shape {
                    name: v.name.clone(),
                    message: if *is_array {
                        "array variable used without an index".into()
                    } else {
                        "scalar variable used with an index".into()
                    },
                    span: v.span,
                });
            }
            let key = match index {
                Some(k) if k < 1 => {
                    return Err(CompileError::IndexOutOfRange {
                        name: v.name.clone(),
                        index: k,
                        limit: elems.len(),
                        span: v.span,
                    })
                }
                Some(k) => Some(k as usize),
                None => None,
            };
            let id = *elems
                .get(&key)
                .ok_or_else(|| CompileError::UndefinedElement {
                    name: v.name.clone(),
                    index: key.unwrap_or(0),
                    span: v.span,
                })?;
            return Ok(match constants[id] {
                Some(c) => CompiledExpr::Const(c),
                None => CompiledExpr::Node(id),
            });
        }
        match index {
            None => self
                .data
                .scalar(&v.name)
                .map(CompiledExpr::Const)
                .ok_or_else(|| {
                    if self.data.column(&v.name).is_some() {
                        CompileError::Shape {
                            name: v.name.clone(),
                            message: "data column used without an index".into(),
                            span: v.span,
                        }
                    } else {
                        CompileError::Undefined {
                            name: v.name.clone(),
                            span: v.span,
                        }
                    }
                }),
            Some(k) => {
                let col = self
                    .data
                    .column(&v.name)
                    .ok_or_else(|| CompileError::Undefined {
                        name: v.name.clone(),
                        span: v.span,
                    })?;
                if k < 1 || k as usize > col.len() {
                    return Err(CompileError::IndexOutOfRange {
                        name: v.name.clone(),
                        index: k,
                        limit: col.len(),
                        span: v.span,
                    });
                }
                col[k as usize - 1].map(CompiledExpr::Const).ok_or_else(|| {
                    CompileError::MissingValue {
                        name: format!("{}[{k}]", v.name),
                        span: v.span,
                    }
                })
            }
        }
    }
}

/// Unroll `ast` against `data` into a [`GraphModel`].
///
/// Loops are expanded with bounds taken from literals and data; each relation
/// instance becomes one node. Stochastic targets with data values become
/// observed nodes (missing entries stay parameters), deterministic targets
/// present in the data become constants, and data referenced on right-hand
/// sides is folded into the compiled expressions.
pub fn compile(ast: &ModelAst, data: &Dataset) -> Result<GraphModel, CompileError> {
    let mut c = Compiler {
        data,
        instances: Vec::new(),
        variables: HashMap::new(),
    };
    c.unroll(&ast.items, &mut Vec::new())?;

    // Allocate node ids and classify.
    let mut kinds = Vec::with_capacity(c.instances.len());
    let mut observed = Vec::with_capacity(c.instances.len());
    let mut constants: Vec<Option<f64>> = Vec::with_capacity(c.instances.len());
    for (id, inst) in c.instances.iter().enumerate() {
        let target = inst.relation.target();
        let entry = c
            .variables
            .entry(target.name.as_str())
            .or_insert_with(|| (inst.index.is_some(), HashMap::new()));
        if entry.0 != inst.index.is_some() {
            return Err(CompileError::Shape {
                name: target.name.clone(),
                message: "defined both with and without an index".into(),
                span: target.span,
            });
        }
        if entry.1.insert(inst.index, id).is_some() {
            return Err(CompileError::Redefined {
                name: node_name(&target.name, inst.index),
                span: target.span,
            });
        }

        let data_value = match inst.index {
            None => {
                if data.column(&target.name).is_some() {
                    return Err(CompileError::Shape {
                        name: target.name.clone(),
                        message: "data column defined without an index".into(),
                        span: target.span,
                    });
                }
                data.scalar(&target.name).map(Some)
            }
            Some(k) => match data.column(&target.name) {
                Some(col) => {
                    if k > col.len() {
                        return Err(CompileError::IndexOutOfRange {
                            name: target.name.clone(),
                            index: k as i64,
                            limit: col.len(),
                            span: target.span,
                        });
                    }
                    Some(col[k - 1])
                }
                None => None,
            },
        };
        let (kind, obs, constant) = match (inst.relation.is_stochastic(), data_value) {
            (true, Some(Some(v))) => (NodeKind::StochasticObserved, Some(v), None),
            (true, _) => (NodeKind::StochasticParam, None, None),
            (false, Some(Some(v))) => (NodeKind::Constant, None, Some(v)),
            (false, _) => (NodeKind::Deterministic, None, None),
        };
        kinds.push(kind);
        observed.push(obs);
        constants.push(constant);
    }

    // Compile right-hand sides.
    let n = c.instances.len();
    let mut nodes = Vec::with_capacity(n);
    let mut parents = Vec::with_capacity(n);
    for (id, inst) in c.instances.iter().enumerate() {
        let target = inst.relation.target();
        let def = match (kinds[id], inst.relation) {
            (NodeKind::Constant, _) => NodeDef::Constant(constants[id].expect("constant value")),
            (_, Relation::Stochastic { dist, .. }) => {
                let kind =
                    DistKind::from_name(&dist.name).ok_or_else(|| CompileError::Unknown {
                        what: "distribution",
                        name: dist.name.clone(),
                        span: dist.span,
                    })?;
                if kind.arity() != dist.args.len() {
                    return Err(CompileError::Arity {
                        name: dist.name.clone(),
                        expected: kind.arity(),
                        got: dist.args.len(),
                        span: dist.span,
                    });
                }
                let args = dist
                    .args
                    .iter()
                    .map(|a| c.expr(a, &inst.bindings, &constants))
                    .collect::<Result<Vec<_>, _>>()?;
                NodeDef::Dist(CompiledDist { kind, args })
            }
            (_, Relation::Deterministic { expr, .. }) => NodeDef::Expr(
                c.expr(expr, &inst.bindings, &constants)
                    .map_err(|e| match e {
                        CompileError::Eval { source, .. } => CompileError::Eval {
                            source,
                            span: target.span,
                        },
                        other => other,
                    })?,
            ),
        };
        let mut ps = Vec::new();
        match &def {
            NodeDef::Dist(d) => d.args.iter().for_each(|a| a.collect_nodes(&mut ps)),
            NodeDef::Expr(e) => e.collect_nodes(&mut ps),
            NodeDef::Constant(_) => {}
        }
        ps.sort_unstable();
        ps.dedup();
        parents.push(ps);
        nodes.push(GraphNode {
            id,
            name: node_name(&target.name, inst.index),
            variable: target.name.clone(),
            index: inst.index,
            kind: kinds[id],
            def,
            observed_value: observed[id],
        });
    }

    let mut children = vec![Vec::new(); n];
    for (child, ps) in parents.iter().enumerate() {
        for &p in ps {
            children[p].push(child);
        }
    }

    let topo_order = topological_order(&nodes, &parents, &children)?;
    let parameter_ids = topo_order
        .iter()
        .copied()
        .filter(|&id| nodes[id].kind == NodeKind::StochasticParam)
        .collect();
    let observed_ids = (0..n)
        .filter(|&id| nodes[id].kind == NodeKind::StochasticObserved)
        .collect();
    let by_name = nodes.iter().map(|nd| (nd.name.clone(), nd.id)).collect();

    Ok(GraphModel {
        nodes,
        parents,
        children,
        topo_order,
        parameter_ids,
        observed_ids,
        by_name,
    })
}

/// Kahn's algorithm, always releasing the smallest ready id so the order is
/// a pure function of the graph.
fn topological_order(
    nodes: &[GraphNode],
    parents: &[Vec<NodeId>],
    children: &[Vec<NodeId>],
) -> Result<Vec<NodeId>, CompileError> {
    let n = nodes.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut ready: BinaryHeap<Reverse<NodeId>> =
        (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(id)) = ready.pop() {
        order.push(id);
        for &c in &children[id] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Walk parent links among the unsorted nodes until one repeats.
    let start = (0..n).find(|&i| indegree[i] > 0).expect("unsorted node");
    let mut seen = HashMap::new();
    let mut path = Vec::new();
    let mut cur = start;
    loop {
        if let Some(&pos) = seen.get(&cur) {
            let mut cycle: Vec<String> = path[pos..]
                .iter()
                .map(|&i: &NodeId| nodes[i].name.clone())
                .collect();
            cycle.reverse();
            cycle.push(cycle[0].clone());
            return Err(CompileError::Cycle { path: cycle });
        }
        seen.insert(cur, path.len());
        path.push(cur);
        cur = *parents[cur]
            .iter()
            .find(|&&p| indegree[p] > 0)
            .expect("node on a cycle has an unsorted parent");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;

    fn build(src: &str, data: &Dataset) -> Result<GraphModel, CompileError> {
        compile(&parse_model(src).unwrap(), data)
    }

    #[test]
    fn single_node() {
        let g = build("model { x ~ dnorm(0, 1) }", &Dataset::new()).unwrap();
        assert_eq!(g.len(), 1);
        assert_eq!(g.count(NodeKind::StochasticParam), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn two_node_cycle() {
        let err = build("model { a <- b\n b <- a }", &Dataset::new()).unwrap_err();
        let CompileError::Cycle { path } = &err else {
            panic!("{err:?}")
        };
        assert_eq!(path.first(), path.last());
        assert_eq!(path.len(), 3);
        assert!(err.to_string().starts_with("directed cycle"));
    }

    #[test]
    fn self_cycle() {
        let err = build("model { a <- a + 1 }", &Dataset::new()).unwrap_err();
        assert!(matches!(err, CompileError::Cycle { .. }));
    }

    #[test]
    fn unresolvable_loop_bound() {
        let err = build(
            "model { for (i in 1:m) { x[i] ~ dnorm(0, 1) } }",
            &Dataset::new(),
        )
        .unwrap_err();
        assert!(matches!(err, CompileError::LoopBound { .. }));
        let mut d = Dataset::new();
        d.set_scalar("m", 2.5).unwrap();
        let err = build("model { for (i in 1:m) { x[i] ~ dnorm(0, 1) } }", &d).unwrap_err();
        assert!(matches!(err, CompileError::LoopBound { .. }));
    }

    #[test]
    fn loop_bound_from_parameter_rejected() {
        let err = build(
            "model { m ~ dpois(3)\n for (i in 1:m) { x[i] ~ dnorm(0, 1) } }",
            &Dataset::new(),
        )
        .unwrap_err();
        assert!(matches!(err, CompileError::LoopBound { .. }));
    }

    #[test]
    fn data_index_out_of_range() {
        let mut d = Dataset::new();
        d.add_values("y", &[1.0, 2.0]).unwrap();
        let err = build("model { for (i in 1:3) { y[i] ~ dnorm(0, 1) } }", &d).unwrap_err();
        assert!(matches!(
            err,
            CompileError::IndexOutOfRange {
                index: 3,
                limit: 2,
                ..
            }
        ));
    }

    #[test]
    fn general_index_expressions_rejected() {
        let mut d = Dataset::new();
        d.add_values("y", &[1.0, 2.0]).unwrap();
        let err = build("model { for (i in 1:1) { y[i + 1] ~ dnorm(0, 1) } }", &d).unwrap_err();
        assert!(matches!(err, CompileError::UnsupportedIndex { .. }));
    }

    #[test]
    fn missing_observation_becomes_parameter() {
        let mut d = Dataset::new();
        d.add_column("y", vec![Some(1.0), None, Some(3.0)]).unwrap();
        let g = build(
            "model { for (i in 1:n) { y[i] ~ dnorm(m, 1) }\n m ~ dnorm(0, 1) }",
            &d,
        )
        .unwrap();
        assert_eq!(g.count(NodeKind::StochasticObserved), 2);
        assert_eq!(g.count(NodeKind::StochasticParam), 2);
        let names: Vec<&str> = g
            .parameter_ids()
            .iter()
            .map(|&i| g.node(i).name.as_str())
            .collect();
        assert_eq!(names, vec!["m", "y[2]"]);
    }

    #[test]
    fn redefinition_rejected() {
        let err = build(
            "model { x ~ dnorm(0, 1)\n x ~ dnorm(0, 1) }",
            &Dataset::new(),
        )
        .unwrap_err();
        assert!(matches!(err, CompileError::Redefined { .. }));
    }

    #[test]
    fn topo_order_puts_parents_first() {
        let g = build(
            "model { y <- 2 * x\n z ~ dnorm(y, 1)\n x ~ dnorm(0, 1) }",
            &Dataset::new(),
        )
        .unwrap();
        let pos: HashMap<NodeId, usize> = g
            .topo_order()
            .iter()
            .enumerate()
            .map(|(i, &id)| (id, i))
            .collect();
        for id in 0..g.len() {
            for &p in g.parents(id) {
                assert!(pos[&p] < pos[&id]);
            }
        }
        assert_eq!(g.parameter_ids().len(), 2);
    }
}
