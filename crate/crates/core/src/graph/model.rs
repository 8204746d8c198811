use std::collections::HashMap;

use serde::Serialize;

use crate::distributions::{checked_pow, Builtin, DistKind, DistributionSpec, EvalError};
use crate::dsl::BinaryOperator;

pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum NodeKind {
    StochasticParam,
    StochasticObserved,
    Deterministic,
    Constant,
}

impl NodeKind {
    pub fn is_stochastic(self) -> bool {
        matches!(
            self,
            NodeKind::StochasticParam | NodeKind::StochasticObserved
        )
    }
}

/// Expression with variable references resolved to node ids and data folded
/// into constants.
#[derive(Debug, Clone, PartialEq)]
pub enum CompiledExpr {
    Const(f64),
    Node(NodeId),
    Binary(BinaryOperator, Box<CompiledExpr>, Box<CompiledExpr>),
    Call(Builtin, Vec<CompiledExpr>),
}

impl CompiledExpr {
    pub fn eval(&self, values: &[f64]) -> Result<f64, EvalError> {
        match self {
            CompiledExpr::Const(v) => Ok(*v),
            CompiledExpr::Node(id) => Ok(values[*id]),
            CompiledExpr::Binary(op, l, r) => {
                let a = l.eval(values)?;
                let b = r.eval(values)?;
                apply_binary(*op, a, b)
            }
            CompiledExpr::Call(f, args) => {
                let mut buf = [0.0; 2];
                for (slot, a) in buf.iter_mut().zip(args) {
                    *slot = a.eval(values)?;
                }
                f.apply(&buf[..args.len()])
            }
        }
    }

    pub fn collect_nodes(&self, out: &mut Vec<NodeId>) {
        match self {
            CompiledExpr::Const(_) => {}
            CompiledExpr::Node(id) => out.push(*id),
            CompiledExpr::Binary(_, l, r) => {
                l.collect_nodes(out);
                r.collect_nodes(out);
            }
            CompiledExpr::Call(_, args) => args.iter().for_each(|a| a.collect_nodes(out)),
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            CompiledExpr::Const(v) => Some(*v),
            _ => None,
        }
    }
}

pub(crate) fn apply_binary(op: BinaryOperator, a: f64, b: f64) -> Result<f64, EvalError> {
    let v = match op {
        BinaryOperator::Pow => return checked_pow(a, b),
        other => other.apply(a, b),
    };
    if v.is_nan() {
        return Err(EvalError::NotANumber {
            op: op.symbol(),
            args: vec![a, b],
        });
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompiledDist {
    pub kind: DistKind,
    pub args: Vec<CompiledExpr>,
}

impl CompiledDist {
    pub fn evaluate(&self, values: &[f64]) -> Result<DistributionSpec, EvalError> {
        let mut buf = [0.0; 2];
        for (slot, a) in buf.iter_mut().zip(&self.args) {
            *slot = a.eval(values)?;
        }
        Ok(self.kind.build(&buf[..self.args.len()])?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeDef {
    Dist(CompiledDist),
    Expr(CompiledExpr),
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub id: NodeId,
    /// Display name such as `mu[17]`.
    pub name: String,
    /// Model variable this node instantiates (`mu`).
    pub variable: String,
    /// 1-based element index for array variables.
    pub index: Option<usize>,
    pub kind: NodeKind,
    pub def: NodeDef,
    pub observed_value: Option<f64>,
}

impl GraphNode {
    pub fn dist(&self) -> Option<&CompiledDist> {
        match &self.def {
            NodeDef::Dist(d) => Some(d),
            _ => None,
        }
    }
}

/// Unrolled directed acyclic graph. Immutable after compilation; evaluation
/// uses caller-owned value buffers indexed by node id.
#[derive(Debug, Clone)]
pub struct GraphModel {
    pub(crate) nodes: Vec<GraphNode>,
    pub(crate) parents: Vec<Vec<NodeId>>,
    pub(crate) children: Vec<Vec<NodeId>>,
    pub(crate) topo_order: Vec<NodeId>,
    pub(crate) parameter_ids: Vec<NodeId>,
    pub(crate) observed_ids: Vec<NodeId>,
    pub(crate) by_name: HashMap<String, NodeId>,
}

impl GraphModel {
    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &GraphNode {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn parents(&self, id: NodeId) -> &[NodeId] {
        &self.parents[id]
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id]
    }

    pub fn topo_order(&self) -> &[NodeId] {
        &self.topo_order
    }

    /// Parameter node ids in topological order (the sampler's sweep order).
    pub fn parameter_ids(&self) -> &[NodeId] {
        &self.parameter_ids
    }

    pub fn observed_ids(&self) -> &[NodeId] {
        &self.observed_ids
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn count(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// Nodes instantiating `variable`, in index order.
    pub fn variable_nodes(&self, variable: &str) -> Vec<NodeId> {
        let mut ids: Vec<NodeId> = self
            .nodes
            .iter()
            .filter(|n| n.variable == variable)
            .map(|n| n.id)
            .collect();
        ids.sort_by_key(|&id| self.nodes[id].index);
        ids
    }

    /// A value buffer with observed values and constants filled in and every
    /// other slot NaN.
    pub fn blank_values(&self) -> Vec<f64> {
        self.nodes
            .iter()
            .map(|n| match (&n.def, n.observed_value) {
                (NodeDef::Constant(v), _) => *v,
                (_, Some(v)) => v,
                _ => f64::NAN,
            })
            .collect()
    }

    /// Write `params` (aligned with [`parameter_ids`](Self::parameter_ids))
    /// into `values`.
    pub fn set_parameters(&self, values: &mut [f64], params: &[f64]) {
        assert_eq!(
            params.len(),
            self.parameter_ids.len(),
            "one value per parameter"
        );
        for (&id, &v) in self.parameter_ids.iter().zip(params) {
            values[id] = v;
        }
    }

    pub fn eval_node(&self, id: NodeId, values: &[f64]) -> Result<f64, EvalError> {
        match &self.nodes[id].def {
            NodeDef::Expr(e) => e.eval(values).map_err(|e| e.at(&self.nodes[id].name)),
            NodeDef::Constant(v) => Ok(*v),
            NodeDef::Dist(_) => Ok(values[id]),
        }
    }

    /// Recompute every deterministic node in topological order.
    pub fn eval_deterministic_into(&self, values: &mut [f64]) -> Result<(), EvalError> {
        for &id in &self.topo_order {
            if self.nodes[id].kind == NodeKind::Deterministic {
                values[id] = self.eval_node(id, values)?;
            }
        }
        Ok(())
    }

    /// Full node-value assignment for the given parameter values.
    pub fn eval_deterministic(&self, params: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut values = self.blank_values();
        self.set_parameters(&mut values, params);
        self.eval_deterministic_into(&mut values)?;
        Ok(values)
    }

    /// Distribution of stochastic node `id` given its parents' current values.
    pub fn node_distribution(
        &self,
        id: NodeId,
        values: &[f64],
    ) -> Result<DistributionSpec, EvalError> {
        match &self.nodes[id].def {
            NodeDef::Dist(d) => d.evaluate(values).map_err(|e| e.at(&self.nodes[id].name)),
            _ => panic!("node {} is not stochastic", self.nodes[id].name),
        }
    }

    pub fn node_log_density(&self, id: NodeId, values: &[f64]) -> Result<f64, EvalError> {
        Ok(self
            .node_distribution(id, values)?
            .log_density_unchecked(values[id]))
    }

    /// Sum of log densities of all stochastic nodes for a fully evaluated
    /// buffer.
    pub fn log_joint_values(&self, values: &[f64]) -> Result<f64, EvalError> {
        let mut total = 0.0;
        for node in &self.nodes {
            if node.kind.is_stochastic() {
                let ld = self.node_log_density(node.id, values)?;
                if ld == f64::NEG_INFINITY {
                    return Ok(f64::NEG_INFINITY);
                }
                total += ld;
            }
        }
        Ok(total)
    }

    pub fn log_joint(&self, params: &[f64]) -> Result<f64, EvalError> {
        let values = self.eval_deterministic(params)?;
        self.log_joint_values(&values)
    }
}
