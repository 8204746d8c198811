//! Unrolling a parsed model against data into a directed acyclic graph.

mod compile;
mod dataset;
mod model;

pub use compile::{compile, CompileError};
pub use dataset::{DataError, Dataset};
pub use model::{CompiledDist, CompiledExpr, GraphModel, GraphNode, NodeDef, NodeId, NodeKind};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;

    const RESPONSE: &str = "model {
for (i in 1:n) {
Y[i] ~ dnorm(mu[i], tau)
mu[i] = beta0 + beta1*X[i] + alpha^A[i]
}
beta0 ~ dnorm(0, 1.0E-6)
beta1 ~ dnorm(0, 1.0E-6)
alpha ~ dunif(0, 1.5)
tau ~ dgamma(0.001, 0.001)
sigma2 <- 1 / tau
}";

    fn trial_data(n: usize) -> Dataset {
        let mut d = Dataset::new();
        let y: Vec<f64> = (0..n).map(|i| 10.0 + i as f64 * 0.1).collect();
        let x: Vec<f64> = (0..n).map(|i| if i < n / 2 { 0.0 } else { 1.0 }).collect();
        let a: Vec<f64> = (0..n).map(|i| 3.0 + (i % 10) as f64).collect();
        d.add_values("Y", &y).unwrap();
        d.add_values("X", &x).unwrap();
        d.add_values("A", &a).unwrap();
        d
    }

    fn params(g: &GraphModel, named: &[(&str, f64)]) -> Vec<f64> {
        g.parameter_ids()
            .iter()
            .map(|&id| named.iter().find(|(n, _)| *n == g.node(id).name).unwrap().1)
            .collect()
    }

    #[test]
    fn response_model_node_counts() {
        let g = compile(&parse_model(RESPONSE).unwrap(), &trial_data(200)).unwrap();
        assert_eq!(g.count(NodeKind::StochasticParam), 4);
        assert_eq!(g.count(NodeKind::StochasticObserved), 200);
        assert_eq!(g.count(NodeKind::Deterministic), 201);
        assert_eq!(g.count(NodeKind::Constant), 0);
        assert_eq!(g.len(), 405);
        let names: Vec<&str> = g
            .parameter_ids()
            .iter()
            .map(|&i| g.node(i).name.as_str())
            .collect();
        assert_eq!(names, vec!["beta0", "beta1", "alpha", "tau"]);
        assert_eq!(g.children(g.node_id("alpha").unwrap()).len(), 200);
    }

    #[test]
    fn deterministic_values() {
        let mut d = Dataset::new();
        d.add_values("Y", &[0.0]).unwrap();
        d.add_values("X", &[0.0]).unwrap();
        d.add_values("A", &[3.0]).unwrap();
        let g = compile(&parse_model(RESPONSE).unwrap(), &d).unwrap();
        let p = params(
            &g,
            &[
                ("beta0", 0.0),
                ("beta1", 0.0),
                ("alpha", 1.1),
                ("tau", 0.0025),
            ],
        );
        let v = g.eval_deterministic(&p).unwrap();
        assert!((v[g.node_id("sigma2").unwrap()] - 400.0).abs() < 1e-9);
        assert!((v[g.node_id("mu[1]").unwrap()] - 1.331).abs() < 1e-12);
    }

    #[test]
    fn standard_normal_log_joint() {
        let g = compile(
            &parse_model("model { x ~ dnorm(0, 1) }").unwrap(),
            &Dataset::new(),
        )
        .unwrap();
        assert!((g.log_joint(&[0.0]).unwrap() + 0.918_938_533_204_672_7).abs() < 1e-7);
    }

    #[test]
    fn out_of_support_is_negative_infinity() {
        let g = compile(&parse_model(RESPONSE).unwrap(), &trial_data(4)).unwrap();
        let p = params(
            &g,
            &[("beta0", 0.0), ("beta1", 0.0), ("alpha", 2.0), ("tau", 1.0)],
        );
        assert_eq!(g.log_joint(&p).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn log_joint_is_sum_of_node_terms() {
        let g = compile(&parse_model(RESPONSE).unwrap(), &trial_data(6)).unwrap();
        let p = params(
            &g,
            &[
                ("beta0", 1.0),
                ("beta1", -2.0),
                ("alpha", 0.9),
                ("tau", 0.5),
            ],
        );
        let v = g.eval_deterministic(&p).unwrap();
        let mut total = 0.0;
        for node in g.nodes() {
            if node.kind.is_stochastic() {
                let dist = g.node_distribution(node.id, &v).unwrap();
                total += dist.log_density(v[node.id]).unwrap();
            }
        }
        assert!((g.log_joint(&p).unwrap() - total).abs() < 1e-9);
    }

    #[test]
    fn deterministic_data_target_becomes_constant() {
        let mut d = Dataset::new();
        d.add_values("m", &[1.0, 2.0]).unwrap();
        let src = "model { for (i in 1:n) { m[i] <- 5\n y[i] ~ dnorm(m[i], 1) } }";
        let g = compile(&parse_model(src).unwrap(), &d).unwrap();
        assert_eq!(g.count(NodeKind::Constant), 2);
        assert_eq!(g.count(NodeKind::StochasticParam), 2);
        let y1 = g.node_id("y[1]").unwrap();
        assert!(g.parents(y1).is_empty());
    }
}
