use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use super::config::{InitStrategy, McmcConfig};
use crate::distributions::{ilogit, logit, DistributionSpec, EvalError, SupportDescriptor};
use crate::graph::{GraphModel, NodeId, NodeKind};
use crate::rng::RandomStream;

const MAX_INIT_ATTEMPTS: usize = 100;
/// Sweeps per adaptation batch during burn-in.
pub const ADAPT_BATCH: usize = 50;
const LOG_SCALE_LIMIT: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InitError {
    #[error("model has no parameters to sample")]
    NoParameters,
    #[error("no finite starting point after {attempts} attempts: {reason}")]
    NonFinite { attempts: usize, reason: String },
}

/// Map between a parameter's support and the real line used for proposals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Transform {
    Identity,
    Log,
    Logit {
        lower: f64,
        upper: f64,
    },
    /// Discrete support; proposals are integer steps in the original space.
    Integer,
}

impl Transform {
    pub fn for_support(support: &SupportDescriptor) -> Transform {
        match *support {
            SupportDescriptor::RealLine => Transform::Identity,
            SupportDescriptor::Positive => Transform::Log,
            SupportDescriptor::Interval { lower, upper } => Transform::Logit { lower, upper },
            _ => Transform::Integer,
        }
    }

    pub fn forward(self, x: f64) -> f64 {
        match self {
            Transform::Identity | Transform::Integer => x,
            Transform::Log => x.ln(),
            Transform::Logit { lower, upper } => logit((x - lower) / (upper - lower)),
        }
    }

    pub fn inverse(self, y: f64) -> f64 {
        match self {
            Transform::Identity | Transform::Integer => y,
            Transform::Log => y.exp(),
            Transform::Logit { lower, upper } => lower + (upper - lower) * ilogit(y),
        }
    }

    /// `log |dx/dy|` at original-space point `x`.
    pub fn log_jacobian(self, x: f64) -> f64 {
        match self {
            Transform::Identity | Transform::Integer => 0.0,
            Transform::Log => x.ln(),
            Transform::Logit { lower, upper } => {
                (x - lower).ln() + (upper - x).ln() - (upper - lower).ln()
            }
        }
    }
}

/// Robbins–Monro step on the log proposal scale. `batch` is the 1-based
/// index of the adaptation batch that produced `recent_acceptance`.
pub fn adapt_scale(scale: f64, recent_acceptance: f64, batch: usize, target: f64) -> f64 {
    let step = (recent_acceptance - target) / (batch.max(1) as f64).powf(0.6);
    (scale.ln() + step)
        .clamp(-LOG_SCALE_LIMIT, LOG_SCALE_LIMIT)
        .exp()
}

/// Current state of one chain. `values` is the full node buffer in original
/// space (parameters, deterministic nodes, data); proposal scales live in
/// transformed space.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub values: Vec<f64>,
    pub log_joint_cached: f64,
    pub proposal_scales: Vec<f64>,
    pub acceptance_counts: Vec<u64>,
    pub attempt_counts: Vec<u64>,
    node_log_density: Vec<f64>,
    saved: Vec<f64>,
    fresh: Vec<f64>,
}

impl ChainState {
    fn new(graph: &GraphModel, values: Vec<f64>) -> Result<ChainState, String> {
        let mut node_log_density = vec![0.0; graph.len()];
        let mut total = 0.0;
        for node in graph.nodes() {
            if node.kind.is_stochastic() {
                let ld = graph
                    .node_log_density(node.id, &values)
                    .map_err(|e| e.to_string())?;
                if !ld.is_finite() {
                    return Err(format!("log density of {} is {ld}", node.name));
                }
                node_log_density[node.id] = ld;
                total += ld;
            }
        }
        let k = graph.parameter_ids().len();
        Ok(ChainState {
            values,
            log_joint_cached: total,
            proposal_scales: vec![1.0; k],
            acceptance_counts: vec![0; k],
            attempt_counts: vec![0; k],
            node_log_density,
            saved: Vec::new(),
            fresh: Vec::new(),
        })
    }

    /// Parameter values aligned with `graph.parameter_ids()`.
    pub fn parameter_values(&self, graph: &GraphModel) -> Vec<f64> {
        graph
            .parameter_ids()
            .iter()
            .map(|&id| self.values[id])
            .collect()
    }

    pub fn acceptance_rates(&self) -> Vec<f64> {
        self.acceptance_counts
            .iter()
            .zip(&self.attempt_counts)
            .map(|(&a, &n)| if n == 0 { 0.0 } else { a as f64 / n as f64 })
            .collect()
    }
}

fn initial_value(dist: &DistributionSpec, strategy: InitStrategy, rng: &mut RandomStream) -> f64 {
    let v = match (strategy, *dist) {
        (InitStrategy::PriorDraw, DistributionSpec::Normal { precision, .. })
            if precision < 1e-4 =>
        {
            dist.mean()
        }
        (InitStrategy::PriorDraw, DistributionSpec::Gamma { shape, .. }) if shape < 0.01 => {
            dist.mean()
        }
        (InitStrategy::PriorDraw, _) => dist.sample_unchecked(rng),
        (InitStrategy::FixedDefaults, _) => dist.mean(),
    };
    if dist.support().is_discrete() {
        v.round()
    } else {
        v
    }
}

fn try_initialize(
    graph: &GraphModel,
    strategy: InitStrategy,
    rng: &mut RandomStream,
) -> Result<ChainState, String> {
    let mut values = graph.blank_values();
    for &id in graph.topo_order() {
        let node = graph.node(id);
        match node.kind {
            NodeKind::StochasticParam => {
                let dist = graph
                    .node_distribution(id, &values)
                    .map_err(|e| e.to_string())?;
                let x = initial_value(&dist, strategy, rng);
                let support = dist.support();
                let y = Transform::for_support(&support).forward(x);
                if !support.contains(x) || !y.is_finite() {
                    return Err(format!(
                        "{} started at {x}, on or outside its support boundary",
                        node.name
                    ));
                }
                values[id] = x;
            }
            NodeKind::Deterministic => {
                values[id] = graph
                    .eval_node(id, &values)
                    .map_err(|e: EvalError| e.to_string())?;
            }
            _ => {}
        }
    }
    ChainState::new(graph, values)
}

/// Starting state for one chain. Parameters are set in topological order so
/// each prior is evaluated at already-initialized ancestors; a start with a
/// non-finite log joint is retried up to 100 times.
pub fn initialize_chain(
    graph: &GraphModel,
    config: &McmcConfig,
    rng: &mut RandomStream,
) -> Result<ChainState, InitError> {
    if graph.parameter_ids().is_empty() {
        return Err(InitError::NoParameters);
    }
    let mut reason = String::new();
    for _ in 0..MAX_INIT_ATTEMPTS {
        match try_initialize(graph, config.init_strategy, rng) {
            Ok(state) => return Ok(state),
            Err(r) => reason = r,
        }
    }
    Err(InitError::NonFinite {
        attempts: MAX_INIT_ATTEMPTS,
        reason,
    })
}

#[derive(Debug, Clone)]
struct UpdatePlan {
    node: NodeId,
    /// Deterministic descendants reachable without crossing a stochastic
    /// node, in topological order.
    deterministic: Vec<NodeId>,
    /// Stochastic nodes whose density changes: the parameter itself and the
    /// stochastic children of it and of `deterministic`.
    stochastic: Vec<NodeId>,
}

/// Single-site random-walk Metropolis-within-Gibbs kernel for one graph.
/// Each update touches only the parameter's Markov blanket.
#[derive(Debug, Clone)]
pub struct Sampler<'g> {
    graph: &'g GraphModel,
    plans: Vec<UpdatePlan>,
}

impl<'g> Sampler<'g> {
    pub fn new(graph: &'g GraphModel) -> Self {
        let mut topo_pos = vec![0; graph.len()];
        for (pos, &id) in graph.topo_order().iter().enumerate() {
            topo_pos[id] = pos;
        }
        let plans = graph
            .parameter_ids()
            .iter()
            .map(|&p| {
                let mut seen = vec![false; graph.len()];
                let mut deterministic = Vec::new();
                let mut stochastic = vec![p];
                seen[p] = true;
                let mut stack = vec![p];
                while let Some(id) = stack.pop() {
                    for &c in graph.children(id) {
                        if seen[c] {
                            continue;
                        }
                        seen[c] = true;
                        match graph.node(c).kind {
                            NodeKind::Deterministic => {
                                deterministic.push(c);
                                stack.push(c);
                            }
                            k if k.is_stochastic() => stochastic.push(c),
                            _ => {}
                        }
                    }
                }
                deterministic.sort_by_key(|&id| topo_pos[id]);
                stochastic.sort_unstable();
                UpdatePlan {
                    node: p,
                    deterministic,
                    stochastic,
                }
            })
            .collect();
        Sampler { graph, plans }
    }

    pub fn graph(&self) -> &'g GraphModel {
        self.graph
    }

    /// One Metropolis update of parameter `k` (position in
    /// `graph.parameter_ids()`). Returns whether the proposal was accepted.
    pub fn mh_step(&self, state: &mut ChainState, k: usize, rng: &mut RandomStream) -> bool {
        let plan = &self.plans[k];
        let id = plan.node;
        let graph = self.graph;
        state.attempt_counts[k] += 1;

        let x = state.values[id];
        let Ok(dist) = graph.node_distribution(id, &state.values) else {
            return false;
        };
        let support = dist.support();
        let transform = Transform::for_support(&support);
        let scale = state.proposal_scales[k];
        let proposal = match (transform, support) {
            (Transform::Integer, SupportDescriptor::Binary) => 1.0 - x,
            (Transform::Integer, _) => {
                let z: f64 = rng.sample(StandardNormal);
                let mut step = (scale * z).round();
                if step == 0.0 {
                    step = if rng.uniform() < 0.5 { -1.0 } else { 1.0 };
                }
                x + step
            }
            (t, _) => {
                let z: f64 = rng.sample(StandardNormal);
                t.inverse(t.forward(x) + scale * z)
            }
        };
        if !proposal.is_finite() || !support.contains(proposal) {
            return false;
        }

        state.saved.clear();
        state
            .saved
            .extend(plan.deterministic.iter().map(|&d| state.values[d]));
        state.values[id] = proposal;

        let mut ok = true;
        for &d in &plan.deterministic {
            match graph.eval_node(d, &state.values) {
                Ok(v) => state.values[d] = v,
                Err(_) => {
                    ok = false;
                    break;
                }
            }
        }
        let mut delta = transform.log_jacobian(proposal) - transform.log_jacobian(x);
        if ok {
            state.fresh.clear();
            for &s in &plan.stochastic {
                let ld = graph
                    .node_log_density(s, &state.values)
                    .unwrap_or(f64::NEG_INFINITY);
                if !ld.is_finite() {
                    ok = false;
                    break;
                }
                delta += ld - state.node_log_density[s];
                state.fresh.push(ld);
            }
        }
        let accept = ok && !delta.is_nan() && (delta >= 0.0 || rng.uniform().ln() < delta);

        if accept {
            for (&s, &ld) in plan.stochastic.iter().zip(&state.fresh) {
                state.log_joint_cached += ld - state.node_log_density[s];
                state.node_log_density[s] = ld;
            }
            state.acceptance_counts[k] += 1;
        } else {
            state.values[id] = x;
            for (&d, &v) in plan.deterministic.iter().zip(&state.saved) {
                state.values[d] = v;
            }
        }
        accept
    }

    /// Update every parameter once, in topological order.
    pub fn sweep(&self, state: &mut ChainState, rng: &mut RandomStream) {
        for k in 0..self.plans.len() {
            self.mh_step(state, k, rng);
        }
    }
}

/// Batch bookkeeping for burn-in adaptation. Once frozen, scales never change
/// again, so the post-burn-in kernel is time-homogeneous.
#[derive(Debug, Clone)]
pub struct ScaleAdapter {
    target: f64,
    sweeps_in_batch: usize,
    batch: usize,
    accepted_at_start: Vec<u64>,
    attempted_at_start: Vec<u64>,
    frozen: bool,
}

impl ScaleAdapter {
    pub fn new(state: &ChainState, target: f64) -> Self {
        Self {
            target,
            sweeps_in_batch: 0,
            batch: 0,
            accepted_at_start: state.acceptance_counts.clone(),
            attempted_at_start: state.attempt_counts.clone(),
            frozen: false,
        }
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    /// Call after each burn-in sweep; every [`ADAPT_BATCH`] sweeps the
    /// scales move toward the target acceptance rate.
    pub fn end_sweep(&mut self, state: &mut ChainState) {
        if self.frozen {
            return;
        }
        self.sweeps_in_batch += 1;
        if self.sweeps_in_batch < ADAPT_BATCH {
            return;
        }
        self.batch += 1;
        for k in 0..state.proposal_scales.len() {
            let attempted = state.attempt_counts[k] - self.attempted_at_start[k];
            if attempted == 0 {
                continue;
            }
            let rate =
                (state.acceptance_counts[k] - self.accepted_at_start[k]) as f64 / attempted as f64;
            state.proposal_scales[k] =
                adapt_scale(state.proposal_scales[k], rate, self.batch, self.target);
        }
        self.sweeps_in_batch = 0;
        self.accepted_at_start.clone_from(&state.acceptance_counts);
        self.attempted_at_start.clone_from(&state.attempt_counts);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;
    use crate::graph::{compile, Dataset};

    fn graph(src: &str) -> GraphModel {
        compile(&parse_model(src).unwrap(), &Dataset::new()).unwrap()
    }

    #[test]
    fn transforms_round_trip() {
        for t in [
            Transform::Identity,
            Transform::Log,
            Transform::Logit {
                lower: 0.0,
                upper: 1.5,
            },
        ] {
            for x in [0.1, 0.7, 1.4] {
                assert!((t.inverse(t.forward(x)) - x).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn log_jacobian_matches_finite_difference() {
        let t = Transform::Logit {
            lower: 0.0,
            upper: 1.5,
        };
        let y = 0.3;
        let h = 1e-6;
        let numeric = ((t.inverse(y + h) - t.inverse(y - h)) / (2.0 * h)).ln();
        assert!((numeric - t.log_jacobian(t.inverse(y))).abs() < 1e-6);
        let t = Transform::Log;
        let numeric = ((t.inverse(y + h) - t.inverse(y - h)) / (2.0 * h)).ln();
        assert!((numeric - t.log_jacobian(t.inverse(y))).abs() < 1e-6);
    }

    #[test]
    fn adapt_fixed_point_and_direction() {
        assert_eq!(adapt_scale(0.7, 0.44, 3, 0.44), 0.7);
        let mut s = 1.0;
        for b in 1..20 {
            let next = adapt_scale(s, 1.0, b, 0.44);
            assert!(next > s);
            s = next;
        }
        assert!(adapt_scale(1.0, 0.0, 1, 0.44) < 1.0);
    }

    #[test]
    fn vague_priors_start_at_mean() {
        let g = graph(
            "model { beta0 ~ dnorm(0, 1.0E-6)\n alpha ~ dunif(0, 1.5)\n tau ~ dgamma(0.001, 0.001) }",
        );
        let mut rng = RandomStream::new(5);
        let s = initialize_chain(&g, &McmcConfig::default(), &mut rng).unwrap();
        let v = s.parameter_values(&g);
        assert_eq!(v[0], 0.0);
        assert!((0.0..=1.5).contains(&v[1]));
        assert_eq!(v[2], 1.0);
        assert_eq!(s.proposal_scales, vec![1.0; 3]);
    }

    #[test]
    fn fixed_defaults_midpoint() {
        let g = graph("model { x ~ dunif(0, 1) }");
        let cfg = McmcConfig {
            init_strategy: InitStrategy::FixedDefaults,
            ..Default::default()
        };
        let s = initialize_chain(&g, &cfg, &mut RandomStream::new(0)).unwrap();
        assert_eq!(s.values[0], 0.5);
    }

    #[test]
    fn different_streams_differ() {
        let g = graph("model { x ~ dnorm(0, 1) }");
        let cfg = McmcConfig::default();
        let a = initialize_chain(&g, &cfg, &mut RandomStream::substream(1, 0)).unwrap();
        let b = initialize_chain(&g, &cfg, &mut RandomStream::substream(1, 1)).unwrap();
        assert_ne!(a.values[0], b.values[0]);
    }

    #[test]
    fn no_parameters_is_an_error() {
        let mut d = Dataset::new();
        d.add_values("y", &[1.0]).unwrap();
        let g = compile(&parse_model("model { y[1] ~ dnorm(0, 1) }").unwrap(), &d).unwrap();
        let err =
            initialize_chain(&g, &McmcConfig::default(), &mut RandomStream::new(0)).unwrap_err();
        assert_eq!(err, InitError::NoParameters);
    }

    #[test]
    fn impossible_start_reports_after_retries() {
        let mut d = Dataset::new();
        d.add_values("y", &[5.0]).unwrap();
        let g = compile(
            &parse_model("model { p ~ dunif(0, 1)\n y[1] ~ dbern(p) }").unwrap(),
            &d,
        )
        .unwrap();
        let err =
            initialize_chain(&g, &McmcConfig::default(), &mut RandomStream::new(0)).unwrap_err();
        assert!(matches!(err, InitError::NonFinite { attempts: 100, .. }));
    }

    #[test]
    fn cached_log_joint_tracks_updates() {
        let mut d = Dataset::new();
        d.add_values("y", &[1.0, 2.5, 0.3]).unwrap();
        let src = "model { for (i in 1:n) { y[i] ~ dnorm(m[i], tau) \n m[i] <- a + b * i }\n a ~ dnorm(0, 0.1)\n b ~ dnorm(0, 1)\n tau ~ dgamma(2, 1) }";
        let g = compile(&parse_model(src).unwrap(), &d).unwrap();
        let mut rng = RandomStream::new(9);
        let mut s = initialize_chain(&g, &McmcConfig::default(), &mut rng).unwrap();
        let sampler = Sampler::new(&g);
        for _ in 0..500 {
            sampler.sweep(&mut s, &mut rng);
        }
        let direct = g.log_joint(&s.parameter_values(&g)).unwrap();
        assert!((s.log_joint_cached - direct).abs() < 1e-8);
        let fresh = g.eval_deterministic(&s.parameter_values(&g)).unwrap();
        assert_eq!(fresh, s.values);
    }

    #[test]
    fn flat_target_always_accepts() {
        let g = graph("model { x ~ dunif(-1000000, 1000000) }");
        let mut rng = RandomStream::new(1);
        let mut s = initialize_chain(&g, &McmcConfig::default(), &mut rng).unwrap();
        s.values[0] = 0.0;
        s.proposal_scales[0] = 1e-9;
        // Tiny moves near the centre leave the log-Jacobian-adjusted target
        // essentially flat, so every proposal is taken.
        let sampler = Sampler::new(&g);
        for _ in 0..100 {
            sampler.mh_step(&mut s, 0, &mut rng);
        }
        assert!(s.acceptance_counts[0] >= 95);
    }

    #[test]
    fn bounded_parameter_stays_inside() {
        let g = graph("model { alpha ~ dunif(0, 1.5) }");
        let mut rng = RandomStream::new(3);
        let mut s = initialize_chain(&g, &McmcConfig::default(), &mut rng).unwrap();
        s.proposal_scales[0] = 20.0;
        let sampler = Sampler::new(&g);
        for _ in 0..2000 {
            sampler.mh_step(&mut s, 0, &mut rng);
            assert!((0.0..=1.5).contains(&s.values[0]));
        }
    }

    #[test]
    fn acceptance_converges_to_target() {
        let g = graph("model { x ~ dnorm(0, 1) }");
        let cfg = McmcConfig::default();
        let mut rng = RandomStream::new(11);
        let mut s = initialize_chain(&g, &cfg, &mut rng).unwrap();
        let sampler = Sampler::new(&g);
        let mut adapter = ScaleAdapter::new(&s, cfg.target_acceptance);
        for _ in 0..5000 {
            sampler.sweep(&mut s, &mut rng);
            adapter.end_sweep(&mut s);
        }
        adapter.freeze();
        let scale = s.proposal_scales[0];
        s.acceptance_counts[0] = 0;
        s.attempt_counts[0] = 0;
        for _ in 0..50_000 {
            sampler.sweep(&mut s, &mut rng);
            adapter.end_sweep(&mut s);
        }
        assert_eq!(s.proposal_scales[0], scale);
        let rate = s.acceptance_rates()[0];
        assert!((rate - 0.44).abs() < 0.05, "acceptance {rate}");
    }

    #[test]
    fn discrete_parameter_moves_in_support() {
        let g = graph("model { k ~ dbin(0.3, 10)\n b ~ dbern(0.5) }");
        let mut rng = RandomStream::new(4);
        let mut s = initialize_chain(&g, &McmcConfig::default(), &mut rng).unwrap();
        let sampler = Sampler::new(&g);
        let mut total = 0.0;
        for _ in 0..20_000 {
            sampler.sweep(&mut s, &mut rng);
            let k = s.values[g.node_id("k").unwrap()];
            assert!((0.0..=10.0).contains(&k) && k.fract() == 0.0);
            total += k;
        }
        assert!((total / 20_000.0 - 3.0).abs() < 0.15);
    }
}
