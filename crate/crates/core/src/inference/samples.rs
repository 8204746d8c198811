use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::config::{ConfigError, McmcConfig};
use super::diagnostics::{split_ess, split_rhat, DiagnosticError};
use super::sampler::{initialize_chain, InitError, Sampler, ScaleAdapter};
use crate::graph::{GraphModel, NodeId, NodeKind};
use crate::rng::RandomStream;

/// R-hat above this marks a run as not converged.
pub const DIVERGENCE_RHAT: f64 = 1.1;

#[derive(Debug, Error)]
pub enum McmcError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot monitor {name}: {reason}")]
    Monitor { name: String, reason: String },
    #[error("chain {chain}: {source}")]
    Init { chain: usize, source: InitError },
}

/// Per-chain sampler statistics, aligned with the graph's parameter order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainStats {
    pub acceptance_rates: Vec<f64>,
    pub final_scales: Vec<f64>,
}

/// Recorded draws in original space. `draws[c][i][p]` is monitored quantity
/// `p` at recorded iteration `i` of chain `c`. `latent` keeps every graph
/// parameter (flattened per chain, row-major) for posterior predictive work.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSamples {
    pub parameter_names: Vec<String>,
    pub draws: Vec<Vec<Vec<f64>>>,
    pub config: McmcConfig,
    pub latent_names: Vec<String>,
    pub latent: Vec<Vec<f64>>,
    pub chain_stats: Vec<ChainStats>,
    /// Monitored names whose split R-hat exceeds [`DIVERGENCE_RHAT`].
    pub divergent: Vec<String>,
    /// Set when chains were too short for R-hat to be computed.
    pub diagnostics_unavailable: bool,
}

impl PosteriorSamples {
    /// Samples from externally produced draws, with no latent record.
    pub fn from_draws(parameter_names: Vec<String>, draws: Vec<Vec<Vec<f64>>>) -> Self {
        let n_chains = draws.len();
        PosteriorSamples {
            parameter_names,
            draws,
            config: McmcConfig {
                n_chains,
                ..Default::default()
            },
            latent_names: Vec::new(),
            latent: Vec::new(),
            chain_stats: Vec::new(),
            divergent: Vec::new(),
            diagnostics_unavailable: false,
        }
    }

    pub fn n_chains(&self) -> usize {
        self.draws.len()
    }

    pub fn n_iterations(&self) -> usize {
        self.draws.first().map_or(0, Vec::len)
    }

    pub fn n_pooled(&self) -> usize {
        self.draws.iter().map(Vec::len).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.parameter_names.iter().position(|n| n == name)
    }

    pub fn chain_column(&self, chain: usize, p: usize) -> Vec<f64> {
        self.draws[chain].iter().map(|row| row[p]).collect()
    }

    pub fn columns(&self, p: usize) -> Vec<Vec<f64>> {
        (0..self.n_chains())
            .map(|c| self.chain_column(c, p))
            .collect()
    }

    /// All chains concatenated in chain order.
    pub fn pooled(&self, p: usize) -> Vec<f64> {
        self.draws
            .iter()
            .flat_map(|chain| chain.iter().map(move |row| row[p]))
            .collect()
    }

    /// Per-quantity split R-hat.
    pub fn rhat(&self) -> Result<Vec<f64>, DiagnosticError> {
        self.per_column(split_rhat)
    }

    /// Per-quantity effective sample size.
    pub fn ess(&self) -> Result<Vec<f64>, DiagnosticError> {
        self.per_column(split_ess)
    }

    fn per_column(
        &self,
        f: fn(&[&[f64]]) -> Result<f64, DiagnosticError>,
    ) -> Result<Vec<f64>, DiagnosticError> {
        (0..self.parameter_names.len())
            .map(|p| {
                let cols = self.columns(p);
                let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
                f(&refs)
            })
            .collect()
    }

    pub fn has_divergence(&self) -> bool {
        !self.divergent.is_empty()
    }

    /// Latent parameter vector for pooled draw `index` (chain-major order).
    pub fn latent_draw(&self, index: usize) -> &[f64] {
        let k = self.latent_names.len();
        let per_chain = self.n_iterations();
        let (c, i) = (index / per_chain, index % per_chain);
        &self.latent[c][i * k..(i + 1) * k]
    }

    /// CSV with columns `chain, iteration, <monitored...>`; `iteration` is
    /// the post-burn-in sweep number.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["chain".to_string(), "iteration".to_string()];
        header.extend(self.parameter_names.iter().cloned());
        w.write_record(&header)?;
        let thin = self.config.thinning.max(1);
        for (c, chain) in self.draws.iter().enumerate() {
            for (i, row) in chain.iter().enumerate() {
                let mut rec = vec![(c + 1).to_string(), ((i + 1) * thin).to_string()];
                rec.extend(row.iter().map(|v| v.to_string()));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn monitorable(kind: NodeKind) -> bool {
    matches!(kind, NodeKind::StochasticParam | NodeKind::Deterministic)
}

/// Resolve monitor names to node ids. A name may be a node (`mu[3]`) or a
/// whole variable (`mu`), which expands to its elements in index order.
pub fn resolve_monitors(graph: &GraphModel, names: &[String]) -> Result<Vec<NodeId>, McmcError> {
    if names.is_empty() {
        let scalars: Vec<NodeId> = graph
            .nodes()
            .iter()
            .filter(|n| n.index.is_none() && monitorable(n.kind))
            .map(|n| n.id)
            .collect();
        return Ok(if scalars.is_empty() {
            graph.parameter_ids().to_vec()
        } else {
            scalars
        });
    }
    let mut ids = Vec::new();
    for name in names {
        if let Some(id) = graph.node_id(name) {
            if !monitorable(graph.node(id).kind) {
                return Err(McmcError::Monitor {
                    name: name.clone(),
                    reason: "it is data, not a sampled quantity".into(),
                });
            }
            ids.push(id);
            continue;
        }
        let elems = graph.variable_nodes(name);
        if elems.is_empty() {
            return Err(McmcError::Monitor {
                name: name.clone(),
                reason: "no such node".into(),
            });
        }
        let sampled: Vec<NodeId> = elems
            .into_iter()
            .filter(|&id| monitorable(graph.node(id).kind))
            .collect();
        if sampled.is_empty() {
            return Err(McmcError::Monitor {
                name: name.clone(),
                reason: "every element is data".into(),
            });
        }
        ids.extend(sampled);
    }
    Ok(ids)
}

struct ChainOutput {
    draws: Vec<Vec<f64>>,
    latent: Vec<f64>,
    stats: ChainStats,
}

fn run_chain(
    graph: &GraphModel,
    sampler: &Sampler<'_>,
    config: &McmcConfig,
    monitors: &[NodeId],
    chain: usize,
) -> Result<ChainOutput, McmcError> {
    let mut rng = RandomStream::substream(config.seed, chain as u64);
    let mut state = initialize_chain(graph, config, &mut rng)
        .map_err(|source| McmcError::Init { chain, source })?;
    let mut adapter = ScaleAdapter::new(&state, config.target_acceptance);
    for _ in 0..config.burn_in {
        sampler.sweep(&mut state, &mut rng);
        adapter.end_sweep(&mut state);
    }
    adapter.freeze();
    state.acceptance_counts.iter_mut().for_each(|c| *c = 0);
    state.attempt_counts.iter_mut().for_each(|c| *c = 0);

    let params = graph.parameter_ids();
    let kept = config.kept_per_chain();
    let mut draws = Vec::with_capacity(kept);
    let mut latent = Vec::with_capacity(kept * params.len());
    for it in 1..=config.iterations {
        sampler.sweep(&mut state, &mut rng);
        if it % config.thinning == 0 && draws.len() < kept {
            draws.push(monitors.iter().map(|&id| state.values[id]).collect());
            latent.extend(params.iter().map(|&id| state.values[id]));
        }
    }
    Ok(ChainOutput {
        draws,
        latent,
        stats: ChainStats {
            acceptance_rates: state.acceptance_rates(),
            final_scales: state.proposal_scales.clone(),
        },
    })
}

/// Run `config.n_chains` independent chains. Chain `c` draws from RNG
/// substream `c` of `config.seed`, so results do not depend on how chains
/// are scheduled across threads.
pub fn run_mcmc(graph: &GraphModel, config: &McmcConfig) -> Result<PosteriorSamples, McmcError> {
    config.validate()?;
    let monitors = resolve_monitors(graph, &config.monitor)?;
    let sampler = Sampler::new(graph);
    let outputs: Vec<ChainOutput> = (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_chain(graph, &sampler, config, &monitors, c))
        .collect::<Result<_, _>>()?;

    let mut samples = PosteriorSamples {
        parameter_names: monitors
            .iter()
            .map(|&id| graph.node(id).name.clone())
            .collect(),
        draws: Vec::with_capacity(outputs.len()),
        config: config.clone(),
        latent_names: graph
            .parameter_ids()
            .iter()
            .map(|&id| graph.node(id).name.clone())
            .collect(),
        latent: Vec::with_capacity(outputs.len()),
        chain_stats: Vec::with_capacity(outputs.len()),
        divergent: Vec::new(),
        diagnostics_unavailable: false,
    };
    for out in outputs {
        samples.draws.push(out.draws);
        samples.latent.push(out.latent);
        samples.chain_stats.push(out.stats);
    }
    match samples.rhat() {
        Ok(r) => {
            samples.divergent = samples
                .parameter_names
                .iter()
                .zip(r)
                .filter(|(_, r)| *r > DIVERGENCE_RHAT)
                .map(|(n, _)| n.clone())
                .collect();
        }
        Err(_) => samples.diagnostics_unavailable = true,
    }
    Ok(samples)
}
