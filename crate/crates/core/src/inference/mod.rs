//! Adaptive random-walk Metropolis-within-Gibbs sampling over a compiled
//! graph, with convergence diagnostics, summaries, probability queries and
//! posterior predictive checks.

mod config;
mod diagnostics;
mod ppc;
mod query;
mod sampler;
mod samples;
mod summary;

pub use config::{ConfigError, InitStrategy, McmcConfig};
pub use diagnostics::{quantile_type7, split_ess, split_rhat, DiagnosticError};
pub use ppc::{posterior_predictive, PpcError, PpcReport, PpcStatistic, TestStatistic};
pub use query::{posterior_probability, Comparator, ProbQuery, QueryError};
pub use sampler::{
    adapt_scale, initialize_chain, ChainState, InitError, Sampler, ScaleAdapter, Transform,
    ADAPT_BATCH,
};
pub use samples::{
    resolve_monitors, run_mcmc, ChainStats, McmcError, PosteriorSamples, DIVERGENCE_RHAT,
};
pub use summary::{summarize, SummaryRow, SummaryTable, QUANTILE_PROBS};

/// Split-chain R-hat for every monitored quantity.
pub fn rhat(samples: &PosteriorSamples) -> Result<Vec<f64>, DiagnosticError> {
    samples.rhat()
}

/// Effective sample size for every monitored quantity.
pub fn ess(samples: &PosteriorSamples) -> Result<Vec<f64>, DiagnosticError> {
    samples.ess()
}
