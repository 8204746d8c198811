use serde::Serialize;
use thiserror::Error;

use super::samples::PosteriorSamples;
use crate::distributions::EvalError;
use crate::graph::GraphModel;
use crate::rng::RandomStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PpcError {
    #[error("samples carry {got} latent parameters but the graph has {expected}")]
    Mismatch { expected: usize, got: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TestStatistic {
    Mean,
    Sd,
    Min,
    Max,
}

impl TestStatistic {
    pub const ALL: [TestStatistic; 4] = [
        TestStatistic::Mean,
        TestStatistic::Sd,
        TestStatistic::Min,
        TestStatistic::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestStatistic::Mean => "mean",
            TestStatistic::Sd => "sd",
            TestStatistic::Min => "min",
            TestStatistic::Max => "max",
        }
    }

    pub fn compute(self, x: &[f64]) -> f64 {
        let n = x.len() as f64;
        match self {
            TestStatistic::Mean => x.iter().sum::<f64>() / n,
            TestStatistic::Sd => {
                let m = x.iter().sum::<f64>() / n;
                (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            }
            TestStatistic::Min => x.iter().copied().fold(f64::INFINITY, f64::min),
            TestStatistic::Max => x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PpcStatistic {
    pub statistic: TestStatistic,
    pub observed: f64,
    pub replicated: Vec<f64>,
    /// Fraction of replicates with `T(y_rep) >= T(y_obs)`.
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PpcReport {
    pub n_rep: usize,
    pub statistics: Vec<PpcStatistic>,
}

impl PpcReport {
    pub fn get(&self, statistic: TestStatistic) -> Option<&PpcStatistic> {
        self.statistics.iter().find(|s| s.statistic == statistic)
    }
}

/// Replicate every observed node from `n_rep` evenly strided posterior draws
/// and compare test statistics of the replicated and observed vectors.
pub fn posterior_predictive(
    graph: &GraphModel,
    samples: &PosteriorSamples,
    n_rep: usize,
    rng: &mut RandomStream,
) -> Result<PpcReport, PpcError> {
    let expected = graph.parameter_ids().len();
    if samples.latent_names.len() != expected {
        return Err(PpcError::Mismatch {
            expected,
            got: samples.latent_names.len(),
        });
    }
    let observed_ids = graph.observed_ids();
    let total = samples.n_pooled();
    if n_rep == 0 || total == 0 || observed_ids.is_empty() {
        return Ok(PpcReport {
            n_rep: 0,
            statistics: Vec::new(),
        });
    }
    let base = graph.blank_values();
    let y_obs: Vec<f64> = observed_ids.iter().map(|&id| base[id]).collect();
    let mut replicated = vec![Vec::with_capacity(n_rep); TestStatistic::ALL.len()];
    let mut y_rep = vec![0.0; observed_ids.len()];
    for r in 0..n_rep {
        let index = r * total / n_rep;
        let values = graph.eval_deterministic(samples.latent_draw(index))?;
        for (slot, &id) in y_rep.iter_mut().zip(observed_ids) {
            *slot = graph.node_distribution(id, &values)?.sample_unchecked(rng);
        }
        for (stat, out) in TestStatistic::ALL.iter().zip(&mut replicated) {
            out.push(stat.compute(&y_rep));
        }
    }
    let statistics = TestStatistic::ALL
        .iter()
        .zip(replicated)
        .map(|(&statistic, replicated)| {
            let observed = statistic.compute(&y_obs);
            let p_value =
                replicated.iter().filter(|&&t| t >= observed).count() as f64 / n_rep as f64;
            PpcStatistic {
                statistic,
                observed,
                replicated,
                p_value,
            }
        })
        .collect();
    Ok(PpcReport { n_rep, statistics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_model;
    use crate::graph::{compile, Dataset};
    use crate::inference::{run_mcmc, McmcConfig};
    use rand::Rng;
    use rand_distr::StandardNormal;

    const MODEL: &str = "model { for (i in 1:n) { y[i] ~ dnorm(mu, tau) }\n mu ~ dnorm(0, 0.01)\n tau ~ dgamma(1, 1) }";

    fn fit(y: &[f64], seed: u64) -> (GraphModel, PosteriorSamples) {
        let mut d = Dataset::new();
        d.add_values("y", y).unwrap();
        let g = compile(&parse_model(MODEL).unwrap(), &d).unwrap();
        let cfg = McmcConfig {
            n_chains: 2,
            burn_in: 500,
            iterations: 1000,
            seed,
            ..Default::default()
        };
        let s = run_mcmc(&g, &cfg).unwrap();
        (g, s)
    }

    #[test]
    fn zero_replicates_is_empty() {
        let (g, s) = fit(&[0.1, 0.5, -0.3, 1.0], 1);
        let r = posterior_predictive(&g, &s, 0, &mut RandomStream::new(1)).unwrap();
        assert_eq!(r.n_rep, 0);
        assert!(r.statistics.is_empty());
    }

    #[test]
    fn self_consistent_data_gives_central_p_values() {
        let mut central = 0;
        let runs = 10;
        for run in 0..runs {
            let mut rng = RandomStream::new(100 + run);
            let y: Vec<f64> = (0..50)
                .map(|_| 2.0 + rng.sample::<f64, _>(StandardNormal))
                .collect();
            let (g, s) = fit(&y, run);
            let r = posterior_predictive(&g, &s, 200, &mut rng).unwrap();
            let p = r.get(TestStatistic::Mean).unwrap().p_value;
            if (0.05..=0.95).contains(&p) {
                central += 1;
            }
            assert_eq!(r.get(TestStatistic::Sd).unwrap().replicated.len(), 200);
        }
        assert!(central >= 9, "{central} of {runs}");
    }

    #[test]
    fn misfit_shows_in_extremes() {
        let mut y = vec![0.0; 40];
        y.push(60.0);
        let (g, s) = fit(&y, 3);
        let r = posterior_predictive(&g, &s, 200, &mut RandomStream::new(3)).unwrap();
        assert!(r.get(TestStatistic::Max).unwrap().p_value < 0.05);
    }

    #[test]
    fn mismatched_graph_rejected() {
        let (g, _) = fit(&[0.0, 1.0, 2.0, 3.0], 1);
        let s = PosteriorSamples::from_draws(vec!["mu".into()], vec![vec![vec![0.0]]]);
        assert!(matches!(
            posterior_predictive(&g, &s, 5, &mut RandomStream::new(0)),
            Err(PpcError::Mismatch { .. })
        ));
    }
}
