use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Draw each parameter from its prior in topological order. Very diffuse
    /// normal and gamma priors start at their means instead.
    #[default]
    PriorDraw,
    /// Interval midpoint for uniform priors, prior mean otherwise.
    FixedDefaults,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid MCMC setting {field}: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

/// Sampler settings. The defaults are three chains, 5000 burn-in sweeps and
/// 10000 recorded sweeps without thinning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub n_chains: usize,
    pub burn_in: usize,
    pub iterations: usize,
    pub thinning: usize,
    pub seed: u64,
    pub target_acceptance: f64,
    pub init_strategy: InitStrategy,
    /// Node or variable names to record. Empty means every scalar parameter
    /// and scalar deterministic node.
    pub monitor: Vec<String>,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_chains: 3,
            burn_in: 5000,
            iterations: 10000,
            thinning: 1,
            seed: 1,
            target_acceptance: 0.44,
            init_strategy: InitStrategy::PriorDraw,
            monitor: Vec::new(),
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |field, message: &str| {
            Err(ConfigError {
                field,
                message: message.to_string(),
            })
        };
        if self.n_chains == 0 {
            return err("n_chains", "must be at least 1");
        }
        if self.iterations == 0 {
            return err("iterations", "must be at least 1");
        }
        if self.thinning == 0 {
            return err("thinning", "must be at least 1");
        }
        if self.thinning > self.iterations {
            return err("thinning", "exceeds iterations, nothing would be recorded");
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return err("target_acceptance", "must lie in (0, 1)");
        }
        Ok(())
    }

    /// Recorded draws per chain.
    pub fn kept_per_chain(&self) -> usize {
        self.iterations / self.thinning
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = McmcConfig::default();
        assert_eq!(
            (c.n_chains, c.burn_in, c.iterations, c.thinning),
            (3, 5000, 10000, 1)
        );
        assert_eq!(c.target_acceptance, 0.44);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn partial_json_uses_defaults() {
        let c: McmcConfig =
            serde_json::from_str(r#"{"burn_in": 10, "init_strategy": "fixed_defaults"}"#).unwrap();
        assert_eq!(c.burn_in, 10);
        assert_eq!(c.iterations, 10000);
        assert_eq!(c.init_strategy, InitStrategy::FixedDefaults);
        assert!(serde_json::from_str::<McmcConfig>(r#"{"chains": 2}"#).is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = McmcConfig {
            thinning: 0,
            ..Default::default()
        };
        assert_eq!(c.validate().unwrap_err().field, "thinning");
        c.thinning = 1;
        c.target_acceptance = 1.0;
        assert_eq!(c.validate().unwrap_err().field, "target_acceptance");
    }
}
