use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::rules::{evaluate_final, evaluate_interim, FinalVariant, InterimVariant};
use crate::design::{generate_cohort, stage_analysis_data, GenerateError, TrialDesign};
use crate::graph::{compile, CompileError, Dataset};
use crate::inference::{run_mcmc, McmcError, PosteriorSamples, QueryError};
use crate::rng::{mix_seed, RandomStream};

/// Fixed-purpose substream ids derived from a replicate seed.
pub const STREAM_DATA_STAGE1: u64 = 0;
pub const STREAM_MCMC_INTERIM: u64 = 1;
pub const STREAM_DATA_STAGE2: u64 = 2;
pub const STREAM_MCMC_FINAL: u64 = 3;

/// Seed of replicate `index` under `master_seed`. Injective in `index`.
pub fn replicate_seed(master_seed: u64, index: u64) -> u64 {
    mix_seed(master_seed, index)
}

/// Random stream used to generate the data analysed at `stage` (1 or 2).
pub fn data_stream(replicate_seed: u64, stage: usize) -> RandomStream {
    let purpose = if stage <= 1 {
        STREAM_DATA_STAGE1
    } else {
        STREAM_DATA_STAGE2
    };
    RandomStream::substream(replicate_seed, purpose)
}

/// MCMC seed for the analysis at `stage` (1 or 2).
pub fn mcmc_seed(replicate_seed: u64, stage: usize) -> u64 {
    let purpose = if stage <= 1 {
        STREAM_MCMC_INTERIM
    } else {
        STREAM_MCMC_FINAL
    };
    mix_seed(replicate_seed, purpose)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TrialOutcome {
    EarlySuccess,
    EarlyFutility,
    FinalSuccess,
    FinalFailure,
}

impl TrialOutcome {
    pub const ALL: [TrialOutcome; 4] = [
        TrialOutcome::EarlySuccess,
        TrialOutcome::EarlyFutility,
        TrialOutcome::FinalSuccess,
        TrialOutcome::FinalFailure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrialOutcome::EarlySuccess => "EarlySuccess",
            TrialOutcome::EarlyFutility => "EarlyFutility",
            TrialOutcome::FinalSuccess => "FinalSuccess",
            TrialOutcome::FinalFailure => "FinalFailure",
        }
    }

    pub fn is_success(self) -> bool {
        matches!(
            self,
            TrialOutcome::EarlySuccess | TrialOutcome::FinalSuccess
        )
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TrialOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateRecord {
    pub replicate_index: usize,
    pub outcome: TrialOutcome,
    pub p_eff: f64,
    pub p_fut: f64,
    /// Present only when the trial continued to the final analysis.
    pub final_prob: Option<f64>,
    pub total_n: usize,
    pub seed_used: u64,
    /// Some analysis had a monitored R-hat above 1.1.
    pub diagnostics_flag: bool,
}

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("the simulator supports exactly 2 stages, the design has {0}")]
    StageCount(usize),
    #[error("data generation: {0}")]
    Generate(#[from] GenerateError),
    #[error("model compilation: {0}")]
    Compile(#[from] CompileError),
    #[error("sampling: {0}")]
    Mcmc(#[from] McmcError),
    #[error("decision rule: {0}")]
    Query(#[from] QueryError),
}

/// A replicate together with the data each analysis saw.
#[derive(Debug, Clone)]
pub struct TrialTrace {
    pub record: ReplicateRecord,
    pub interim_data: Dataset,
    pub final_data: Option<Dataset>,
}

fn analyse(
    design: &TrialDesign,
    data: &Dataset,
    seed: u64,
) -> Result<PosteriorSamples, TrialError> {
    let graph = compile(&design.model_ast, data)?;
    let mut config = design.mcmc.clone();
    config.seed = seed;
    Ok(run_mcmc(&graph, &config)?)
}

/// One two-stage trial: interim cohort, analysis, decision and, on
/// continuation, the stage-two data and final analysis. Early stops perform
/// no further analysis; the interim probabilities are the terminal evidence.
pub fn run_single_trial_traced(
    design: &TrialDesign,
    replicate_seed: u64,
) -> Result<TrialTrace, TrialError> {
    if design.stages.len() != 2 {
        return Err(TrialError::StageCount(design.stages.len()));
    }
    let interim_data = generate_cohort(design, 1, &mut data_stream(replicate_seed, 1))?;
    let interim = analyse(design, &interim_data, mcmc_seed(replicate_seed, 1))?;
    let decision = evaluate_interim(&interim, &design.rules)?;
    let mut record = ReplicateRecord {
        replicate_index: 0,
        outcome: TrialOutcome::EarlySuccess,
        p_eff: decision.p_eff,
        p_fut: decision.p_fut,
        final_prob: None,
        total_n: interim_data.row_count(),
        seed_used: replicate_seed,
        diagnostics_flag: interim.has_divergence(),
    };
    match decision.variant {
        InterimVariant::EarlySuccess => {}
        InterimVariant::EarlyFutility => record.outcome = TrialOutcome::EarlyFutility,
        InterimVariant::Continue => {
            let final_data = stage_analysis_data(
                design,
                2,
                &interim_data,
                &mut data_stream(replicate_seed, 2),
            )?;
            let fin = analyse(design, &final_data, mcmc_seed(replicate_seed, 2))?;
            let (variant, p) = evaluate_final(&fin, &design.rules)?;
            record.outcome = match variant {
                FinalVariant::FinalSuccess => TrialOutcome::FinalSuccess,
                FinalVariant::FinalFailure => TrialOutcome::FinalFailure,
            };
            record.final_prob = Some(p);
            record.total_n = final_data.row_count();
            record.diagnostics_flag |= fin.has_divergence();
            return Ok(TrialTrace {
                record,
                interim_data,
                final_data: Some(final_data),
            });
        }
    }
    Ok(TrialTrace {
        record,
        interim_data,
        final_data: None,
    })
}

pub fn run_single_trial(
    design: &TrialDesign,
    replicate_seed: u64,
) -> Result<ReplicateRecord, TrialError> {
    run_single_trial_traced(design, replicate_seed).map(|t| t.record)
}
