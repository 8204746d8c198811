//! Two-stage adaptive trial execution and Monte Carlo operating
//! characteristics.

mod oc;
mod rules;
mod trial;

pub use oc::{
    run_oc_simulation, FailedReplicate, OcOptions, OcReport, OperatingCharacteristics,
    SimulationError, DEFAULT_MAX_FAILURE_FRACTION,
};
pub use rules::{
    decide_final, decide_interim, evaluate_final, evaluate_interim, FinalVariant, InterimDecision,
    InterimVariant,
};
pub use trial::{
    data_stream, mcmc_seed, replicate_seed, run_single_trial, run_single_trial_traced,
    ReplicateRecord, TrialError, TrialOutcome, TrialTrace, STREAM_DATA_STAGE1, STREAM_DATA_STAGE2,
    STREAM_MCMC_FINAL, STREAM_MCMC_INTERIM,
};

use crate::design::{stage_analysis_data, GenerateError, TrialDesign};
use crate::graph::Dataset;

/// The dataset `generate-data --stage k` writes for a replicate seed: the
/// stage's new cohort under accumulation, or the regenerated cumulative
/// cohort under full regeneration. Stage 1 matches the interim data of
/// [`run_single_trial`] with the same seed.
pub fn stage_cohort(
    design: &TrialDesign,
    stage: usize,
    seed: u64,
) -> Result<Dataset, GenerateError> {
    stage_analysis_data(
        design,
        stage,
        &Dataset::new(),
        &mut data_stream(seed, stage),
    )
}
