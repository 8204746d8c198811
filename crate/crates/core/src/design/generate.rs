use thiserror::Error;

use super::spec::{CovariateGenerator, CovariateSpec, DataAccumulation, Noise, TrialDesign};
use crate::distributions::{Builtin, DistKind, EvalError, NormalBySd, ParamError};
use crate::dsl::Expression;
use crate::graph::{CompiledExpr, DataError, Dataset};
use crate::rng::RandomStream;

#[derive(Debug, Error)]
pub enum GenerateError {
    #[error("row {row}: {source}")]
    Eval { row: usize, source: EvalError },
    #[error("row {row}: {source}")]
    Noise { row: usize, source: ParamError },
    #[error("stage {stage} requested but the design has {stages} stage(s)")]
    NoSuchStage { stage: usize, stages: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

impl CovariateSpec {
    /// Draw `n_per_arm * 2` values for a two-arm cohort.
    pub fn generate(&self, n_per_arm: usize, rng: &mut RandomStream) -> Vec<f64> {
        let rows = 2 * n_per_arm;
        match self.generator {
            CovariateGenerator::NormalBySd {
                mean,
                sd,
                lower_truncation,
            } => {
                let dist = NormalBySd { mean, sd }
                    .to_precision_form()
                    .expect("sd validated at load");
                (0..rows)
                    .map(|_| {
                        let x = dist.sample_unchecked(rng);
                        lower_truncation.map_or(x, |l| x.max(l))
                    })
                    .collect()
            }
            CovariateGenerator::Constant { value } => vec![value; rows],
            CovariateGenerator::BlockTreatment { ratio } => {
                let control = control_rows(rows, ratio);
                (0..rows)
                    .map(|i| if i < control { 0.0 } else { 1.0 })
                    .collect()
            }
        }
    }
}

/// Rows assigned to arm 0 out of `rows`, rounding to nearest.
fn control_rows(rows: usize, [a, b]: [u32; 2]) -> usize {
    let share = a as f64 / (a as f64 + b as f64);
    ((rows as f64 * share).round() as usize).min(rows)
}

fn compile_mean(e: &Expression, design: &TrialDesign) -> CompiledExpr {
    let ncov = design.covariates.len();
    let slot = |name: &str| design.covariates.iter().position(|c| c.name == name);
    match e {
        Expression::Number(v) => CompiledExpr::Const(*v),
        Expression::Var(v) => match slot(&v.name) {
            Some(j) => CompiledExpr::Node(j),
            None => CompiledExpr::Const(design.outcome.truth_params[&v.name]),
        },
        Expression::Binary { op, left, right } => CompiledExpr::Binary(
            *op,
            Box::new(compile_mean(left, design)),
            Box::new(compile_mean(right, design)),
        ),
        Expression::Call { name, args, .. } if name == "center" => match &args[0] {
            Expression::Var(v) => {
                CompiledExpr::Node(ncov + slot(&v.name).expect("validated covariate"))
            }
            _ => unreachable!("validated center() argument"),
        },
        Expression::Call { name, args, .. } => CompiledExpr::Call(
            Builtin::from_name(name).expect("validated function"),
            args.iter().map(|a| compile_mean(a, design)).collect(),
        ),
    }
}

/// Generate one two-arm cohort of `n_per_arm` patients per arm: covariates
/// in declaration order, then the outcome from the truth mean plus noise.
/// Stored covariates are raw; `center()` only affects the truth mean.
pub fn generate_cohort_sized(
    design: &TrialDesign,
    n_per_arm: usize,
    rng: &mut RandomStream,
) -> Result<Dataset, GenerateError> {
    let columns: Vec<Vec<f64>> = design
        .covariates
        .iter()
        .map(|c| c.generate(n_per_arm, rng))
        .collect();
    let rows = 2 * n_per_arm;
    let centered: Vec<Vec<f64>> = columns
        .iter()
        .map(|col| {
            let m = col.iter().sum::<f64>() / col.len().max(1) as f64;
            col.iter().map(|x| x - m).collect()
        })
        .collect();
    let mean = compile_mean(&design.mean_ast, design);
    let mut buf = vec![0.0; 2 * columns.len()];
    let mut y = Vec::with_capacity(rows);
    for row in 0..rows {
        for (j, (raw, cen)) in columns.iter().zip(&centered).enumerate() {
            buf[j] = raw[row];
            buf[columns.len() + j] = cen[row];
        }
        let mu = mean.eval(&buf).map_err(|source| GenerateError::Eval {
            row: row + 1,
            source,
        })?;
        let dist = match design.outcome.noise {
            Noise::NormalBySd { sd } => NormalBySd { mean: mu, sd }.to_precision_form(),
            Noise::Bernoulli => DistKind::Bernoulli.build(&[mu]),
            Noise::Poisson => DistKind::Poisson.build(&[mu]),
        }
        .map_err(|source| GenerateError::Noise {
            row: row + 1,
            source,
        })?;
        y.push(dist.sample_unchecked(rng));
    }
    let mut ds = Dataset::new();
    ds.add_values(&design.outcome.name, &y)?;
    for (spec, col) in design.covariates.iter().zip(&columns) {
        ds.add_values(&spec.name, col)?;
    }
    Ok(ds)
}

/// New patients enrolled in `stage` (1-based).
pub fn generate_cohort(
    design: &TrialDesign,
    stage: usize,
    rng: &mut RandomStream,
) -> Result<Dataset, GenerateError> {
    let plan = design
        .stages
        .get(stage.wrapping_sub(1))
        .ok_or(GenerateError::NoSuchStage {
            stage,
            stages: design.stages.len(),
        })?;
    generate_cohort_sized(design, plan.n_per_arm, rng)
}

/// Data analysed at `stage` given the previous analysis dataset. Under
/// accumulation the new cohort is appended; under full regeneration a fresh
/// cohort of the cumulative size replaces everything.
pub fn stage_analysis_data(
    design: &TrialDesign,
    stage: usize,
    previous: &Dataset,
    rng: &mut RandomStream,
) -> Result<Dataset, GenerateError> {
    if stage == 0 || stage > design.stages.len() {
        return Err(GenerateError::NoSuchStage {
            stage,
            stages: design.stages.len(),
        });
    }
    match design.data_accumulation {
        DataAccumulation::Accumulate => {
            let cohort = generate_cohort(design, stage, rng)?;
            Ok(merge_datasets(previous, &cohort)?)
        }
        DataAccumulation::RegenerateFull => {
            generate_cohort_sized(design, design.cumulative_per_arm(stage), rng)
        }
    }
}

/// Row concatenation with `n` updated to the combined row count.
pub fn merge_datasets(a: &Dataset, b: &Dataset) -> Result<Dataset, DataError> {
    a.merge(b)
}
