use std::collections::HashSet;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distributions::Builtin;
use crate::dsl::{
    check_semantics, parse_expression, parse_model_with, Expression, ModelAst, ParseOptions,
    Relation, Severity,
};
use crate::inference::McmcConfig;

/// One problem found while loading a trial specification, located by a
/// dotted field path such as `rules.interim.efficacy.prob_threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct SpecError {
    pub violations: Vec<Violation>,
}

impl SpecError {
    fn single(path: impl Into<String>, message: impl Into<String>) -> Self {
        SpecError {
            violations: vec![Violation {
                path: path.into(),
                message: message.into(),
            }],
        }
    }

    pub fn paths(&self) -> Vec<&str> {
        self.violations.iter().map(|v| v.path.as_str()).collect()
    }
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid trial spec:")?;
        for v in &self.violations {
            write!(f, "\n  {v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CovariateGenerator {
    /// Normal draw parameterized by standard deviation; values below
    /// `lower_truncation` are clamped up to it.
    NormalBySd {
        mean: f64,
        sd: f64,
        #[serde(default)]
        lower_truncation: Option<f64>,
    },
    Constant {
        value: f64,
    },
    /// Deterministic arm assignment: the first block of rows is arm 0, the
    /// rest arm 1, split by `ratio` (control : treatment).
    BlockTreatment {
        ratio: [u32; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateSpec {
    pub name: String,
    pub generator: CovariateGenerator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Noise {
    NormalBySd { sd: f64 },
    Bernoulli,
    Poisson,
}

fn default_outcome_name() -> String {
    "Y".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSpec {
    #[serde(default = "default_outcome_name")]
    pub name: String,
    /// Truth mean over covariates and truth parameters. `center(col)` is the
    /// covariate minus its cohort mean.
    pub mean_expression: String,
    pub noise: Noise,
    #[serde(default)]
    pub truth_params: IndexMap<String, f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StagePlan {
    pub stage_index: usize,
    /// Patients added to each arm in this stage.
    pub n_per_arm: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Threshold {
    pub delta: f64,
    pub prob_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterimRules {
    pub efficacy: Threshold,
    pub futility: Threshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionRule {
    pub effect_parameter: String,
    pub interim: InterimRules,
    #[serde(rename = "final")]
    pub final_rule: Threshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataAccumulation {
    /// Later analyses use earlier patients plus the new cohort.
    #[default]
    Accumulate,
    /// Each later analysis draws a fresh cohort of the cumulative size.
    RegenerateFull,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrialSpecFile {
    covariates: Vec<CovariateSpec>,
    outcome: OutcomeSpec,
    stages: Vec<StagePlan>,
    analysis_model: String,
    #[serde(default)]
    mcmc: McmcConfig,
    rules: DecisionRule,
    #[serde(default)]
    data_accumulation: DataAccumulation,
}

/// A validated trial specification with its analysis model and truth mean
/// already parsed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDesign {
    pub covariates: Vec<CovariateSpec>,
    pub outcome: OutcomeSpec,
    pub stages: Vec<StagePlan>,
    pub analysis_model: String,
    pub model_ast: ModelAst,
    pub mean_ast: Expression,
    pub mcmc: McmcConfig,
    pub rules: DecisionRule,
    pub data_accumulation: DataAccumulation,
}

impl TrialDesign {
    /// Cumulative patients per arm after `stage` (1-based).
    pub fn cumulative_per_arm(&self, stage: usize) -> usize {
        self.stages.iter().take(stage).map(|s| s.n_per_arm).sum()
    }

    /// Column order of generated datasets: outcome, then covariates.
    pub fn column_names(&self) -> Vec<&str> {
        std::iter::once(self.outcome.name.as_str())
            .chain(self.covariates.iter().map(|c| c.name.as_str()))
            .collect()
    }

    /// Serialize back to the spec file format.
    pub fn to_json(&self) -> String {
        let file = TrialSpecFile {
            covariates: self.covariates.clone(),
            outcome: self.outcome.clone(),
            stages: self.stages.clone(),
            analysis_model: self.analysis_model.clone(),
            mcmc: self.mcmc.clone(),
            rules: self.rules.clone(),
            data_accumulation: self.data_accumulation,
        };
        serde_json::to_string_pretty(&file).expect("spec serializes")
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Violation {
            path: path.into(),
            message: message.into(),
        });
    }
}

fn check_probability(c: &mut Collector, path: &str, t: &Threshold) {
    if !t.delta.is_finite() {
        c.push(format!("{path}.delta"), "must be finite");
    }
    if !(0.0..=1.0).contains(&t.prob_threshold) {
        c.push(
            format!("{path}.prob_threshold"),
            format!("must lie in [0, 1], got {}", t.prob_threshold),
        );
    }
}

fn check_mean_expression(
    c: &mut Collector,
    e: &Expression,
    covariates: &HashSet<&str>,
    truth: &IndexMap<String, f64>,
) {
    match e {
        Expression::Number(_) => {}
        Expression::Var(v) => {
            if v.index.is_some() {
                c.push(
                    "outcome.mean_expression",
                    format!("{} must not be indexed", v.name),
                );
            } else if !covariates.contains(v.name.as_str()) && !truth.contains_key(&v.name) {
                c.push(
                    "outcome.mean_expression",
                    format!(
                        "{} is neither a declared covariate nor a truth parameter",
                        v.name
                    ),
                );
            }
        }
        Expression::Binary { left, right, .. } => {
            check_mean_expression(c, left, covariates, truth);
            check_mean_expression(c, right, covariates, truth);
        }
        Expression::Call { name, args, .. } if name == "center" => match args.as_slice() {
            [Expression::Var(v)] if v.index.is_none() && covariates.contains(v.name.as_str()) => {}
            _ => c.push(
                "outcome.mean_expression",
                "center() takes one declared covariate",
            ),
        },
        Expression::Call { name, args, .. } => {
            match Builtin::from_name(name) {
                None => c.push(
                    "outcome.mean_expression",
                    format!("unknown function {name}"),
                ),
                Some(b) if b.arity() != args.len() => c.push(
                    "outcome.mean_expression",
                    format!(
                        "{name} expects {} argument(s), got {}",
                        b.arity(),
                        args.len()
                    ),
                ),
                Some(_) => {}
            }
            for a in args {
                check_mean_expression(c, a, covariates, truth);
            }
        }
    }
}

/// Parse and validate a JSON trial specification. Structural problems
/// (missing keys, wrong types) are reported with the offending path; all
/// semantic problems are collected and reported together.
pub fn load_trial_spec(text: &str) -> Result<TrialDesign, SpecError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: TrialSpecFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." {
            "<root>".to_string()
        } else {
            path
        };
        SpecError::single(path, e.into_inner().to_string())
    })?;
    let mut c = Collector(Vec::new());

    let mut names = HashSet::new();
    names.insert(file.outcome.name.as_str());
    for (i, cov) in file.covariates.iter().enumerate() {
        let path = format!("covariates[{i}]");
        if !names.insert(cov.name.as_str()) {
            c.push(
                format!("{path}.name"),
                format!("{} is declared twice", cov.name),
            );
        }
        if cov.name == "n" {
            c.push(format!("{path}.name"), "n is reserved for the row count");
        }
        match &cov.generator {
            CovariateGenerator::NormalBySd {
                mean,
                sd,
                lower_truncation,
            } => {
                if !mean.is_finite() {
                    c.push(
                        format!("{path}.generator.normal_by_sd.mean"),
                        "must be finite",
                    );
                }
                if !(*sd > 0.0 && sd.is_finite()) {
                    c.push(
                        format!("{path}.generator.normal_by_sd.sd"),
                        format!("must be positive, got {sd}"),
                    );
                }
                if lower_truncation.is_some_and(|l| !l.is_finite()) {
                    c.push(
                        format!("{path}.generator.normal_by_sd.lower_truncation"),
                        "must be finite",
                    );
                }
            }
            CovariateGenerator::Constant { value } => {
                if !value.is_finite() {
                    c.push(format!("{path}.generator.constant.value"), "must be finite");
                }
            }
            CovariateGenerator::BlockTreatment { ratio } => {
                if ratio.contains(&0) {
                    c.push(
                        format!("{path}.generator.block_treatment.ratio"),
                        "both arms need a positive share",
                    );
                }
            }
        }
    }

    if let Noise::NormalBySd { sd } = file.outcome.noise {
        if !(sd > 0.0 && sd.is_finite()) {
            c.push(
                "outcome.noise.normal_by_sd.sd",
                format!("must be positive, got {sd}"),
            );
        }
    }
    for (name, v) in &file.outcome.truth_params {
        if !v.is_finite() {
            c.push(format!("outcome.truth_params.{name}"), "must be finite");
        }
    }
    let covariate_names: HashSet<&str> = file.covariates.iter().map(|c| c.name.as_str()).collect();
    let mean_ast = match parse_expression(&file.outcome.mean_expression) {
        Ok(e) => {
            check_mean_expression(&mut c, &e, &covariate_names, &file.outcome.truth_params);
            Some(e)
        }
        Err(e) => {
            c.push("outcome.mean_expression", e.to_string());
            None
        }
    };

    if file.stages.is_empty() {
        c.push("stages", "at least one stage is required");
    }
    for (i, s) in file.stages.iter().enumerate() {
        if s.stage_index != i + 1 {
            c.push(
                format!("stages[{i}].stage_index"),
                format!("expected {}, got {}", i + 1, s.stage_index),
            );
        }
        if s.n_per_arm == 0 {
            c.push(format!("stages[{i}].n_per_arm"), "must be positive");
        }
    }

    if let Err(e) = file.mcmc.validate() {
        c.push(format!("mcmc.{}", e.field), e.message);
    }

    check_probability(
        &mut c,
        "rules.interim.efficacy",
        &file.rules.interim.efficacy,
    );
    check_probability(
        &mut c,
        "rules.interim.futility",
        &file.rules.interim.futility,
    );
    check_probability(&mut c, "rules.final", &file.rules.final_rule);

    let model_ast = match parse_model_with(
        &file.analysis_model,
        "analysis_model",
        ParseOptions::default(),
    ) {
        Ok(ast) => {
            let mut data_names: HashSet<String> = names.iter().map(|s| s.to_string()).collect();
            data_names.insert("n".to_string());
            for d in check_semantics(&ast, &data_names) {
                if d.severity == Severity::Error {
                    c.push("analysis_model", d.to_string());
                }
            }
            let effect = &file.rules.effect_parameter;
            let mut found = false;
            ast.walk_relations(&mut |rel, _| {
                if let Relation::Stochastic { target, .. } = rel {
                    found |= target.name == *effect && target.index.is_none();
                }
            });
            if !found || names.contains(effect.as_str()) {
                c.push(
                    "rules.effect_parameter",
                    format!("{effect} is not a scalar stochastic parameter of the analysis model"),
                );
            }
            Some(ast)
        }
        Err(e) => {
            c.push("analysis_model", e.to_string());
            None
        }
    };

    if !c.0.is_empty() {
        return Err(SpecError { violations: c.0 });
    }
    Ok(TrialDesign {
        covariates: file.covariates,
        outcome: file.outcome,
        stages: file.stages,
        analysis_model: file.analysis_model,
        model_ast: model_ast.expect("validated"),
        mean_ast: mean_ast.expect("validated"),
        mcmc: file.mcmc,
        rules: file.rules,
        data_accumulation: file.data_accumulation,
    })
}
