use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::trial::{replicate_seed, run_single_trial, ReplicateRecord, TrialOutcome};
use crate::design::TrialDesign;

pub const DEFAULT_MAX_FAILURE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FailedReplicate {
    pub replicate_index: usize,
    pub seed_used: u64,
    pub message: String,
}

/// Frequency summary over the successful replicates. Array fields follow
/// [`TrialOutcome::ALL`] order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OperatingCharacteristics {
    pub n_replicates: usize,
    pub n_failed: usize,
    pub counts: [usize; 4],
    pub proportions: [f64; 4],
    pub mc_standard_errors: [f64; 4],
    pub any_success_rate: f64,
    pub any_success_se: f64,
    pub expected_sample_size: f64,
    pub divergent_replicate_count: usize,
}

fn mc_se(p: f64, n: usize) -> f64 {
    if n == 0 {
        f64::NAN
    } else {
        (p * (1.0 - p) / n as f64).sqrt()
    }
}

impl OperatingCharacteristics {
    pub fn from_records(records: &[ReplicateRecord], n_failed: usize) -> Self {
        let n = records.len();
        let mut counts = [0usize; 4];
        for r in records {
            counts[r.outcome.index()] += 1;
        }
        let proportions = counts.map(|c| {
            if n == 0 {
                f64::NAN
            } else {
                c as f64 / n as f64
            }
        });
        let successes = records.iter().filter(|r| r.outcome.is_success()).count();
        let any_success_rate = if n == 0 {
            f64::NAN
        } else {
            successes as f64 / n as f64
        };
        let expected_sample_size = if n == 0 {
            f64::NAN
        } else {
            records.iter().map(|r| r.total_n as f64).sum::<f64>() / n as f64
        };
        OperatingCharacteristics {
            n_replicates: n,
            n_failed,
            counts,
            proportions,
            mc_standard_errors: proportions.map(|p| mc_se(p, n)),
            any_success_rate,
            any_success_se: mc_se(any_success_rate, n),
            expected_sample_size,
            divergent_replicate_count: records.iter().filter(|r| r.diagnostics_flag).count(),
        }
    }

    pub fn proportion(&self, outcome: TrialOutcome) -> f64 {
        self.proportions[outcome.index()]
    }

    /// Aligned table for terminal output.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<22} {:>7} {:>11} {:>9}",
            "outcome", "count", "proportion", "mc_se"
        );
        for o in TrialOutcome::ALL {
            let i = o.index();
            let _ = writeln!(
                out,
                "{:<22} {:>7} {:>11.4} {:>9.4}",
                o.name(),
                self.counts[i],
                self.proportions[i],
                self.mc_standard_errors[i]
            );
        }
        let total: f64 = self.proportions.iter().sum();
        let _ = writeln!(
            out,
            "{:<22} {:>7} {:>11.4}",
            "total", self.n_replicates, total
        );
        let successes = self.counts[TrialOutcome::EarlySuccess.index()]
            + self.counts[TrialOutcome::FinalSuccess.index()];
        let _ = writeln!(
            out,
            "{:<22} {:>7} {:>11.4} {:>9.4}",
            "any_success", successes, self.any_success_rate, self.any_success_se
        );
        let _ = writeln!(
            out,
            "{:<22} {:>7.1}",
            "expected_sample_size", self.expected_sample_size
        );
        let _ = writeln!(out, "{:<22} {:>7}", "failed_replicates", self.n_failed);
        let _ = writeln!(
            out,
            "{:<22} {:>7}",
            "divergent_replicates", self.divergent_replicate_count
        );
        out
    }

    /// CSV with columns `outcome, count, proportion, mc_se`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["outcome", "count", "proportion", "mc_se"])
            .expect("in-memory write");
        for o in TrialOutcome::ALL {
            let i = o.index();
            w.write_record([
                o.name().to_string(),
                self.counts[i].to_string(),
                self.proportions[i].to_string(),
                self.mc_standard_errors[i].to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OcReport {
    pub oc: OperatingCharacteristics,
    pub records: Vec<ReplicateRecord>,
    pub failures: Vec<FailedReplicate>,
}

impl OcReport {
    /// Per-replicate CSV, failed replicates included with their error.
    pub fn write_replicate_log<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "replicate_index",
            "outcome",
            "p_eff",
            "p_fut",
            "final_prob",
            "total_n",
            "seed_used",
            "diagnostics_flag",
            "error",
        ])?;
        let mut rows: Vec<(usize, Vec<String>)> = self
            .records
            .iter()
            .map(|r| {
                (
                    r.replicate_index,
                    vec![
                        r.replicate_index.to_string(),
                        r.outcome.name().to_string(),
                        r.p_eff.to_string(),
                        r.p_fut.to_string(),
                        r.final_prob.map_or_else(String::new, |p| p.to_string()),
                        r.total_n.to_string(),
                        r.seed_used.to_string(),
                        r.diagnostics_flag.to_string(),
                        String::new(),
                    ],
                )
            })
            .collect();
        rows.extend(self.failures.iter().map(|f| {
            (
                f.replicate_index,
                vec![
                    f.replicate_index.to_string(),
                    "Failed".to_string(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    f.seed_used.to_string(),
                    String::new(),
                    f.message.clone(),
                ],
            )
        }));
        rows.sort_by_key(|(i, _)| *i);
        for (_, row) in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("n_replicates and parallelism must be at least 1")]
    InvalidOptions,
    #[error("the simulator supports exactly 2 stages, the design has {0}")]
    StageCount(usize),
    #[error("cannot start worker pool: {0}")]
    ThreadPool(String),
    #[error("{failed} of {total} replicates failed, above the allowed fraction {limit}; first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        limit: f64,
        first: String,
        report: Box<OcReport>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcOptions {
    pub n_replicates: usize,
    pub master_seed: u64,
    pub parallelism: usize,
    pub max_failure_fraction: f64,
}

impl OcOptions {
    pub fn new(n_replicates: usize, master_seed: u64, parallelism: usize) -> Self {
        Self {
            n_replicates,
            master_seed,
            parallelism,
            max_failure_fraction: DEFAULT_MAX_FAILURE_FRACTION,
        }
    }
}

/// Monte Carlo operating characteristics. Replicate `i` runs with seed
/// `replicate_seed(master_seed, i)` on a pool of `parallelism` workers;
/// results are collected in index order, so the output does not depend on
/// the pool size.
pub fn run_oc_simulation(
    design: &TrialDesign,
    options: &OcOptions,
) -> Result<OcReport, SimulationError> {
    if options.n_replicates == 0 || options.parallelism == 0 {
        return Err(SimulationError::InvalidOptions);
    }
    if design.stages.len() != 2 {
        return Err(SimulationError::StageCount(design.stages.len()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism)
        .build()
        .map_err(|e| SimulationError::ThreadPool(e.to_string()))?;
    let results: Vec<_> = pool.install(|| {
        (0..options.n_replicates)
            .into_par_iter()
            .map(|i| {
                let seed = replicate_seed(options.master_seed, i as u64);
                (i, seed, run_single_trial(design, seed))
            })
            .collect()
    });

    let mut records = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for (i, seed, result) in results {
        match result {
            Ok(mut r) => {
                r.replicate_index = i;
                records.push(r);
            }
            Err(e) => failures.push(FailedReplicate {
                replicate_index: i,
                seed_used: seed,
                message: e.to_string(),
            }),
        }
    }
    let report = OcReport {
        oc: OperatingCharacteristics::from_records(&records, failures.len()),
        records,
        failures,
    };
    let failed = report.failures.len();
    if failed as f64 > options.max_failure_fraction * options.n_replicates as f64 {
        return Err(SimulationError::TooManyFailures {
            failed,
            total: options.n_replicates,
            limit: options.max_failure_fraction,
            first: report.failures[0].message.clone(),
            report: Box::new(report),
        });
    }
    Ok(report)
}
