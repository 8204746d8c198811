//! `bacta`: check, fit and simulate Bayesian adaptive trial models.

use std::collections::HashSet;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bacta_core::design::{load_trial_spec, TrialDesign};
use bacta_core::dsl::{
    check_semantics, free_variables, has_errors, parse_model_with, ModelAst, ParseOptions,
};
use bacta_core::graph::{compile, DataError, Dataset, NodeKind};
use bacta_core::inference::{run_mcmc, summarize, McmcConfig, ProbQuery};
use bacta_core::simulator::{
    run_oc_simulation, stage_cohort, OcOptions, SimulationError, DEFAULT_MAX_FAILURE_FRACTION,
};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "bacta",
    version,
    about = "Bayesian adaptive clinical trial modelling and simulation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and statically check a model file
    Check(CheckArgs),
    /// Fit a model to a CSV dataset by MCMC and print a posterior summary
    Fit(FitArgs),
    /// Generate the analysis dataset for one stage of a trial spec
    GenerateData(GenerateArgs),
    /// Estimate operating characteristics of a trial design by simulation
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// Model file in the JAGS-style language
    model: PathBuf,
    /// CSV whose columns are supplied as data; the model is also compiled against it
    #[arg(long)]
    data: Option<PathBuf>,
    /// Reject `=` as an assignment operator, as JAGS does
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Model file in the JAGS-style language
    model: PathBuf,
    /// CSV dataset, one column per data variable
    data: PathBuf,
    /// Reject `=` as an assignment operator, as JAGS does
    #[arg(long)]
    strict: bool,
    /// Number of chains
    #[arg(long, default_value_t = 3)]
    chains: usize,
    /// Burn-in sweeps per chain
    #[arg(long, default_value_t = 5000)]
    burnin: usize,
    /// Recorded sweeps per chain
    #[arg(long, default_value_t = 10000)]
    iters: usize,
    /// Keep every k-th recorded sweep
    #[arg(long, default_value_t = 1)]
    thin: usize,
    /// Random seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Nodes or variables to record (comma separated); defaults to all scalar nodes
    #[arg(long, value_delimiter = ',')]
    monitor: Vec<String>,
    /// Posterior probability query such as "beta1>5"; repeatable
    #[arg(long = "prob", value_name = "QUERY")]
    probs: Vec<String>,
    /// Extra data scalar as name=value; repeatable
    #[arg(long = "scalar", value_name = "NAME=VALUE")]
    scalars: Vec<String>,
    /// Write all recorded draws to this CSV file
    #[arg(long, value_name = "PATH")]
    samples_out: Option<PathBuf>,
    /// Summary format
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the summary to this file instead of standard output
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Trial specification (JSON)
    spec: PathBuf,
    /// Stage whose analysis dataset is generated (1-based)
    #[arg(long, default_value_t = 1)]
    stage: usize,
    /// Random seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV; standard output when omitted
    #[arg(short = 'o', long = "out", value_name = "PATH")]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Trial specification (JSON)
    spec: PathBuf,
    /// Number of simulated trials
    #[arg(long, default_value_t = 200)]
    replicates: usize,
    /// Master random seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads; results do not depend on this
    #[arg(long, env = "BACTA_THREADS")]
    threads: Option<usize>,
    /// Override the spec's burn-in sweeps
    #[arg(long, value_name = "N")]
    oc_mcmc_burnin: Option<usize>,
    /// Override the spec's recorded sweeps
    #[arg(long, value_name = "N")]
    oc_mcmc_iters: Option<usize>,
    /// Override the spec's chain count
    #[arg(long, value_name = "N")]
    oc_mcmc_chains: Option<usize>,
    /// Abort with an error when more than this fraction of replicates fail
    #[arg(long, value_name = "FRACTION", default_value_t = DEFAULT_MAX_FAILURE_FRACTION)]
    max_failure_fraction: f64,
    /// Operating-characteristics table format
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the table to this file instead of standard output
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Write one CSV row per replicate to this file
    #[arg(long, value_name = "PATH")]
    replicate_log: Option<PathBuf>,
}

/// Failure of a command. `Domain` exits with 1, `Io` with 2.
#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Domain(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    fn domain(e: impl ToString) -> Self {
        CliError::Domain(e.to_string())
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Io { .. } => 2,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_data(path: &Path) -> Result<Dataset, CliError> {
    match Dataset::read_csv(path) {
        Ok(d) => Ok(d),
        Err(DataError::Io(source)) => Err(CliError::Io {
            path: path.to_path_buf(),
            source,
        }),
        Err(e) => Err(CliError::Domain(format!("{}: {e}", path.display()))),
    }
}

fn parse_model_file(path: &Path, strict: bool) -> Result<ModelAst, CliError> {
    let text = read(path)?;
    let name = path.display().to_string();
    parse_model_with(
        &text,
        &name,
        ParseOptions {
            strict_jags: strict,
        },
    )
    .map_err(|e| CliError::Domain(format!("{name}:{e}")))
}

fn load_spec(path: &Path) -> Result<TrialDesign, CliError> {
    let text = read(path)?;
    load_trial_spec(&text).map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))
}

fn report_diagnostics(
    path: &Path,
    ast: &ModelAst,
    names: &HashSet<String>,
) -> Result<(), CliError> {
    let diags = check_semantics(ast, names);
    for d in &diags {
        eprintln!("{}:{d}", path.display());
    }
    if has_errors(&diags) {
        return Err(CliError::Domain(format!(
            "{} error(s) in {}",
            diags.len(),
            path.display()
        )));
    }
    Ok(())
}

fn cmd_check(args: &CheckArgs) -> Result<(), CliError> {
    let ast = parse_model_file(&args.model, args.strict)?;
    let data = match &args.data {
        Some(p) => Some(read_data(p)?),
        None => None,
    };
    let names = match &data {
        Some(d) => d.names(),
        None => free_variables(&ast).into_iter().collect(),
    };
    report_diagnostics(&args.model, &ast, &names)?;
    // Without data the graph can only be built when the model reads nothing.
    let dataset = match data {
        Some(d) => Some(d),
        None if names.is_empty() => Some(Dataset::new()),
        None => None,
    };
    match dataset {
        Some(d) => {
            let g = compile(&ast, &d)
                .map_err(|e| CliError::Domain(format!("{}: {e}", args.model.display())))?;
            println!(
                "{}: ok ({} parameters, {} observed, {} deterministic)",
                args.model.display(),
                g.count(NodeKind::StochasticParam),
                g.count(NodeKind::StochasticObserved),
                g.count(NodeKind::Deterministic)
            );
        }
        None => {
            let list: Vec<String> = free_variables(&ast).into_iter().collect();
            println!(
                "{}: ok (expects data: {})",
                args.model.display(),
                list.join(", ")
            );
        }
    }
    Ok(())
}

fn parse_scalar(s: &str) -> Result<(String, f64), CliError> {
    let bad = || CliError::Domain(format!("--scalar {s:?}: expected NAME=VALUE"));
    let (name, value) = s.split_once('=').ok_or_else(bad)?;
    let value: f64 = value.trim().parse().map_err(|_| bad())?;
    Ok((name.trim().to_string(), value))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let ast = parse_model_file(&args.model, args.strict)?;
    let mut data = read_data(&args.data)?;
    for s in &args.scalars {
        let (name, value) = parse_scalar(s)?;
        data.set_scalar(&name, value).map_err(CliError::domain)?;
    }
    let queries: Vec<ProbQuery> = args
        .probs
        .iter()
        .map(|q| q.parse().map_err(CliError::domain))
        .collect::<Result<_, _>>()?;
    report_diagnostics(&args.model, &ast, &data.names())?;
    let graph = compile(&ast, &data)
        .map_err(|e| CliError::Domain(format!("{}: {e}", args.model.display())))?;
    let config = McmcConfig {
        n_chains: args.chains,
        burn_in: args.burnin,
        iterations: args.iters,
        thinning: args.thin,
        seed: args.seed,
        monitor: args.monitor.clone(),
        ..McmcConfig::default()
    };
    let samples = run_mcmc(&graph, &config).map_err(CliError::domain)?;

    if samples.diagnostics_unavailable || samples.n_chains() < 2 || samples.n_iterations() < 100 {
        eprintln!(
            "warning: convergence diagnostics are unreliable with {} chain(s) of {} draws",
            samples.n_chains(),
            samples.n_iterations()
        );
    }
    if !samples.divergent.is_empty() {
        eprintln!(
            "DivergenceWarning: R-hat above 1.1 for {}",
            samples.divergent.join(", ")
        );
    }

    let table = summarize(&samples);
    let rendered = match args.format {
        Format::Text => table.to_text(),
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json() + "\n",
    };
    emit(args.out.as_deref(), &rendered)?;

    let machine_stdout = args.out.is_none() && args.format != Format::Text;
    for q in &queries {
        let p = q.evaluate(&samples).map_err(CliError::domain)?;
        if machine_stdout {
            eprintln!("{q} = {p:.4}");
        } else {
            println!("{q} = {p:.4}");
        }
    }

    if let Some(path) = &args.samples_out {
        let mut buf = Vec::new();
        samples.write_csv(&mut buf).map_err(CliError::domain)?;
        write(path, &buf)?;
    }
    Ok(())
}

fn column_summary(data: &Dataset) -> String {
    let mut out = format!(
        "{:<10} {:>12} {:>12} {:>12}\n",
        "column", "min", "mean", "max"
    );
    for name in data.column_names() {
        let values: Vec<f64> = data
            .column(name)
            .unwrap_or_default()
            .iter()
            .flatten()
            .copied()
            .collect();
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / values.len().max(1) as f64;
        out.push_str(&format!(
            "{name:<10} {min:>12.4} {mean:>12.4} {max:>12.4}\n"
        ));
    }
    out
}

fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let design = load_spec(&args.spec)?;
    if args.stage == 0 || args.stage > design.stages.len() {
        return Err(CliError::Domain(format!(
            "stage {} requested but the design has {} stage(s)",
            args.stage,
            design.stages.len()
        )));
    }
    let data = stage_cohort(&design, args.stage, args.seed).map_err(CliError::domain)?;
    let mut buf = Vec::new();
    data.write_csv(&mut buf).map_err(CliError::domain)?;
    let summary = column_summary(&data);
    match &args.out {
        Some(path) => {
            write(path, &buf)?;
            println!("{} rows written to {}", data.row_count(), path.display());
            print!("{summary}");
        }
        None => {
            io::stdout()
                .write_all(&buf)
                .map_err(|source| CliError::Io {
                    path: PathBuf::from("<stdout>"),
                    source,
                })?;
            eprintln!("{} rows", data.row_count());
            eprint!("{summary}");
        }
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let mut design = load_spec(&args.spec)?;
    if let Some(n) = args.oc_mcmc_burnin {
        design.mcmc.burn_in = n;
    }
    if let Some(n) = args.oc_mcmc_iters {
        design.mcmc.iterations = n;
    }
    if let Some(n) = args.oc_mcmc_chains {
        design.mcmc.n_chains = n;
    }
    design.mcmc.validate().map_err(CliError::domain)?;
    let threads = args
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let options = OcOptions {
        max_failure_fraction: args.max_failure_fraction,
        ..OcOptions::new(args.replicates, args.seed, threads)
    };
    let (report, failure) = match run_oc_simulation(&design, &options) {
        Ok(r) => (r, None),
        Err(SimulationError::TooManyFailures {
            failed,
            total,
            limit,
            first,
            report,
        }) => (
            *report,
            Some(CliError::Domain(format!(
                "{failed} of {total} replicates failed, above the allowed fraction {limit}; first failure: {first}"
            ))),
        ),
        Err(e) => return Err(CliError::domain(e)),
    };
    let rendered = match args.format {
        Format::Text => report.oc.to_text(),
        Format::Csv => report.oc.to_csv(),
        Format::Json => serde_json::to_string_pretty(&report.oc).map_err(CliError::domain)? + "\n",
    };
    emit(args.out.as_deref(), &rendered)?;
    if let Some(path) = &args.replicate_log {
        let mut buf = Vec::new();
        report
            .write_replicate_log(&mut buf)
            .map_err(CliError::domain)?;
        write(path, &buf)?;
    }
    if report.oc.divergent_replicate_count > 0 {
        eprintln!(
            "DivergenceWarning: {} replicate(s) had an R-hat above 1.1",
            report.oc.divergent_replicate_count
        );
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Fit(a) => cmd_fit(a),
        Command::GenerateData(a) => cmd_generate(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
