use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bacta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bacta"))
        .args(args)
        .env_remove("BACTA_THREADS")
        .output()
        .expect("binary runs")
}

fn asset(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/assets")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write_tmp(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn help_matches_golden_files() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    for (args, file) in [
        (vec!["--help"], "help_bacta.txt"),
        (vec!["check", "--help"], "help_check.txt"),
        (vec!["fit", "--help"], "help_fit.txt"),
        (vec!["generate-data", "--help"], "help_generate-data.txt"),
        (vec!["simulate", "--help"], "help_simulate.txt"),
    ] {
        let out = bacta(&args);
        assert!(out.status.success());
        let expected = std::fs::read_to_string(golden.join(file)).unwrap();
        assert_eq!(stdout(&out), expected, "{file}");
    }
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = bacta(&["check", &asset("appendix_model.bug"), "--colour"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_appendix_model_with_data() {
    let out = bacta(&[
        "check",
        &asset("appendix_model.bug"),
        "--data",
        &asset("interim.csv"),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stdout(&out).contains("4 parameters, 200 observed, 201 deterministic"));
}

#[test]
fn check_without_data_lists_expected_names() {
    let out = bacta(&["check", &asset("appendix_model.bug")]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("expects data: A, X, n"));
}

#[test]
fn check_reports_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_tmp(&dir, "cycle.bug", "model {\n a <- b + 1\n b <- a * 2\n}\n");
    let out = bacta(&["check", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("directed cycle"));
}

#[test]
fn check_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_tmp(
        &dir,
        "bad.bug",
        "model {\n  y ~ dnorm(0, 1)\n  z ~ dnrm(y, 1)\n}\n",
    );
    let out = bacta(&["check", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("3:7: error: unknown distribution dnrm"),
        "{}",
        stderr(&out)
    );

    let p = write_tmp(&dir, "syntax.bug", "model {\n  y ~ dnorm(0, 1\n}\n");
    let out = bacta(&["check", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("syntax.bug:"), "{}", stderr(&out));
}

#[test]
fn strict_mode_rejects_equals() {
    let model = asset("appendix_model.bug");
    assert_eq!(bacta(&["check", &model]).status.code(), Some(0));
    let out = bacta(&["check", &model, "--strict"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("appendix_model.bug:"),
        "{}",
        stderr(&out)
    );
}

#[test]
fn missing_files_are_io_errors() {
    let out = bacta(&["check", "/nonexistent/model.bug"]);
    assert_eq!(out.status.code(), Some(2));
    let out = bacta(&["fit", &asset("appendix_model.bug"), "/nonexistent/data.csv"]);
    assert_eq!(out.status.code(), Some(2));
    let out = bacta(&["simulate", "/nonexistent/spec.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn generate_data_stage_one() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for p in [&a, &b] {
        let out = bacta(&[
            "generate-data",
            &asset("appendix_trial.json"),
            "--stage",
            "1",
            "--seed",
            "7",
            "-o",
            p.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        let text = stdout(&out);
        assert!(text.starts_with("200 rows written to"));
        assert!(text.contains("min") && text.contains("mean") && text.contains("max"));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert_eq!(text, std::fs::read_to_string(asset("interim.csv")).unwrap());

    let mut rdr = csv::Reader::from_path(&a).unwrap();
    let headers = rdr.headers().unwrap().clone();
    let col = headers.iter().position(|h| h == "A").unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 200);
    assert!(rows.iter().all(|r| r[col].parse::<f64>().unwrap() >= 3.0));
}

#[test]
fn generate_data_rejects_missing_stage() {
    let out = bacta(&[
        "generate-data",
        &asset("appendix_trial.json"),
        "--stage",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_spec_reports_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(asset("appendix_trial.json"))
        .unwrap()
        .replace("\"sd\": 20", "\"sd\": -20");
    let p = write_tmp(&dir, "bad.json", &text);
    let out = bacta(&["generate-data", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("outcome.noise"), "{}", stderr(&out));
}

fn short_fit(extra: &[&str]) -> Output {
    let model = asset("appendix_model.bug");
    let data = asset("full.csv");
    let mut args = vec![
        "fit", &model, &data, "--seed", "42", "--burnin", "300", "--iters", "600",
    ];
    args.extend_from_slice(extra);
    bacta(&args)
}

#[test]
fn fit_is_reproducible_and_prints_probabilities() {
    let first = short_fit(&["--prob", "beta1>5", "--prob", "beta1>10"]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let second = short_fit(&["--prob", "beta1>5", "--prob", "beta1>10"]);
    assert_eq!(first.stdout, second.stdout);

    let text = stdout(&first);
    assert!(text.starts_with("parameter"));
    for name in ["beta0", "beta1", "alpha", "tau", "sigma2"] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing");
    }
    let probs: Vec<f64> = text
        .lines()
        .filter(|l| l.starts_with("P(beta1 >"))
        .map(|l| l.rsplit(' ').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(probs.len(), 2);
    assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
    assert!(probs[0] >= probs[1]);
}

#[test]
fn fit_machine_formats_and_samples() {
    let dir = tempfile::tempdir().unwrap();
    let draws = dir.path().join("draws.csv");
    let out = short_fit(&[
        "--format",
        "json",
        "--monitor",
        "beta1,sigma2",
        "--samples-out",
        draws.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["name"], "beta1");

    let text = std::fs::read_to_string(&draws).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("chain,iteration,beta1,sigma2"));
    assert_eq!(lines.count(), 3 * 600);

    let summary = dir.path().join("summary.csv");
    let out = short_fit(&[
        "--format",
        "csv",
        "--out",
        summary.to_str().unwrap(),
        "--prob",
        "beta1>0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(std::fs::read_to_string(&summary)
        .unwrap()
        .starts_with("parameter,mean,sd,2.5%"));
}

#[test]
fn fit_warns_on_degenerate_config() {
    let out = bacta(&[
        "fit",
        &asset("appendix_model.bug"),
        &asset("interim.csv"),
        "--chains",
        "1",
        "--iters",
        "10",
        "--burnin",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(stderr(&out).contains("diagnostics are unreliable"));
}

#[test]
fn fit_rejects_bad_query_and_bad_config() {
    let out = short_fit(&["--prob", "beta1>>5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = short_fit(&["--prob", "gamma>5"]);
    assert_eq!(out.status.code(), Some(1));
    let out = short_fit(&["--thin", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

fn small_simulation(threads: &str, extra: &[&str]) -> Output {
    let spec = asset("appendix_trial.json");
    let mut args = vec![
        "simulate",
        &spec,
        "--replicates",
        "6",
        "--seed",
        "1",
        "--threads",
        threads,
        "--oc-mcmc-burnin",
        "200",
        "--oc-mcmc-iters",
        "400",
    ];
    args.extend_from_slice(extra);
    bacta(&args)
}

#[test]
fn simulate_is_thread_invariant() {
    let one = small_simulation("1", &[]);
    assert_eq!(one.status.code(), Some(0), "{}", stderr(&one));
    let four = small_simulation("4", &[]);
    assert_eq!(one.stdout, four.stdout);

    let text = stdout(&one);
    for outcome in [
        "EarlySuccess",
        "EarlyFutility",
        "FinalSuccess",
        "FinalFailure",
    ] {
        assert!(text.lines().any(|l| l.starts_with(outcome)));
    }
    let total = text.lines().find(|l| l.starts_with("total")).unwrap();
    assert!(total.ends_with("1.0000"), "{total}");
}

#[test]
fn simulate_writes_csv_and_replicate_log() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("oc.csv");
    let log = dir.path().join("log.csv");
    let out = small_simulation(
        "2",
        &[
            "--format",
            "csv",
            "--out",
            table.to_str().unwrap(),
            "--replicate-log",
            log.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let oc = std::fs::read_to_string(&table).unwrap();
    assert_eq!(oc.lines().next(), Some("outcome,count,proportion,mc_se"));
    assert_eq!(oc.lines().count(), 5);
    let log = std::fs::read_to_string(&log).unwrap();
    assert_eq!(log.lines().count(), 7);
    assert!(log
        .lines()
        .next()
        .unwrap()
        .starts_with("replicate_index,outcome"));
}

#[test]
fn simulate_single_replicate_and_json() {
    let spec = asset("appendix_trial.json");
    let out = bacta(&[
        "simulate",
        &spec,
        "--replicates",
        "1",
        "--threads",
        "1",
        "--oc-mcmc-burnin",
        "200",
        "--oc-mcmc-iters",
        "400",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["n_replicates"], 1);
    let sum: f64 = v["proportions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p.as_f64().unwrap())
        .sum();
    assert_eq!(sum, 1.0);
}

#[test]
fn simulate_threads_from_environment() {
    let spec = asset("appendix_trial.json");
    let args = [
        "simulate",
        &spec,
        "--replicates",
        "2",
        "--oc-mcmc-burnin",
        "100",
        "--oc-mcmc-iters",
        "200",
    ];
    let env = Command::new(env!("CARGO_BIN_EXE_bacta"))
        .args(args)
        .env("BACTA_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(env.status.code(), Some(0));
    let flag = bacta(&[&args[..], &["--threads", "1"]].concat());
    assert_eq!(env.stdout, flag.stdout);
}

#[test]
fn simulate_rejects_bad_overrides() {
    let out = small_simulation("1", &["--oc-mcmc-chains", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let out = small_simulation("0", &[]);
    assert_eq!(out.status.code(), Some(1));
}
