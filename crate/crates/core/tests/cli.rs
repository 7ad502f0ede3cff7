use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use qaprecode::eval::ResultRow;

const SMALL: &str = r#"
[experiment]
schemes = ["infinite_res", "sd", "unaware"]
snr_grid_db = [10.0]
antennas = 4
users = 2
levels = 4
trials = 3
seed = 5
"#;

fn qaprecode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qaprecode"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn run_writes_the_results_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("results.csv");
    let res = qaprecode(&["run", "--config", &cfg, "--output", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("scheme,snr_db,mean_sum_rate,std_error,trials,converged_fraction,mean_iterations")
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].starts_with("infinite_res,10"));
    assert!(rows.iter().all(|r| r.split(',').count() == 7));
}

#[test]
fn run_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let a = qaprecode(&["run", "--config", &cfg]);
    let b = qaprecode(&["run", "--config", &cfg]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = qaprecode(&["run", "--config", &cfg, "--seed", "6"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn json_output_parses() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let res = qaprecode(&["run", "--config", &cfg, "--json", "--set", "trials=2"]);
    assert_eq!(res.status.code(), Some(0));
    let rows: Vec<ResultRow> = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.trials == 2));
}

#[test]
fn trace_files_have_the_trace_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let traces = dir.path().join("traces");
    let res = qaprecode(&["run", "--config", &cfg, "--trace", traces.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    let text = fs::read_to_string(traces.join("trace_sd_10dB.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("iteration,objective,sum_rate"));
    assert!(text.lines().count() >= 2);
}

#[test]
fn sweep_writes_one_file_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("sweep");
    let res = qaprecode(&[
        "sweep",
        "--config",
        &cfg,
        "--set",
        "sweep.antennas=[2, 4]",
        "--set",
        "schemes=[\"unaware\"]",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    assert!(out.join("M2_K2_L4.csv").exists());
    assert!(out.join("M4_K2_L4.csv").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let missing = qaprecode(&["run", "--config", "/nonexistent/config.toml"]);
    assert_eq!(missing.status.code(), Some(2));
    let bad_key = qaprecode(&["run", "--set", "experiment.no_such_key=1"]);
    assert_eq!(bad_key.status.code(), Some(2));
    let bad_value = qaprecode(&["run", "--set", "trials=0"]);
    assert_eq!(bad_value.status.code(), Some(2));
    let bad_flag = qaprecode(&["run", "--no-such-flag"]);
    assert_eq!(bad_flag.status.code(), Some(2));
}

#[test]
fn oracle_check_passes_on_defaults() {
    let res = qaprecode(&["oracle-check"]);
    assert_eq!(res.status.code(), Some(0));
    let text = String::from_utf8(res.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn ep_diagnostic_writes_residuals() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("residuals.csv");
    let res = qaprecode(&["ep-diagnostic", "--config", &cfg, "--output", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next(), Some("residual"));
    assert!(text.lines().skip(1).all(|l| l.parse::<f64>().unwrap().is_finite()));
}

#[test]
fn shipped_configs_load() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["default.toml", "desk.toml"] {
        let path = root.join(name);
        let text = fs::read_to_string(&path).unwrap();
        let cfg = qaprecode::cli::CliConfig::parse(&text, &[]).unwrap();
        cfg.experiment.validate().unwrap();
    }
    let default = fs::read_to_string(root.join("default.toml")).unwrap();
    assert_eq!(qaprecode::cli::CliConfig::parse(&default, &[]).unwrap(), Default::default());
    let res = qaprecode(&["oracle-check", "--config", root.join("default.toml").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
}
