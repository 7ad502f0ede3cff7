//! Configuration files and the `qaprecode` command-line front end.
//!
//! A config file is TOML with three optional tables:
//!
//! ```toml
//! [experiment]        # ExperimentConfig
//! antennas = 16
//! snr_grid_db = [10.0, 20.0, 30.0]
//!
//! [sweep]             # grid for the `sweep` subcommand
//! antennas = [8, 16]
//! levels = [4, 8]
//!
//! [diagnostic]        # `ep-diagnostic`
//! snr_db = 25.0
//! omega = 1.0
//! ```
//!
//! `--set key=value` overrides are applied to the parsed file before it is
//! validated. Keys are dotted paths; a key without a table prefix refers to
//! `[experiment]`. Values are parsed as TOML and fall back to strings.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ep::{ep_solve, EpConfig};
use crate::error::{Error, Result};
use crate::eval::{self, ExperimentConfig, ResultRow};
use crate::ils::IlsProblem;
use crate::linalg::{RMat, RVec};
use crate::quantizer::QuantizerSpec;
use crate::rng::{stream_rng, Stream};
use crate::sd::{brute_force_ils, sphere_decode};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

const SECTIONS: [&str; 3] = ["experiment", "sweep", "diagnostic"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSpec {
    /// Empty lists keep the experiment's value.
    pub antennas: Vec<usize>,
    pub users: Vec<usize>,
    pub levels: Vec<usize>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            antennas: vec![8, 16, 32],
            users: Vec::new(),
            levels: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticSpec {
    pub snr_db: f64,
    pub omega: f64,
}

impl Default for DiagnosticSpec {
    fn default() -> Self {
        Self {
            snr_db: 25.0,
            omega: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CliConfig {
    pub experiment: ExperimentConfig,
    pub sweep: SweepSpec,
    pub diagnostic: DiagnosticSpec,
}

impl CliConfig {
    /// Parse TOML text and apply `key=value` overrides.
    pub fn parse(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("parse error: {e}")))?;
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        toml::Value::Table(value)
            .try_into()
            .map_err(|e| Error::Config(format!("{e}")))
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::parse(&text, overrides)
    }

    /// Canonical TOML with a stable field order.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("{e}")))
    }
}

fn apply_override(root: &mut toml::Table, ov: &str) -> Result<()> {
    let (key, raw) = ov
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{ov}' is not key=value")))?;
    let mut path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key '{key}'")));
    }
    if !SECTIONS.contains(&path[0]) {
        path.insert(0, "experiment");
    }
    let value = parse_value(raw.trim());
    let mut table = root;
    for seg in &path[..path.len() - 1] {
        let entry = table
            .entry(seg.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("'{seg}' in '{key}' is not a table")))?;
    }
    table.insert(path[path.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

#[derive(Debug, Parser)]
#[command(name = "qaprecode", version, about = "Quantization-aware MU-MIMO precoding experiments")]
pub struct Cli {
    /// TOML config file; defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `experiment.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (`run`, `ep-diagnostic`) or directory (`sweep`).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Write JSON instead of CSV.
    #[arg(long, global = true)]
    pub json: bool,
    /// Directory for per-scheme convergence traces of trial 0.
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
    /// `key=value` config override, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run one experiment and write a result row per (scheme, SNR).
    Run,
    /// Repeat the experiment over the `[sweep]` grid of M, K and L.
    Sweep,
    /// Check the sphere decoder against brute force and EP against the
    /// sphere decoder.
    OracleCheck,
    /// Write samples of the ILS residual `c − G p`.
    EpDiagnostic,
}

/// Parse `argv`, run the command and return the process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidParameter(_) => EXIT_CONFIG,
                _ => EXIT_FAILURE,
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<CliConfig> {
    let mut cfg = CliConfig::load(cli.config.as_deref(), &cli.overrides)?;
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
    }
    cfg.experiment
        .validate()
        .map_err(|e| Error::Config(e.to_string()))?;
    Ok(cfg)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Run => cmd_run(cli, &cfg),
        Command::Sweep => cmd_sweep(cli, &cfg),
        Command::OracleCheck => Ok(cmd_oracle_check(&cfg.experiment.ep)),
        Command::EpDiagnostic => cmd_ep_diagnostic(cli, &cfg),
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text)?;
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn render_rows(rows: &[ResultRow], json: bool) -> Result<String> {
    if json {
        let mut s = serde_json::to_string_pretty(rows).map_err(|e| Error::Config(e.to_string()))?;
        s.push('\n');
        Ok(s)
    } else {
        Ok(eval::to_csv(rows))
    }
}

fn warn_flagged(rows: &[ResultRow]) {
    for r in rows.iter().filter(|r| r.is_flagged()) {
        eprintln!(
            "warning: {} at {} dB: {} of {} trials failed",
            r.scheme,
            r.snr_db,
            r.failed_trials,
            r.trials + r.failed_trials
        );
    }
}

fn cmd_run(cli: &Cli, cfg: &CliConfig) -> Result<i32> {
    let exp = &cfg.experiment;
    let rows = eval::run_experiment(exp)?;
    warn_flagged(&rows);
    emit(cli.output.as_deref(), &render_rows(&rows, cli.json)?)?;
    if let Some(dir) = &cli.trace {
        fs::create_dir_all(dir)?;
        for &snr in &exp.snr_grid_db {
            for &scheme in &exp.schemes {
                let tr = eval::trace(exp, scheme, snr, 0)?;
                let file = dir.join(format!("trace_{scheme}_{snr}dB.csv"));
                fs::write(file, eval::trace_to_csv(&tr))?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn or_current(values: &[usize], current: usize) -> Vec<usize> {
    if values.is_empty() {
        vec![current]
    } else {
        values.to_vec()
    }
}

fn cmd_sweep(cli: &Cli, cfg: &CliConfig) -> Result<i32> {
    let base = &cfg.experiment;
    let mut json_points = Vec::new();
    let mut stdout_text = String::new();
    for &m in &or_current(&cfg.sweep.antennas, base.antennas) {
        for &k in &or_current(&cfg.sweep.users, base.users) {
            for &l in &or_current(&cfg.sweep.levels, base.levels) {
                let exp = ExperimentConfig {
                    antennas: m,
                    users: k,
                    levels: l,
                    ..base.clone()
                };
                exp.validate().map_err(|e| Error::Config(e.to_string()))?;
                let rows = eval::run_experiment(&exp)?;
                warn_flagged(&rows);
                if cli.json {
                    json_points.push(serde_json::json!({
                        "antennas": m, "users": k, "levels": l, "rows": rows
                    }));
                } else if let Some(dir) = &cli.output {
                    fs::create_dir_all(dir)?;
                    fs::write(dir.join(format!("M{m}_K{k}_L{l}.csv")), eval::to_csv(&rows))?;
                } else {
                    stdout_text.push_str(&format!("# antennas={m} users={k} levels={l}\n"));
                    stdout_text.push_str(&eval::to_csv(&rows));
                }
            }
        }
    }
    if cli.json {
        let mut s = serde_json::to_string_pretty(&json_points)
            .map_err(|e| Error::Config(e.to_string()))?;
        s.push('\n');
        let target = cli.output.as_ref().map(|d| d.join("sweep.json"));
        emit(target.as_deref(), &s)?;
    } else if cli.output.is_none() {
        emit(None, &stdout_text)?;
    }
    Ok(EXIT_OK)
}

/// Random ILS instance with a well-conditioned upper-triangular `G`
/// (diagonal in `[0.5, 1.5]`, off-diagonal in `[−0.5, 0.5]`) and `c = G x`
/// for `x` uniform on a box slightly wider than the alphabet.
pub fn random_oracle_problem<R: Rng + ?Sized>(rng: &mut R, dim: usize, spec: &QuantizerSpec) -> IlsProblem {
    let g = RMat::from_fn(dim, dim, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Equal => rng.random_range(0.5..1.5),
        std::cmp::Ordering::Less => rng.random_range(-0.5..0.5),
        std::cmp::Ordering::Greater => 0.0,
    });
    let span = spec.labels()[spec.levels() - 1] + spec.step();
    let x = RVec::from_fn(dim, |_, _| rng.random_range(-span..span));
    let c = &g * x;
    IlsProblem::new(g, c, spec.labels().to_vec()).expect("valid by construction")
}

/// The default oracle set: `count` problems of dimension 6 over the
/// 4-level alphabet with unit step.
pub fn oracle_set(seed: u64, count: usize) -> Vec<IlsProblem> {
    let spec = QuantizerSpec::new(4, 1.0).expect("valid spec");
    let mut rng = stream_rng(seed, Stream::Oracle, 0);
    (0..count)
        .map(|_| random_oracle_problem(&mut rng, 6, &spec))
        .collect()
}

/// Frozen bound on EP's mean relative objective excess over the sphere
/// decoder on the default oracle set.
pub const EP_EXCESS_BOUND: f64 = 0.10;

/// Largest tolerated fraction of cavity updates that hit the variance floor.
pub const EP_CLAMP_RATE_BOUND: f64 = 0.05;

fn cmd_oracle_check(ep_cfg: &EpConfig) -> i32 {
    let problems = oracle_set(0, 200);
    let mut sd_ok = true;
    let mut ep_ok = true;
    let mut excess = 0.0;
    let mut updates = 0u64;
    let mut clamps = 0u64;
    for prob in &problems {
        let sd = sphere_decode(prob);
        match brute_force_ils(prob) {
            Ok((_, bf)) => sd_ok &= (sd.objective - bf).abs() <= 1e-12,
            Err(_) => sd_ok = false,
        }
        let ep = ep_solve(prob, ep_cfg);
        ep_ok &= ep.objective >= sd.objective - 1e-12
            && !ep.report.non_finite
            && !ep.report.posterior_failure;
        excess += (ep.objective - sd.objective) / sd.objective.max(1e-12);
        updates += ep.report.coordinate_updates;
        clamps += ep.report.cavity_clamps;
    }
    let n = problems.len();
    let mean_excess = excess / n as f64;
    let clamp_rate = clamps as f64 / updates.max(1) as f64;
    let bound_ok = mean_excess <= EP_EXCESS_BOUND && clamp_rate < EP_CLAMP_RATE_BOUND;
    println!("{} sd-vs-brute-force ({n} instances)", verdict(sd_ok));
    println!("{} ep-never-beats-sd ({n} instances)", verdict(ep_ok));
    println!(
        "{} ep-quality (mean relative excess {mean_excess:.4} <= {EP_EXCESS_BOUND}, clamp rate {clamp_rate:.4} < {EP_CLAMP_RATE_BOUND})",
        verdict(bound_ok)
    );
    if sd_ok && ep_ok && bound_ok {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cmd_ep_diagnostic(cli: &Cli, cfg: &CliConfig) -> Result<i32> {
    let samples = eval::ils_residuals(&cfg.experiment, cfg.diagnostic.snr_db, cfg.diagnostic.omega)?;
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std = (samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
    eprintln!("{} samples, mean {mean:.4e}, std {std:.4e}", samples.len());
    let text = if cli.json {
        let mut s = serde_json::to_string(&samples).map_err(|e| Error::Config(e.to_string()))?;
        s.push('\n');
        s
    } else {
        let mut s = String::from("residual\n");
        for x in &samples {
            s.push_str(&format!("{x}\n"));
        }
        s
    };
    emit(cli.output.as_deref(), &text)?;
    Ok(EXIT_OK)
}
