//! Monte-Carlo experiment engine and fronthaul accounting.
//!
//! Every trial draws its channel, CSI impairments and UE weights from
//! streams derived from `(seed, trial)` alone, so all schemes and SNR points
//! see the same realizations and adding trials never changes earlier ones.
//! Trials run in parallel; results are gathered in job order before any
//! reduction, so output is bit-identical across runs and thread counts.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{half_aware_precoding, heuristic_refine, unaware_precoding};
use crate::channel::{draw_channel, observed_channel, ChannelConfig, CsiModel};
use crate::ep::EpConfig;
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::quantizer::QuantizerSpec;
use crate::rng::{stream_rng, Stream};
use crate::wmmse::{
    run_wmmse, sum_rate, wf_init, IlsReduction, SubproblemSolver, WmmseConfig, WmmseState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Continuous WMMSE without fronthaul quantization (upper bound).
    InfiniteRes,
    /// Quantization-aware WMMSE with the sphere decoder.
    Sd,
    /// Quantization-aware WMMSE with expectation propagation.
    Ep,
    HalfAware,
    Heuristic,
    Unaware,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::InfiniteRes,
        Scheme::Sd,
        Scheme::Ep,
        Scheme::HalfAware,
        Scheme::Heuristic,
        Scheme::Unaware,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::InfiniteRes => "infinite_res",
            Scheme::Sd => "sd",
            Scheme::Ep => "ep",
            Scheme::HalfAware => "half_aware",
            Scheme::Heuristic => "heuristic",
            Scheme::Unaware => "unaware",
        }
    }

    pub fn is_quantized(self) -> bool {
        self != Scheme::InfiniteRes
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sch| sch.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

/// How the per-UE rate weights are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// `u_k = 1`.
    Uniform,
    /// `u_k` drawn uniformly from `{1, 2}` per trial, then scaled so that
    /// `Σ u_k = K`.
    RandomOneTwo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schemes: Vec<Scheme>,
    pub snr_grid_db: Vec<f64>,
    pub antennas: usize,
    pub users: usize,
    pub levels: usize,
    pub trials: usize,
    pub seed: u64,
    pub power_budget: f64,
    pub max_iterations: usize,
    pub convergence_threshold: f64,
    pub weights: WeightMode,
    /// When false the precoder is optimized with unit weights but the rate
    /// is still reported under the drawn weights.
    pub weight_aware: bool,
    /// Carrier frequency; recorded only, the channel model is narrowband.
    pub carrier_ghz: f64,
    pub csi: CsiModel,
    pub channel: ChannelConfig,
    pub ep: EpConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schemes: Scheme::ALL.to_vec(),
            snr_grid_db: vec![0.0, 10.0, 20.0, 30.0, 40.0],
            antennas: 16,
            users: 4,
            levels: 8,
            trials: 100,
            seed: 0,
            power_budget: 1.0,
            max_iterations: 20,
            convergence_threshold: 1e-4,
            weights: WeightMode::Uniform,
            weight_aware: true,
            carrier_ghz: 3.0,
            csi: CsiModel::default(),
            channel: ChannelConfig::default(),
            ep: EpConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.schemes.is_empty() || self.snr_grid_db.is_empty() {
            return Err(Error::Config("scheme list and SNR grid must be non-empty".into()));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("SNR grid must be finite".into()));
        }
        if self.levels < 2 {
            return Err(Error::Config("need at least 2 quantization levels".into()));
        }
        self.channel_config().validate()?;
        self.csi.validate()?;
        self.ep.validate()?;
        self.wmmse_config(1.0, vec![1.0; self.users]).validate(self.users)
    }

    /// Channel settings with `M` and `K` taken from this experiment.
    pub fn channel_config(&self) -> ChannelConfig {
        ChannelConfig {
            antennas: self.antennas,
            users: self.users,
            ..self.channel.clone()
        }
    }

    pub fn quantizer(&self) -> Result<QuantizerSpec> {
        QuantizerSpec::for_power_budget(self.levels, self.power_budget, self.users, self.antennas)
    }

    pub fn noise_power(&self, snr_db: f64) -> f64 {
        self.power_budget / 10f64.powf(snr_db / 10.0)
    }

    fn wmmse_config(&self, n0: f64, weights: Vec<f64>) -> WmmseConfig {
        WmmseConfig {
            max_iterations: self.max_iterations,
            convergence_threshold: self.convergence_threshold,
            ue_weights: weights,
            power_budget: self.power_budget,
            noise_power: n0,
        }
    }
}

/// Mean weighted sum rate of one `(scheme, SNR)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: Scheme,
    pub snr_db: f64,
    pub mean_sum_rate: f64,
    pub std_error: f64,
    /// Trials that produced a rate.
    pub trials: usize,
    pub converged_fraction: f64,
    pub mean_iterations: f64,
    pub failed_trials: usize,
}

impl ResultRow {
    pub const CSV_HEADER: &'static str =
        "scheme,snr_db,mean_sum_rate,std_error,trials,converged_fraction,mean_iterations";

    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.scheme,
            self.snr_db,
            self.mean_sum_rate,
            self.std_error,
            self.trials,
            self.converged_fraction,
            self.mean_iterations
        )
    }

    /// More than 1% of the trials failed.
    pub fn is_flagged(&self) -> bool {
        self.failed_trials * 100 > self.trials + self.failed_trials
    }
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::from(ResultRow::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.csv_line());
        out.push('\n');
    }
    out
}

/// Channels and weights of one trial.
#[derive(Debug, Clone)]
pub struct TrialInput {
    pub h_true: CMat,
    /// Channel available at the BBU.
    pub h_observed: CMat,
    /// Weights the rate is reported under.
    pub weights: Vec<f64>,
    pub noise_power: f64,
}

pub fn draw_weights<R: Rng + ?Sized>(mode: WeightMode, users: usize, rng: &mut R) -> Vec<f64> {
    match mode {
        WeightMode::Uniform => vec![1.0; users],
        WeightMode::RandomOneTwo => {
            let raw: Vec<f64> = (0..users)
                .map(|_| rng.random_range(1..=2u8) as f64)
                .collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|u| u * users as f64 / total).collect()
        }
    }
}

/// Realization of trial `trial` at the given SNR. The uplink noise of the
/// CSI model defaults to `q_U/SNR`.
pub fn trial_input(cfg: &ExperimentConfig, snr_db: f64, trial: usize) -> Result<TrialInput> {
    let idx = trial as u64;
    let ch = draw_channel(&cfg.channel_config(), &mut stream_rng(cfg.seed, Stream::Channel, idx))?;
    let snr = 10f64.powf(snr_db / 10.0);
    let uplink_noise = cfg.csi.uplink_noise.unwrap_or(cfg.csi.uplink_power / snr);
    let h_observed = observed_channel(
        &ch.h,
        &cfg.csi,
        uplink_noise,
        &mut stream_rng(cfg.seed, Stream::Csi, idx),
    )?;
    let weights = draw_weights(
        cfg.weights,
        cfg.users,
        &mut stream_rng(cfg.seed, Stream::Weights, idx),
    );
    Ok(TrialInput {
        h_true: ch.h,
        h_observed,
        weights,
        noise_power: cfg.noise_power(snr_db),
    })
}

/// Outcome of one scheme on one trial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub precoder: CMat,
    pub sum_rate: f64,
    pub iterations: usize,
    pub converged: bool,
    /// WMMSE run behind the precoder (the continuous run for Unaware and
    /// Heuristic).
    pub state: WmmseState,
}

/// Compute the precoder of `scheme` on the observed channel and score it on
/// the true channel.
pub fn run_scheme(cfg: &ExperimentConfig, scheme: Scheme, input: &TrialInput) -> Result<TrialOutcome> {
    let h = &input.h_observed;
    let n0 = input.noise_power;
    let opt_weights = if cfg.weight_aware {
        input.weights.clone()
    } else {
        vec![1.0; cfg.users]
    };
    let wcfg = cfg.wmmse_config(n0, opt_weights);
    let spec = cfg.quantizer()?;
    let (precoder, state) = match scheme {
        Scheme::InfiniteRes => run_wmmse(h, &wcfg, &SubproblemSolver::Continuous)?,
        Scheme::Sd => run_wmmse(h, &wcfg, &SubproblemSolver::Sphere(spec))?,
        Scheme::Ep => run_wmmse(h, &wcfg, &SubproblemSolver::Ep(spec, cfg.ep))?,
        Scheme::HalfAware => half_aware_precoding(h, &wcfg, &spec)?,
        Scheme::Unaware => unaware_precoding(h, &wcfg, &spec)?,
        Scheme::Heuristic => {
            let (_, state) = unaware_precoding(h, &wcfg, &spec)?;
            let p = heuristic_refine(
                h,
                &state.precoder,
                &spec,
                cfg.power_budget,
                n0,
                &wcfg.ue_weights,
            )?;
            (p, state)
        }
    };
    let rate = if linalg::power(&precoder) > 0.0 {
        sum_rate(&input.h_true, &precoder, cfg.power_budget, n0, &input.weights)?
    } else {
        0.0
    };
    if !rate.is_finite() {
        return Err(Error::NonFinite("sum rate"));
    }
    Ok(TrialOutcome {
        precoder,
        sum_rate: rate,
        iterations: state.iterations,
        converged: state.converged,
        state,
    })
}

fn aggregate(scheme: Scheme, snr_db: f64, outcomes: &[Result<TrialOutcome>]) -> ResultRow {
    let ok: Vec<&TrialOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
    let n = ok.len();
    let failed_trials = outcomes.len() - n;
    let nf = n.max(1) as f64;
    let mean = ok.iter().map(|o| o.sum_rate).sum::<f64>() / nf;
    let std_error = if n > 1 {
        let var = ok.iter().map(|o| (o.sum_rate - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    ResultRow {
        scheme,
        snr_db,
        mean_sum_rate: mean,
        std_error,
        trials: n,
        converged_fraction: ok.iter().filter(|o| o.converged).count() as f64 / nf,
        mean_iterations: ok.iter().map(|o| o.iterations as f64).sum::<f64>() / nf,
        failed_trials,
    }
}

/// Run every `(scheme, SNR)` cell of the experiment. Rows are ordered by
/// SNR, then by the scheme order of the config.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let cells: Vec<(f64, Scheme)> = cfg
        .snr_grid_db
        .iter()
        .flat_map(|&snr| cfg.schemes.iter().map(move |&s| (snr, s)))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..cfg.trials).map(move |t| (c, t)))
        .collect();
    let outcomes: Vec<Result<TrialOutcome>> = jobs
        .par_iter()
        .map(|&(c, t)| {
            let (snr, scheme) = cells[c];
            trial_input(cfg, snr, t).and_then(|input| run_scheme(cfg, scheme, &input))
        })
        .collect();
    Ok(cells
        .iter()
        .enumerate()
        .map(|(c, &(snr, scheme))| {
            aggregate(scheme, snr, &outcomes[c * cfg.trials..(c + 1) * cfg.trials])
        })
        .collect())
}

/// One WMMSE iterate for convergence plots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub objective: f64,
    pub sum_rate: f64,
}

impl TraceRow {
    pub const CSV_HEADER: &'static str = "iteration,objective,sum_rate";
}

/// Objective and sum-rate trace of `scheme` on one trial.
pub fn trace(cfg: &ExperimentConfig, scheme: Scheme, snr_db: f64, trial: usize) -> Result<Vec<TraceRow>> {
    cfg.validate()?;
    let input = trial_input(cfg, snr_db, trial)?;
    let out = run_scheme(cfg, scheme, &input)?;
    Ok(out
        .state
        .objective_trace
        .iter()
        .zip(&out.state.rate_trace)
        .enumerate()
        .map(|(iteration, (&objective, &sum_rate))| TraceRow {
            iteration,
            objective,
            sum_rate,
        })
        .collect())
}

pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from(TraceRow::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.iteration, r.objective, r.sum_rate));
    }
    out
}

/// Samples of `c − G p` for the ILS model of every UE, with `p` the
/// columns of the unnormalized regularized zero-forcing precoder, `β` and
/// `d` evaluated there, and multiplier `ω`. Each trial contributes `2MK`
/// samples.
pub fn ils_residuals(cfg: &ExperimentConfig, snr_db: f64, omega: f64) -> Result<Vec<f64>> {
    cfg.validate()?;
    let spec = cfg.quantizer()?;
    let per_trial: Vec<Result<Vec<f64>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            let input = trial_input(cfg, snr_db, t)?;
            let h = &input.h_observed;
            let wcfg = cfg.wmmse_config(input.noise_power, input.weights.clone());
            let p = wf_init(h, cfg.power_budget, input.noise_power)?;
            let state = WmmseState::at(h, &wcfg, p.clone());
            let red = IlsReduction::new(h, &state.weights, &state.beta, omega, spec.labels())?;
            let mut out = Vec::with_capacity(2 * cfg.antennas * cfg.users);
            for (i, prob) in red.problems.iter().enumerate() {
                let col = p.column(i).into_owned();
                let r = prob.c() - prob.g() * linalg::stack_real(&col);
                out.extend(r.iter());
            }
            Ok(out)
        })
        .collect();
    let mut all = Vec::new();
    for r in per_trial {
        all.extend(r?);
    }
    Ok(all)
}

/// Fronthaul bits per coherence block for shipping the precoder and the
/// symbols separately versus shipping the precoded, oversampled signal:
/// `C_separate = 2MK·N_pre + τ_s K η`, `C_joint = M τ_s η N_over`.
pub fn fronthaul_capacity(
    antennas: u64,
    users: u64,
    coherence_symbols: u64,
    symbol_bits: u64,
    precoding_bits: u64,
    oversampling: u64,
) -> (u64, u64) {
    let separate = 2 * antennas * users * precoding_bits + coherence_symbols * users * symbol_bits;
    let joint = antennas * coherence_symbols * symbol_bits * oversampling;
    (separate, joint)
}
