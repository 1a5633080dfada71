//! Monte-Carlo BER and residual-interference experiments.
//!
//! Every trial draws its randomness from its own ChaCha stream keyed by
//! `(seed, snr_index, trial_index)`, so all schemes see the same frames and the
//! results do not depend on how trials are spread across workers. Trials run in
//! fixed-size batches; the stopping rule is only checked between batches.

mod config;
mod presets;
mod selftest;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{
    multipath_residual_variance, snr_db_to_sigma2, theoretical_ber, theoretical_ser, TheoryInputs,
};
use crate::baseline::traditional_kic;
use crate::cancel::successive_cancel;
use crate::channel::{
    realize_fading, synthesize, FadingKind, FadingModel, FadingRealization, ReceivedFrame,
    TargetGain,
};
use crate::error::{Error, Result};
use crate::modem::{detect, generate_stream, Constellation, Role, SymbolStream};
use crate::rbp::{Estimate, PowerBound, RbpRecovery};
use crate::smooth::Smoothing;

pub use config::parse_config;
pub use presets::{preset, PRESET_NAMES};
pub use selftest::{selftest, Check, SelftestReport};

/// Receiver processing applied to each frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Interference-free reference: detection on `x' + n`.
    Clean,
    BkicS,
    /// Belief propagation with the channel model matched to the fading kind.
    BkicRbp,
    /// Belief propagation that always assumes a drifting channel.
    BkicRbpCont,
    /// Genie initial-channel subtraction.
    TraditionalKic,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Clean,
        Scheme::BkicS,
        Scheme::BkicRbp,
        Scheme::BkicRbpCont,
        Scheme::TraditionalKic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Clean => "clean",
            Scheme::BkicS => "bkic_s",
            Scheme::BkicRbp => "bkic_rbp",
            Scheme::BkicRbpCont => "bkic_rbp_cont",
            Scheme::TraditionalKic => "traditional_kic",
        }
    }

    pub fn is_rbp(self) -> bool {
        matches!(self, Scheme::BkicRbp | Scheme::BkicRbpCont)
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
        let s = s.trim();
        if let Some(scheme) = Scheme::ALL.into_iter().find(|v| v.name() == s) {
            return Ok(scheme);
        }
        if s == "bkic_npbp" {
            // Extension point: noise-predictive BP recovery is not provided.
            return Err(Error::InvalidConfig(
                "scheme bkic_npbp is not implemented".into(),
            ));
        }
        Err(Error::InvalidConfig(format!("unknown scheme {s:?}")))
    }
}

/// RBP quantization step as a function of SNR: `coarse` below `fine_from_db`,
/// `fine` from there on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub coarse: f64,
    pub fine: f64,
    pub fine_from_db: f64,
}

impl StepSchedule {
    pub fn fixed(step: f64) -> Self {
        Self {
            coarse: step,
            fine: step,
            fine_from_db: f64::INFINITY,
        }
    }

    pub fn at(&self, snr_db: f64) -> f64 {
        if snr_db >= self.fine_from_db {
            self.fine
        } else {
            self.coarse
        }
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            coarse: 0.025,
            fine: 0.0125,
            fine_from_db: 8.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RbpSettings {
    pub step: StepSchedule,
    /// Assumed increment variance when a drifting channel is modelled.
    pub sigma_delta2: f64,
    pub p_max: PowerBound,
    pub estimate: Estimate,
}

impl Default for RbpSettings {
    fn default() -> Self {
        Self {
            step: StepSchedule::default(),
            sigma_delta2: 0.001,
            p_max: PowerBound::MaxReceived,
            estimate: Estimate::Argmax,
        }
    }
}

/// When a curve point is complete.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stopping {
    /// Stop once this many symbol errors are seen (and `min_trials` are done).
    pub target_errors: u64,
    pub min_trials: u64,
    pub max_trials: u64,
    /// Trials per batch; the stopping rule is checked between batches.
    pub batch: u64,
}

impl Default for Stopping {
    fn default() -> Self {
        Self {
            target_errors: 200,
            min_trials: 100,
            max_trials: 100_000,
            batch: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub schemes: Vec<Scheme>,
    pub fading: FadingModel,
    /// Packet length.
    pub n: usize,
    /// Constellation order, shared by target and interferer.
    pub q: i64,
    pub snr_db: Vec<f64>,
    pub stopping: Stopping,
    pub seed: u64,
    pub rbp: RbpSettings,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            schemes: vec![Scheme::Clean, Scheme::BkicS],
            fading: FadingModel::block_unit(),
            n: 100,
            q: 2,
            snr_db: (1..=10).map(f64::from).collect(),
            stopping: Stopping::default(),
            seed: 1,
            rbp: RbpSettings::default(),
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        self.fading.validate()?;
        Constellation::new(self.q)?;
        if self.schemes.is_empty() {
            return bad("no schemes selected".into());
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("snr_db must be a non-empty list of finite values".into());
        }
        if self.n < self.fading.max_delay() + 3 {
            return bad(format!(
                "packet length {} too short for maximum delay {}",
                self.n,
                self.fading.max_delay()
            ));
        }
        let s = &self.stopping;
        if s.batch == 0 || s.max_trials == 0 || s.min_trials > s.max_trials {
            return bad("need batch > 0 and 0 < min_trials <= max_trials".into());
        }
        if self.schemes.contains(&Scheme::BkicRbpCont) && self.rbp.sigma_delta2 <= 0.0 {
            return bad("bkic_rbp_cont needs rbp_sigma_delta2 > 0".into());
        }
        if self.schemes.iter().any(|s| s.is_rbp()) {
            let drift = !matches!(self.fading.kind, FadingKind::Block)
                || self.schemes.contains(&Scheme::BkicRbpCont);
            if drift && self.rbp.sigma_delta2 <= 0.0 {
                return bad("continuous fading needs rbp_sigma_delta2 > 0".into());
            }
        }
        Ok(())
    }

    /// Shrink trial budgets about tenfold for quick desk runs.
    pub fn desk_scale(mut self) -> Self {
        let s = &mut self.stopping;
        s.target_errors = (s.target_errors / 10).max(200.min(s.target_errors));
        s.min_trials = (s.min_trials / 10).max(1);
        s.max_trials = (s.max_trials / 10).max(s.min_trials);
        self
    }

    pub fn constellation(&self) -> Constellation {
        Constellation::new(self.q).expect("validated order")
    }

    /// RBP strategy for `scheme` at `snr_db`; `None` for other schemes.
    pub fn rbp_for(&self, scheme: Scheme, snr_db: f64) -> Option<RbpRecovery> {
        let block_fading = match scheme {
            Scheme::BkicRbp => matches!(self.fading.kind, FadingKind::Block),
            Scheme::BkicRbpCont => false,
            _ => return None,
        };
        Some(RbpRecovery {
            p_max: self.rbp.p_max,
            sigma2: snr_db_to_sigma2(snr_db),
            sigma_delta2: if block_fading {
                0.0
            } else {
                self.rbp.sigma_delta2
            },
            step: self.rbp.step.at(snr_db),
            block_fading,
            estimate: self.rbp.estimate,
        })
    }
}

/// Counter-based generator for one trial.
pub fn trial_rng(seed: u64, snr_index: usize, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((snr_index as u64) << 40) | trial);
    rng
}

/// Everything drawn for one packet.
#[derive(Debug, Clone)]
pub struct Trial {
    pub target: SymbolStream,
    pub interferer: SymbolStream,
    pub fading: FadingRealization,
    pub frame: ReceivedFrame,
}

/// Draw trial `trial` of SNR point `snr_index`.
pub fn draw_trial(cfg: &ExperimentConfig, snr_index: usize, trial: u64) -> Result<Trial> {
    let mut rng = trial_rng(cfg.seed, snr_index, trial);
    let sigma2 = snr_db_to_sigma2(cfg.snr_db[snr_index]);
    let target = generate_stream(cfg.q, cfg.n, Role::Target, &mut rng)?;
    let interferer = generate_stream(cfg.q, cfg.n, Role::Interferer, &mut rng)?;
    let fading = realize_fading(&cfg.fading, cfg.n, &mut rng)?;
    let frame = synthesize(
        &target,
        &interferer,
        &fading,
        &TargetGain::Constant(1.0),
        sigma2,
        &mut rng,
    )?;
    Ok(Trial {
        target,
        interferer,
        fading,
        frame,
    })
}

/// Recovered `z` for one scheme on one trial.
pub fn apply_scheme(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    snr_db: f64,
    trial: &Trial,
) -> Result<Vec<f64>> {
    let delays = trial.fading.delays();
    let r = &trial.frame.r;
    match scheme {
        Scheme::Clean => Ok(trial.frame.dsn()),
        Scheme::BkicS => successive_cancel(r, &trial.interferer, &delays, &Smoothing),
        Scheme::BkicRbp | Scheme::BkicRbpCont => {
            let rbp = cfg.rbp_for(scheme, snr_db).expect("rbp scheme");
            successive_cancel(r, &trial.interferer, &delays, &rbp)
        }
        Scheme::TraditionalKic => traditional_kic(
            &trial.frame,
            &trial.interferer,
            &trial.fading.initial_coefficients(),
        ),
    }
}

/// Per-trial tallies, summed in trial order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Tally {
    errors: u64,
    symbols: u64,
    w_sum: f64,
    w_sq_sum: f64,
}

impl Tally {
    fn add(&mut self, other: &Tally) {
        self.errors += other.errors;
        self.symbols += other.symbols;
        self.w_sum += other.w_sum;
        self.w_sq_sum += other.w_sq_sum;
    }
}

fn run_trial(
    cfg: &ExperimentConfig,
    constellation: &Constellation,
    scheme: Scheme,
    snr_index: usize,
    trial: u64,
) -> Result<Tally> {
    let t = draw_trial(cfg, snr_index, trial)?;
    let z = apply_scheme(cfg, scheme, cfg.snr_db[snr_index], &t)?;
    let decisions = detect(&z, constellation);
    let errors = decisions
        .iter()
        .zip(t.target.symbols())
        .filter(|(a, b)| a != b)
        .count() as u64;
    let mut tally = Tally {
        errors,
        symbols: z.len() as u64,
        ..Tally::default()
    };
    for ((z, x), n) in z.iter().zip(&t.frame.x_prime).zip(&t.frame.noise) {
        let w = z - x - n;
        tally.w_sum += w;
        tally.w_sq_sum += w * w;
    }
    Ok(tally)
}

/// One row of an output curve.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub experiment: String,
    pub scheme: Scheme,
    pub snr_db: f64,
    pub n: usize,
    pub alpha: f64,
    /// Increment variance assumed by RBP; `None` for other schemes.
    pub sigma_delta2: Option<f64>,
    /// RBP quantization step; `None` for other schemes.
    pub step: Option<f64>,
    pub trials: u64,
    pub symbols: u64,
    pub errors: u64,
    /// Symbol error rate (bit error rate for BPSK).
    pub ber: f64,
    pub ber_stderr: f64,
    pub resid_var: f64,
    pub resid_var_theory: Option<f64>,
    pub ber_theory: Option<f64>,
}

fn theory(cfg: &ExperimentConfig, scheme: Scheme, sigma2: f64) -> (Option<f64>, Option<f64>) {
    let c = cfg.constellation();
    let error_rate = |mu: f64| {
        if cfg.q == 2 {
            theoretical_ber(mu, sigma2, 1.0)
        } else {
            theoretical_ser(mu, sigma2, c.order())
        }
    };
    match scheme {
        Scheme::Clean => (Some(0.0), Some(error_rate(0.0))),
        Scheme::BkicS => {
            let inp = TheoryInputs {
                n: cfg.n,
                sigma2,
                alpha: cfg.fading.alpha(),
                p_x: c.mean_square(),
                p_i: 1.0,
                q: c.order(),
                e_inv_i2: c.mean_inverse_square(),
            };
            let taps: Vec<(usize, f64)> = cfg
                .fading
                .taps
                .iter()
                .map(|t| (t.delay, t.power()))
                .collect();
            let mu = multipath_residual_variance(&inp, &taps);
            (Some(mu), Some(error_rate(mu)))
        }
        _ => (None, None),
    }
}

/// Simulate one `(scheme, snr)` point on a pool of `workers` threads.
pub fn run_point(
    cfg: &ExperimentConfig,
    scheme: Scheme,
    snr_index: usize,
    pool: &rayon::ThreadPool,
) -> Result<CurvePoint> {
    let constellation = cfg.constellation();
    let stop = cfg.stopping;
    let mut total = Tally::default();
    let mut trials = 0u64;
    while trials < stop.max_trials
        && (trials < stop.min_trials || total.errors < stop.target_errors)
    {
        let end = (trials + stop.batch).min(stop.max_trials);
        let batch: Vec<Result<Tally>> = pool.install(|| {
            (trials..end)
                .into_par_iter()
                .map(|k| run_trial(cfg, &constellation, scheme, snr_index, k))
                .collect()
        });
        for tally in batch {
            total.add(&tally?);
        }
        trials = end;
    }
    let snr_db = cfg.snr_db[snr_index];
    let sigma2 = snr_db_to_sigma2(snr_db);
    let symbols = total.symbols as f64;
    let ber = total.errors as f64 / symbols;
    let mean = total.w_sum / symbols;
    let (resid_var_theory, ber_theory) = theory(cfg, scheme, sigma2);
    let rbp = cfg.rbp_for(scheme, snr_db);
    Ok(CurvePoint {
        experiment: cfg.name.clone(),
        scheme,
        snr_db,
        n: cfg.n,
        alpha: cfg.fading.alpha(),
        sigma_delta2: rbp.map(|r| r.sigma_delta2),
        step: rbp.map(|r| r.step),
        trials,
        symbols: total.symbols,
        errors: total.errors,
        ber,
        ber_stderr: (ber * (1.0 - ber) / symbols).sqrt(),
        resid_var: total.w_sq_sum / symbols - mean * mean,
        resid_var_theory,
        ber_theory,
    })
}

pub fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))
}

/// Run every scheme at every SNR point and write the CSV if an output path is
/// configured. `workers = 0` uses all available cores.
pub fn run_experiment(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<CurvePoint>> {
    cfg.validate()?;
    let pool = thread_pool(workers)?;
    let mut points = Vec::with_capacity(cfg.schemes.len() * cfg.snr_db.len());
    for &scheme in &cfg.schemes {
        for snr_index in 0..cfg.snr_db.len() {
            points.push(run_point(cfg, scheme, snr_index, &pool)?);
        }
    }
    if let Some(path) = &cfg.output {
        write_csv_file(path, &points)?;
    }
    Ok(points)
}

pub const CSV_HEADER: [&str; 15] = [
    "experiment",
    "scheme",
    "snr_db",
    "n",
    "alpha",
    "sigma_delta2",
    "step",
    "trials",
    "symbols",
    "errors",
    "ber",
    "ber_stderr",
    "resid_var",
    "resid_var_theory",
    "ber_theory",
];

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(out: W, points: &[CurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for p in points {
        w.write_record([
            p.experiment.clone(),
            p.scheme.to_string(),
            p.snr_db.to_string(),
            p.n.to_string(),
            p.alpha.to_string(),
            opt(p.sigma_delta2),
            opt(p.step),
            p.trials.to_string(),
            p.symbols.to_string(),
            p.errors.to_string(),
            p.ber.to_string(),
            p.ber_stderr.to_string(),
            p.resid_var.to_string(),
            opt(p.resid_var_theory),
            opt(p.ber_theory),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, points: &[CurvePoint]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(std::io::BufWriter::new(file), points)
}

/// `(snr_db, ber)` pairs of one scheme, in SNR order.
pub fn curve(points: &[CurvePoint], scheme: Scheme) -> Vec<(f64, f64)> {
    let mut c: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.scheme == scheme)
        .map(|p| (p.snr_db, p.ber))
        .collect();
    c.sort_by(|a, b| a.0.total_cmp(&b.0));
    c
}
