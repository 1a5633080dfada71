use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bkic::analysis::{
    optimal_n, residual_variance_bound, residual_variance_exact, snr_db_to_sigma2, snr_loss,
    theoretical_ber, TheoryInputs,
};
use bkic::harness::{parse_config, preset, run_experiment, selftest, CurvePoint, ExperimentConfig};
use bkic::Constellation;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bkic",
    version,
    about = "Blind known-interference cancellation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a key=value config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run a built-in figure scenario (fig4 .. fig10).
    Figure {
        name: String,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Print the closed-form residual, BER and packet-length figures.
    Theory(TheoryArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Args)]
struct RunOpts {
    /// CSV output path (overrides the config file).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Cut trial budgets about tenfold.
    #[arg(long)]
    desk_scale: bool,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 10.0)]
    snr_db: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    p_x: f64,
    #[arg(long, default_value_t = 1.0)]
    p_i: f64,
    /// Interferer constellation order.
    #[arg(long, default_value_t = 2)]
    q: i64,
    #[arg(long, default_value_t = 0.001)]
    sigma_delta2: f64,
}

fn apply(
    mut cfg: ExperimentConfig,
    opts: &RunOpts,
    default_out: Option<PathBuf>,
) -> ExperimentConfig {
    if opts.desk_scale {
        cfg = cfg.desk_scale();
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(out) = opts.out.clone().or(default_out) {
        cfg.output = Some(out);
    }
    cfg
}

fn print_points(points: &[CurvePoint]) {
    println!(
        "{:<16} {:>6} {:>9} {:>11} {:>10} {:>11} {:>11}",
        "scheme", "snr_db", "trials", "ber", "stderr", "resid_var", "ber_theory"
    );
    for p in points {
        let theory = p
            .ber_theory
            .map(|b| format!("{b:.3e}"))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<16} {:>6} {:>9} {:>11.3e} {:>10.2e} {:>11.3e} {:>11}",
            p.scheme.name(),
            p.snr_db,
            p.trials,
            p.ber,
            p.ber_stderr,
            p.resid_var,
            theory
        );
    }
}

fn run(cfg: ExperimentConfig, workers: usize) -> Result<()> {
    let points = run_experiment(&cfg, workers)?;
    print_points(&points);
    if let Some(out) = &cfg.output {
        eprintln!("wrote {}", out.display());
    }
    Ok(())
}

fn theory(a: &TheoryArgs) -> Result<()> {
    let c = Constellation::new(a.q)?;
    let sigma2 = snr_db_to_sigma2(a.snr_db);
    let inp = TheoryInputs {
        n: a.n,
        sigma2,
        alpha: a.alpha,
        p_x: a.p_x,
        p_i: a.p_i,
        q: 2,
        e_inv_i2: 1.0,
    }
    .with_interferer(&c);
    if a.n < 2 {
        bail!("packet length must be at least 2");
    }
    let mu = residual_variance_bound(&inp);
    println!("sigma2                 {sigma2:.6}");
    println!("residual variance      {mu:.6e}");
    println!(
        "  increment form       {:.6e}",
        residual_variance_exact(&inp, a.sigma_delta2)
    );
    println!(
        "BKIC-S BER             {:.6e}",
        theoretical_ber(mu, sigma2, a.p_x)
    );
    println!(
        "clean BER              {:.6e}",
        theoretical_ber(0.0, sigma2, a.p_x)
    );
    println!("SNR loss (dB)          {:.4}", snr_loss(mu, sigma2));
    println!(
        "optimal N              {:.2}",
        optimal_n(&inp, a.sigma_delta2)
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, opts } => std::fs::read_to_string(config)
            .with_context(|| format!("reading {}", config.display()))
            .and_then(|text| Ok(parse_config(&text)?))
            .and_then(|cfg| run(apply(cfg, opts, None), opts.workers)),
        Command::Figure { name, opts } => preset(name).map_err(Into::into).and_then(|cfg| {
            run(
                apply(cfg, opts, Some(format!("{name}.csv").into())),
                opts.workers,
            )
        }),
        Command::Theory(args) => theory(args),
        Command::Selftest => {
            let report = selftest();
            print!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(anyhow::anyhow!("self-test failed"))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
