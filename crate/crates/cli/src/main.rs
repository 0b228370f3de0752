//! Command-line front end: variance analysis, self-verification, ΔSNR
//! mismatch curves, forward simulation, oracle enhancement and SI scoring.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use log::info;

use commands::{EnhanceOptions, MismatchOptions, VerifyOptions, SYNTHETIC_SAMPLES};
use config::{Preset, SessionConfig};

/// Environment variable that overrides the output directory.
const OUT_ENV: &str = "INTERP_SDE_OUT";

#[derive(Parser, Debug)]
#[command(name = "interp-sde", version, about = "Interpolating diffusion SDE toolkit (OUVE / BBED)")]
struct Cli {
    /// Named parameter set; overrides the `process` section of --config.
    #[arg(long, global = true, value_enum)]
    preset: Option<Preset>,

    /// TOML session file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory [default: config `io.out_dir`, else `out`].
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Interpolation factor, variance and diffusion on a uniform grid.
    Analyze {
        /// One file per preset instead of the configured process.
        #[arg(long)]
        compare: bool,
        /// Grid points, endpoints included.
        #[arg(long, default_value_t = 1000)]
        steps: usize,
    },
    /// Monte-Carlo and oracle self-checks; exits 1 on any failure.
    Verify {
        /// Run both presets.
        #[arg(long)]
        compare: bool,
        /// Euler–Maruyama steps for the moment checks.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        paths: Option<usize>,
        /// Scale every closed-form variance target (negative control).
        #[arg(long, hide = true)]
        corrupt_variance: Option<f64>,
    },
    /// Averaged ΔSNR(t) of the process mean for both presets.
    Mismatch {
        /// Number of synthetic mixtures (default 10 when no WAVs are given).
        #[arg(long)]
        synthetic: Option<usize>,
        #[arg(long)]
        clean: Vec<PathBuf>,
        /// Noise, already at the intended level; paired with --clean in order.
        #[arg(long)]
        noise: Vec<PathBuf>,
        /// Grid points in (0, T].
        #[arg(long, default_value_t = 100)]
        steps: usize,
        /// Length of each synthetic signal.
        #[arg(long, default_value_t = SYNTHETIC_SAMPLES)]
        samples: usize,
    },
    /// Forward Euler–Maruyama moments next to the closed forms.
    Simulate {
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 10_000)]
        paths: usize,
    },
    /// Reverse sampling with the conditional (clean-target) oracle score.
    EnhanceOracle {
        #[arg(long, requires = "noise")]
        clean: Option<PathBuf>,
        #[arg(long, requires = "clean")]
        noise: Option<PathBuf>,
        /// Rescale the noise to this SNR before mixing.
        #[arg(long, allow_hyphen_values = true)]
        snr_db: Option<f64>,
        /// Enhance this many synthetic mixtures instead of WAV input.
        #[arg(long, conflicts_with = "clean")]
        synthetic: Option<usize>,
        /// Reverse starting time (snapped to the step grid).
        #[arg(long)]
        t_rs: Option<f64>,
        /// Full-horizon step count `n`, `h = T/n`.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, default_value_t = SYNTHETIC_SAMPLES)]
        samples: usize,
    },
    /// SI-SDR/SIR/SAR per estimate file.
    Score {
        #[arg(long, required = true)]
        estimate: Vec<PathBuf>,
        #[arg(long)]
        clean: Vec<PathBuf>,
        #[arg(long)]
        noise: Vec<PathBuf>,
    },
    #[command(hide = true)]
    Specfun {
        #[command(subcommand)]
        function: SpecfunCommand,
    },
}

#[derive(Subcommand, Debug)]
enum SpecfunCommand {
    /// Exponential integral Ei(x).
    Ei {
        #[arg(allow_hyphen_values = true)]
        x: f64,
    },
}

fn run(cli: Cli) -> Result<bool> {
    if let Command::Specfun {
        function: SpecfunCommand::Ei { x },
    } = cli.command
    {
        commands::specfun_ei(x)?;
        return Ok(true);
    }

    let mut cfg = SessionConfig::load(cli.config.as_deref(), cli.preset)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Command::EnhanceOracle { t_rs, steps, .. } = &cli.command {
        if let Some(t) = t_rs {
            cfg.reverse.t_rs = Some(*t);
        }
        if let Some(n) = steps {
            cfg.reverse.n_steps_full = *n;
        }
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.io.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    cfg.io.out_dir = Some(out.clone());
    cfg.validate()?;
    output::ensure_dir(&out)?;
    let echo = cfg.write_resolved(&out)?;
    info!("resolved config: {}", echo.display());

    match cli.command {
        Command::Analyze { compare, steps } => commands::analyze(&cfg, &out, compare, steps)?,
        Command::Verify {
            compare,
            steps,
            paths,
            corrupt_variance,
        } => {
            let opts = VerifyOptions {
                steps,
                paths,
                compare,
                corrupt_variance,
            };
            return commands::verify(&cfg, &out, &opts);
        }
        Command::Mismatch {
            synthetic,
            clean,
            noise,
            steps,
            samples,
        } => commands::mismatch(
            &cfg,
            &out,
            &MismatchOptions {
                synthetic,
                clean,
                noise,
                points: steps,
                samples,
            },
        )?,
        Command::Simulate { steps, paths } => commands::simulate(&cfg, &out, steps, paths)?,
        Command::EnhanceOracle {
            clean,
            noise,
            snr_db,
            synthetic,
            samples,
            ..
        } => commands::enhance_oracle(
            &cfg,
            &out,
            &EnhanceOptions {
                clean,
                noise,
                snr_db,
                synthetic,
                samples,
            },
        )?,
        Command::Score { estimate, clean, noise } => commands::score(&cfg, &out, &estimate, &clean, &noise)?,
        Command::Specfun { .. } => unreachable!("handled above"),
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
