use std::path::{Path, PathBuf};
use std::process::ExitCode;

use beatres_cli::commands::{self, EvalMode, Excitation};
use beatres_cli::config::Seeds;
use beatres_cli::{CliError, CliResult, ExperimentConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "beatres",
    version,
    about = "Wave-equation reservoir experiments for beat prediction"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// `N` derives all five seeds from N; `name=N` sets one seed. Repeatable.
    #[arg(long = "seed", global = true, value_name = "N|NAME=N")]
    seeds: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the training dataset (or the test suite) as CSV files.
    Gen {
        /// Write the six fixed test signals instead of the dataset.
        #[arg(long)]
        suite: bool,
    },
    /// Train the readout of the wave reservoir.
    Train {
        /// Dataset directory from `gen`; generated in memory when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Continue training this model file.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Score a model on the test signals, optionally with adaptation.
    Eval {
        #[arg(long)]
        model: PathBuf,
        /// Test signal directory; the built-in suite when omitted.
        #[arg(long)]
        tests: Option<PathBuf>,
        #[command(flatten)]
        mode: ModeFlags,
    },
    /// Measure how scaling the speed field shifts predicted beats.
    SweepC {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        tests: Option<PathBuf>,
        /// Comma-separated δc values; the config's list when omitted.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        deltas: Option<Vec<f64>>,
    },
    /// Per-neuron spectra and activity heat map under a chosen input.
    Spectra {
        #[arg(long)]
        model: PathBuf,
        /// Comma-separated pulse-train frequencies in Hz.
        #[arg(long, value_delimiter = ',')]
        freqs: Vec<f64>,
        /// Frequency proportions such as `1:2`, applied to a single base in --freqs.
        #[arg(long)]
        ratio: Option<String>,
        /// Drive with a unit impulse instead of pulse trains.
        #[arg(long, conflicts_with_all = ["freqs", "ratio"])]
        impulse: bool,
    },
    /// Train and score the random sparse reservoir baseline.
    Baseline {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        tests: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(multiple = false)]
struct ModeFlags {
    /// Run synchronization and dynamic selection as configured (default).
    #[arg(long)]
    adapt: bool,
    /// Score the frozen reservoir only.
    #[arg(long)]
    no_adapt: bool,
    /// Adapt with synchronization alone.
    #[arg(long)]
    sync_only: bool,
    /// Adapt with dynamic selection alone.
    #[arg(long)]
    ds_only: bool,
}

impl ModeFlags {
    fn mode(&self) -> EvalMode {
        if self.no_adapt {
            EvalMode::NoAdapt
        } else if self.sync_only {
            EvalMode::SyncOnly
        } else if self.ds_only {
            EvalMode::DsOnly
        } else {
            EvalMode::Adapt
        }
    }
}

fn resolve_config(common: &Common) -> CliResult<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for spec in &common.seeds {
        match spec.split_once('=') {
            Some((name, value)) => cfg.seeds.set(name.trim(), parse_seed(value)?)?,
            None => cfg.seeds = Seeds::from_base(parse_seed(spec)?),
        }
    }
    cfg.resolve()
}

fn parse_seed(text: &str) -> CliResult<u64> {
    text.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("seed `{text}` is not a non-negative integer")))
}

fn excitation(freqs: &[f64], ratio: Option<&str>, impulse: bool) -> CliResult<Excitation> {
    if impulse {
        return Ok(Excitation::Impulse);
    }
    let freqs_hz = match ratio {
        Some(r) => {
            let [base] = freqs else {
                return Err(CliError::Config(
                    "--ratio needs exactly one base frequency in --freqs".into(),
                ));
            };
            commands::parse_ratio(r)?
                .into_iter()
                .map(|m| m * base)
                .collect()
        }
        None if freqs.is_empty() => {
            return Err(CliError::Config(
                "give --freqs, --ratio with a base, or --impulse".into(),
            ))
        }
        None => freqs.to_vec(),
    };
    Ok(Excitation::Trains { freqs_hz })
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot start {n} threads: {e}")))?;
    }
    let cfg = resolve_config(&cli.common)?;
    let out: &Path = &cli.common.out;
    match cli.command {
        Command::Gen { suite } => {
            let m = commands::cmd_gen(&cfg, out, suite)?;
            log::info!("wrote {} signals to {}", m.samples.len(), out.display());
        }
        Command::Train { data, resume } => {
            let mf = commands::cmd_train(&cfg, data.as_deref(), out, resume.as_deref())?;
            log::info!("trained {} epochs", mf.provenance.epochs_trained);
        }
        Command::Eval { model, tests, mode } => {
            let records = commands::cmd_eval(&cfg, &model, tests.as_deref(), out, mode.mode())?;
            for r in records {
                println!(
                    "sample {} {:>4}: interval {:.3} s, mean offset {:+.4}, variance {:.5}, lag {:+.3} s",
                    r.sample, r.phase, r.metrics.interval_s, r.metrics.offsets.mean, r.metrics.offsets.variance, r.metrics.lag_s
                );
            }
        }
        Command::SweepC {
            model,
            tests,
            deltas,
        } => {
            let deltas = deltas.unwrap_or_else(|| cfg.sweep.deltas.clone());
            for r in commands::cmd_sweep_c(&cfg, &model, tests.as_deref(), &deltas, out)? {
                println!(
                    "sample {} δc {:+.3}: offset shift {:+.4} ({:+.4} s)",
                    r.sample, r.delta_c, r.offset_shift, r.shift_s
                );
            }
        }
        Command::Spectra {
            model,
            freqs,
            ratio,
            impulse,
        } => {
            let ex = excitation(&freqs, ratio.as_deref(), impulse)?;
            let s = commands::cmd_spectra(&cfg, &model, &ex, out)?;
            println!(
                "fast-quarter median {:.3} Hz, slow-quarter median {:.3} Hz",
                s.fast_quarter_median_hz, s.slow_quarter_median_hz
            );
        }
        Command::Baseline { data, tests } => {
            let b = commands::cmd_baseline(&cfg, data.as_deref(), tests.as_deref(), out)?;
            for r in b.records {
                println!("sample {}: lag {:+.3} s", r.sample, r.metrics.lag_s);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
