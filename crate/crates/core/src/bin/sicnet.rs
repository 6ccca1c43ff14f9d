use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sicnet::dataset::{generate, read_dataset, write_dataset, GenerationRequest, SystemKind, Taxonomy};
use sicnet::harness::{run_evaluate, run_experiment, Experiment, ExperimentConfig};
use sicnet::models::read_model;
use sicnet::Error;

#[derive(Parser)]
#[command(name = "sicnet", version, about = "Self-interference data synthesis and neural Hammerstein identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one labeled dataset.
    GenData {
        /// h (Hammerstein) or w (Wiener).
        #[arg(long)]
        system: SystemKind,
        /// invNL+invSI, invNL+varSI or varNL+varSI.
        #[arg(long)]
        taxonomy: Taxonomy,
        #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
        sdr0: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Seed of the invariant system components; defaults to --seed.
        #[arg(long)]
        system_seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment.
    Train {
        /// fig5, fig6, fig7, fig8 or gen-only; overrides the config file.
        #[arg(long)]
        experiment: Option<Experiment>,
        /// TOML experiment configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Output directory; defaults to `output_dir` of the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a model snapshot on a dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep the SI-SDR of varNL+varSI data.
    SweepSdr {
        /// Comma-separated SI-SDR values in dB.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        grid: Option<Vec<f64>>,
        #[arg(long)]
        repeats: Option<usize>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e)
    }
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e.to_string())
}

fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    path.map_or_else(|| Ok(ExperimentConfig::default()), |p| ExperimentConfig::load(p).map_err(usage))
}

fn finish_config(mut cfg: ExperimentConfig, seed: Option<u64>, epochs: Option<usize>) -> Result<ExperimentConfig, Failure> {
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(e) = epochs {
        cfg.train.epochs = e;
    }
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::GenData {
            system,
            taxonomy,
            sdr0,
            seed,
            system_seed,
            out,
        } => {
            let req = GenerationRequest::new(system, taxonomy, sdr0, seed).with_system_seed(system_seed.unwrap_or(seed));
            let ds = generate(&req)?;
            write_dataset(&ds, &out)?;
            println!("wrote {} ({} records, {})", out.display(), ds.records.len(), ds.label());
        }
        Command::Train {
            experiment,
            config,
            seed,
            epochs,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            if let Some(e) = experiment {
                cfg.experiment = e;
            } else if config.is_none() {
                return Err(Failure::Usage("train needs --experiment or --config".into()));
            }
            let cfg = finish_config(cfg, seed, epochs)?;
            let out = out
                .or_else(|| cfg.output_dir.clone())
                .ok_or_else(|| Failure::Usage("no output directory: pass --out or set output_dir".into()))?;
            let run = run_experiment(&cfg, &out)?;
            for r in &run.results {
                let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2} dB"));
                println!("{:<12} train {:>10}  test {:>10}", r.model, fmt(r.train), fmt(r.test));
            }
            for r in &run.sweep {
                println!("{:<12} SI-SDR {:>5.1} dB  mse {:.2} dB", r.kind.name(), r.si_sdr0, r.mean_mse_db);
            }
            println!("outputs in {}", out.display());
        }
        Command::Evaluate { model, data, out } => {
            let m = read_model(&model).map_err(usage)?;
            let ds = read_dataset(&data).map_err(usage)?;
            let db = run_evaluate(&m, &model, &ds, &data, &out)?;
            println!("{}: {db:.2} dB on {} records", m.kind(), ds.records.len());
        }
        Command::SweepSdr {
            grid,
            repeats,
            config,
            seed,
            epochs,
            out,
        } => {
            let mut cfg = load_config(config.as_deref())?;
            cfg.experiment = Experiment::Fig8Sweep;
            if let Some(g) = grid {
                cfg.sweep.grid = g;
            }
            if let Some(r) = repeats {
                cfg.sweep.repeats = r;
            }
            let cfg = finish_config(cfg, seed, epochs)?;
            let run = run_experiment(&cfg, &out)?;
            for r in &run.sweep {
                println!("{:<12} SI-SDR {:>5.1} dB  mse {:.2} dB", r.kind.name(), r.si_sdr0, r.mean_mse_db);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
