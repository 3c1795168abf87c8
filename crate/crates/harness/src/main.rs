//! `masim` command-line interface.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use masim_harness::calibrate::{calibrate, reference_evm, CalibModel};
use masim_harness::config::TrialConfig;
use masim_harness::error::{HarnessError, Result};
use masim_harness::presets::{run_preset, PRESET_NAMES};
use masim_harness::report::{write_sweep_csv, write_text, write_trial_csv};
use masim_harness::sweep::{run_sweep, SweepSpec};
use masim_harness::trial::run_trial;

#[derive(Parser)]
#[command(
    name = "masim",
    about = "Link-level massive MU-MIMO downlink simulator with hardware impairment models",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Additive,
    Multiplicative,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration point and write per-realization metrics.
    Trial {
        #[arg(long)]
        config: PathBuf,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
    },
    /// Run a parameter sweep described by a sweep spec file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Sweep spec (TOML with [[axis]] tables).
        #[arg(long)]
        sweep: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
    },
    /// Fit a stochastic model to the deterministic chain of the base config.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Reference EVM in percent; measured from the config's deterministic
        /// chain when omitted.
        #[arg(long)]
        reference_evm: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
    },
    /// Run a named experiment preset.
    Preset {
        /// One of the named recipes.
        name: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
    },
    /// List available presets.
    Presets,
}

fn load_config(path: &PathBuf, seed: Option<u64>) -> Result<TrialConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = TrialConfig::from_toml_str(&text)?;
    if let Some(s) = seed {
        cfg.run.master_seed = s;
    }
    Ok(cfg)
}

fn with_workers<T>(workers: usize, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    if workers == 0 {
        return f();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
    pool.install(f)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Trial { config, seed, out, workers, format: _ } => {
            let cfg = load_config(&config, seed)?;
            let summary = with_workers(workers, || run_trial(&cfg, 0))?;
            std::fs::create_dir_all(&out)?;
            let path = out.join("trial.csv");
            write_trial_csv(&path, &summary, cfg.channel.users)?;
            println!(
                "trial: EVM {:.4} % +- {:.4}, SNR {:.4} dB -> {}",
                summary.evm_mean,
                summary.evm_stderr,
                summary.snr_mean,
                path.display()
            );
            Ok(())
        }
        Command::Sweep { config, sweep, seed, out, workers, format: _ } => {
            let cfg = load_config(&config, seed)?;
            let text = std::fs::read_to_string(&sweep)
                .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", sweep.display())))?;
            let spec = SweepSpec::from_toml_str(&text)?;
            let (rows, failed) = with_workers(workers, || run_sweep(&cfg, &spec))?;
            std::fs::create_dir_all(&out)?;
            let path = out.join("sweep.csv");
            let paths: Vec<String> = spec.axis.iter().map(|a| a.path.clone()).collect();
            write_sweep_csv(&path, &paths, &rows)?;
            println!("sweep: {} points -> {}", rows.len(), path.display());
            if failed > 0 {
                return Err(HarnessError::PartialSweep { failed, total: rows.len() });
            }
            Ok(())
        }
        Command::Calibrate { config, model, reference_evm: given, seed, out, workers } => {
            let cfg = load_config(&config, seed)?;
            let model = match model {
                ModelArg::Additive => CalibModel::Additive,
                ModelArg::Multiplicative => CalibModel::Multiplicative,
            };
            let result = with_workers(workers, || {
                let (reference, stderr) = match given {
                    Some(r) => (r, 0.0),
                    None => reference_evm(&cfg)?,
                };
                calibrate(&cfg, model, reference, stderr)
            })?;
            std::fs::create_dir_all(&out)?;
            let path = out.join(format!("calibration_{}.toml", result.model));
            write_text(&path, &result.to_toml_string())?;
            println!(
                "calibrated {}: parameter {:.6}, achieved EVM {:.4} % (reference {:.4} %) -> {}",
                result.model,
                result.fitted_param,
                result.achieved_evm_pct,
                result.reference_evm_pct,
                path.display()
            );
            Ok(())
        }
        Command::Preset { name, seed, out, workers, format: _ } => {
            let files = with_workers(workers, || run_preset(&name, seed.unwrap_or(1), &out))?;
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(())
        }
        Command::Presets => {
            for p in PRESET_NAMES {
                println!("{p}");
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
