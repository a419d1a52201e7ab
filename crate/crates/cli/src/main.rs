use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use measurefirst::commands::{self, AnalyzeArgs};
use measurefirst::config::RunConfig;
use measurefirst::Failure;

#[derive(Parser)]
#[command(name = "measurefirst", version, about = "Measurement-first EEG analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a recording and its ground truth from a spec (JSON or TOML).
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full pipeline on a recording.
    Analyze {
        /// Sidecar JSON, bare .eegr stream, .csv or .edf.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        montage: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Timestamp recorded in run.json and the calibration log (RFC 3339).
        #[arg(long)]
        timestamp: Option<String>,
    },
    /// Detection metrics over a directory of synthesized recordings.
    Bench {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Mean absolute value errors of a report against ground truth.
    EvalValues {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

fn config(path: Option<&PathBuf>) -> Result<RunConfig, Failure> {
    match path {
        Some(p) => RunConfig::load(p).map_err(Failure::input),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Synth { spec, out } => {
            let spec = commands::load_spec(&spec).map_err(Failure::input)?;
            let sidecar = commands::cmd_synth(&spec, &out).map_err(Failure::input)?;
            println!("wrote {}", sidecar.display());
        }
        Command::Analyze {
            input,
            montage,
            config: cfg_path,
            out,
            seed,
            timestamp,
        } => {
            let mut cfg = config(cfg_path.as_ref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let timestamp = timestamp
                .unwrap_or_else(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
            let info = commands::cmd_analyze(&AnalyzeArgs {
                input: &input,
                montage: montage.as_deref(),
                config: &cfg,
                out: &out,
                timestamp,
            })?;
            println!("{} window(s) analysed in {:.2} s; report in {}", info.windows, info.latency_s, out.display());
        }
        Command::Bench { data, out, config: cfg_path } => {
            let m = commands::cmd_bench(&data, &config(cfg_path.as_ref())?, &out)?;
            println!(
                "FA/24h {:.3}  sensitivity {}  mean latency {}",
                m.fa_per_24h,
                m.sensitivity.map_or("n/a".into(), |s| format!("{s:.3}")),
                m.mean_latency_s.map_or("n/a".into(), |s| format!("{s:.2} s"))
            );
        }
        Command::EvalValues {
            pred,
            truth,
            config: cfg_path,
            json,
        } => {
            let v = commands::cmd_eval_values(&pred, &truth, &config(cfg_path.as_ref())?).map_err(Failure::input)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&v).map_err(|e| Failure::input(e.into()))?);
            } else {
                print!("{}", commands::format_value_table(&v));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
