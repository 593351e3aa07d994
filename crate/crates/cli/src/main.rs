use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use noma_ae::eval::StoppingRule;
use noma_ae_cli::{
    cmd_evaluate, cmd_inspect, cmd_sweep, cmd_train, exit_code, DetectorKind, EvalOptions, EvalSource,
    SweepKind,
};

#[derive(Parser)]
#[command(name = "noma-ae", version, about = "Autoencoder codebook design and BER evaluation for code-domain NOMA")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorArg {
    Nn,
    Mld,
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepArg {
    Delta,
    Pnl,
    #[value(name = "mu_vs_su", alias = "mu-vs-su")]
    MuVsSu,
}

#[derive(Subcommand)]
enum Command {
    /// Train an autoencoder and write a model directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        quiet: bool,
    },
    /// Simulate the BER of a codebook file or a trained model directory.
    Evaluate {
        #[arg(long, conflicts_with = "model", required_unless_present = "model")]
        codebook: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "mld")]
        detector: DetectorArg,
        /// Comma-separated Eb/N0 values in dB.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0,2,4,6,8,10,12")]
        ebn0: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long, default_value_t = StoppingRule::default().max_bits)]
        max_bits: u64,
        #[arg(long, default_value_t = StoppingRule::default().min_errors)]
        min_errors: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Train and evaluate a grid of experiments derived from one config.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepArg,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long)]
        quiet: bool,
    },
    /// Print the metrics of a codebook file.
    Inspect {
        codebook: PathBuf,
    },
}

fn run(cli: Cli) -> noma_ae::Result<()> {
    match cli.command {
        Command::Train { config, seed, out, quiet } => {
            cmd_train(&config, seed, &out, quiet)?;
        }
        Command::Evaluate {
            codebook,
            model,
            detector,
            ebn0,
            out,
            workers,
            max_bits,
            min_errors,
            seed,
        } => {
            let source = match (codebook, model) {
                (Some(p), _) => EvalSource::Codebook(p),
                (None, Some(d)) => EvalSource::Model(d),
                (None, None) => unreachable!("clap requires one source"),
            };
            let opts = EvalOptions {
                detector: match detector {
                    DetectorArg::Nn => DetectorKind::Nn,
                    DetectorArg::Mld => DetectorKind::Mld,
                },
                ebn0_db: ebn0,
                stopping: StoppingRule { min_errors, max_bits },
                workers,
                seed,
            };
            let curve = cmd_evaluate(&source, &opts, &out)?;
            for p in &curve.points {
                println!("{:>6.2} dB  BER {:.3e} ± {:.1e}  ({} errors / {} bits)", p.ebn0_db, p.ber, p.ci95, p.errors, p.bits);
            }
        }
        Command::Sweep { kind, config, seed, out, workers, quiet } => {
            let kind = match kind {
                SweepArg::Delta => SweepKind::Delta,
                SweepArg::Pnl => SweepKind::Pnl,
                SweepArg::MuVsSu => SweepKind::MuVsSu,
            };
            let outcome = cmd_sweep(kind, &config, seed, &out, workers, quiet)?;
            for (name, msg) in &outcome.failures {
                eprintln!("cell {name} failed: {msg}");
            }
        }
        Command::Inspect { codebook } => {
            print!("{}", cmd_inspect(&codebook)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
