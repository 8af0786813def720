use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dqk::data::{gen_checkerboard, write_csv, write_csv_to, CheckerboardSpec};
use dqk::runner::{report_dirs, run, write_outputs, ExperimentConfig, Mode};

#[derive(Parser)]
#[command(name = "dqk", version, about = "Decentralized quantum kernel learning on simulated noisy nodes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Decentralized,
    Centralized,
    Local,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Decentralized => Mode::Decentralized,
            ModeArg::Centralized => Mode::Centralized,
            ModeArg::Local => Mode::Local,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train from a TOML config and write rounds.jsonl / scores.json.
    Run {
        #[arg(long, short)]
        config: PathBuf,
        /// Overrides the master seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "decentralized")]
        mode: ModeArg,
        /// Also dump the final global training Gram matrix.
        #[arg(long)]
        gram: bool,
    },
    /// Write a checkerboard dataset as CSV (`-` for stdout).
    GenData {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "checkerboard.csv")]
        out: PathBuf,
        #[arg(long)]
        points_per_cell: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
    },
    /// Print score tables for one or more run directories.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

fn execute(cli: Cli) -> dqk::Result<()> {
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            mode,
            gram,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            cfg.output.gram_final |= gram;
            let result = run(&cfg, mode.into())?;
            write_outputs(&out, &cfg, &result)?;
            let reached = result
                .iteration_to_threshold
                .map_or_else(|| "not reached".to_string(), |r| format!("reached at round {r}"));
            println!(
                "{} rounds, target accuracy {} {reached}; outputs in {}",
                result.rounds_run,
                cfg.train.target_accuracy,
                out.display()
            );
            if let Some(avg) = result.average() {
                println!(
                    "honest average: score1 {:.4}  score2 {:.4}  score3 {:.4}",
                    avg.score1, avg.score2, avg.score3
                );
            }
        }
        Command::GenData {
            seed,
            out,
            points_per_cell,
            sigma,
        } => {
            let mut spec = CheckerboardSpec { seed, ..Default::default() };
            if let Some(n) = points_per_cell {
                spec.points_per_cell = n;
            }
            if let Some(s) = sigma {
                spec.sigma = s;
            }
            let data = gen_checkerboard(&spec)?;
            if out.as_os_str() == "-" {
                write_csv_to(std::io::stdout().lock(), &data)?;
            } else {
                write_csv(&out, &data)?;
                eprintln!("wrote {} points to {}", data.len(), out.display());
            }
        }
        Command::Report { dirs } => print!("{}", report_dirs(&dirs)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
