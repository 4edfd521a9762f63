use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use samplns::harness::{self, exit, HarnessError, RunConfig};
use samplns::upper_bound::Mode;
use samplns::{Clock, MutexLevel};

#[derive(Parser)]
#[command(name = "samplns", version, about = "Minimum t-wise interaction samples with certified lower bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute a sample and a lower bound certificate for one model.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check a sample file and a certificate file against a model.
    Verify {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
        #[arg(long)]
        model: PathBuf,
    },
    /// Coverage fraction of growing prefixes of a shuffled sample, as CSV.
    CoverageCurve {
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, env = "SAMPLNS_SEED", default_value_t = 0)]
        seed: u64,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every model of a directory and render a comparison table.
    Bench {
        #[arg(long)]
        corpus: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Interaction strength.
    #[arg(short, long, default_value_t = 2)]
    t: usize,
    /// Total time limit in seconds.
    #[arg(long, default_value_t = 900.0, value_parser = positive)]
    time_limit: f64,
    /// Time limit of each subproblem in seconds.
    #[arg(long, default_value_t = 60.0, value_parser = positive)]
    iteration_time_limit: f64,
    #[arg(long, env = "SAMPLNS_SEED", default_value_t = 0)]
    seed: u64,
    /// `deterministic` interleaves both searches on a work clock;
    /// `parallel` runs the bound search in its own thread.
    #[arg(long, value_enum, default_value_t = ModeArg::Deterministic)]
    mode: ModeArg,
    #[arg(short, long, default_value = ".")]
    output_dir: PathBuf,
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    /// Eliminate backbone and equivalent features before solving.
    #[arg(long)]
    simplify: bool,
    /// Strength of the exclusiveness test: l0, p1, p2 or exact.
    #[arg(long, default_value_t = MutexLevel::L0)]
    mutex_level: MutexLevel,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Allow t >= 3.
    #[arg(long)]
    allow_high_strength: bool,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ModeArg {
    Deterministic,
    Parallel,
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a positive number")),
    }
}

impl RunArgs {
    fn config(self) -> RunConfig {
        RunConfig {
            t: self.t,
            time_limit: self.time_limit,
            iteration_time_limit: self.iteration_time_limit,
            seed: self.seed,
            mode: match self.mode {
                ModeArg::Deterministic => Mode::Deterministic,
                ModeArg::Parallel => Mode::Parallel,
            },
            output_dir: self.output_dir,
            repeat: self.repeat,
            simplify: self.simplify,
            mutex_level: self.mutex_level,
            max_iterations: self.max_iterations,
            allow_high_strength: self.allow_high_strength,
        }
    }
}

fn run(command: Command, clock: &Clock) -> Result<(), HarnessError> {
    let mut stdout = std::io::stdout().lock();
    match command {
        Command::Sample { model, run } => {
            for report in harness::cmd_sample(&model, &run.config(), clock)? {
                let _ = writeln!(stdout, "{}", report.to_json());
            }
        }
        Command::Verify {
            sample,
            certificate,
            model,
        } => {
            let report = harness::cmd_verify(&sample, &certificate, &model)?;
            let _ = writeln!(stdout, "{}", report.to_json());
        }
        Command::CoverageCurve {
            sample,
            model,
            seed,
            out,
        } => {
            let csv = harness::cmd_coverage_curve(&sample, &model, seed)?;
            match out {
                Some(path) => std::fs::write(&path, csv).map_err(|source| HarnessError::Io { path, source })?,
                None => {
                    let _ = stdout.write_all(csv.as_bytes());
                }
            }
        }
        Command::Bench { corpus, run } => {
            let config = run.config();
            harness::check_strength(config.t, config.allow_high_strength)?;
            let rows = harness::cmd_bench(&corpus, &config, clock)?;
            let _ = stdout.write_all(harness::render_table(&rows).as_bytes());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let clock = Clock::wall();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command, &clock) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
