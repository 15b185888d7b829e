use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use temple_lab::{emit_report, run, verdict_exit_code, Experiment, ExperimentConfig, ERROR_EXIT_CODE};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Command {
    Bilipschitz,
    Causality,
    Gradient,
    Isometry,
    Nulldist,
    ChartDump,
}

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::Bilipschitz => Experiment::Bilipschitz,
            Command::Causality => Experiment::Causality,
            Command::Gradient => Experiment::Gradient,
            Command::Isometry => Experiment::Isometry,
            Command::Nulldist => Experiment::Nulldist,
            Command::ChartDump => Experiment::ChartDump,
        }
    }
}

/// Temple chart and null distance experiments.
///
/// Exit status: 0 pass, 1 fail, 2 inconclusive, 3 configuration or domain error.
#[derive(Debug, Parser)]
#[command(name = "temple-lab", version)]
struct Cli {
    #[arg(value_enum)]
    experiment: Command,
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("temple-lab: {e}");
            ERROR_EXIT_CODE
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cli: &Cli) -> Result<i32, temple_lab::LabError> {
    let mut config = ExperimentConfig::load(&cli.config)?;
    config.experiment = cli.experiment.into();
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    let outcome = run(&config, cli.threads)?;
    let files = emit_report(&outcome, &config, &config.output_dir)?;
    for f in &files {
        println!("{}", f.display());
    }
    println!("verdict: {}", outcome.report.verdict.as_str());
    Ok(verdict_exit_code(outcome.report.verdict))
}
