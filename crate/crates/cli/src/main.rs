use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use trajsel::config::ExperimentConfig;
use trajsel::pipeline::{Pipeline, Study};

/// Trajectory-based algorithm selection on BBOB-style functions.
#[derive(Parser)]
#[command(name = "trajsel", version)]
struct Cli {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overwrite outputs produced by a different config.
    #[arg(long, global = true)]
    force: bool,
    /// Replaces the config's base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replaces the config's output directory.
    #[arg(long, global = true, env = "TRAJSEL_OUTPUT_ROOT")]
    output_root: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run all solvers on every instance and store the run logs.
    Generate,
    /// Build labels, trajectory, time-series and ELA datasets.
    Extract,
    /// Run one study and write its report.
    Study {
        #[arg(value_parser = parse_study)]
        study: Study,
    },
    /// Print the summaries of all reports written for this config.
    Report,
    /// Print the effective config as TOML.
    Config,
}

fn parse_study(s: &str) -> Result<Study, String> {
    s.parse().map_err(|e: trajsel::Error| e.to_string())
}

fn run(cli: Cli) -> trajsel::Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    if let Some(root) = cli.output_root {
        cfg.output_dir = root;
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(trajsel::Error::InvalidArgument("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| trajsel::Error::InvalidArgument(e.to_string()))?;
    }
    let pipeline = Pipeline::new(cfg)?;
    match cli.command {
        Command::Generate => {
            let s = pipeline.generate(cli.force)?;
            println!("generate: {} runs computed, {} cached (config {})", s.computed, s.cached, &pipeline.hash[..12]);
        }
        Command::Extract => {
            let s = pipeline.extract()?;
            for f in &s.files {
                println!("{}", f.display());
            }
            println!("extract: {} files written", s.files.len());
        }
        Command::Study { study } => {
            let report = pipeline.study(study)?;
            print!("{}", report.summary_table());
            println!("report: {}", pipeline.layout.reports().join(format!("{}.json", report.stem())).display());
        }
        Command::Report => {
            let reports = pipeline.existing_reports()?;
            if reports.is_empty() {
                println!("no reports for config {}", &pipeline.hash[..12]);
            }
            for r in reports {
                println!("{}", r.summary_table());
            }
        }
        Command::Config => {
            print!("{}", pipeline.config.to_toml()?);
            println!("# hash = {}", pipeline.hash);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
