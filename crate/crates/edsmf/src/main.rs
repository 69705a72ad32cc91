use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use edsmf::config::{RunConfig, STAGES};
use edsmf::Pipeline;

/// Election-aware stock forecasting pipeline.
///
/// COMMAND is `run` (the configured stage list, or --stages) or a single
/// stage name: synth, agents, ingest, features, signals, train, ensemble,
/// evaluate, report.
#[derive(Parser, Debug)]
#[command(name = "edsmf", version)]
struct Cli {
    #[arg(default_value = "run")]
    command: String,
    /// TOML run configuration; every field is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set training.epochs=5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Comma-separated stages for `run`.
    #[arg(long, value_delimiter = ',')]
    stages: Option<Vec<String>>,
    /// Root seed for every stage.
    #[arg(long)]
    seed: Option<u64>,
    /// Text backend of the agents stage.
    #[arg(long, value_parser = ["mock", "http"])]
    backend: Option<String>,
    /// No progress output.
    #[arg(long, short)]
    quiet: bool,
}

const CONFIG_ERROR: u8 = 2;
const STAGE_FAILURE: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut overrides = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(b) = &cli.backend {
        overrides.push(format!("agents.backend=\"{b}\""));
    }
    let config = match RunConfig::load(cli.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    let stages: Vec<String> = if cli.command == "run" {
        cli.stages.clone().unwrap_or_else(|| config.stages.clone())
    } else if STAGES.contains(&cli.command.as_str()) {
        if cli.stages.is_some() {
            eprintln!("error: --stages only applies to `run`");
            return ExitCode::from(CONFIG_ERROR);
        }
        vec![cli.command.clone()]
    } else {
        eprintln!("error: unknown command `{}` (expected run or one of: {})", cli.command, STAGES.join(", "));
        return ExitCode::from(CONFIG_ERROR);
    };
    if let Some(bad) = stages.iter().find(|s| !STAGES.contains(&s.as_str())) {
        eprintln!("error: unknown stage `{bad}` (known: {})", STAGES.join(", "));
        return ExitCode::from(CONFIG_ERROR);
    }
    if let Err(e) = config.check_inputs(&stages) {
        eprintln!("error: {e}");
        return ExitCode::from(CONFIG_ERROR);
    }
    let mut pipeline = Pipeline::new(config).quiet(cli.quiet);
    match pipeline.run(&stages) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(STAGE_FAILURE)
        }
    }
}
