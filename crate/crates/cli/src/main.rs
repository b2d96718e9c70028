use std::io;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use dimshift::config::RunConfig;
use dimshift::env::{FeedbackKind, ShiftKind};
use dimshift::harness::{run_grid, ModelKind};
use dimshift::report;

#[derive(Debug, Parser)]
#[command(
    name = "dimshift",
    version,
    about = "Dimensional-shift contextual bandit simulations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the (model x shift x feedback) grid and write curve and summary CSVs.
    Run(RunArgs),
    /// Summarise a results directory: intra vs extra jumpstart per model and regime.
    Metrics(MetricsArgs),
}

#[derive(Debug, clap::Args)]
struct RunArgs {
    /// TOML run configuration; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated subset of frl,wrl,ibl,wibl.
    #[arg(long, value_delimiter = ',', value_parser = parse_model)]
    models: Option<Vec<ModelKind>>,
    /// Comma-separated subset of intra,extra.
    #[arg(long, value_delimiter = ',', value_parser = parse_shift)]
    shifts: Option<Vec<ShiftKind>>,
    /// Comma-separated subset of immediate,delayed,counterfactual.
    #[arg(long, value_delimiter = ',', value_parser = parse_feedback)]
    feedback: Option<Vec<FeedbackKind>>,
    /// Agents per cell.
    #[arg(long)]
    agents: Option<usize>,
    /// Master seed; overrides DIMSHIFT_SEED and the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the resolved configuration and exit without running.
    #[arg(long)]
    print_config: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, clap::Args)]
struct MetricsArgs {
    /// Directory written by `dimshift run`.
    dir: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: dimshift::Error| e.to_string())
}

fn parse_shift(s: &str) -> Result<ShiftKind, String> {
    s.parse().map_err(|e: dimshift::Error| e.to_string())
}

fn parse_feedback(s: &str) -> Result<FeedbackKind, String> {
    s.parse().map_err(|e: dimshift::Error| e.to_string())
}

fn resolve_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_seed_env()?;
    if let Some(models) = &args.models {
        cfg.models = models.clone();
    }
    if let Some(shifts) = &args.shifts {
        cfg.shifts = shifts.clone();
    }
    if let Some(feedback) = &args.feedback {
        cfg.feedback = feedback.clone();
    }
    if let Some(n) = args.agents {
        cfg.n_agents = n;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    cfg.resolve();
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let cfg = resolve_config(&args)?;
    if args.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let grid = cfg.grid();
    let started = Instant::now();
    let results = run_grid(&grid)?;
    let elapsed = started.elapsed();
    let written = report::write_run(&cfg.out_dir, &cfg, &results, elapsed)
        .with_context(|| format!("writing results to {}", cfg.out_dir.display()))?;
    eprintln!(
        "ran {} cells x {} agents in {:.2}s, wrote {} files to {}",
        results.len(),
        cfg.n_agents,
        elapsed.as_secs_f64(),
        written.len(),
        cfg.out_dir.display()
    );
    Ok(())
}

fn cmd_metrics(args: MetricsArgs) -> Result<()> {
    let summary = report::read_summary(&args.dir)?;
    let rows = report::metrics_table(&summary);
    let stdout = io::stdout().lock();
    match args.format {
        Format::Csv => report::write_metrics_csv(stdout, &rows)?,
        Format::Json => report::write_metrics_json(stdout, &rows)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Metrics(args) => cmd_metrics(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
