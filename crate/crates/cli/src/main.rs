use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use isea_core::harness::{emit_plot_script, run_experiment, PlotStyle};
use isea_core::{ExperimentKind, ExperimentSpec, IseaError, ScenarioConfig};

/// Run a simulation experiment and write its results as CSV.
#[derive(Debug, Parser)]
#[command(name = "isea-sim", version)]
struct Cli {
    /// One of: sweep-k, sweep-n, snr-dist, bnorm-dist, bounds, crossing, aloss.
    experiment: String,

    /// Scenario file with `key = value` lines.
    #[arg(long)]
    config: PathBuf,

    /// Overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,

    /// Overrides `mc_trials` (trials or channel draws per point).
    #[arg(long)]
    trials: Option<usize>,

    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Worker threads. Output does not depend on this.
    #[arg(long)]
    workers: Option<usize>,

    /// Include the K = 200 distribution check.
    #[arg(long)]
    paper_scale: bool,

    /// Also write a matplotlib script for the CSV (requires --out).
    #[arg(long)]
    plot: Option<PathBuf>,
}

fn exit_code(err: &IseaError) -> u8 {
    match err {
        IseaError::Config(_) | IseaError::InvalidArgument(_) | IseaError::Infeasible { .. } => 2,
        IseaError::Numerical(_) => 3,
        IseaError::Io(_) | IseaError::Csv(_) => 1,
    }
}

fn run(cli: Cli) -> Result<(), IseaError> {
    let kind = ExperimentKind::parse(&cli.experiment)?;
    let mut scenario = ScenarioConfig::from_file(&cli.config)?;
    if let Some(seed) = cli.seed {
        scenario.master_seed = seed;
    }
    if let Some(trials) = cli.trials {
        scenario.mc_trials = trials;
    }
    if cli.plot.is_some() && cli.out.is_none() {
        return Err(IseaError::Config("--plot needs --out".into()));
    }
    let mut spec = ExperimentSpec::new(kind, scenario, cli.paper_scale);
    spec.output_path = cli.out.clone();
    spec.workers = cli.workers;

    let report = run_experiment(&spec)?;
    if cli.out.is_none() {
        report.write_csv(std::io::stdout().lock())?;
    }
    for line in &report.summary {
        eprintln!("{line}");
    }
    if let (Some(plot), Some(out)) = (&cli.plot, &cli.out) {
        let script = emit_plot_script(&report, &out.to_string_lossy(), PlotStyle::for_experiment(kind))?;
        std::fs::write(plot, script)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("isea-sim: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
