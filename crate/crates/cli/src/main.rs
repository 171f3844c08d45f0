use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use franson_cli::{build_report, write_report, Command, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "franson-bell", version, about = "Simulate and analyse energy-time Bell tests")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a source or setup and judge its statistic against the class bounds.
    Simulate(Common),
    /// Tabulate bounds, quantum values, critical visibilities and efficiency thresholds.
    Bounds(Common),
    /// Scan the quantum chained statistic over visibility.
    Visibility(Common),
    /// Search the local strategy space for the largest statistic.
    VerifyBounds(Common),
    /// Check the causal ordering behind the emission-time premise.
    Geometry(Common),
    /// Bounds, simulation and geometry check in one report.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Scenario preset (custom, table1, aklz-demo, chained6, cross-coupled, etr-search, geometry-demo).
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per setting pair.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    terms: Option<usize>,
    #[arg(long)]
    visibility: Option<f64>,
    /// Setup layout: franson, polarization-entangled, switched-mirrors, cross-coupled.
    #[arg(long)]
    variant: Option<String>,
    /// plain-local-realism, inefficiency, delays, path-realism, emission-time-realism, outcomes-only.
    #[arg(long)]
    model_class: Option<String>,
    /// Efficiency for the inefficiency and delays classes.
    #[arg(long)]
    eta: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common) = match cli.command {
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Bounds(c) => (Command::Bounds, c),
        Cmd::Visibility(c) => (Command::Visibility, c),
        Cmd::VerifyBounds(c) => (Command::VerifyBounds, c),
        Cmd::Geometry(c) => (Command::Geometry, c),
        Cmd::Report(c) => (Command::Report, c),
    };
    let flags = Overrides {
        scenario: common.scenario,
        seed: common.seed,
        trials: common.trials,
        terms: common.terms,
        visibility: common.visibility,
        variant: common.variant,
        model_class: common.model_class,
        eta: common.eta,
        out: common.out,
    };
    let result = RunConfig::resolve(common.config.as_deref(), &flags).and_then(|config| {
        let report = build_report(command, &config)?;
        let files = write_report(&report, &config.out)?;
        Ok((report, files))
    });
    match result {
        Ok((report, files)) => {
            for line in franson_cli::run::summary(&report) {
                println!("{line}");
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
