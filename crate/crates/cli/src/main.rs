use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use heatball_lab::config::Params;
use heatball_lab::error::CliError;
use heatball_lab::report::{emit, fmt_num, Format, ScenarioReport};
use heatball_lab::scenarios::{find, SCENARIOS};

/// Runs numerical verification scenarios for heatball mean value formulas.
///
/// Exit status: 0 all checks pass, 1 some check fails, 2 bad configuration,
/// 3 numerical failure.
#[derive(Parser)]
#[command(name = "heatball-lab", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,

    /// Scenario to run (see `heatball-lab list`).
    scenario: Option<String>,

    /// TOML file of flat key = value settings.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Override one setting, e.g. `--set r_grid=[0.5,1.0]`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// List the available scenarios.
    List,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("HEATBALL_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw.trim().parse().ok().filter(|&t| t > 0).ok_or_else(|| {
        CliError::Config(format!(
            "HEATBALL_THREADS: expected a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(format!("HEATBALL_THREADS: {e}")))
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    if let Some(Command::List) = cli.command {
        for s in SCENARIOS {
            println!("{:<20} {}", s.name, s.summary);
        }
        return Ok(ExitCode::SUCCESS);
    }
    let Some(name) = cli.scenario else {
        return Err(CliError::Config(
            "no scenario given; run `heatball-lab list` to see them".into(),
        ));
    };
    let scenario = find(&name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown scenario `{name}`; see `heatball-lab list`"
        ))
    })?;
    configure_threads()?;

    let params = Params::load(scenario.defaults, cli.config.as_deref(), &cli.overrides)?;
    let (setup, job) = scenario.plan(&params)?;

    let start = Instant::now();
    let mut report = ScenarioReport::new(scenario.name);
    report.setup = setup;
    let outcome = job(&mut report);
    if let Err(e) = &outcome {
        report.record_failure(e);
    }
    report.wall_time_seconds = start.elapsed().as_secs_f64();

    for path in emit(&report, &cli.out, cli.format)? {
        eprintln!("wrote {}", path.display());
    }
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!(
            "FAIL {}: computed {}, expected {} within {}",
            c.check,
            fmt_num(c.computed),
            fmt_num(c.expected),
            fmt_num(c.tolerance)
        );
    }
    eprintln!(
        "{}: {} checks, {} failed, {:.3} s",
        scenario.name,
        report.checks.len(),
        report.checks.iter().filter(|c| !c.pass).count(),
        report.wall_time_seconds
    );
    match outcome {
        Err(e) => Err(e),
        Ok(()) if report.passed() => Ok(ExitCode::SUCCESS),
        Ok(()) => Ok(ExitCode::from(1)),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
