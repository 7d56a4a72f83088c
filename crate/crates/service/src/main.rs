use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use clap::Parser;
use xnet_core::actions::write_fixtures;
use xnet_core::solver::LiveSolver;
use xnet_core::world::WorldDefinition;
use xnet_service::http::{self, AppState};
use xnet_service::scenario::{run_scenario_with, Scenario};
use xnet_service::{attach_log, build_solver, console, parser_for, ServiceError};

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;

/// Drive the X-net robot: interactively, from scenario files, or over HTTP.
#[derive(Debug, Parser)]
#[command(name = "xnet", version)]
struct Cli {
    /// World file (TOML). Overrides the world named in a scenario.
    #[arg(long)]
    world: Option<PathBuf>,
    /// Run a scenario file and check its expectations. Repeatable.
    #[arg(long)]
    scenario: Vec<PathBuf>,
    /// Serve the HTTP API on this address, e.g. 127.0.0.1:8080.
    #[arg(long)]
    serve: Option<String>,
    /// Simulation frames per wall-clock second in live modes.
    #[arg(long, default_value_t = 10.0)]
    pace: f64,
    /// Append the event log here as JSON lines.
    #[arg(long)]
    log: Option<PathBuf>,
    /// Write the canonical PNML nets into this directory and exit.
    #[arg(long, value_name = "DIR")]
    emit_fixtures: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("xnet: {e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, ServiceError> {
    if let Some(dir) = &cli.emit_fixtures {
        write_fixtures(dir)?;
        return Ok(ExitCode::SUCCESS);
    }
    if !(cli.pace > 0.0 && cli.pace.is_finite()) {
        eprintln!("xnet: --pace must be a positive number");
        return Ok(ExitCode::from(EXIT_USAGE));
    }
    if !cli.scenario.is_empty() {
        return run_scenarios(&cli);
    }
    let Some(world_path) = &cli.world else {
        eprintln!("xnet: one of --world or --scenario is required (see --help)");
        return Ok(ExitCode::from(EXIT_USAGE));
    };
    let world = WorldDefinition::load(world_path)?;
    let parser = parser_for(&world);
    let solver = build_solver(&world, cli.log.as_deref())?;
    let live = LiveSolver::spawn(solver, Some(cli.pace));
    match &cli.serve {
        Some(addr) => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(http::serve(AppState::new(live, parser), addr))?;
        }
        None => {
            let out = Arc::new(Mutex::new(io::stdout()));
            console::run_console(live, &parser, io::stdin().lock(), out)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run_scenarios(cli: &Cli) -> Result<ExitCode, ServiceError> {
    let mut all_passed = true;
    for path in &cli.scenario {
        let (scenario, world) = load_scenario(path, cli.world.as_deref())?;
        let mut log_error = None;
        let report = run_scenario_with(&scenario, &world, |s| {
            if let Some(p) = &cli.log {
                log_error = attach_log(s, p).err();
            }
        });
        if let Some(e) = log_error {
            return Err(e);
        }
        println!("{report}");
        all_passed &= report.passed();
    }
    io::stdout().flush()?;
    Ok(if all_passed { ExitCode::SUCCESS } else { ExitCode::from(EXIT_FAILED) })
}

fn load_scenario(path: &Path, world: Option<&Path>) -> Result<(Scenario, WorldDefinition), ServiceError> {
    let (scenario, default_world) = Scenario::load(path)?;
    let world = match world {
        Some(w) => WorldDefinition::load(w)?,
        None => default_world,
    };
    Ok((scenario, world))
}
