//! The operator-facing side of the robot demo.
//!
//! Three ways to drive a [`Solver`]:
//!
//! * [`console`] — type commands, watch the event log scroll by;
//! * [`scenario`] — replay a script on a virtual clock and check the log;
//! * [`http`] — a small JSON/SSE API for a browser console.
//!
//! All of them feed commands through the solver's request queue, so there
//! is exactly one place where state changes.

pub mod console;
pub mod http;
pub mod scenario;

use std::fs::File;
use std::path::{Path, PathBuf};

use thiserror::Error;
use xnet_core::command::{CommandParser, DEFAULT_COLORS};
use xnet_core::solver::{Solver, SolverConfig};
use xnet_core::world::{WorldDefinition, WorldError};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
    #[error("cannot open log file {path}: {source}")]
    Log { path: PathBuf, source: std::io::Error },
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// A parser that knows the standard colors plus every color in the world.
pub fn parser_for(world: &WorldDefinition) -> CommandParser {
    CommandParser::with_colors(DEFAULT_COLORS.iter().copied().chain(world.objects.iter().map(|o| o.color.as_str())))
}

/// A solver for `world`, writing JSON log lines to `log` if given.
pub fn build_solver(world: &WorldDefinition, log: Option<&Path>) -> Result<Solver, ServiceError> {
    let mut solver = Solver::new(world, SolverConfig { dt: world.dt, ..SolverConfig::default() });
    if let Some(path) = log {
        attach_log(&mut solver, path)?;
    }
    Ok(solver)
}

pub fn attach_log(solver: &mut Solver, path: &Path) -> Result<(), ServiceError> {
    let file = File::create(path).map_err(|source| ServiceError::Log { path: path.to_owned(), source })?;
    solver.log_mut().set_sink(Box::new(std::io::BufWriter::new(file)));
    Ok(())
}
