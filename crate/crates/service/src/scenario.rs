//! Scripted scenarios on a virtual clock.
//!
//! A scenario names a world, a script of timed command lines and a list of
//! expectations about the resulting event log and robot trajectory:
//!
//! ```toml
//! name = "normal-move"
//! world = "../worlds/demo.toml"   # relative to the scenario file
//! duration = 7.0                  # simulated seconds
//!
//! [[script]]
//! at = 0.0
//! command = "Robot1, move to the blue box"
//!
//! [[expect]]
//! check = "event"
//! kind = "place-changed"
//! where = { place = "Done" }
//! between = [4.8, 5.2]
//! ```
//!
//! Script times are converted to frames (`round(at / dt)`); a line is
//! submitted just before its frame runs. Nothing depends on the wall clock,
//! so two runs of the same scenario produce the same log.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use xnet_core::command::CommandParser;
use xnet_core::geometry::Point;
use xnet_core::solver::{LogKind, LogRecord, Solver, SolverConfig};
use xnet_core::world::{WorldDefinition, WorldError};

use crate::parser_for;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid scenario {path}: {source}")]
    Toml { path: String, source: toml::de::Error },
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Path of the world file, relative to the scenario file.
    pub world: PathBuf,
    /// Simulated seconds to run.
    pub duration: f64,
    #[serde(default)]
    pub script: Vec<ScriptLine>,
    #[serde(default)]
    pub expect: Vec<Expectation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptLine {
    pub at: f64,
    pub command: String,
}

/// Field filter applied to a record's `detail`.
pub type Filter = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Expectation {
    /// At least one matching record (exactly `count` if given), optionally
    /// restricted to the half-open time window `[from, to)`.
    Event {
        kind: LogKind,
        #[serde(default, rename = "where")]
        filter: Filter,
        count: Option<usize>,
        between: Option<(f64, f64)>,
    },
    /// No matching record, optionally only within `[from, to)`.
    Absent {
        kind: LogKind,
        #[serde(default, rename = "where")]
        filter: Filter,
        between: Option<(f64, f64)>,
    },
    /// The values of `field` over matching records contain `values` as a
    /// (not necessarily contiguous) subsequence.
    Subsequence {
        kind: LogKind,
        field: String,
        #[serde(default, rename = "where")]
        filter: Filter,
        values: Vec<String>,
    },
    /// The first record of each kind appears in this order.
    Order {
        kinds: Vec<LogKind>,
        #[serde(default, rename = "exactly-once")]
        exactly_once: bool,
    },
    FinalPosition {
        position: Point,
        tolerance: f64,
    },
    /// The robot does not move at all over the window (exact comparison).
    Stationary {
        between: (f64, f64),
    },
    /// The direction of travel at `after` matches the one at `before`.
    Heading {
        before: f64,
        after: f64,
        #[serde(default = "default_heading_tolerance")]
        tolerance: f64,
    },
}

fn default_heading_tolerance() -> f64 {
    1e-9
}

impl Expectation {
    fn describe(&self) -> String {
        match self {
            Expectation::Event { kind, filter, .. } => format!("event {}{}", kind_name(*kind), show_filter(filter)),
            Expectation::Absent { kind, filter, .. } => format!("absent {}{}", kind_name(*kind), show_filter(filter)),
            Expectation::Subsequence { kind, field, values, .. } => {
                format!("subsequence {}.{field} ⊇ [{}]", kind_name(*kind), values.join(", "))
            }
            Expectation::Order { kinds, .. } => {
                format!("order {}", kinds.iter().map(|k| kind_name(*k)).collect::<Vec<_>>().join(" < "))
            }
            Expectation::FinalPosition { position, tolerance } => {
                format!("final position ({}, {}) ± {tolerance}", position.x, position.y)
            }
            Expectation::Stationary { between } => format!("stationary over [{}, {}]", between.0, between.1),
            Expectation::Heading { before, after, .. } => format!("heading at {after} equals heading at {before}"),
        }
    }
}

fn kind_name(kind: LogKind) -> String {
    serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
}

fn show_filter(filter: &Filter) -> String {
    if filter.is_empty() {
        String::new()
    } else {
        let parts: Vec<String> = filter.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(" where {}", parts.join(", "))
    }
}

impl Scenario {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ScenarioError> {
        let s: Scenario =
            toml::from_str(text).map_err(|source| ScenarioError::Toml { path: path.display().to_string(), source })?;
        s.validate()?;
        Ok(s)
    }

    /// Loads a scenario and the world it refers to.
    pub fn load(path: &Path) -> Result<(Self, WorldDefinition), ScenarioError> {
        let text = fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        let scenario = Self::from_toml(&text, path)?;
        let world_path = path.parent().unwrap_or(Path::new(".")).join(&scenario.world);
        let world = WorldDefinition::load(&world_path)?;
        Ok((scenario, world))
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if !(self.duration >= 0.0 && self.duration.is_finite()) {
            return Err(ScenarioError::Invalid(format!("duration must be non-negative, got {}", self.duration)));
        }
        let mut last = 0.0;
        for line in &self.script {
            if !(line.at >= last && line.at.is_finite()) {
                return Err(ScenarioError::Invalid(format!(
                    "script times must be non-decreasing and non-negative (`{}` at {})",
                    line.command, line.at
                )));
            }
            last = line.at;
        }
        Ok(())
    }
}

/// Robot state at the end of one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sample {
    pub time: f64,
    pub position: Point,
    pub velocity: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub description: String,
    pub passed: bool,
    pub detail: String,
    /// Log records that the check looked at, as JSON lines.
    pub evidence: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub checks: Vec<CheckResult>,
    pub log: Vec<LogRecord>,
    pub trace: Vec<Sample>,
    pub final_position: Point,
    pub dt: f64,
}

impl ScenarioReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Records of one kind, in log order.
    pub fn records(&self, kind: LogKind) -> impl Iterator<Item = &LogRecord> {
        self.log.iter().filter(move |r| r.kind == kind)
    }
}

impl fmt::Display for ScenarioReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {}", self.name)?;
        for c in &self.checks {
            writeln!(f, "  {} {} — {}", if c.passed { "PASS" } else { "FAIL" }, c.description, c.detail)?;
            for line in &c.evidence {
                writeln!(f, "      {line}")?;
            }
        }
        let passed = self.checks.iter().filter(|c| c.passed).count();
        write!(f, "{passed}/{} checks passed", self.checks.len())
    }
}

/// Runs a scenario against `world`. `configure` can attach a log sink or
/// adjust the solver before the first frame.
pub fn run_scenario_with(
    scenario: &Scenario,
    world: &WorldDefinition,
    configure: impl FnOnce(&mut Solver),
) -> ScenarioReport {
    let config = SolverConfig { dt: world.dt, ..SolverConfig::default() };
    let mut solver = Solver::new(world, config);
    configure(&mut solver);
    let parser = parser_for(world);
    let dt = world.dt;
    let frames = (scenario.duration / dt).round() as usize;
    let mut script = scenario.script.iter().map(|l| ((l.at / dt).round() as usize, l)).peekable();
    let mut trace = Vec::with_capacity(frames);
    for frame in 0..frames {
        while let Some((_, line)) = script.next_if(|(f, _)| *f <= frame) {
            submit_line(&mut solver, &parser, &line.command);
        }
        solver.frame();
        let w = solver.world();
        trace.push(Sample { time: solver.time(), position: w.position(), velocity: w.velocity() });
    }
    // Lines scheduled past the end are still delivered, so the log shows them.
    for (_, line) in script {
        submit_line(&mut solver, &parser, &line.command);
        solver.service_requests();
    }
    solver.log_mut().flush();
    let log = solver.log().records().to_vec();
    let checks = scenario.expect.iter().map(|e| check(e, &log, &trace, solver.world().position(), dt)).collect();
    ScenarioReport { name: scenario.name.clone(), checks, log, trace, final_position: solver.world().position(), dt }
}

pub fn run_scenario(scenario: &Scenario, world: &WorldDefinition) -> ScenarioReport {
    run_scenario_with(scenario, world, |_| {})
}

fn submit_line(solver: &mut Solver, parser: &CommandParser, text: &str) {
    match parser.parse(text) {
        Ok(a) => {
            solver.submit(a);
        }
        Err(e) => solver.note_parse_error(text, &e.to_string()),
    }
}

fn matches(r: &LogRecord, kind: LogKind, filter: &Filter) -> bool {
    r.kind == kind && filter.iter().all(|(k, v)| r.detail.get(k) == Some(v))
}

fn in_window(r: &LogRecord, window: Option<(f64, f64)>, dt: f64) -> bool {
    let eps = dt * 1e-6;
    window.is_none_or(|(from, to)| {
        let t = r.tick as f64 * dt;
        t >= from - eps && t < to - eps
    })
}

fn evidence<'a>(records: impl IntoIterator<Item = &'a LogRecord>) -> Vec<String> {
    records.into_iter().take(8).map(|r| serde_json::to_string(r).expect("log records serialize")).collect()
}

fn sample_at(trace: &[Sample], t: f64, dt: f64) -> Option<&Sample> {
    trace.iter().find(|s| (s.time - t).abs() < dt / 2.0)
}

fn check(e: &Expectation, log: &[LogRecord], trace: &[Sample], end: Point, dt: f64) -> CheckResult {
    let (passed, detail, evidence) = match e {
        Expectation::Event { kind, filter, count, between } => {
            let all: Vec<&LogRecord> = log.iter().filter(|r| matches(r, *kind, filter)).collect();
            let inside = all.iter().filter(|r| in_window(r, *between, dt)).count();
            let times: Vec<String> = all.iter().map(|r| format!("{:.1}", r.tick as f64 * dt)).collect();
            let ok = match count {
                Some(n) => all.len() == *n && inside == *n,
                None => inside > 0,
            };
            (ok, format!("{} match(es), {inside} in window, at t = [{}]", all.len(), times.join(", ")), evidence(all))
        }
        Expectation::Absent { kind, filter, between } => {
            let found: Vec<&LogRecord> =
                log.iter().filter(|r| matches(r, *kind, filter) && in_window(r, *between, dt)).collect();
            (found.is_empty(), format!("{} match(es)", found.len()), evidence(found))
        }
        Expectation::Subsequence { kind, field, filter, values } => {
            let seen: Vec<&LogRecord> = log.iter().filter(|r| matches(r, *kind, filter)).collect();
            let got: Vec<&str> = seen.iter().map(|r| r.field(field).unwrap_or("")).collect();
            let mut want = values.iter().peekable();
            for g in &got {
                want.next_if(|w| w.as_str() == *g);
            }
            (want.peek().is_none(), format!("history [{}]", got.join(", ")), evidence(seen))
        }
        Expectation::Order { kinds, exactly_once } => {
            let mut firsts = Vec::new();
            let mut problems = Vec::new();
            for k in kinds {
                let hits: Vec<usize> = log.iter().enumerate().filter(|(_, r)| r.kind == *k).map(|(i, _)| i).collect();
                if hits.is_empty() {
                    problems.push(format!("no {}", kind_name(*k)));
                } else if *exactly_once && hits.len() != 1 {
                    problems.push(format!("{} × {}", hits.len(), kind_name(*k)));
                }
                firsts.push(hits.first().copied());
            }
            let idx: Vec<usize> = firsts.iter().flatten().copied().collect();
            if problems.is_empty() && idx.windows(2).any(|w| w[0] >= w[1]) {
                problems.push("out of order".into());
            }
            let shown: Vec<String> = firsts.iter().map(|i| i.map_or("-".into(), |i| format!("#{i}"))).collect();
            let detail = format!(
                "record indices [{}]{}",
                shown.join(", "),
                if problems.is_empty() { String::new() } else { format!("; {}", problems.join(", ")) }
            );
            (problems.is_empty(), detail, evidence(idx.iter().map(|&i| &log[i])))
        }
        Expectation::FinalPosition { position, tolerance } => {
            let d = end.distance(*position);
            (d <= *tolerance, format!("ended at ({:.3}, {:.3}), {d:.3} away", end.x, end.y), Vec::new())
        }
        Expectation::Stationary { between: (from, to) } => {
            let eps = dt / 2.0;
            let window: Vec<&Sample> = trace.iter().filter(|s| s.time >= from - eps && s.time <= to + eps).collect();
            let moved = window.windows(2).find(|w| w[0].position != w[1].position);
            match (window.first(), moved) {
                (None, _) => (false, "no samples in window".into(), Vec::new()),
                (Some(s), None) => {
                    (true, format!("held ({}, {}) for {} frames", s.position.x, s.position.y, window.len()), Vec::new())
                }
                (Some(_), Some(w)) => (false, format!("moved at t = {:.1}", w[1].time), Vec::new()),
            }
        }
        Expectation::Heading { before, after, tolerance } => {
            match (sample_at(trace, *before, dt), sample_at(trace, *after, dt)) {
                (Some(a), Some(b)) => {
                    let (ha, hb) = (heading(a.velocity), heading(b.velocity));
                    match (ha, hb) {
                        (Some(ha), Some(hb)) => {
                            let diff = (ha - hb).abs();
                            (diff <= *tolerance, format!("{ha:.6} rad vs {hb:.6} rad"), Vec::new())
                        }
                        _ => (false, "robot not moving at one of the instants".into(), Vec::new()),
                    }
                }
                _ => (false, "instant outside the run".into(), Vec::new()),
            }
        }
    };
    CheckResult { description: e.describe(), passed, detail, evidence }
}

fn heading(v: Point) -> Option<f64> {
    (v.x != 0.0 || v.y != 0.0).then(|| v.y.atan2(v.x))
}
