//! The problem solver: turns action requests into place updates on a
//! running Move net, services the net's hooks against the simulated world
//! and reacts to what the robot senses.
//!
//! # Driving model
//!
//! [`Solver::frame`] is the unit of progress. A frame
//!
//! 1. services queued requests, then fires one transition, and repeats
//!    until the net quiesces, a timed transition fires (the motion loop's
//!    `Wait`) or a firing cap is hit;
//! 2. forwards the motion operations the hooks left in the
//!    [`MotionChannel`] to the world;
//! 3. advances the world by one `dt` and handles arrival and proximity.
//!
//! Requests are looked at before *every* firing, so a request enqueued
//! after firing `N` is dequeued before firing `N + 2` at the latest (the
//! queue and the firing counter are stamped under one lock, which makes the
//! bound checkable; see [`RequestQueue`]).
//!
//! Deterministic callers (scenarios, tests) call `frame` themselves.
//! [`LiveSolver`] runs the same solver on two threads: one waits on the
//! request queue, the other runs frames at a configurable pace. Both hold the
//! solver lock while working, so neither a hook nor request handling ever
//! sees a half-updated channel.
//!
//! # Log
//!
//! Everything observable is recorded as a [`LogRecord`]; the record tick is
//! the number of world steps taken so far, so `tick · dt` is simulated time.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::actions::{
    aspect_of, build_move_xnet_with_delay, control_plan, is_controller_transition, Aspect, ControlInput,
    MoveXnetPlaces, DEFAULT_WAIT_DELAY, HOOK_MOVE, HOOK_RESTART, HOOK_RESUME, HOOK_SUSPEND,
};
use crate::actspec::{ActKind, ActSpec, Notice, ObjectInfo, Predicate, Speed};
use crate::geometry::{segment_distance, Point};
use crate::petri::{Marking, TransitionKind};
use crate::runner::{
    EventStream, HookCall, HookRegistry, PlaceUpdate, Runner, RunnerConfig, RunnerError, RunnerEventKind, StepOutcome,
};
use crate::world::{MotionOp, WorldDefinition, WorldEvent, WorldSnapshot, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedTable {
    pub slow: f64,
    pub normal: f64,
    pub fast: f64,
}

impl Default for SpeedTable {
    fn default() -> Self {
        SpeedTable { slow: 0.5, normal: 1.0, fast: 2.0 }
    }
}

impl SpeedTable {
    pub fn get(&self, s: Speed) -> f64 {
        match s {
            Speed::Slow => self.slow,
            Speed::Normal => self.normal,
            Speed::Fast => self.fast,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// World step in seconds.
    pub dt: f64,
    /// World units per second for each speed.
    pub speeds: SpeedTable,
    /// How close counts as "at the goal" for callers checking end states.
    pub arrival_tolerance: f64,
    /// Clearance added to obstacle radii when planning.
    pub inflation: f64,
    /// Most firings in one frame; guards against immediate cycles.
    pub firing_cap: usize,
    /// Delay of the motion loop's `Wait`, in engine ticks.
    pub wait_delay: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: crate::world::DEFAULT_DT,
            speeds: SpeedTable::default(),
            arrival_tolerance: 0.1,
            inflation: 0.3,
            firing_cap: 64,
            wait_delay: DEFAULT_WAIT_DELAY,
        }
    }
}

/// State shared between the Move net's hooks and the solver.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionChannel {
    pub target_operation: MotionOp,
    pub target_position: Point,
    pub current_position: Point,
    pub speed: f64,
    /// Planned route to `target_position`.
    pub waypoints: Vec<Point>,
    /// Name of the goal object, which the planner does not avoid.
    pub goal: Option<String>,
    /// Bumped whenever the route or speed changes.
    pub revision: u64,
    /// The world reported arrival on the current route.
    pub arrived: bool,
    /// Operations set by hooks that the solver has not forwarded yet.
    #[serde(skip)]
    pub pending: Vec<MotionOp>,
}

impl MotionChannel {
    fn set_operation(&mut self, op: MotionOp) {
        self.target_operation = op;
        self.pending.push(op);
    }
}

pub fn hook_move(ch: &mut MotionChannel, marking: &Marking, arrived_place: &str) -> Vec<PlaceUpdate> {
    ch.set_operation(MotionOp::Move);
    if ch.arrived && marking.get(arrived_place) == 0 {
        vec![PlaceUpdate::mark(arrived_place, 1)]
    } else {
        Vec::new()
    }
}

pub fn hook_suspend(ch: &mut MotionChannel) -> Vec<PlaceUpdate> {
    ch.set_operation(MotionOp::Suspend);
    Vec::new()
}

pub fn hook_resume(ch: &mut MotionChannel) -> Vec<PlaceUpdate> {
    ch.set_operation(MotionOp::Resume);
    Vec::new()
}

pub fn hook_restart(ch: &mut MotionChannel) -> Vec<PlaceUpdate> {
    ch.set_operation(MotionOp::Restart);
    Vec::new()
}

/// Hook bindings for the Move net.
pub fn motion_hooks(places: &MoveXnetPlaces) -> HookRegistry<MotionChannel> {
    let arrived = places.arrived.as_str().to_owned();
    HookRegistry::new()
        .bind(HOOK_MOVE, move |c: HookCall<'_, MotionChannel>| hook_move(c.context, c.marking, &arrived))
        .bind(HOOK_SUSPEND, |c: HookCall<'_, MotionChannel>| hook_suspend(c.context))
        .bind(HOOK_RESUME, |c: HookCall<'_, MotionChannel>| hook_resume(c.context))
        .bind(HOOK_RESTART, |c: HookCall<'_, MotionChannel>| hook_restart(c.context))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dequeued {
    pub actspec: ActSpec,
    /// Firings completed when the request was enqueued.
    pub enqueued_at: u64,
    /// Firings completed when it was dequeued.
    pub dequeued_at: u64,
}

#[derive(Default)]
struct QueueInner {
    items: VecDeque<(ActSpec, u64)>,
    firings: u64,
}

/// FIFO of requests from the language side. It also counts net firings so
/// that every request carries the firing count at enqueue and dequeue time.
#[derive(Default)]
pub struct RequestQueue {
    inner: Mutex<QueueInner>,
    ready: Condvar,
}

impl RequestQueue {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, QueueInner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Enqueues a request; returns the firing count it was stamped with.
    pub fn push(&self, a: ActSpec) -> u64 {
        let mut q = self.lock();
        let stamp = q.firings;
        q.items.push_back((a, stamp));
        drop(q);
        self.ready.notify_all();
        stamp
    }

    /// Takes everything queued, in order.
    pub fn drain(&self) -> Vec<Dequeued> {
        let mut q = self.lock();
        let now = q.firings;
        q.items.drain(..).map(|(actspec, enqueued_at)| Dequeued { actspec, enqueued_at, dequeued_at: now }).collect()
    }

    /// Blocks until a request is queued or `timeout` passes.
    pub fn wait(&self, timeout: Duration) -> bool {
        let q = self.lock();
        let (q, _) =
            self.ready.wait_timeout_while(q, timeout, |q| q.items.is_empty()).unwrap_or_else(|e| e.into_inner());
        !q.items.is_empty()
    }

    pub fn note_firing(&self) -> u64 {
        let mut q = self.lock();
        q.firings += 1;
        q.firings
    }

    pub fn firings(&self) -> u64 {
        self.lock().firings
    }

    pub fn len(&self) -> usize {
        self.lock().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LogKind {
    ActspecReceived,
    XnetCreated,
    PlaceMarked,
    PlaceDrained,
    TransitionFired,
    PlaceChanged,
    ChannelOp,
    WorldArrival,
    Proximity,
    ModelUpdate,
    ModelVerify,
    Notification,
    Replan,
    Redirect,
    Rejection,
    NoOp,
    ParseError,
    Fault,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub tick: u64,
    pub kind: LogKind,
    pub detail: Value,
}

impl LogRecord {
    /// A string field of `detail`, if present.
    pub fn field(&self, key: &str) -> Option<&str> {
        self.detail.get(key).and_then(Value::as_str)
    }
}

/// Append-only record of what the solver did. Listeners get every record
/// pushed after they subscribed; an optional sink receives JSON lines.
#[derive(Default)]
pub struct EventLog {
    records: Vec<LogRecord>,
    listeners: Vec<Sender<LogRecord>>,
    sink: Option<Box<dyn Write + Send>>,
}

impl EventLog {
    pub fn push(&mut self, tick: u64, kind: LogKind, detail: Value) {
        let rec = LogRecord { tick, kind, detail };
        if let Some(sink) = &mut self.sink {
            let line = serde_json::to_string(&rec).expect("log records serialize");
            if writeln!(sink, "{line}").is_err() {
                self.sink = None;
            }
        }
        self.listeners.retain(|l| l.send(rec.clone()).is_ok());
        self.records.push(rec);
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn tail(&self, n: usize) -> &[LogRecord] {
        &self.records[self.records.len().saturating_sub(n)..]
    }

    pub fn subscribe(&mut self) -> Receiver<LogRecord> {
        let (tx, rx) = mpsc::channel();
        self.listeners.push(tx);
        rx
    }

    pub fn set_sink(&mut self, sink: Box<dyn Write + Send>) {
        self.sink = Some(sink);
    }

    pub fn flush(&mut self) {
        if let Some(s) = &mut self.sink {
            let _ = s.flush();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelObject {
    pub color: String,
    pub position: Point,
    pub radius: f64,
    /// World time the sensor last confirmed this object; `None` when it
    /// is only known from the initial map.
    pub verified_at: Option<f64>,
}

/// What the solver believes about the world.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub robot_position: Point,
    pub objects: BTreeMap<String, ModelObject>,
}

impl WorldModel {
    /// The model a robot starts with: only the objects marked as known.
    pub fn from_world(world: &WorldState) -> Self {
        WorldModel {
            robot_position: world.position(),
            objects: world
                .objects()
                .filter(|o| o.known)
                .map(|o| {
                    (
                        o.name.clone(),
                        ModelObject {
                            color: o.color.clone(),
                            position: o.position,
                            radius: o.radius,
                            verified_at: None,
                        },
                    )
                })
                .collect(),
        }
    }

    /// The nearest object of a color, ties broken by name.
    pub fn find_by_color(&self, color: &str, near: Point) -> Option<(&str, &ModelObject)> {
        self.objects
            .iter()
            .filter(|(_, o)| o.color.eq_ignore_ascii_case(color))
            .min_by(|a, b| a.1.position.distance(near).total_cmp(&b.1.position.distance(near)))
            .map(|(n, o)| (n.as_str(), o))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("route endpoints must be finite")]
    NonFinite,
    #[error("goal lies inside object `{0}`")]
    GoalInsideObstacle(String),
}

/// Clearance kept beyond the inflated radius when placing a detour point.
const DETOUR_MARGIN: f64 = 0.05;

/// Plans a route from `from` to `to` around the model's objects, ignoring
/// the object named `goal`.
///
/// The route is a straight line unless an object's footprint, inflated by
/// `inflation`, comes closer than its radius to the segment. Then the route
/// detours through one point beside the first such object, on whichever side
/// is clear (preferring the side facing away from it).
pub fn plan_trajectory(
    model: &WorldModel,
    from: Point,
    to: Point,
    goal: Option<&str>,
    inflation: f64,
) -> Result<Vec<Point>, PlanError> {
    if !from.is_finite() || !to.is_finite() {
        return Err(PlanError::NonFinite);
    }
    let obstacles: Vec<(&str, Point, f64)> = model
        .objects
        .iter()
        .filter(|(n, _)| Some(n.as_str()) != goal)
        .map(|(n, o)| (n.as_str(), o.position, o.radius))
        .collect();
    if let Some((name, ..)) = obstacles.iter().find(|(_, c, r)| c.distance(to) < *r) {
        return Err(PlanError::GoalInsideObstacle((*name).to_owned()));
    }
    let Some(dir) = (to - from).unit() else {
        return Ok(Vec::new());
    };
    let blocking = obstacles
        .iter()
        .filter(|(_, c, r)| segment_distance(from, to, *c) < r + inflation)
        .min_by(|a, b| (a.1 - from).dot(dir).total_cmp(&(b.1 - from).dot(dir)));
    let Some(&(_, center, radius)) = blocking else {
        return Ok(vec![to]);
    };
    let clearance = radius + inflation;
    let clears = |w: Point, c: Point, r: f64| segment_distance(from, w, c) >= r && segment_distance(w, to, c) >= r;
    let normal = dir.perp();
    let foot = from + dir * (center - from).dot(dir);
    let mut sides = [normal, normal * -1.0];
    if normal.dot(center - foot) > 0.0 {
        sides.swap(0, 1);
    }
    let mut candidates = Vec::new();
    for side in sides {
        let mut d = clearance + DETOUR_MARGIN;
        for _ in 0..200 {
            let w = center + side * d;
            if clears(w, center, clearance) {
                candidates.push(w);
                break;
            }
            d *= 1.05;
        }
    }
    let all_clear = |w: &Point| obstacles.iter().all(|(_, c, r)| clears(*w, *c, r + inflation));
    let chosen = candidates
        .iter()
        .find(|w| all_clear(w))
        .or(candidates.first())
        .copied()
        .unwrap_or(center + sides[0] * (clearance * 4.0));
    Ok(vec![chosen, to])
}

/// Everything a display needs, taken atomically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemSnapshot {
    pub tick: u64,
    pub time: f64,
    pub world: WorldSnapshot,
    /// Marking of the current Move net; empty when none was created yet.
    pub marking: BTreeMap<String, u64>,
    pub aspect: Aspect,
    pub channel: Option<MotionChannel>,
    pub log: Vec<LogRecord>,
}

struct ActiveNet {
    runner: Runner<MotionChannel>,
    places: MoveXnetPlaces,
    events: EventStream,
    outputs: Vec<EventStream>,
    /// The motion revision last handed to the world.
    applied_revision: Option<u64>,
}

impl ActiveNet {
    fn aspect(&self) -> Aspect {
        aspect_of(&self.places.standard, &self.runner.marking())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameReport {
    pub firings: usize,
    pub requests: usize,
}

pub struct Solver {
    config: SolverConfig,
    world: WorldState,
    model: WorldModel,
    queue: Arc<RequestQueue>,
    log: EventLog,
    active: Option<ActiveNet>,
    tick: u64,
    outbox: Vec<ActSpec>,
    notice_sequence: u64,
    latencies: Vec<Dequeued>,
}

impl Solver {
    pub fn new(def: &WorldDefinition, config: SolverConfig) -> Self {
        let world = WorldState::new(def);
        let model = WorldModel::from_world(&world);
        Solver {
            config,
            world,
            model,
            queue: Arc::new(RequestQueue::new()),
            log: EventLog::default(),
            active: None,
            tick: 0,
            outbox: Vec::new(),
            notice_sequence: 0,
            latencies: Vec::new(),
        }
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn queue(&self) -> Arc<RequestQueue> {
        Arc::clone(&self.queue)
    }

    pub fn submit(&self, a: ActSpec) -> u64 {
        self.queue.push(a)
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn model(&self) -> &WorldModel {
        &self.model
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn log_mut(&mut self) -> &mut EventLog {
        &mut self.log
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 * self.config.dt
    }

    /// Notifications sent to the operator so far.
    pub fn notifications(&self) -> &[ActSpec] {
        &self.outbox
    }

    /// Every request dequeued so far, with its firing stamps.
    pub fn latencies(&self) -> &[Dequeued] {
        &self.latencies
    }

    pub fn marking(&self) -> Option<Marking> {
        self.active.as_ref().map(|a| a.runner.marking())
    }

    pub fn aspect(&self) -> Aspect {
        self.active.as_ref().map_or(Aspect::Inactive, ActiveNet::aspect)
    }

    pub fn channel(&self) -> Option<MotionChannel> {
        self.active.as_ref().map(|a| a.runner.with_context(|c| c.clone()))
    }

    pub fn snapshot(&self, log_lines: usize) -> SystemSnapshot {
        let (marking, aspect) = match &self.active {
            Some(a) => {
                let m = a.runner.marking();
                let aspect = aspect_of(&a.places.standard, &m);
                (m.iter().map(|(p, n)| (p.to_string(), n)).collect(), aspect)
            }
            None => (BTreeMap::new(), Aspect::Inactive),
        };
        SystemSnapshot {
            tick: self.tick,
            time: self.time(),
            world: self.world.snapshot(),
            marking,
            aspect,
            channel: self.channel(),
            log: self.log.tail(log_lines).to_vec(),
        }
    }

    fn record(&mut self, kind: LogKind, detail: Value) {
        self.log.push(self.tick, kind, detail);
    }

    /// Handles every queued request.
    pub fn service_requests(&mut self) -> usize {
        let batch = self.queue.drain();
        let n = batch.len();
        for d in batch {
            let a = d.actspec.clone();
            self.latencies.push(d);
            self.handle_actspec(a);
        }
        n
    }

    /// Records text that failed to parse, so the log shows it.
    pub fn note_parse_error(&mut self, text: &str, error: &str) {
        self.record(LogKind::ParseError, json!({ "text": text, "error": error }));
    }

    fn notify(&mut self, topic: &str, message: String, object: Option<ObjectInfo>) {
        self.notice_sequence += 1;
        let n = ActSpec::notification(
            self.world.robot_name(),
            Notice { topic: topic.to_owned(), message, object },
            self.notice_sequence,
        );
        self.record(LogKind::Notification, serde_json::to_value(&n).expect("actspecs serialize"));
        self.outbox.push(n);
    }

    fn reject(&mut self, a: &ActSpec, reason: String) {
        self.record(LogKind::Rejection, json!({ "sequence": a.sequence, "reason": reason }));
        self.notify("rejected", reason, None);
    }

    pub fn handle_actspec(&mut self, a: ActSpec) {
        self.record(LogKind::ActspecReceived, serde_json::to_value(&a).expect("actspecs serialize"));
        if a.kind != ActKind::Command {
            return self.reject(&a, "only commands can be executed".into());
        }
        if !a.agent.eq_ignore_ascii_case(self.world.robot_name()) {
            return self
                .reject(&a, format!("unknown agent `{}`; this robot is `{}`", a.agent, self.world.robot_name()));
        }
        match a.predicate {
            Predicate::Move | Predicate::RedirectImplicit => self.handle_move(&a),
            Predicate::Stop => self.handle_control(&a, ControlInput::Suspend),
            Predicate::Continue => self.handle_control(&a, ControlInput::Resume),
            Predicate::Inform => self.reject(&a, "`inform` is not a command".into()),
        }
    }

    fn handle_control(&mut self, a: &ActSpec, input: ControlInput) {
        let aspect = self.aspect();
        if matches!(aspect, Aspect::Completed | Aspect::Inactive) {
            let what =
                if aspect == Aspect::Completed { "the action is already complete" } else { "no action is running" };
            self.record(LogKind::NoOp, json!({ "sequence": a.sequence, "predicate": a.predicate, "aspect": aspect }));
            self.notify("no-op", format!("{} ignored: {what}", a.predicate), None);
            return;
        }
        self.apply_control(input);
    }

    fn apply_control(&mut self, input: ControlInput) {
        let Some(active) = &self.active else { return };
        let runner = active.runner.clone();
        let plan = control_plan(&active.places.standard, &runner.marking(), input);
        for p in &plan.drain {
            match runner.reset_place(p.as_str()) {
                Ok(0) => {}
                Ok(removed) => self.record(LogKind::PlaceDrained, json!({ "place": p, "removed": removed })),
                Err(e) => self.fault(e),
            }
        }
        for p in &plan.mark {
            if runner.marking().get(p.as_str()) > 0 {
                continue;
            }
            match runner.mark_place(p.as_str(), 1) {
                Ok(()) => self.record(LogKind::PlaceMarked, json!({ "place": p, "tokens": 1 })),
                Err(e) => self.fault(e),
            }
        }
    }

    fn fault(&mut self, e: RunnerError) {
        self.record(LogKind::Fault, json!({ "error": e.to_string() }));
    }

    fn handle_move(&mut self, a: &ActSpec) {
        let (Some(goal), Some(speed)) = (&a.goal, a.speed) else {
            return self.reject(a, "a move needs a goal and a speed".into());
        };
        let here = self.world.position();
        let Some((name, target)) =
            self.model.find_by_color(goal.color.as_str(), here).map(|(n, o)| (n.to_owned(), o.position))
        else {
            let known: Vec<String> = self.model.objects.iter().map(|(n, o)| format!("{n} ({})", o.color)).collect();
            return self
                .reject(a, format!("no known {} {}; known objects: {}", goal.color, goal.shape, known.join(", ")));
        };
        let waypoints = match plan_trajectory(&self.model, here, target, Some(&name), self.config.inflation) {
            Ok(w) => w,
            Err(e) => return self.reject(a, format!("cannot plan a route: {e}")),
        };
        let speed = self.config.speeds.get(speed);
        match self.aspect() {
            Aspect::Inactive | Aspect::Completed => self.start_move(name, target, waypoints, speed),
            aspect => {
                self.record(
                    LogKind::Redirect,
                    json!({ "sequence": a.sequence, "from": aspect, "goal": name, "predicate": Predicate::RedirectImplicit }),
                );
                self.retarget(name, target, waypoints, speed, aspect);
            }
        }
    }

    /// Points the running net at a new route: ongoing motion is suspended
    /// and restarted, suspended motion restarted, and impending motion just
    /// picks up the new route when it starts.
    fn retarget(&mut self, goal: String, target: Point, waypoints: Vec<Point>, speed: f64, aspect: Aspect) {
        let Some(active) = &self.active else { return };
        let here = self.world.position();
        active.runner.with_context(|ch| {
            ch.goal = Some(goal);
            ch.target_position = target;
            ch.current_position = here;
            ch.waypoints = waypoints;
            ch.speed = speed;
            ch.revision += 1;
            ch.arrived = false;
        });
        match aspect {
            Aspect::Ongoing => self.apply_control(ControlInput::Redirect),
            Aspect::Suspended => self.apply_control(ControlInput::Restart),
            _ => {}
        }
    }

    fn start_move(&mut self, goal: String, target: Point, waypoints: Vec<Point>, speed: f64) {
        if let Some(old) = self.active.take() {
            if old.runner.is_running() {
                let _ = old.runner.stop();
            }
        }
        let (net, places, m0) = build_move_xnet_with_delay(self.config.wait_delay);
        let channel = MotionChannel {
            target_operation: MotionOp::None,
            target_position: target,
            current_position: self.world.position(),
            speed,
            waypoints,
            goal: Some(goal.clone()),
            revision: 1,
            arrived: false,
            pending: Vec::new(),
        };
        let hooks = motion_hooks(&places);
        let runner = match Runner::from_net(net, m0, hooks, channel, RunnerConfig::default()) {
            Ok(r) => r,
            Err(e) => return self.fault(e),
        };
        let events = runner.subscribe_events();
        let outputs = places
            .standard
            .outputs()
            .iter()
            .map(|p| runner.subscribe_place(p.as_str()).expect("controller states are output places"))
            .collect();
        if let Err(e) = runner.start_manual() {
            return self.fault(e);
        }
        self.record(LogKind::XnetCreated, json!({ "net": "move", "goal": goal, "target": target, "speed": speed }));
        self.active = Some(ActiveNet { runner, places, events, outputs, applied_revision: None });
        self.apply_control(ControlInput::Enable);
    }

    /// Runs one frame; see the module docs.
    pub fn frame(&mut self) -> FrameReport {
        let mut report = FrameReport::default();
        loop {
            report.requests += self.service_requests();
            let Some(active) = self.active.as_ref().filter(|a| a.runner.is_running()) else { break };
            if report.firings >= self.config.firing_cap {
                break;
            }
            let runner = active.runner.clone();
            let outcome = match runner.step() {
                Ok(o) => o,
                Err(e) => {
                    self.fault(e);
                    break;
                }
            };
            match outcome {
                StepOutcome::Fired(t) => {
                    self.queue.note_firing();
                    report.firings += 1;
                    self.after_step();
                    let timed = runner
                        .net()
                        .transition(t.as_str())
                        .is_some_and(|t| matches!(t.kind, TransitionKind::Timed { .. }));
                    if timed {
                        break;
                    }
                }
                StepOutcome::Idle => {
                    self.after_step();
                    break;
                }
                StepOutcome::Quiescent => break,
            }
        }
        self.advance_world();
        report
    }

    pub fn run_frames(&mut self, n: usize) {
        for _ in 0..n {
            self.frame();
        }
    }

    fn after_step(&mut self) {
        let Some(active) = &mut self.active else { return };
        let net = active.runner.net();
        let mut records = Vec::new();
        for e in active.events.drain() {
            if let RunnerEventKind::TransitionFired { transition } = e.kind {
                let t = net.transition(transition.as_str()).expect("fired transitions exist");
                records.push((
                    LogKind::TransitionFired,
                    json!({ "transition": transition, "name": t.logical_name(), "controller": is_controller_transition(t) }),
                ));
            }
        }
        let mut done = false;
        for stream in &active.outputs {
            for e in stream.drain() {
                if let RunnerEventKind::PlaceMarkingChanged { place, new_count } = e.kind {
                    done |= place == active.places.standard.done && new_count > 0;
                    records.push((LogKind::PlaceChanged, json!({ "place": place, "count": new_count })));
                }
            }
        }
        let (ops, channel) = active.runner.with_context(|ch| (std::mem::take(&mut ch.pending), ch.clone()));
        for op in ops {
            let forward = match op {
                MotionOp::Move => active.applied_revision != Some(channel.revision),
                MotionOp::Restart | MotionOp::Suspend | MotionOp::Resume => true,
                MotionOp::None => false,
            };
            if !forward {
                continue;
            }
            if matches!(op, MotionOp::Move | MotionOp::Restart) {
                active.applied_revision = Some(channel.revision);
            }
            self.world.apply(op, &channel.waypoints, channel.speed);
            records.push((
                LogKind::ChannelOp,
                json!({ "op": op, "revision": channel.revision, "target": channel.target_position, "speed": channel.speed }),
            ));
        }
        if done {
            let _ = active.runner.stop();
        }
        for (kind, detail) in records {
            self.record(kind, detail);
        }
    }

    fn advance_world(&mut self) {
        let events = self.world.tick(self.config.dt);
        self.tick += 1;
        let position = self.world.position();
        self.model.robot_position = position;
        if let Some(active) = &self.active {
            active.runner.with_context(|ch| ch.current_position = position);
        }
        for e in events {
            match e {
                WorldEvent::Arrival { position, time } => {
                    if let Some(active) = &self.active {
                        let applied = active.applied_revision;
                        active.runner.with_context(|ch| {
                            if applied == Some(ch.revision) {
                                ch.arrived = true;
                            }
                        });
                    }
                    self.record(LogKind::WorldArrival, json!({ "position": position, "time": time }));
                }
                WorldEvent::Proximity(p) => {
                    self.record(LogKind::Proximity, json!({ "object": p.object, "time": p.time }));
                    self.on_proximity_event(p.object);
                }
            }
        }
    }

    /// Reacts to a sensed object: verifies known objects; for unknown ones
    /// updates the model, tells the operator, then replans the current
    /// task, redirecting if the route changed.
    pub fn on_proximity_event(&mut self, obj: ObjectInfo) {
        let now = self.world.time();
        if let Some(known) = self.model.objects.get_mut(&obj.name) {
            let changed = !known.position.approx_eq(obj.position, 1e-9) || known.radius != obj.radius;
            known.position = obj.position;
            known.radius = obj.radius;
            known.verified_at = Some(now);
            self.record(LogKind::ModelVerify, json!({ "object": obj.name, "changed": changed }));
            return;
        }
        let before = self.model.clone();
        self.model.objects.insert(
            obj.name.clone(),
            ModelObject {
                color: obj.color.clone(),
                position: obj.position,
                radius: obj.radius,
                verified_at: Some(now),
            },
        );
        self.record(LogKind::ModelUpdate, json!({ "object": obj }));
        self.notify(
            "unknown-object",
            format!("found a {} object `{}` at ({:.2}, {:.2})", obj.color, obj.name, obj.position.x, obj.position.y),
            Some(obj.clone()),
        );
        self.replan(&before, &obj.name);
    }

    fn replan(&mut self, previous: &WorldModel, cause: &str) {
        let aspect = self.aspect();
        let channel =
            self.channel().filter(|_| matches!(aspect, Aspect::Ongoing | Aspect::Suspended | Aspect::Impending));
        let Some(ch) = channel else {
            self.record(
                LogKind::Replan,
                json!({ "cause": cause, "changed": false, "reason": "no motion in progress" }),
            );
            return;
        };
        let here = self.world.position();
        let goal = ch.goal.as_deref();
        let inflation = self.config.inflation;
        let old = plan_trajectory(previous, here, ch.target_position, goal, inflation);
        match plan_trajectory(&self.model, here, ch.target_position, goal, inflation) {
            Ok(new) => {
                let changed = old.as_ref().ok() != Some(&new);
                self.record(LogKind::Replan, json!({ "cause": cause, "changed": changed, "waypoints": new }));
                if changed {
                    let goal = ch.goal.clone().unwrap_or_default();
                    self.record(LogKind::Redirect, json!({ "from": aspect, "goal": goal, "reason": "replan" }));
                    self.retarget(goal, ch.target_position, new, ch.speed, aspect);
                }
            }
            Err(e) => {
                self.record(LogKind::Replan, json!({ "cause": cause, "changed": false, "error": e.to_string() }));
                self.notify("plan-failed", format!("cannot reach the goal any more: {e}"), None);
            }
        }
    }
}

/// A [`Solver`] running on its own threads: one waits for requests, the
/// other runs frames, `pace` frames per second (as fast as possible when
/// `None`).
pub struct LiveSolver {
    solver: Arc<Mutex<Solver>>,
    queue: Arc<RequestQueue>,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl LiveSolver {
    pub fn spawn(solver: Solver, pace: Option<f64>) -> Self {
        let queue = solver.queue();
        let solver = Arc::new(Mutex::new(solver));
        let stop = Arc::new(AtomicBool::new(false));
        let listener = {
            let (solver, queue, stop) = (Arc::clone(&solver), Arc::clone(&queue), Arc::clone(&stop));
            thread::Builder::new()
                .name("solver-requests".into())
                .spawn(move || {
                    while !stop.load(Ordering::Acquire) {
                        if queue.wait(Duration::from_millis(20)) {
                            lock(&solver).service_requests();
                        }
                    }
                })
                .expect("spawn request thread")
        };
        let frames = {
            let (solver, stop) = (Arc::clone(&solver), Arc::clone(&stop));
            let period = pace.filter(|p| *p > 0.0).map(|p| Duration::from_secs_f64(1.0 / p));
            thread::Builder::new()
                .name("solver-frames".into())
                .spawn(move || {
                    let mut next = Instant::now();
                    while !stop.load(Ordering::Acquire) {
                        lock(&solver).frame();
                        match period {
                            Some(p) => {
                                next += p;
                                let now = Instant::now();
                                if next > now {
                                    thread::sleep(next - now);
                                } else {
                                    next = now;
                                }
                            }
                            None => thread::yield_now(),
                        }
                    }
                })
                .expect("spawn frame thread")
        };
        LiveSolver { solver, queue, stop, threads: vec![listener, frames] }
    }

    pub fn submit(&self, a: ActSpec) -> u64 {
        self.queue.push(a)
    }

    pub fn with_solver<R>(&self, f: impl FnOnce(&mut Solver) -> R) -> R {
        f(&mut lock(&self.solver))
    }

    pub fn snapshot(&self, log_lines: usize) -> SystemSnapshot {
        lock(&self.solver).snapshot(log_lines)
    }

    pub fn subscribe_log(&self) -> Receiver<LogRecord> {
        lock(&self.solver).log_mut().subscribe()
    }

    /// Stops both threads and hands the solver back.
    pub fn shutdown(self) -> Solver {
        let solver = Arc::clone(&self.solver);
        drop(self);
        match Arc::try_unwrap(solver) {
            Ok(m) => m.into_inner().unwrap_or_else(|e| e.into_inner()),
            Err(_) => unreachable!("solver threads have exited"),
        }
    }

    fn halt(&mut self) {
        self.stop.store(true, Ordering::Release);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for LiveSolver {
    fn drop(&mut self) {
        self.halt();
    }
}

fn lock(s: &Mutex<Solver>) -> MutexGuard<'_, Solver> {
    s.lock().unwrap_or_else(|e| e.into_inner())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::actspec::Color;
    use crate::world::{RobotDefinition, WorldObject};

    fn boxed(name: &str, color: &str, x: f64, y: f64, known: bool) -> WorldObject {
        WorldObject { name: name.into(), color: color.into(), position: Point::new(x, y), radius: 0.25, known }
    }

    fn demo() -> WorldDefinition {
        WorldDefinition {
            proximity_threshold: 1.0,
            dt: 0.1,
            robot: RobotDefinition { name: "Robot1".into(), position: Point::ORIGIN },
            objects: vec![boxed("blue-box", "blue", 5.0, 0.0, true), boxed("green-box", "green", 0.0, 4.0, true)],
        }
    }

    fn move_to(color: &str, speed: Speed) -> ActSpec {
        ActSpec::move_to("Robot1", speed, Color::new(color), 1)
    }

    fn kinds(s: &Solver, kind: LogKind) -> Vec<&LogRecord> {
        s.log().records().iter().filter(|r| r.kind == kind).collect()
    }

    #[test]
    fn straight_plan() {
        let model = WorldModel::default();
        let p = plan_trajectory(&model, Point::ORIGIN, Point::new(5.0, 0.0), None, 0.3).unwrap();
        assert_eq!(p, [Point::new(5.0, 0.0)]);
        assert!(plan_trajectory(&model, Point::ORIGIN, Point::ORIGIN, None, 0.3).unwrap().is_empty());
    }

    #[test]
    fn detour_clears_obstacle() {
        let mut model = WorldModel::default();
        let c = Point::new(2.5, 0.0);
        model
            .objects
            .insert("rock".into(), ModelObject { color: "red".into(), position: c, radius: 0.5, verified_at: None });
        let to = Point::new(5.0, 0.0);
        let p = plan_trajectory(&model, Point::ORIGIN, to, None, 0.3).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p[0].y.abs() >= 0.8);
        assert!(segment_distance(Point::ORIGIN, p[0], c) >= 0.8);
        assert!(segment_distance(p[0], to, c) >= 0.8);
        assert_eq!(
            plan_trajectory(&model, Point::ORIGIN, c, None, 0.3),
            Err(PlanError::GoalInsideObstacle("rock".into()))
        );
    }

    #[test]
    fn normal_move_finishes_after_five_seconds() {
        let mut s = Solver::new(&demo(), SolverConfig::default());
        s.submit(move_to("blue", Speed::Normal));
        s.run_frames(60);
        let done = kinds(&s, LogKind::PlaceChanged)
            .into_iter()
            .find(|r| r.field("place") == Some("Done"))
            .expect("done reached")
            .tick;
        assert!((done as f64 * 0.1 - 5.0).abs() <= 0.2, "done at tick {done}");
        assert!(s.world().position().approx_eq(Point::new(5.0, 0.0), 0.1));
        assert_eq!(s.aspect(), Aspect::Completed);
    }

    #[test]
    fn control_after_done_is_a_no_op() {
        let mut s = Solver::new(&demo(), SolverConfig::default());
        s.submit(move_to("blue", Speed::Fast));
        s.run_frames(40);
        s.submit(ActSpec::control("Robot1", Predicate::Stop, 2));
        s.frame();
        assert_eq!(kinds(&s, LogKind::NoOp).len(), 1);
        assert!(s.notifications().iter().any(|n| n.notice.as_ref().unwrap().topic == "no-op"));
    }

    #[test]
    fn unknown_agent_and_color_are_rejected() {
        let mut s = Solver::new(&demo(), SolverConfig::default());
        s.submit(ActSpec::move_to("Robot9", Speed::Normal, Color::new("blue"), 1));
        s.submit(move_to("red", Speed::Normal));
        s.frame();
        assert_eq!(kinds(&s, LogKind::Rejection).len(), 2);
        assert_eq!(s.aspect(), Aspect::Inactive);
    }

    #[test]
    fn redirect_reaches_new_goal() {
        let mut s = Solver::new(&demo(), SolverConfig::default());
        s.submit(move_to("blue", Speed::Normal));
        s.run_frames(20);
        s.submit(move_to("green", Speed::Fast));
        s.run_frames(60);
        let ops: Vec<_> = kinds(&s, LogKind::ChannelOp).iter().map(|r| r.field("op").unwrap().to_owned()).collect();
        assert_eq!(ops, ["move", "move", "suspend", "restart"]);
        let controller: Vec<_> = kinds(&s, LogKind::TransitionFired)
            .iter()
            .filter(|r| r.detail["controller"] == true)
            .map(|r| r.field("name").unwrap().to_owned())
            .collect();
        assert_eq!(controller, ["Prepare", "Start", "SuspendT", "RestartT", "Start", "Finish"]);
        assert!(s.world().position().approx_eq(Point::new(0.0, 4.0), 0.1));
    }

    #[test]
    fn unknown_object_triggers_protocol_in_order() {
        let mut def = demo();
        def.objects.push(boxed("crate", "red", 3.0, 0.1, false));
        let mut s = Solver::new(&def, SolverConfig::default());
        s.submit(move_to("blue", Speed::Normal));
        s.run_frames(90);
        let idx = |k: LogKind| s.log().records().iter().position(|r| r.kind == k).unwrap();
        assert!(idx(LogKind::ModelUpdate) < idx(LogKind::Notification));
        assert!(idx(LogKind::Notification) < idx(LogKind::Replan));
        assert_eq!(kinds(&s, LogKind::Replan)[0].detail["changed"], true);
        assert!(s.world().position().approx_eq(Point::new(5.0, 0.0), 0.1));
        assert_eq!(s.aspect(), Aspect::Completed);
    }

    #[test]
    fn queue_stamps_firings() {
        let q = RequestQueue::new();
        q.note_firing();
        assert_eq!(q.push(ActSpec::control("R", Predicate::Stop, 1)), 1);
        q.note_firing();
        let d = q.drain();
        assert_eq!((d[0].enqueued_at, d[0].dequeued_at), (1, 2));
        assert!(q.is_empty());
    }

    #[test]
    fn live_solver_runs_and_shuts_down() {
        let live = LiveSolver::spawn(Solver::new(&demo(), SolverConfig::default()), Some(1000.0));
        let log = live.subscribe_log();
        live.submit(move_to("blue", Speed::Fast));
        let got = log.recv_timeout(Duration::from_secs(5)).unwrap();
        assert_eq!(got.kind, LogKind::ActspecReceived);
        let snap = live.snapshot(5);
        assert_eq!(
            snap.aspect,
            aspect_of(
                &crate::actions::build_move_xnet().1.standard,
                &Marking::from_counts(
                    &crate::actions::build_move_xnet().0,
                    snap.marking.iter().map(|(k, v)| (k.as_str(), *v)),
                )
                .unwrap()
            )
        );
        let s = live.shutdown();
        assert!(s.log().records().len() >= 2);
    }
}
