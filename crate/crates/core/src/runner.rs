//! Live execution of one net.
//!
//! A [`Runner`] owns a net, its current marking, the hooks bound to its
//! external transitions and an opaque context object handed to those hooks.
//! It can be driven two ways:
//!
//! * [`Runner::start`] spawns a scheduling loop on its own thread. The loop
//!   fires one transition per tick and parks when nothing is enabled until
//!   [`Runner::mark_place`] or [`Runner::stop`] wakes it.
//! * [`Runner::start_manual`] leaves the stepping to the caller via
//!   [`Runner::step`]; this is what deterministic drivers use.
//!
//! Either way, every firing happens under the engine lock, so `mark_place`,
//! `reset_place` and `stop` calls from other threads land between firings.
//! Events go to per-subscriber unbounded queues: a slow subscriber lags but
//! never sees events reordered. Queues are not bounded; a subscriber that
//! never drains its stream grows it without limit.
//!
//! Hooks run on the firing thread with the engine lock held. They must not
//! call back into the runner and must not block for long.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::petri::{Marking, NetError, PetriNet, PlaceId, PlaceKind, Transition, TransitionId, TransitionKind};
use crate::pnml::PnmlDocument;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum RunnerEventKind {
    ExecutionStarted,
    ExecutionStopped,
    TransitionFired { transition: TransitionId },
    PlaceMarkingChanged { place: PlaceId, new_count: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunnerEvent {
    pub tick: u64,
    #[serde(flatten)]
    pub kind: RunnerEventKind,
}

/// A token addition requested by a hook, applied like [`Runner::mark_place`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlaceUpdate {
    pub place: PlaceId,
    pub tokens: u64,
}

impl PlaceUpdate {
    pub fn mark(place: impl Into<PlaceId>, tokens: u64) -> Self {
        PlaceUpdate { place: place.into(), tokens }
    }
}

/// What a hook sees when its transition fires. `marking` is the marking
/// after the firing.
pub struct HookCall<'a, C> {
    pub transition: &'a Transition,
    pub net: &'a PetriNet,
    pub marking: &'a Marking,
    pub tick: u64,
    pub context: &'a mut C,
}

pub type HookFn<C> = Box<dyn FnMut(HookCall<'_, C>) -> Vec<PlaceUpdate> + Send>;

pub struct HookRegistry<C> {
    bindings: BTreeMap<String, HookFn<C>>,
}

impl<C> Default for HookRegistry<C> {
    fn default() -> Self {
        HookRegistry { bindings: BTreeMap::new() }
    }
}

impl<C> fmt::Debug for HookRegistry<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.bindings.keys()).finish()
    }
}

impl<C> HookRegistry<C> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind<F>(mut self, name: &str, hook: F) -> Self
    where
        F: FnMut(HookCall<'_, C>) -> Vec<PlaceUpdate> + Send + 'static,
    {
        self.bindings.insert(name.to_owned(), Box::new(hook));
        self
    }

    pub fn contains(&self, name: &str) -> bool {
        self.bindings.contains_key(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnboundHook {
    pub transition: TransitionId,
    pub hook: String,
}

fn list_unbound(missing: &[UnboundHook]) -> String {
    missing.iter().map(|m| format!("{} (hook `{}`)", m.transition, m.hook)).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RunnerError {
    #[error("external transitions without a bound hook: {}", list_unbound(.0))]
    UnboundHooks(Vec<UnboundHook>),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("runner is already started")]
    AlreadyStarted,
    #[error("runner is not started")]
    NotStarted,
    #[error("runner is driven by its own thread; step() is only for manual mode")]
    BackgroundDriven,
    #[error("place `{0}` is not an external input place")]
    NotExternalInput(String),
    #[error("place `{0}` is not an external output place")]
    NotExternalOutput(String),
    #[error("mark_place needs a positive token count")]
    ZeroTokens,
    #[error("hook `{hook}` asked to mark `{place}`, which is not an external input place")]
    HookUpdateRejected { hook: String, place: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Fired(TransitionId),
    /// Only timed transitions still counting down; one tick elapsed.
    Idle,
    /// Nothing enabled. The runner keeps running and waits for input.
    Quiescent,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunnerConfig {
    /// Wall-clock pacing for background mode, in ticks per second.
    pub pace: Option<f64>,
}

/// Ordered stream of runner events for one subscriber.
pub struct EventStream {
    rx: Receiver<RunnerEvent>,
}

impl EventStream {
    pub fn try_recv(&self) -> Option<RunnerEvent> {
        self.rx.try_recv().ok()
    }

    pub fn recv_timeout(&self, timeout: Duration) -> Option<RunnerEvent> {
        self.rx.recv_timeout(timeout).ok()
    }

    /// Everything queued right now.
    pub fn drain(&self) -> Vec<RunnerEvent> {
        self.rx.try_iter().collect()
    }
}

impl Iterator for EventStream {
    type Item = RunnerEvent;

    /// Blocks until the next event; ends when the runner is dropped.
    fn next(&mut self) -> Option<RunnerEvent> {
        self.rx.recv().ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Stopped,
    Manual,
    Background,
}

struct Subscriber {
    place: Option<PlaceId>,
    tx: Sender<RunnerEvent>,
}

struct Engine<C> {
    net: Arc<PetriNet>,
    marking: Marking,
    hooks: HookRegistry<C>,
    context: C,
    status: Status,
    tick: u64,
    /// Tick at which each currently enabled timed transition became enabled.
    timed_since: BTreeMap<TransitionId, u64>,
    subscribers: Vec<Subscriber>,
    pace: Option<f64>,
    last_error: Option<RunnerError>,
}

impl<C> Engine<C> {
    fn emit(&mut self, kind: RunnerEventKind) {
        let event = RunnerEvent { tick: self.tick, kind };
        let place = match &event.kind {
            RunnerEventKind::PlaceMarkingChanged { place, .. } => Some(place),
            _ => None,
        };
        self.subscribers.retain(|s| match &s.place {
            None => s.tx.send(event.clone()).is_ok(),
            Some(p) if Some(p) == place => s.tx.send(event.clone()).is_ok(),
            Some(_) => true,
        });
    }

    fn input_place(&self, p: &str) -> Result<(), RunnerError> {
        match self.net.place(p) {
            Some(place) if place.kind == PlaceKind::ExternalInput => Ok(()),
            Some(_) => Err(RunnerError::NotExternalInput(p.to_owned())),
            None => Err(NetError::UnknownPlace(p.to_owned()).into()),
        }
    }

    fn add_tokens(&mut self, p: &str, tokens: u64) -> Result<(), RunnerError> {
        let new_count = self.marking.add(p, tokens)?;
        self.emit(RunnerEventKind::PlaceMarkingChanged { place: PlaceId::new(p), new_count });
        Ok(())
    }

    /// Forgets countdowns of timed transitions that are no longer enabled.
    fn refresh_timers(&mut self) -> Vec<TransitionId> {
        let enabled = self.net.enabled_set(&self.marking);
        self.timed_since.retain(|t, _| enabled.contains(t));
        enabled
    }

    fn step_once(&mut self) -> Result<StepOutcome, RunnerError> {
        let enabled = self.refresh_timers();
        let tick = self.tick;
        let mut eligible = None;
        for t in &enabled {
            let ready = match self.net.transition(t.as_str()).map(|t| &t.kind) {
                Some(TransitionKind::Timed { delay }) => {
                    let since = *self.timed_since.entry(t.clone()).or_insert(tick);
                    tick - since >= *delay
                }
                _ => true,
            };
            if ready {
                eligible = Some(t.clone());
                break;
            }
        }
        let Some(t) = eligible else {
            if enabled.is_empty() {
                return Ok(StepOutcome::Quiescent);
            }
            self.tick += 1;
            return Ok(StepOutcome::Idle);
        };

        let before = std::mem::take(&mut self.marking);
        self.marking = self.net.fire(&before, t.as_str())?;
        self.timed_since.remove(&t);
        self.refresh_timers();
        self.emit(RunnerEventKind::TransitionFired { transition: t.clone() });
        let changes: Vec<(PlaceId, u64)> = before.changes_to(&self.marking).map(|(p, n)| (p.clone(), n)).collect();
        for (place, new_count) in changes {
            self.emit(RunnerEventKind::PlaceMarkingChanged { place, new_count });
        }

        let net = Arc::clone(&self.net);
        let transition = net.transition(t.as_str()).expect("fired transition exists");
        if let Some(hook_name) = transition.hook() {
            let hook = self.hooks.bindings.get_mut(hook_name).expect("hooks checked at load");
            let updates =
                hook(HookCall { transition, net: &net, marking: &self.marking, tick, context: &mut self.context });
            for u in updates {
                if self.input_place(u.place.as_str()).is_err() {
                    return Err(RunnerError::HookUpdateRejected {
                        hook: hook_name.to_owned(),
                        place: u.place.to_string(),
                    });
                }
                if u.tokens > 0 {
                    self.add_tokens(u.place.as_str(), u.tokens)?;
                }
            }
        }
        self.tick += 1;
        Ok(StepOutcome::Fired(t))
    }
}

struct Shared<C> {
    engine: Mutex<Engine<C>>,
    wake: Condvar,
    worker: Mutex<Option<JoinHandle<()>>>,
}

/// Handle to a running (or stopped) net. Clones share the same execution.
pub struct Runner<C> {
    shared: Arc<Shared<C>>,
}

impl<C> fmt::Debug for Runner<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let eng = self.shared.engine.lock().unwrap_or_else(|e| e.into_inner());
        f.debug_struct("Runner")
            .field("status", &eng.status)
            .field("tick", &eng.tick)
            .field("marking", &eng.marking)
            .finish_non_exhaustive()
    }
}

impl<C> Clone for Runner<C> {
    fn clone(&self) -> Self {
        Runner { shared: Arc::clone(&self.shared) }
    }
}

impl<C: Send + 'static> Runner<C> {
    /// Loads the document's net (its nets merged into one, if several) in
    /// stopped state at the initial marking.
    pub fn load(doc: &PnmlDocument, hooks: HookRegistry<C>, context: C) -> Result<Self, RunnerError> {
        Self::load_with(doc, hooks, context, RunnerConfig::default())
    }

    pub fn load_with(
        doc: &PnmlDocument,
        hooks: HookRegistry<C>,
        context: C,
        config: RunnerConfig,
    ) -> Result<Self, RunnerError> {
        let (net, marking) = doc.executable()?;
        Self::from_net(net, marking, hooks, context, config)
    }

    pub fn from_net(
        net: PetriNet,
        marking: Marking,
        hooks: HookRegistry<C>,
        context: C,
        config: RunnerConfig,
    ) -> Result<Self, RunnerError> {
        if !marking.as_map().keys().eq(net.places().map(|p| &p.id)) {
            return Err(NetError::MarkingMismatch.into());
        }
        let missing: Vec<UnboundHook> = net
            .transitions()
            .filter_map(|t| t.hook().filter(|h| !hooks.contains(h)).map(|h| (t, h)))
            .map(|(t, h)| UnboundHook { transition: t.id.clone(), hook: h.to_owned() })
            .collect();
        if !missing.is_empty() {
            return Err(RunnerError::UnboundHooks(missing));
        }
        let engine = Engine {
            net: Arc::new(net),
            marking,
            hooks,
            context,
            status: Status::Stopped,
            tick: 0,
            timed_since: BTreeMap::new(),
            subscribers: Vec::new(),
            pace: config.pace,
            last_error: None,
        };
        Ok(Runner {
            shared: Arc::new(Shared { engine: Mutex::new(engine), wake: Condvar::new(), worker: Mutex::new(None) }),
        })
    }

    fn engine(&self) -> MutexGuard<'_, Engine<C>> {
        self.shared.engine.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn begin(&self, status: Status) -> Result<(), RunnerError> {
        let mut eng = self.engine();
        if eng.status != Status::Stopped {
            return Err(RunnerError::AlreadyStarted);
        }
        eng.status = status;
        eng.last_error = None;
        eng.emit(RunnerEventKind::ExecutionStarted);
        Ok(())
    }

    /// Starts the scheduling loop on a dedicated thread.
    pub fn start(&self) -> Result<(), RunnerError> {
        self.begin(Status::Background)?;
        let shared = Arc::clone(&self.shared);
        let handle = thread::Builder::new()
            .name("xnet-runner".into())
            .spawn(move || run_loop(shared))
            .expect("spawn runner thread");
        *self.shared.worker.lock().unwrap_or_else(|e| e.into_inner()) = Some(handle);
        Ok(())
    }

    /// Starts execution without a thread; the caller drives [`Runner::step`].
    pub fn start_manual(&self) -> Result<(), RunnerError> {
        self.begin(Status::Manual)
    }

    /// Fires at most one transition (manual mode only).
    pub fn step(&self) -> Result<StepOutcome, RunnerError> {
        let mut eng = self.engine();
        match eng.status {
            Status::Stopped => Err(RunnerError::NotStarted),
            Status::Background => Err(RunnerError::BackgroundDriven),
            Status::Manual => eng.step_once(),
        }
    }

    /// Halts execution after the in-flight firing and emits
    /// execution-stopped.
    pub fn stop(&self) -> Result<(), RunnerError> {
        {
            let mut eng = self.engine();
            if eng.status == Status::Stopped {
                return Err(RunnerError::NotStarted);
            }
            eng.status = Status::Stopped;
            eng.emit(RunnerEventKind::ExecutionStopped);
        }
        self.shared.wake.notify_all();
        let handle = self.shared.worker.lock().unwrap_or_else(|e| e.into_inner()).take();
        if let Some(h) = handle {
            if h.thread().id() != thread::current().id() {
                let _ = h.join();
            }
        }
        Ok(())
    }

    /// Adds tokens to an external input place. Allowed whether or not the
    /// runner is started.
    pub fn mark_place(&self, place: &str, tokens: u64) -> Result<(), RunnerError> {
        if tokens == 0 {
            return Err(RunnerError::ZeroTokens);
        }
        let mut eng = self.engine();
        eng.input_place(place)?;
        eng.add_tokens(place, tokens)?;
        drop(eng);
        self.shared.wake.notify_all();
        Ok(())
    }

    /// Clears an external input place; returns how many tokens were removed.
    pub fn reset_place(&self, place: &str) -> Result<u64, RunnerError> {
        let mut eng = self.engine();
        eng.input_place(place)?;
        let old = eng.marking.get(place);
        if old > 0 {
            eng.marking.set(place, 0)?;
            eng.refresh_timers();
            eng.emit(RunnerEventKind::PlaceMarkingChanged { place: PlaceId::new(place), new_count: 0 });
        }
        Ok(old)
    }

    /// Changes of one external output place, in order.
    pub fn subscribe_place(&self, place: &str) -> Result<EventStream, RunnerError> {
        let mut eng = self.engine();
        match eng.net.place(place) {
            Some(p) if p.kind == PlaceKind::ExternalOutput => {}
            Some(_) => return Err(RunnerError::NotExternalOutput(place.to_owned())),
            None => return Err(NetError::UnknownPlace(place.to_owned()).into()),
        }
        let (tx, rx) = mpsc::channel();
        eng.subscribers.push(Subscriber { place: Some(PlaceId::new(place)), tx });
        Ok(EventStream { rx })
    }

    /// Every event, in firing order.
    pub fn subscribe_events(&self) -> EventStream {
        let (tx, rx) = mpsc::channel();
        self.engine().subscribers.push(Subscriber { place: None, tx });
        EventStream { rx }
    }

    pub fn marking(&self) -> Marking {
        self.engine().marking.clone()
    }

    pub fn net(&self) -> Arc<PetriNet> {
        Arc::clone(&self.engine().net)
    }

    pub fn tick(&self) -> u64 {
        self.engine().tick
    }

    pub fn is_running(&self) -> bool {
        self.engine().status != Status::Stopped
    }

    /// The error that stopped a background loop, if any.
    pub fn last_error(&self) -> Option<RunnerError> {
        self.engine().last_error.clone()
    }

    pub fn with_context<R>(&self, f: impl FnOnce(&mut C) -> R) -> R {
        f(&mut self.engine().context)
    }
}

fn run_loop<C>(shared: Arc<Shared<C>>) {
    loop {
        let pace = {
            let mut eng = shared.engine.lock().unwrap_or_else(|e| e.into_inner());
            loop {
                if eng.status != Status::Background {
                    return;
                }
                match eng.step_once() {
                    Ok(StepOutcome::Quiescent) => {
                        eng = shared.wake.wait(eng).unwrap_or_else(|e| e.into_inner());
                    }
                    Ok(_) => break,
                    Err(e) => {
                        eng.last_error = Some(e);
                        eng.status = Status::Stopped;
                        eng.emit(RunnerEventKind::ExecutionStopped);
                        return;
                    }
                }
            }
            eng.pace
        };
        match pace {
            Some(p) if p > 0.0 => thread::sleep(Duration::from_secs_f64(1.0 / p)),
            _ => thread::yield_now(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::petri::PlaceKind;

    fn join_net() -> (PetriNet, Marking) {
        let net = PetriNet::builder()
            .plain("A")
            .plain("B")
            .place("C", PlaceKind::ExternalOutput)
            .immediate("t")
            .input("A", "t", 1)
            .input("B", "t", 1)
            .output("t", "C", 1)
            .build()
            .unwrap();
        let m = Marking::from_counts(&net, [("A", 1), ("B", 1)]).unwrap();
        (net, m)
    }

    fn manual(net: PetriNet, m: Marking) -> Runner<()> {
        Runner::from_net(net, m, HookRegistry::new(), (), RunnerConfig::default()).unwrap()
    }

    #[test]
    fn join_net_trace() {
        let (net, m) = join_net();
        let r = manual(net, m);
        let events = r.subscribe_events();
        r.start_manual().unwrap();
        assert_eq!(r.step().unwrap(), StepOutcome::Fired("t".into()));
        assert_eq!(r.step().unwrap(), StepOutcome::Quiescent);
        let kinds: Vec<_> = events.drain().into_iter().map(|e| e.kind).collect();
        assert_eq!(kinds[0], RunnerEventKind::ExecutionStarted);
        assert_eq!(kinds[1], RunnerEventKind::TransitionFired { transition: "t".into() });
        assert_eq!(kinds.len(), 5); // started, fired, A, B, C
    }

    #[test]
    fn lifecycle_errors() {
        let (net, m) = join_net();
        let r = manual(net, m);
        assert_eq!(r.step(), Err(RunnerError::NotStarted));
        assert_eq!(r.stop(), Err(RunnerError::NotStarted));
        r.start_manual().unwrap();
        assert_eq!(r.start_manual(), Err(RunnerError::AlreadyStarted));
        r.stop().unwrap();
        assert_eq!(r.stop(), Err(RunnerError::NotStarted));
    }

    #[test]
    fn interface_discipline() {
        let net = PetriNet::builder()
            .place("in", PlaceKind::ExternalInput)
            .place("out", PlaceKind::ExternalOutput)
            .plain("p")
            .build()
            .unwrap();
        let m = Marking::zero(&net);
        let r = manual(net, m);
        assert_eq!(r.mark_place("p", 1), Err(RunnerError::NotExternalInput("p".into())));
        assert_eq!(r.mark_place("out", 1), Err(RunnerError::NotExternalInput("out".into())));
        assert_eq!(r.mark_place("in", 0), Err(RunnerError::ZeroTokens));
        assert!(matches!(r.mark_place("ghost", 1), Err(RunnerError::Net(_))));
        assert!(r.subscribe_place("in").is_err());
        assert!(r.subscribe_place("out").is_ok());
        r.mark_place("in", 2).unwrap();
        assert_eq!(r.reset_place("in").unwrap(), 2);
        assert_eq!(r.marking().get("in"), 0);
    }

    #[test]
    fn unbound_hook_named() {
        let net = PetriNet::builder().transition(Transition::external("Move", "move")).build().unwrap();
        let m = Marking::zero(&net);
        let err = Runner::from_net(net, m, HookRegistry::<()>::new(), (), RunnerConfig::default()).err().unwrap();
        assert!(err.to_string().contains("Move"), "{err}");
    }

    #[test]
    fn timed_transition_waits_for_delay() {
        let net = PetriNet::builder()
            .place("go", PlaceKind::ExternalInput)
            .plain("out")
            .transition(Transition::timed("w", 3))
            .input("go", "w", 1)
            .output("w", "out", 1)
            .build()
            .unwrap();
        let m = Marking::zero(&net);
        let r = manual(net, m);
        r.start_manual().unwrap();
        r.mark_place("go", 1).unwrap();
        let mut outcomes = Vec::new();
        for _ in 0..5 {
            outcomes.push(r.step().unwrap());
        }
        use StepOutcome::*;
        assert_eq!(outcomes, vec![Idle, Idle, Idle, Fired("w".into()), Quiescent]);
    }

    #[test]
    fn timed_transition_resets_when_disabled() {
        // `w` needs `go`; `steal` (sorted first) removes it before the delay
        // runs out, so `w` never fires from the first token.
        let net = PetriNet::builder()
            .place("go", PlaceKind::ExternalInput)
            .place("grab", PlaceKind::ExternalInput)
            .plain("out")
            .plain("sink")
            .transition(Transition::timed("w", 2))
            .immediate("steal")
            .input("go", "w", 1)
            .output("w", "out", 1)
            .input("go", "steal", 1)
            .input("grab", "steal", 1)
            .output("steal", "sink", 1)
            .build()
            .unwrap();
        let r = manual(net.clone(), Marking::zero(&net));
        r.start_manual().unwrap();
        r.mark_place("go", 1).unwrap();
        assert_eq!(r.step().unwrap(), StepOutcome::Idle);
        r.mark_place("grab", 1).unwrap();
        assert_eq!(r.step().unwrap(), StepOutcome::Fired("steal".into()));
        r.mark_place("go", 1).unwrap();
        // fresh enabling: needs two more idle ticks
        assert_eq!(r.step().unwrap(), StepOutcome::Idle);
        assert_eq!(r.step().unwrap(), StepOutcome::Idle);
        assert_eq!(r.step().unwrap(), StepOutcome::Fired("w".into()));
    }

    #[test]
    fn hook_runs_after_firing_and_can_mark() {
        let net = PetriNet::builder()
            .plain("a")
            .plain("b")
            .place("ack", PlaceKind::ExternalInput)
            .transition(Transition::external("x", "h"))
            .input("a", "x", 1)
            .output("x", "b", 1)
            .build()
            .unwrap();
        let m = Marking::from_counts(&net, [("a", 1)]).unwrap();
        let hooks = HookRegistry::new().bind("h", |call: HookCall<'_, Vec<u64>>| {
            call.context.push(call.marking.get("b"));
            vec![PlaceUpdate::mark("ack", 1)]
        });
        let r = Runner::from_net(net, m, hooks, Vec::new(), RunnerConfig::default()).unwrap();
        r.start_manual().unwrap();
        r.step().unwrap();
        assert_eq!(r.with_context(|c| c.clone()), vec![1]);
        assert_eq!(r.marking().get("ack"), 1);
    }

    #[test]
    fn hook_cannot_mark_internal_place() {
        let net = PetriNet::builder()
            .plain("a")
            .transition(Transition::external("x", "h"))
            .input("a", "x", 1)
            .build()
            .unwrap();
        let m = Marking::from_counts(&net, [("a", 1)]).unwrap();
        let hooks = HookRegistry::new().bind("h", |_: HookCall<'_, ()>| vec![PlaceUpdate::mark("a", 1)]);
        let r = Runner::from_net(net, m, hooks, (), RunnerConfig::default()).unwrap();
        r.start_manual().unwrap();
        assert!(matches!(r.step(), Err(RunnerError::HookUpdateRejected { .. })));
    }

    #[test]
    fn background_cycle_until_stop() {
        let net = PetriNet::builder()
            .plain("A")
            .plain("B")
            .immediate("t1")
            .immediate("t2")
            .input("A", "t1", 1)
            .output("t1", "B", 1)
            .input("B", "t2", 1)
            .output("t2", "A", 1)
            .build()
            .unwrap();
        let m = Marking::from_counts(&net, [("A", 1)]).unwrap();
        let r = manual(net, m);
        let events = r.subscribe_events();
        r.start().unwrap();
        assert_eq!(r.step(), Err(RunnerError::BackgroundDriven));
        let fired: Vec<String> = events
            .filter_map(|e| match e.kind {
                RunnerEventKind::TransitionFired { transition } => Some(transition.to_string()),
                _ => None,
            })
            .take(10)
            .collect();
        r.stop().unwrap();
        assert_eq!(fired, ["t1", "t2"].repeat(5));
    }

    #[test]
    fn background_wakes_on_mark() {
        let net = PetriNet::builder()
            .place("in", PlaceKind::ExternalInput)
            .place("out", PlaceKind::ExternalOutput)
            .immediate("t")
            .input("in", "t", 1)
            .output("t", "out", 1)
            .build()
            .unwrap();
        let r = manual(net.clone(), Marking::zero(&net));
        let out = r.subscribe_place("out").unwrap();
        r.start().unwrap();
        assert!(out.recv_timeout(Duration::from_millis(50)).is_none());
        r.mark_place("in", 1).unwrap();
        let e = out.recv_timeout(Duration::from_secs(5)).expect("woken");
        assert_eq!(e.kind, RunnerEventKind::PlaceMarkingChanged { place: "out".into(), new_count: 1 });
        r.stop().unwrap();
    }
}
