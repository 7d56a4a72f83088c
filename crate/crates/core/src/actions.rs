//! The standard action controller, the Move net built on it, and the aspect
//! of an action read off a marking.
//!
//! Both nets share one controller: a single token travels
//! `Enabled → Ready → Ongoing → Done`, detouring through `Suspended` when a
//! suspension is requested and leaving it again on resume or restart. The
//! Move net adds a motion loop (`Moving ⇄ Moved`) that runs while the action
//! is ongoing; every pass through `Move` hands control to the host, which
//! advances the robot and reports arrival by marking `Arrived`.
//!
//! Plain nets have no OR-join, so steps that must collect "whichever loop
//! place is marked" are split into variants that share a label (and a hook):
//! `SuspendT#moving` and `SuspendT#moved` are both reported as `SuspendT`.
//!
//! External input places accumulate tokens, so a control token that arrives
//! at the wrong moment would otherwise linger and fire much later.
//! [`control_plan`] encodes the discipline a host follows to keep the nets
//! 1-safe: control places are level-set (never above one token) and stale
//! control tokens are drained before new input is applied.
//! [`analyze_input_schedules`] checks that discipline exhaustively.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::petri::{Marking, PetriNet, PlaceId, PlaceKind, Transition, TransitionId};
use crate::pnml::{serialize_pnml, PnmlDocument};
use crate::reach::{explore, Limits, Strategy};

/// Places every net with standard action semantics carries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StandardActionPlaces {
    pub enabled: PlaceId,
    pub ready: PlaceId,
    pub ongoing: PlaceId,
    pub suspended: PlaceId,
    pub done: PlaceId,
    pub suspend: PlaceId,
    pub resume: PlaceId,
    pub restart: PlaceId,
    /// The input that lets `Finish` complete the action (`Arrived` in the
    /// Move net).
    pub completion: PlaceId,
}

impl StandardActionPlaces {
    fn with_completion(completion: &str) -> Self {
        StandardActionPlaces {
            enabled: "Enabled".into(),
            ready: "Ready".into(),
            ongoing: "Ongoing".into(),
            suspended: "Suspended".into(),
            done: "Done".into(),
            suspend: "Suspend".into(),
            resume: "Resume".into(),
            restart: "Restart".into(),
            completion: completion.into(),
        }
    }

    /// Controller states, at most one of which is ever marked.
    pub fn states(&self) -> [&PlaceId; 4] {
        [&self.ready, &self.ongoing, &self.suspended, &self.done]
    }

    /// Places a host may mark.
    pub fn inputs(&self) -> [&PlaceId; 5] {
        [&self.enabled, &self.suspend, &self.resume, &self.restart, &self.completion]
    }

    /// Places a host may subscribe to.
    pub fn outputs(&self) -> [&PlaceId; 4] {
        self.states()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveXnetPlaces {
    pub standard: StandardActionPlaces,
    pub moving: PlaceId,
    pub moved: PlaceId,
    /// Same place as `standard.completion`.
    pub arrived: PlaceId,
}

/// Logical names of the controller transitions. Anything else in an action
/// net is task-specific.
pub const CONTROLLER_TRANSITIONS: [&str; 6] = ["Prepare", "Start", "SuspendT", "ResumeT", "RestartT", "Finish"];

pub fn is_controller_transition(t: &Transition) -> bool {
    CONTROLLER_TRANSITIONS.contains(&t.logical_name())
}

pub const HOOK_MOVE: &str = "move";
pub const HOOK_SUSPEND: &str = "suspend";
pub const HOOK_RESUME: &str = "resume";
pub const HOOK_RESTART: &str = "restart";

/// Default delay of the Move net's `Wait` transition, in ticks.
pub const DEFAULT_WAIT_DELAY: u64 = 0;

fn controller_places(b: crate::petri::NetBuilder, p: &StandardActionPlaces) -> crate::petri::NetBuilder {
    use PlaceKind::{ExternalInput as In, ExternalOutput as Out};
    b.place(p.enabled.as_str(), In)
        .place(p.ready.as_str(), Out)
        .place(p.ongoing.as_str(), Out)
        .place(p.suspended.as_str(), Out)
        .place(p.done.as_str(), Out)
        .place(p.suspend.as_str(), In)
        .place(p.resume.as_str(), In)
        .place(p.restart.as_str(), In)
        .place(p.completion.as_str(), In)
}

/// The controller alone, with `Complete` as its completion input.
pub fn build_standard_controller() -> (PetriNet, StandardActionPlaces, Marking) {
    let p = StandardActionPlaces::with_completion("Complete");
    let net = controller_places(PetriNet::builder(), &p)
        .immediate("Prepare")
        .immediate("Start")
        .transition(Transition::external("SuspendT", HOOK_SUSPEND))
        .transition(Transition::external("ResumeT", HOOK_RESUME))
        .transition(Transition::external("RestartT", HOOK_RESTART))
        .immediate("Finish")
        .input("Enabled", "Prepare", 1)
        .output("Prepare", "Ready", 1)
        .input("Ready", "Start", 1)
        .output("Start", "Ongoing", 1)
        .input("Ongoing", "SuspendT", 1)
        .input("Suspend", "SuspendT", 1)
        .output("SuspendT", "Suspended", 1)
        .input("Suspended", "ResumeT", 1)
        .input("Resume", "ResumeT", 1)
        .output("ResumeT", "Ongoing", 1)
        .input("Suspended", "RestartT", 1)
        .input("Restart", "RestartT", 1)
        .output("RestartT", "Ready", 1)
        .input("Ongoing", "Finish", 1)
        .input("Complete", "Finish", 1)
        .output("Finish", "Done", 1)
        .build()
        .expect("standard controller is well formed");
    let m0 = Marking::zero(&net);
    (net, p, m0)
}

pub fn build_move_xnet() -> (PetriNet, MoveXnetPlaces, Marking) {
    build_move_xnet_with_delay(DEFAULT_WAIT_DELAY)
}

/// The Move net with a chosen `Wait` delay.
pub fn build_move_xnet_with_delay(wait_delay: u64) -> (PetriNet, MoveXnetPlaces, Marking) {
    let standard = StandardActionPlaces::with_completion("Arrived");
    let places = MoveXnetPlaces { standard, moving: "Moving".into(), moved: "Moved".into(), arrived: "Arrived".into() };
    let mut b = controller_places(PetriNet::builder(), &places.standard)
        .plain("Moving")
        .plain("Moved")
        .immediate("Prepare")
        .immediate("Start")
        .transition(Transition::external("Move", HOOK_MOVE))
        .transition(Transition::timed("Wait", wait_delay))
        .transition(Transition::external("ResumeT", HOOK_RESUME))
        .transition(Transition::external("RestartT", HOOK_RESTART))
        .input("Enabled", "Prepare", 1)
        .output("Prepare", "Ready", 1)
        .input("Ready", "Start", 1)
        .output("Start", "Ongoing", 1)
        .output("Start", "Moving", 1)
        .input("Moving", "Move", 1)
        .read("Ongoing", "Move")
        .output("Move", "Moved", 1)
        .input("Moved", "Wait", 1)
        .output("Wait", "Moving", 1)
        .input("Suspended", "ResumeT", 1)
        .input("Resume", "ResumeT", 1)
        .output("ResumeT", "Ongoing", 1)
        .output("ResumeT", "Moving", 1)
        .input("Suspended", "RestartT", 1)
        .input("Restart", "RestartT", 1)
        .output("RestartT", "Ready", 1);
    for loop_place in ["Moving", "Moved"] {
        let suffix = loop_place.to_ascii_lowercase();
        let suspend = format!("SuspendT#{suffix}");
        let finish = format!("Finish#{suffix}");
        b = b
            .transition(Transition::external(suspend.as_str(), HOOK_SUSPEND).with_label("SuspendT"))
            .input("Ongoing", &suspend, 1)
            .input("Suspend", &suspend, 1)
            .input(loop_place, &suspend, 1)
            .output(&suspend, "Suspended", 1)
            .transition(Transition::immediate(finish.as_str()).with_label("Finish"))
            .input("Ongoing", &finish, 1)
            .input("Arrived", &finish, 1)
            .input(loop_place, &finish, 1)
            .output(&finish, "Done", 1);
    }
    let net = b.build().expect("move net is well formed");
    let m0 = Marking::zero(&net);
    (net, places, m0)
}

/// Where an action stands, as language would describe it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aspect {
    Impending,
    Ongoing,
    Suspended,
    Completed,
    Inactive,
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aspect::Impending => "impending",
            Aspect::Ongoing => "ongoing",
            Aspect::Suspended => "suspended",
            Aspect::Completed => "completed",
            Aspect::Inactive => "inactive",
        })
    }
}

pub fn aspect_of(places: &StandardActionPlaces, m: &Marking) -> Aspect {
    let has = |p: &PlaceId| m.get(p.as_str()) >= 1;
    if has(&places.done) {
        Aspect::Completed
    } else if has(&places.suspended) {
        Aspect::Suspended
    } else if has(&places.ongoing) {
        Aspect::Ongoing
    } else if has(&places.enabled) || has(&places.ready) {
        Aspect::Impending
    } else {
        Aspect::Inactive
    }
}

/// A request a host makes of a running action net.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlInput {
    Enable,
    Suspend,
    Resume,
    Restart,
    /// Suspend and restart together: abandon the current run and go again
    /// from `Ready`.
    Redirect,
    /// The task-level completion signal (`Arrived` for the Move net).
    Complete,
}

impl ControlInput {
    pub const ALL: [ControlInput; 6] = [
        ControlInput::Enable,
        ControlInput::Suspend,
        ControlInput::Resume,
        ControlInput::Restart,
        ControlInput::Redirect,
        ControlInput::Complete,
    ];
}

/// Place operations realizing one [`ControlInput`]: reset each `drain`
/// place, then bring each `mark` place up to one token.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ControlPlan {
    pub drain: Vec<PlaceId>,
    pub mark: Vec<PlaceId>,
}

impl ControlPlan {
    /// Applies the plan to a marking directly (for analysis and tests).
    pub fn apply(&self, m: &Marking) -> Marking {
        let mut out = m.clone();
        for p in &self.drain {
            out.set(p.as_str(), 0).expect("plan names places of the net");
        }
        for p in &self.mark {
            out.set(p.as_str(), 1).expect("plan names places of the net");
        }
        out
    }
}

/// Control tokens that can no longer have their intended effect.
///
/// A `Suspend` only matters while the action is impending or ongoing; a
/// `Resume` only while suspended; a `Restart` while suspended or when a
/// suspension is already pending against a live action.
pub fn stale_control_places(places: &StandardActionPlaces, m: &Marking) -> Vec<PlaceId> {
    let aspect = aspect_of(places, m);
    let live = matches!(aspect, Aspect::Ongoing | Aspect::Impending);
    let suspend_pending = m.get(places.suspend.as_str()) > 0;
    let mut stale = Vec::new();
    if m.get(places.suspend.as_str()) > 0 && !live {
        stale.push(places.suspend.clone());
    }
    if m.get(places.resume.as_str()) > 0 && aspect != Aspect::Suspended {
        stale.push(places.resume.clone());
    }
    let restart_useful = aspect == Aspect::Suspended || (suspend_pending && live);
    if m.get(places.restart.as_str()) > 0 && !restart_useful {
        stale.push(places.restart.clone());
    }
    stale
}

/// The drains and marks that realize `input` on marking `m`.
pub fn control_plan(places: &StandardActionPlaces, m: &Marking, input: ControlInput) -> ControlPlan {
    let drain = stale_control_places(places, m);
    let mark = match input {
        ControlInput::Enable => vec![places.enabled.clone()],
        ControlInput::Suspend => vec![places.suspend.clone()],
        ControlInput::Resume => vec![places.resume.clone()],
        ControlInput::Restart => vec![places.restart.clone()],
        ControlInput::Redirect => vec![places.suspend.clone(), places.restart.clone()],
        ControlInput::Complete => vec![places.completion.clone()],
    };
    ControlPlan { drain, mark }
}

/// Outcome of [`analyze_input_schedules`]. Each `Option` holds a witness
/// marking when the property fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleAnalysis {
    pub states: usize,
    pub markings: usize,
    pub max_tokens: u64,
    pub unsafe_marking: Option<Marking>,
    pub exclusivity_violation: Option<Marking>,
    pub resume_race_violation: Option<Marking>,
}

impl ScheduleAnalysis {
    pub fn holds(&self) -> bool {
        self.max_tokens <= 1
            && self.unsafe_marking.is_none()
            && self.exclusivity_violation.is_none()
            && self.resume_race_violation.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct ScheduleState {
    marking: Marking,
    inputs: u8,
    enabled_used: bool,
}

fn controller_enabled(net: &PetriNet, m: &Marking) -> Vec<TransitionId> {
    net.enabled_set(m)
        .into_iter()
        .filter(|t| net.transition(t.as_str()).is_some_and(is_controller_transition))
        .collect()
}

/// Explores every interleaving of firings with up to `max_inputs` control
/// inputs (applied through [`control_plan`], `Enable` at most once) and
/// checks 1-safety, exclusivity of the controller states and that a
/// `Resume` outside suspension enables nothing new.
///
/// Firing choice is left free rather than following the runner's
/// tie-break, and timed transitions are treated as immediate, so the result
/// covers every delay setting.
pub fn analyze_input_schedules(
    net: &PetriNet,
    places: &StandardActionPlaces,
    initial: &Marking,
    max_inputs: u8,
    strategy: Strategy,
) -> ScheduleAnalysis {
    let start = ScheduleState { marking: initial.clone(), inputs: 0, enabled_used: false };
    let successors = |s: &ScheduleState| {
        let mut next: Vec<ScheduleState> = net
            .enabled_set(&s.marking)
            .iter()
            .map(|t| ScheduleState {
                marking: net.fire(&s.marking, t.as_str()).expect("enabled transition fires"),
                ..s.clone()
            })
            .collect();
        if s.inputs < max_inputs {
            for input in ControlInput::ALL {
                if input == ControlInput::Enable && s.enabled_used {
                    continue;
                }
                next.push(ScheduleState {
                    marking: control_plan(places, &s.marking, input).apply(&s.marking),
                    inputs: s.inputs + 1,
                    enabled_used: s.enabled_used || input == ControlInput::Enable,
                });
            }
        }
        next
    };
    let explored = explore([start], successors, Limits::default(), strategy);

    let mut markings: Vec<&Marking> = explored.states.iter().map(|s| &s.marking).collect();
    markings.sort();
    markings.dedup();
    let mut report = ScheduleAnalysis {
        states: explored.len(),
        markings: markings.len(),
        max_tokens: 0,
        unsafe_marking: None,
        exclusivity_violation: None,
        resume_race_violation: None,
    };
    for m in markings {
        let peak = m.iter().map(|(_, n)| n).max().unwrap_or(0);
        if peak > report.max_tokens {
            report.max_tokens = peak;
        }
        if peak > 1 && report.unsafe_marking.is_none() {
            report.unsafe_marking = Some(m.clone());
        }
        let marked_states = places.states().iter().filter(|p| m.get(p.as_str()) > 0).count();
        if marked_states > 1 && report.exclusivity_violation.is_none() {
            report.exclusivity_violation = Some(m.clone());
        }
        if m.get(places.suspended.as_str()) == 0 && report.resume_race_violation.is_none() {
            let before = controller_enabled(net, m);
            let mut with_resume = m.clone();
            with_resume.add(places.resume.as_str(), 1).expect("resume place exists");
            let after = controller_enabled(net, &with_resume);
            if after.iter().any(|t| !before.contains(t)) {
                report.resume_race_violation = Some(m.clone());
            }
        }
    }
    report
}

/// File names and documents of the canonical net fixtures.
pub fn fixture_documents() -> Vec<(&'static str, PnmlDocument)> {
    let (move_net, _, move_m0) = build_move_xnet();
    let (ctl_net, _, ctl_m0) = build_standard_controller();
    let mut move_doc = PnmlDocument::single("move-xnet", move_net, move_m0);
    move_doc.nets[0].name = Some("Move".into());
    let mut ctl_doc = PnmlDocument::single("standard-controller", ctl_net, ctl_m0);
    ctl_doc.nets[0].name = Some("Standard action controller".into());
    vec![("move-xnet.pnml", move_doc), ("standard-controller.pnml", ctl_doc)]
}

/// Writes the fixtures into `dir`, returning the paths written.
pub fn write_fixtures(dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    fixture_documents()
        .into_iter()
        .map(|(name, doc)| {
            let path = dir.join(name);
            fs::write(&path, serialize_pnml(&doc))?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(net: &PetriNet, mut m: Marking) -> (Marking, Vec<String>) {
        let mut fired = Vec::new();
        for _ in 0..100 {
            let Some(t) = net.enabled_set(&m).into_iter().next() else { break };
            m = net.fire(&m, t.as_str()).unwrap();
            fired.push(net.transition(t.as_str()).unwrap().logical_name().to_owned());
        }
        (m, fired)
    }

    /// Runs until only the motion loop would keep going.
    fn settle(net: &PetriNet, mut m: Marking) -> (Marking, Vec<String>) {
        let mut fired = Vec::new();
        for _ in 0..100 {
            let Some(t) = net.enabled_set(&m).into_iter().next() else { break };
            let name = net.transition(t.as_str()).unwrap().logical_name().to_owned();
            if name == "Wait" {
                break;
            }
            m = net.fire(&m, t.as_str()).unwrap();
            fired.push(name);
        }
        (m, fired)
    }

    #[test]
    fn controller_runs_to_ongoing() {
        let (net, p, mut m) = build_standard_controller();
        m.set(p.enabled.as_str(), 1).unwrap();
        let (m, fired) = run(&net, m);
        assert_eq!(fired, ["Prepare", "Start"]);
        assert_eq!(m.get("Ongoing"), 1);
        assert_eq!(aspect_of(&p, &m), Aspect::Ongoing);
    }

    #[test]
    fn controller_suspends() {
        let (net, p, m0) = build_standard_controller();
        let mut m = Marking::from_counts(&net, [("Ongoing", 1)]).unwrap();
        m.set(p.suspend.as_str(), 1).unwrap();
        let (m, _) = run(&net, m);
        assert_eq!((m.get("Suspended"), m.get("Ongoing")), (1, 0));
        let mut z = m0;
        z.set("Resume", 1).unwrap();
        assert!(net.enabled_set(&z).is_empty());
    }

    #[test]
    fn move_net_reaches_motion_state() {
        let (net, p, mut m) = build_move_xnet();
        m.set(p.standard.enabled.as_str(), 1).unwrap();
        let (m, fired) = settle(&net, m);
        assert_eq!(fired, ["Prepare", "Start", "Move"]);
        assert_eq!((m.get("Ongoing"), m.get("Moved")), (1, 1));
        assert_eq!(aspect_of(&p.standard, &m), Aspect::Ongoing);
    }

    #[test]
    fn redirect_goes_back_through_ready() {
        let (net, p, _) = build_move_xnet();
        let m = Marking::from_counts(&net, [("Ongoing", 1), ("Moving", 1)]).unwrap();
        let m = control_plan(&p.standard, &m, ControlInput::Redirect).apply(&m);
        assert_eq!((m.get("Suspend"), m.get("Restart")), (1, 1));
        let (m, fired) = settle(&net, m);
        let controller: Vec<_> =
            fired.iter().filter(|n| CONTROLLER_TRANSITIONS.contains(&n.as_str())).cloned().collect();
        assert_eq!(controller, ["SuspendT", "RestartT", "Start"]);
        assert_eq!(m.get("Ongoing"), 1);
        assert_eq!(m.get("Suspend") + m.get("Restart") + m.get("Suspended"), 0);
    }

    #[test]
    fn arrival_completes_and_empties_loop() {
        let (net, _, _) = build_move_xnet();
        for loop_place in ["Moving", "Moved"] {
            let m = Marking::from_counts(&net, [("Ongoing", 1), (loop_place, 1), ("Arrived", 1)]).unwrap();
            let (m, fired) = run(&net, m);
            assert_eq!(fired, ["Finish"]);
            assert_eq!(m.get("Done"), 1);
            assert_eq!(m.get("Moving") + m.get("Moved") + m.get("Ongoing"), 0);
        }
    }

    #[test]
    fn arrival_while_suspended_waits_for_resume() {
        let (net, _, _) = build_move_xnet();
        let m = Marking::from_counts(&net, [("Suspended", 1), ("Arrived", 1)]).unwrap();
        assert!(net.enabled_set(&m).is_empty());
        let mut m = m;
        m.set("Resume", 1).unwrap();
        let (m, fired) = run(&net, m);
        assert_eq!(fired, ["ResumeT", "Finish"]);
        assert_eq!(m.get("Done"), 1);
    }

    #[test]
    fn aspect_rules() {
        let (net, p, m0) = build_move_xnet();
        let p = &p.standard;
        assert_eq!(aspect_of(p, &m0), Aspect::Inactive);
        let m = Marking::from_counts(&net, [("Ongoing", 1), ("Moving", 1)]).unwrap();
        assert_eq!(aspect_of(p, &m), Aspect::Ongoing);
        let m = Marking::from_counts(&net, [("Done", 1)]).unwrap();
        assert_eq!(aspect_of(p, &m), Aspect::Completed);
        let m = Marking::from_counts(&net, [("Ready", 1)]).unwrap();
        assert_eq!(aspect_of(p, &m), Aspect::Impending);
    }

    #[test]
    fn stale_resume_is_drained_before_next_input() {
        let (net, p, _) = build_move_xnet();
        let m = Marking::from_counts(&net, [("Ongoing", 1), ("Moving", 1), ("Resume", 1)]).unwrap();
        let plan = control_plan(&p.standard, &m, ControlInput::Suspend);
        assert_eq!(plan.drain, [PlaceId::new("Resume")]);
        assert_eq!(plan.mark, [PlaceId::new("Suspend")]);
    }

    #[test]
    fn move_net_input_schedules_are_safe() {
        let (net, p, m0) = build_move_xnet();
        let a = analyze_input_schedules(&net, &p.standard, &m0, 6, Strategy::default());
        assert!(a.holds(), "{a:?}");
        assert_eq!(a.max_tokens, 1);
    }

    #[test]
    fn controller_input_schedules_are_safe() {
        let (net, p, m0) = build_standard_controller();
        let a = analyze_input_schedules(&net, &p, &m0, 6, Strategy::Sequential);
        assert!(a.holds(), "{a:?}");
    }

    #[test]
    fn analysis_reports_witnesses() {
        let (net, p, _) = build_standard_controller();
        let m = Marking::from_counts(&net, [("Ready", 1), ("Ongoing", 1), ("Suspend", 2)]).unwrap();
        let a = analyze_input_schedules(&net, &p, &m, 1, Strategy::Sequential);
        assert!(!a.holds());
        assert!(a.max_tokens >= 2);
        assert!(a.unsafe_marking.is_some());
        assert!(a.exclusivity_violation.is_some());
    }
}
