//! Place/transition nets with weighted arcs, external and timed transition
//! kinds, and merge-place composition.
//!
//! Nets are immutable once built. A [`Marking`] is a plain value; firing a
//! transition returns a new marking and leaves the old one untouched, so
//! every operation here can be called from any thread.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                $name(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

id_type!(
    /// Identifier of a place, unique within its net.
    PlaceId
);
id_type!(
    /// Identifier of a transition, unique within its net.
    TransitionId
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlaceKind {
    Plain,
    /// An outside system may add tokens (and reset stale ones).
    ExternalInput,
    /// An outside system may subscribe to marking changes.
    ExternalOutput,
}

impl PlaceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlaceKind::Plain => "plain",
            PlaceKind::ExternalInput => "external-input",
            PlaceKind::ExternalOutput => "external-output",
        }
    }
}

impl std::str::FromStr for PlaceKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "plain" => Ok(PlaceKind::Plain),
            "external-input" => Ok(PlaceKind::ExternalInput),
            "external-output" => Ok(PlaceKind::ExternalOutput),
            _ => Err(()),
        }
    }
}

/// A place. A place with a `merge_group` is a merge place: when nets are
/// composed, all places sharing a group label collapse into one place. The
/// `kind` of a merge place is the interface role the collapsed place takes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Place {
    pub id: PlaceId,
    pub kind: PlaceKind,
    pub merge_group: Option<String>,
}

impl Place {
    pub fn new(id: impl Into<PlaceId>, kind: PlaceKind) -> Self {
        Place { id: id.into(), kind, merge_group: None }
    }

    pub fn merge(id: impl Into<PlaceId>, kind: PlaceKind, group: impl Into<String>) -> Self {
        Place { id: id.into(), kind, merge_group: Some(group.into()) }
    }

    pub fn is_merge(&self) -> bool {
        self.merge_group.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum TransitionKind {
    Immediate,
    /// Fires only after being continuously enabled for `delay` engine ticks.
    Timed {
        delay: u64,
    },
    /// Runs the host callback registered under `hook` each time it fires.
    External {
        hook: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Transition {
    pub id: TransitionId,
    /// Display name. Several transitions may share one label when they are
    /// variants of a single logical step (plain nets have no OR-join).
    pub label: Option<String>,
    pub kind: TransitionKind,
}

impl Transition {
    pub fn immediate(id: impl Into<TransitionId>) -> Self {
        Transition { id: id.into(), label: None, kind: TransitionKind::Immediate }
    }

    pub fn timed(id: impl Into<TransitionId>, delay: u64) -> Self {
        Transition { id: id.into(), label: None, kind: TransitionKind::Timed { delay } }
    }

    pub fn external(id: impl Into<TransitionId>, hook: impl Into<String>) -> Self {
        Transition { id: id.into(), label: None, kind: TransitionKind::External { hook: hook.into() } }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// The label if present, otherwise the id.
    pub fn logical_name(&self) -> &str {
        self.label.as_deref().unwrap_or(self.id.as_str())
    }

    pub fn hook(&self) -> Option<&str> {
        match &self.kind {
            TransitionKind::External { hook } => Some(hook),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeId {
    Place(PlaceId),
    Transition(TransitionId),
}

impl NodeId {
    pub fn as_str(&self) -> &str {
        match self {
            NodeId::Place(p) => p.as_str(),
            NodeId::Transition(t) => t.as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Arc {
    pub source: NodeId,
    pub target: NodeId,
    pub weight: u32,
}

impl Arc {
    pub fn input(place: impl Into<PlaceId>, transition: impl Into<TransitionId>, weight: u32) -> Self {
        Arc { source: NodeId::Place(place.into()), target: NodeId::Transition(transition.into()), weight }
    }

    pub fn output(transition: impl Into<TransitionId>, place: impl Into<PlaceId>, weight: u32) -> Self {
        Arc { source: NodeId::Transition(transition.into()), target: NodeId::Place(place.into()), weight }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetError {
    #[error("empty identifier")]
    EmptyId,
    #[error("duplicate identifier `{0}`")]
    DuplicateId(String),
    #[error("merge place `{0}` has an empty merge-group label")]
    EmptyMergeGroup(String),
    #[error("arc endpoint `{0}` does not exist")]
    UnknownNode(String),
    #[error("arc `{from}` -> `{to}` connects two nodes of the same species")]
    SameSpecies { from: String, to: String },
    #[error("arc `{from}` -> `{to}` has weight 0")]
    ZeroWeight { from: String, to: String },
    #[error("more than one arc `{from}` -> `{to}`")]
    DuplicateArc { from: String, to: String },
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
    #[error("marking does not cover exactly the places of this net")]
    MarkingMismatch,
    #[error("transition `{0}` is not enabled")]
    NotEnabled(String),
    #[error("identifier `{0}` occurs in more than one composed net")]
    IdCollision(String),
    #[error("merge group `{group}` mixes {first} and {second} places")]
    MergeKindConflict { group: String, first: &'static str, second: &'static str },
}

/// An immutable place/transition net.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PetriNet {
    places: BTreeMap<PlaceId, Place>,
    transitions: BTreeMap<TransitionId, Transition>,
    inputs: BTreeMap<TransitionId, Vec<(PlaceId, u32)>>,
    outputs: BTreeMap<TransitionId, Vec<(PlaceId, u32)>>,
}

impl PetriNet {
    pub fn builder() -> NetBuilder {
        NetBuilder::default()
    }

    /// Validates and assembles a net. Place and transition ids share one
    /// namespace (as PNML ids do).
    pub fn new(
        places: impl IntoIterator<Item = Place>,
        transitions: impl IntoIterator<Item = Transition>,
        arcs: impl IntoIterator<Item = Arc>,
    ) -> Result<Self, NetError> {
        let mut ids = BTreeSet::new();
        let mut place_map = BTreeMap::new();
        for p in places {
            if p.id.as_str().is_empty() {
                return Err(NetError::EmptyId);
            }
            if matches!(&p.merge_group, Some(g) if g.is_empty()) {
                return Err(NetError::EmptyMergeGroup(p.id.to_string()));
            }
            if !ids.insert(p.id.as_str().to_owned()) {
                return Err(NetError::DuplicateId(p.id.to_string()));
            }
            place_map.insert(p.id.clone(), p);
        }
        let mut transition_map = BTreeMap::new();
        for t in transitions {
            if t.id.as_str().is_empty() {
                return Err(NetError::EmptyId);
            }
            if !ids.insert(t.id.as_str().to_owned()) {
                return Err(NetError::DuplicateId(t.id.to_string()));
            }
            transition_map.insert(t.id.clone(), t);
        }

        let mut inputs: BTreeMap<TransitionId, Vec<(PlaceId, u32)>> =
            transition_map.keys().map(|t| (t.clone(), Vec::new())).collect();
        let mut outputs = inputs.clone();
        let mut seen = BTreeSet::new();
        for arc in arcs {
            let (src, tgt) = (arc.source.as_str().to_owned(), arc.target.as_str().to_owned());
            if !ids.contains(&src) {
                return Err(NetError::UnknownNode(src));
            }
            if !ids.contains(&tgt) {
                return Err(NetError::UnknownNode(tgt));
            }
            if arc.weight == 0 {
                return Err(NetError::ZeroWeight { from: src, to: tgt });
            }
            let (place, transition, list) = match (&arc.source, &arc.target) {
                (NodeId::Place(p), NodeId::Transition(t)) => (p, t, &mut inputs),
                (NodeId::Transition(t), NodeId::Place(p)) => (p, t, &mut outputs),
                _ => return Err(NetError::SameSpecies { from: src, to: tgt }),
            };
            // An id may be declared with the wrong species by a careless caller.
            let Some(entries) = list.get_mut(transition) else {
                return Err(NetError::SameSpecies { from: src, to: tgt });
            };
            if !place_map.contains_key(place) {
                return Err(NetError::SameSpecies { from: src, to: tgt });
            }
            if !seen.insert((src.clone(), tgt.clone())) {
                return Err(NetError::DuplicateArc { from: src, to: tgt });
            }
            entries.push((place.clone(), arc.weight));
        }
        for list in inputs.values_mut().chain(outputs.values_mut()) {
            list.sort();
        }
        Ok(PetriNet { places: place_map, transitions: transition_map, inputs, outputs })
    }

    pub fn places(&self) -> impl ExactSizeIterator<Item = &Place> {
        self.places.values()
    }

    pub fn transitions(&self) -> impl ExactSizeIterator<Item = &Transition> {
        self.transitions.values()
    }

    pub fn place(&self, id: &str) -> Option<&Place> {
        self.places.get(id)
    }

    pub fn transition(&self, id: &str) -> Option<&Transition> {
        self.transitions.get(id)
    }

    /// Every arc, inputs first, in a deterministic order.
    pub fn arcs(&self) -> Vec<Arc> {
        let mut arcs = Vec::new();
        for (t, list) in &self.inputs {
            arcs.extend(list.iter().map(|(p, w)| Arc::input(p.clone(), t.clone(), *w)));
        }
        for (t, list) in &self.outputs {
            arcs.extend(list.iter().map(|(p, w)| Arc::output(t.clone(), p.clone(), *w)));
        }
        arcs
    }

    pub fn arc_count(&self) -> usize {
        self.inputs.values().chain(self.outputs.values()).map(Vec::len).sum()
    }

    /// Input places of `t` with their arc weights, sorted by place id.
    pub fn inputs_of(&self, t: &str) -> Result<&[(PlaceId, u32)], NetError> {
        self.inputs.get(t).map(Vec::as_slice).ok_or_else(|| NetError::UnknownTransition(t.to_owned()))
    }

    pub fn outputs_of(&self, t: &str) -> Result<&[(PlaceId, u32)], NetError> {
        self.outputs.get(t).map(Vec::as_slice).ok_or_else(|| NetError::UnknownTransition(t.to_owned()))
    }

    fn check_marking(&self, m: &Marking) -> Result<(), NetError> {
        if m.counts.len() == self.places.len() && m.counts.keys().eq(self.places.keys()) {
            Ok(())
        } else {
            Err(NetError::MarkingMismatch)
        }
    }

    pub fn is_enabled(&self, m: &Marking, t: &str) -> Result<bool, NetError> {
        self.check_marking(m)?;
        let inputs = self.inputs_of(t)?;
        Ok(inputs.iter().all(|(p, w)| m.get(p.as_str()) >= u64::from(*w)))
    }

    /// Fires `t`, returning the successor marking. Firing a disabled
    /// transition is an error, never a silent no-op.
    pub fn fire(&self, m: &Marking, t: &str) -> Result<Marking, NetError> {
        if !self.is_enabled(m, t)? {
            return Err(NetError::NotEnabled(t.to_owned()));
        }
        let mut next = m.clone();
        for (p, w) in &self.inputs[t] {
            *next.counts.get_mut(p).expect("checked marking") -= u64::from(*w);
        }
        for (p, w) in &self.outputs[t] {
            *next.counts.get_mut(p).expect("checked marking") += u64::from(*w);
        }
        Ok(next)
    }

    /// All enabled transitions, sorted by id. The first entry is the one the
    /// scheduler fires when several are enabled at once.
    pub fn enabled_set(&self, m: &Marking) -> Vec<TransitionId> {
        if self.check_marking(m).is_err() {
            return Vec::new();
        }
        self.inputs
            .iter()
            .filter(|(_, ins)| ins.iter().all(|(p, w)| m.get(p.as_str()) >= u64::from(*w)))
            .map(|(t, _)| t.clone())
            .collect()
    }
}

/// Chainable net construction.
#[derive(Debug, Clone, Default)]
pub struct NetBuilder {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    arcs: Vec<Arc>,
}

impl NetBuilder {
    pub fn place(mut self, id: &str, kind: PlaceKind) -> Self {
        self.places.push(Place::new(id, kind));
        self
    }

    pub fn plain(self, id: &str) -> Self {
        self.place(id, PlaceKind::Plain)
    }

    pub fn add_place(mut self, place: Place) -> Self {
        self.places.push(place);
        self
    }

    pub fn transition(mut self, t: Transition) -> Self {
        self.transitions.push(t);
        self
    }

    pub fn immediate(self, id: &str) -> Self {
        self.transition(Transition::immediate(id))
    }

    /// Arc `place -> transition`.
    pub fn input(mut self, place: &str, transition: &str, weight: u32) -> Self {
        self.arcs.push(Arc::input(place, transition, weight));
        self
    }

    /// Arc `transition -> place`.
    pub fn output(mut self, transition: &str, place: &str, weight: u32) -> Self {
        self.arcs.push(Arc::output(transition, place, weight));
        self
    }

    /// Consume-and-produce pair: `transition` tests for a token in `place`
    /// without changing its count.
    pub fn read(self, place: &str, transition: &str) -> Self {
        self.input(place, transition, 1).output(transition, place, 1)
    }

    pub fn build(self) -> Result<PetriNet, NetError> {
        PetriNet::new(self.places, self.transitions, self.arcs)
    }
}

/// Token counts for every place of one net.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Marking {
    counts: BTreeMap<PlaceId, u64>,
}

impl Marking {
    /// All places at zero.
    pub fn zero(net: &PetriNet) -> Self {
        Marking { counts: net.places.keys().map(|p| (p.clone(), 0)).collect() }
    }

    /// Places not mentioned start at zero; unknown places are rejected.
    pub fn from_counts<'a>(net: &PetriNet, counts: impl IntoIterator<Item = (&'a str, u64)>) -> Result<Self, NetError> {
        let mut m = Marking::zero(net);
        for (p, n) in counts {
            let slot = m.counts.get_mut(p).ok_or_else(|| NetError::UnknownPlace(p.to_owned()))?;
            *slot = n;
        }
        Ok(m)
    }

    /// Count for `p`; places outside the net read as zero.
    pub fn get(&self, p: &str) -> u64 {
        self.counts.get(p).copied().unwrap_or(0)
    }

    pub fn contains(&self, p: &str) -> bool {
        self.counts.contains_key(p)
    }

    pub fn set(&mut self, p: &str, n: u64) -> Result<(), NetError> {
        let slot = self.counts.get_mut(p).ok_or_else(|| NetError::UnknownPlace(p.to_owned()))?;
        *slot = n;
        Ok(())
    }

    pub fn add(&mut self, p: &str, n: u64) -> Result<u64, NetError> {
        let slot = self.counts.get_mut(p).ok_or_else(|| NetError::UnknownPlace(p.to_owned()))?;
        *slot += n;
        Ok(*slot)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PlaceId, u64)> {
        self.counts.iter().map(|(p, n)| (p, *n))
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Places whose count differs between `self` and `other`, with the new
    /// count from `other`.
    pub fn changes_to<'a>(&'a self, other: &'a Marking) -> impl Iterator<Item = (&'a PlaceId, u64)> {
        other.counts.iter().filter(|(p, n)| self.get(p.as_str()) != **n).map(|(p, n)| (p, *n))
    }

    pub fn as_map(&self) -> &BTreeMap<PlaceId, u64> {
        &self.counts
    }
}

impl fmt::Display for Marking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        let mut first = true;
        for (p, n) in self.counts.iter().filter(|(_, n)| **n > 0) {
            if !first {
                f.write_str(", ")?;
            }
            write!(f, "{p}:{n}")?;
            first = false;
        }
        f.write_str("}")
    }
}

fn merged_kind(group: &str, a: PlaceKind, b: PlaceKind) -> Result<PlaceKind, NetError> {
    match (a, b) {
        (x, y) if x == y => Ok(x),
        (PlaceKind::Plain, x) | (x, PlaceKind::Plain) => Ok(x),
        (x, y) => Err(NetError::MergeKindConflict { group: group.to_owned(), first: x.as_str(), second: y.as_str() }),
    }
}

/// Result of composing several nets: the merged net plus, for every input
/// net, where each of its places ended up.
struct Composition {
    net: PetriNet,
    place_maps: Vec<BTreeMap<PlaceId, PlaceId>>,
}

fn compose(nets: &[&PetriNet]) -> Result<Composition, NetError> {
    let mut groups: BTreeMap<String, PlaceKind> = BTreeMap::new();
    let mut plain_ids = BTreeSet::new();
    let mut places = Vec::new();
    let mut place_maps = Vec::with_capacity(nets.len());

    for net in nets {
        let mut map = BTreeMap::new();
        for p in net.places() {
            match &p.merge_group {
                Some(g) => {
                    let kind = match groups.get(g) {
                        Some(k) => merged_kind(g, *k, p.kind)?,
                        None => p.kind,
                    };
                    groups.insert(g.clone(), kind);
                    map.insert(p.id.clone(), PlaceId::new(g.clone()));
                }
                None => {
                    if !plain_ids.insert(p.id.as_str().to_owned()) {
                        return Err(NetError::IdCollision(p.id.to_string()));
                    }
                    places.push(Place::new(p.id.clone(), p.kind));
                    map.insert(p.id.clone(), p.id.clone());
                }
            }
        }
        place_maps.push(map);
    }
    for (g, kind) in &groups {
        if !plain_ids.insert(g.clone()) {
            return Err(NetError::IdCollision(g.clone()));
        }
        places.push(Place::new(g.as_str(), *kind));
    }

    let mut transitions = Vec::new();
    let mut weights: BTreeMap<(NodeId, NodeId), u32> = BTreeMap::new();
    for (net, map) in nets.iter().zip(&place_maps) {
        for t in net.transitions() {
            if !plain_ids.insert(t.id.as_str().to_owned()) {
                return Err(NetError::IdCollision(t.id.to_string()));
            }
            transitions.push(t.clone());
        }
        for arc in net.arcs() {
            let remap = |n: NodeId| match n {
                NodeId::Place(p) => NodeId::Place(map[&p].clone()),
                t => t,
            };
            // Two members of one group wired to the same transition become a
            // single arc carrying both weights.
            *weights.entry((remap(arc.source), remap(arc.target))).or_default() += arc.weight;
        }
    }
    let arcs = weights.into_iter().map(|((source, target), weight)| Arc { source, target, weight });
    let net = PetriNet::new(places, transitions, arcs)?;
    Ok(Composition { net, place_maps })
}

/// Composes nets into one executable net. Places sharing a merge-group label
/// collapse into a single place named by the label; every other element is
/// copied and must not collide with elements of the other nets.
pub fn merge_nets(nets: &[PetriNet]) -> Result<PetriNet, NetError> {
    let refs: Vec<&PetriNet> = nets.iter().collect();
    Ok(compose(&refs)?.net)
}

/// [`merge_nets`] carrying initial markings along. A merged place starts with
/// the largest count any of its members had.
pub fn merge_marked(parts: &[(PetriNet, Marking)]) -> Result<(PetriNet, Marking), NetError> {
    let refs: Vec<&PetriNet> = parts.iter().map(|(n, _)| n).collect();
    let Composition { net, place_maps } = compose(&refs)?;
    let mut marking = Marking::zero(&net);
    for ((part, m), map) in parts.iter().zip(&place_maps) {
        part.check_marking(m)?;
        for (p, n) in m.iter() {
            let target = map[p].as_str();
            let cur = marking.get(target);
            marking.set(target, cur.max(n))?;
        }
    }
    Ok((net, marking))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two input places feeding one transition with a single output.
    fn join_net() -> PetriNet {
        PetriNet::builder()
            .plain("A")
            .plain("B")
            .plain("C")
            .immediate("t")
            .input("A", "t", 1)
            .input("B", "t", 1)
            .output("t", "C", 1)
            .build()
            .unwrap()
    }

    #[test]
    fn join_enabled_only_when_all_inputs_marked() {
        let net = join_net();
        let m = Marking::from_counts(&net, [("A", 1), ("B", 1)]).unwrap();
        assert!(net.is_enabled(&m, "t").unwrap());
        let m = Marking::from_counts(&net, [("A", 1)]).unwrap();
        assert!(!net.is_enabled(&m, "t").unwrap());
    }

    #[test]
    fn no_inputs_is_vacuously_enabled() {
        let net = PetriNet::builder().plain("out").immediate("src").output("src", "out", 1).build().unwrap();
        assert!(net.is_enabled(&Marking::zero(&net), "src").unwrap());
    }

    #[test]
    fn unknown_transition_is_an_error() {
        let net = join_net();
        let m = Marking::zero(&net);
        assert_eq!(net.is_enabled(&m, "nope"), Err(NetError::UnknownTransition("nope".into())));
    }

    #[test]
    fn join_fires_two_into_one() {
        let net = join_net();
        let m = Marking::from_counts(&net, [("A", 1), ("B", 1)]).unwrap();
        let next = net.fire(&m, "t").unwrap();
        assert_eq!(next, Marking::from_counts(&net, [("C", 1)]).unwrap());
        // value semantics
        assert_eq!(m.get("A"), 1);
        assert!(net.enabled_set(&next).is_empty());
    }

    #[test]
    fn self_loop_keeps_count() {
        let net = PetriNet::builder().plain("p").immediate("t").read("p", "t").build().unwrap();
        let m = Marking::from_counts(&net, [("p", 1)]).unwrap();
        assert_eq!(net.fire(&m, "t").unwrap().get("p"), 1);
    }

    #[test]
    fn weighted_arcs() {
        let net = PetriNet::builder()
            .plain("in")
            .plain("out")
            .immediate("t")
            .input("in", "t", 2)
            .output("t", "out", 1)
            .build()
            .unwrap();
        let m = Marking::from_counts(&net, [("in", 3)]).unwrap();
        let next = net.fire(&m, "t").unwrap();
        assert_eq!((next.get("in"), next.get("out")), (1, 1));
        assert!(net.fire(&next, "t").is_err());
    }

    #[test]
    fn firing_disabled_transition_is_an_error() {
        let net = join_net();
        let m = Marking::from_counts(&net, [("A", 1)]).unwrap();
        assert_eq!(net.fire(&m, "t"), Err(NetError::NotEnabled("t".into())));
    }

    #[test]
    fn enabled_set_is_sorted() {
        let net = PetriNet::builder()
            .plain("p")
            .plain("q")
            .immediate("b")
            .immediate("a")
            .input("p", "b", 1)
            .input("q", "a", 1)
            .build()
            .unwrap();
        assert!(net.enabled_set(&Marking::zero(&net)).is_empty());
        let m = Marking::from_counts(&net, [("p", 1), ("q", 1)]).unwrap();
        assert_eq!(net.enabled_set(&m), vec![TransitionId::new("a"), TransitionId::new("b")]);
    }

    #[test]
    fn marking_from_other_net_is_rejected() {
        let net = join_net();
        let other = PetriNet::builder().plain("X").build().unwrap();
        assert_eq!(net.fire(&Marking::zero(&other), "t"), Err(NetError::MarkingMismatch));
    }

    #[test]
    fn validation_errors() {
        let e = PetriNet::builder().plain("p").plain("p").build().unwrap_err();
        assert_eq!(e, NetError::DuplicateId("p".into()));
        let e = PetriNet::builder().plain("p").immediate("p").build().unwrap_err();
        assert_eq!(e, NetError::DuplicateId("p".into()));
        let e = PetriNet::builder().plain("p").input("p", "t", 1).build().unwrap_err();
        assert_eq!(e, NetError::UnknownNode("t".into()));
        let e = PetriNet::builder().plain("p").immediate("t").input("p", "t", 0).build().unwrap_err();
        assert!(matches!(e, NetError::ZeroWeight { .. }));
        let e =
            PetriNet::builder().plain("p").immediate("t").input("p", "t", 1).input("p", "t", 2).build().unwrap_err();
        assert!(matches!(e, NetError::DuplicateArc { .. }));
        let bad = Arc { source: NodeId::Place("p".into()), target: NodeId::Place("q".into()), weight: 1 };
        let e = PetriNet::new([Place::new("p", PlaceKind::Plain), Place::new("q", PlaceKind::Plain)], [], [bad])
            .unwrap_err();
        assert!(matches!(e, NetError::SameSpecies { .. }));
        // species mislabelled by the caller
        let lying = Arc { source: NodeId::Transition("p".into()), target: NodeId::Place("t".into()), weight: 1 };
        let e = PetriNet::new([Place::new("p", PlaceKind::Plain)], [Transition::immediate("t")], [lying]).unwrap_err();
        assert!(matches!(e, NetError::SameSpecies { .. }));
        assert_eq!(PetriNet::builder().plain("").build().unwrap_err(), NetError::EmptyId);
    }

    #[test]
    fn merge_handoff() {
        let a = PetriNet::builder()
            .add_place(Place::merge("h1", PlaceKind::Plain, "handoff"))
            .immediate("t1")
            .output("t1", "h1", 1)
            .build()
            .unwrap();
        let b = PetriNet::builder()
            .add_place(Place::merge("h2", PlaceKind::Plain, "handoff"))
            .immediate("t2")
            .input("h2", "t2", 1)
            .build()
            .unwrap();
        let merged = merge_nets(&[a, b]).unwrap();
        assert_eq!(merged.places().len(), 1);
        assert_eq!(merged.place("handoff").unwrap().kind, PlaceKind::Plain);
        assert_eq!(merged.outputs_of("t1").unwrap(), &[(PlaceId::new("handoff"), 1)]);
        assert_eq!(merged.inputs_of("t2").unwrap(), &[(PlaceId::new("handoff"), 1)]);
    }

    #[test]
    fn merge_without_merge_places_is_identity() {
        let net = join_net();
        assert_eq!(merge_nets(std::slice::from_ref(&net)).unwrap(), net);
    }

    #[test]
    fn merge_kind_resolution() {
        let part = |pid: &str, kind, tid: &str| {
            PetriNet::builder()
                .add_place(Place::merge(pid, kind, "g"))
                .immediate(tid)
                .input(pid, tid, 1)
                .build()
                .unwrap()
        };
        let merged =
            merge_nets(&[part("a", PlaceKind::Plain, "ta"), part("b", PlaceKind::ExternalInput, "tb")]).unwrap();
        assert_eq!(merged.place("g").unwrap().kind, PlaceKind::ExternalInput);
        let err = merge_nets(&[part("a", PlaceKind::ExternalOutput, "ta"), part("b", PlaceKind::ExternalInput, "tb")])
            .unwrap_err();
        assert!(matches!(err, NetError::MergeKindConflict { .. }));
    }

    #[test]
    fn merge_collisions() {
        let net = join_net();
        assert_eq!(merge_nets(&[net.clone(), net]).unwrap_err(), NetError::IdCollision("A".into()));
        let grp = PetriNet::builder().add_place(Place::merge("m", PlaceKind::Plain, "A")).build().unwrap();
        assert_eq!(merge_nets(&[join_net(), grp]).unwrap_err(), NetError::IdCollision("A".into()));
    }

    #[test]
    fn merge_marked_takes_max() {
        let a = PetriNet::builder().add_place(Place::merge("x", PlaceKind::Plain, "g")).build().unwrap();
        let b = PetriNet::builder().add_place(Place::merge("y", PlaceKind::Plain, "g")).build().unwrap();
        let ma = Marking::from_counts(&a, [("x", 1)]).unwrap();
        let mb = Marking::zero(&b);
        let (net, m) = merge_marked(&[(a, ma), (b, mb)]).unwrap();
        assert_eq!(net.places().len(), 1);
        assert_eq!(m.get("g"), 1);
    }
}
