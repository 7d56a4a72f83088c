//! Reference semantics for random place/transition nets.
//!
//! Deliberately shares nothing with the engine but the final conversion:
//! a net is a pair of pre/post weight matrices, a marking is a plain vector,
//! and reachability is a textbook breadth-first search.

#![allow(dead_code)]

use std::collections::{HashSet, VecDeque};

use rand::Rng;
use xnet_core::petri::{Arc, Marking, PetriNet, Place, PlaceKind, Transition};

#[derive(Debug, Clone)]
pub struct MatrixNet {
    pub places: usize,
    /// `pre[t][p]`: tokens transition `t` takes from place `p`.
    pub pre: Vec<Vec<u32>>,
    /// `post[t][p]`: tokens transition `t` puts into place `p`.
    pub post: Vec<Vec<u32>>,
    pub m0: Vec<u64>,
}

pub fn place_id(p: usize) -> String {
    format!("p{p}")
}

pub fn transition_id(t: usize) -> String {
    format!("t{t}")
}

impl MatrixNet {
    /// A random net with up to the given sizes. Each place/transition pair
    /// gets an input arc and an output arc with probability `density` each.
    pub fn random(
        rng: &mut impl Rng,
        max_places: usize,
        max_transitions: usize,
        max_tokens: u64,
        max_weight: u32,
    ) -> Self {
        let places = rng.random_range(1..=max_places);
        let transitions = rng.random_range(1..=max_transitions);
        let density = 0.3;
        let mut matrix = || {
            (0..transitions)
                .map(|_| {
                    (0..places)
                        .map(|_| if rng.random_bool(density) { rng.random_range(1..=max_weight) } else { 0 })
                        .collect()
                })
                .collect::<Vec<Vec<u32>>>()
        };
        let pre = matrix();
        let post = matrix();
        let mut m0 = vec![0; places];
        for _ in 0..rng.random_range(0..=max_tokens) {
            m0[rng.random_range(0..places)] += 1;
        }
        MatrixNet { places, pre, post, m0 }
    }

    pub fn transitions(&self) -> usize {
        self.pre.len()
    }

    pub fn enabled(&self, m: &[u64], t: usize) -> bool {
        (0..self.places).all(|p| m[p] >= u64::from(self.pre[t][p]))
    }

    pub fn fire(&self, m: &[u64], t: usize) -> Vec<u64> {
        (0..self.places).map(|p| m[p] - u64::from(self.pre[t][p]) + u64::from(self.post[t][p])).collect()
    }

    /// Ids of the enabled transitions in lexicographic order.
    pub fn enabled_ids(&self, m: &[u64]) -> Vec<String> {
        let mut ids: Vec<String> = (0..self.transitions()).filter(|&t| self.enabled(m, t)).map(transition_id).collect();
        ids.sort();
        ids
    }

    /// Every marking reachable in at most `depth` firings.
    pub fn reachable(&self, depth: usize) -> HashSet<Vec<u64>> {
        let mut seen = HashSet::from([self.m0.clone()]);
        let mut queue = VecDeque::from([(self.m0.clone(), 0)]);
        while let Some((m, d)) = queue.pop_front() {
            if d == depth {
                continue;
            }
            for t in 0..self.transitions() {
                if self.enabled(&m, t) {
                    let next = self.fire(&m, t);
                    if seen.insert(next.clone()) {
                        queue.push_back((next, d + 1));
                    }
                }
            }
        }
        seen
    }

    pub fn to_petri(&self) -> (PetriNet, Marking) {
        let places = (0..self.places).map(|p| Place::new(place_id(p), PlaceKind::Plain));
        let transitions = (0..self.transitions()).map(|t| Transition::immediate(transition_id(t)));
        let mut arcs = Vec::new();
        for t in 0..self.transitions() {
            for p in 0..self.places {
                if self.pre[t][p] > 0 {
                    arcs.push(Arc::input(place_id(p), transition_id(t), self.pre[t][p]));
                }
                if self.post[t][p] > 0 {
                    arcs.push(Arc::output(transition_id(t), place_id(p), self.post[t][p]));
                }
            }
        }
        let net = PetriNet::new(places, transitions, arcs).expect("random nets are well formed");
        let ids: Vec<String> = (0..self.places).map(place_id).collect();
        let m0 = Marking::from_counts(&net, ids.iter().map(String::as_str).zip(self.m0.iter().copied()))
            .expect("marking covers the net");
        (net, m0)
    }

    pub fn vector(&self, m: &Marking) -> Vec<u64> {
        (0..self.places).map(|p| m.get(&place_id(p))).collect()
    }
}

/// Drives the engine along `walks` random firing sequences of `depth` steps
/// and checks each step against the reference: same enabled set, token
/// equation respected, result inside the reference reachability set.
/// Returns the number of firings checked.
pub fn check_engine_against_oracle(
    net: &MatrixNet,
    rng: &mut impl Rng,
    walks: usize,
    depth: usize,
) -> Result<usize, String> {
    let (petri, m0) = net.to_petri();
    let reachable = net.reachable(depth);
    let mut fired = 0;
    for _ in 0..walks {
        let mut m = m0.clone();
        for _ in 0..depth {
            let v = net.vector(&m);
            let enabled: Vec<String> = petri.enabled_set(&m).iter().map(|t| t.to_string()).collect();
            if enabled != net.enabled_ids(&v) {
                return Err(format!("enabled set {enabled:?} differs from oracle {:?} at {v:?}", net.enabled_ids(&v)));
            }
            if enabled.is_empty() {
                break;
            }
            let choice = &enabled[rng.random_range(0..enabled.len())];
            let t: usize = choice[1..].parse().expect("transition ids are t<N>");
            let next = petri.fire(&m, choice).map_err(|e| format!("engine refused enabled {choice}: {e}"))?;
            let nv = net.vector(&next);
            if nv != net.fire(&v, t) {
                return Err(format!("firing {choice} at {v:?} gave {nv:?}, token equation says {:?}", net.fire(&v, t)));
            }
            if !reachable.contains(&nv) {
                return Err(format!("engine reached {nv:?}, which the oracle says is unreachable"));
            }
            if net.vector(&m) != v {
                return Err("fire mutated its input marking".into());
            }
            m = next;
            fired += 1;
        }
    }
    Ok(fired)
}
