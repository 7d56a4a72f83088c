//! Breadth-first state-space exploration.
//!
//! Exploration is level-synchronous: every state of the current frontier is
//! expanded independently, which is where the work parallelizes. With the
//! `parallel` feature the expansion runs on the rayon pool; without it (or
//! with [`Strategy::Sequential`]) it runs on the calling thread. Both
//! strategies visit exactly the same set of states.

use std::collections::HashSet;
use std::hash::Hash;

use crate::petri::{Marking, PetriNet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Sequential,
    /// Falls back to sequential expansion when built without `parallel`.
    Parallel,
}

impl Default for Strategy {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Strategy::Parallel
        } else {
            Strategy::Sequential
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Limits {
    /// Stop after expanding this many BFS levels.
    pub max_depth: Option<usize>,
    /// Stop once this many distinct states have been seen.
    pub max_states: Option<usize>,
}

impl Limits {
    pub fn depth(max_depth: usize) -> Self {
        Limits { max_depth: Some(max_depth), max_states: None }
    }
}

#[derive(Debug, Clone)]
pub struct Exploration<S> {
    pub states: HashSet<S>,
    /// Number of levels fully expanded.
    pub depth: usize,
    /// True when a limit cut the search short of a fixpoint.
    pub truncated: bool,
}

impl<S: Eq + Hash> Exploration<S> {
    pub fn contains(&self, s: &S) -> bool {
        self.states.contains(s)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

fn expand<S, F>(frontier: &[S], successors: &F, strategy: Strategy) -> Vec<S>
where
    S: Send + Sync,
    F: Fn(&S) -> Vec<S> + Sync,
{
    match strategy {
        #[cfg(feature = "parallel")]
        Strategy::Parallel => {
            use rayon::prelude::*;
            frontier.par_iter().flat_map_iter(successors).collect()
        }
        _ => frontier.iter().flat_map(successors).collect(),
    }
}

/// Explores everything reachable from `initial` under `successors`.
pub fn explore<S, F>(
    initial: impl IntoIterator<Item = S>,
    successors: F,
    limits: Limits,
    strategy: Strategy,
) -> Exploration<S>
where
    S: Clone + Eq + Hash + Send + Sync,
    F: Fn(&S) -> Vec<S> + Sync,
{
    let mut states = HashSet::new();
    let mut frontier = Vec::new();
    for s in initial {
        if states.insert(s.clone()) {
            frontier.push(s);
        }
    }
    let mut depth = 0;
    let mut truncated = false;
    while !frontier.is_empty() {
        if limits.max_depth.is_some_and(|d| depth >= d) {
            truncated = true;
            break;
        }
        let mut next = Vec::new();
        for s in expand(&frontier, &successors, strategy) {
            if limits.max_states.is_some_and(|n| states.len() >= n) {
                truncated = true;
                break;
            }
            if states.insert(s.clone()) {
                next.push(s);
            }
        }
        depth += 1;
        if truncated {
            break;
        }
        frontier = next;
    }
    Exploration { states, depth, truncated }
}

/// Markings reachable from `initial` by any firing sequence.
pub fn reachable_markings(
    net: &PetriNet,
    initial: &Marking,
    limits: Limits,
    strategy: Strategy,
) -> Exploration<Marking> {
    explore(
        [initial.clone()],
        |m: &Marking| {
            net.enabled_set(m).iter().map(|t| net.fire(m, t.as_str()).expect("enabled transition fires")).collect()
        },
        limits,
        strategy,
    )
}
