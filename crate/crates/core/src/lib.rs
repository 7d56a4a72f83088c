//! Executable action nets for robot task control.
//!
//! The crate is layered bottom-up:
//!
//! * [`petri`]: place/transition nets, markings and firing.
//! * [`pnml`]: reading and writing nets as PNML with `xnet` extensions.
//! * [`reach`]: breadth-first state-space exploration (parallel with the
//!   `parallel` feature).
//! * [`runner`]: live execution of one net with external places, hooks and
//!   event subscriptions.
//! * [`actions`]: the standard action controller, the Move net and aspect
//!   classification.
//! * [`actspec`] and [`command`]: the action request message and the fixed
//!   command grammar that produces it.
//! * [`world`]: a deterministic 2D robot world.
//! * [`solver`]: the problem solver tying requests, nets and the world
//!   together.

pub mod actions;
pub mod actspec;
pub mod command;
pub mod geometry;
pub mod petri;
pub mod pnml;
pub mod reach;
pub mod runner;
pub mod solver;
pub mod world;
