//! The action request message exchanged between the language side and the
//! problem solver. Its JSON form is described by
//! `schemas/actspec.schema.json`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActKind {
    Command,
    Notification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Predicate {
    Move,
    Stop,
    Continue,
    /// A move that replaced a running one. The parser never emits this; the
    /// solver uses it when it reports how it classified a move.
    RedirectImplicit,
    /// Carried by notifications: the sender is reporting something.
    Inform,
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Predicate::Move => "move",
            Predicate::Stop => "stop",
            Predicate::Continue => "continue",
            Predicate::RedirectImplicit => "redirect-implicit",
            Predicate::Inform => "inform",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Speed {
    Slow,
    Normal,
    Fast,
}

impl Speed {
    /// The verb that asks for this speed.
    pub fn verb(self) -> &'static str {
        match self {
            Speed::Slow => "amble",
            Speed::Normal => "move",
            Speed::Fast => "dash",
        }
    }

    pub fn from_verb(verb: &str) -> Option<Speed> {
        match verb {
            "amble" => Some(Speed::Slow),
            "move" => Some(Speed::Normal),
            "dash" => Some(Speed::Fast),
            _ => None,
        }
    }
}

/// A color name from the configured vocabulary, stored lowercase.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Color(String);

impl Color {
    pub fn new(name: &str) -> Self {
        Color(name.to_ascii_lowercase())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub const BOX_SHAPE: &str = "box";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Goal {
    pub color: Color,
    pub shape: String,
}

impl Goal {
    pub fn colored_box(color: Color) -> Self {
        Goal { color, shape: BOX_SHAPE.to_owned() }
    }
}

/// An object as reported by a sensor or stored in a world model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectInfo {
    pub name: String,
    pub color: String,
    pub position: Point,
    pub radius: f64,
}

/// Payload of a notification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Notice {
    pub topic: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub object: Option<ObjectInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActSpec {
    pub kind: ActKind,
    pub agent: String,
    pub predicate: Predicate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<Speed>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub goal: Option<Goal>,
    pub sequence: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notice: Option<Notice>,
}

impl ActSpec {
    pub fn move_to(agent: &str, speed: Speed, color: Color, sequence: u64) -> Self {
        ActSpec {
            kind: ActKind::Command,
            agent: agent.to_owned(),
            predicate: Predicate::Move,
            speed: Some(speed),
            goal: Some(Goal::colored_box(color)),
            sequence,
            notice: None,
        }
    }

    pub fn control(agent: &str, predicate: Predicate, sequence: u64) -> Self {
        ActSpec {
            kind: ActKind::Command,
            agent: agent.to_owned(),
            predicate,
            speed: None,
            goal: None,
            sequence,
            notice: None,
        }
    }

    pub fn notification(agent: &str, notice: Notice, sequence: u64) -> Self {
        ActSpec {
            kind: ActKind::Notification,
            agent: agent.to_owned(),
            predicate: Predicate::Inform,
            speed: None,
            goal: None,
            sequence,
            notice: Some(notice),
        }
    }

    /// Field equality ignoring the sequence number.
    pub fn same_request(&self, other: &ActSpec) -> bool {
        ActSpec { sequence: 0, ..self.clone() } == ActSpec { sequence: 0, ..other.clone() }
    }

    /// Checks the field dependencies: moves carry a goal and a speed, other
    /// commands carry neither, and notifications carry a notice.
    pub fn is_well_formed(&self) -> bool {
        let moving = matches!(self.predicate, Predicate::Move | Predicate::RedirectImplicit);
        match self.kind {
            ActKind::Command => {
                self.predicate != Predicate::Inform
                    && self.goal.is_some() == moving
                    && self.speed.is_some() == moving
                    && self.notice.is_none()
            }
            ActKind::Notification => self.notice.is_some() && self.goal.is_none() && self.speed.is_none(),
        }
    }
}
