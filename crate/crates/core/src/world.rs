//! A deterministic 2D robot world.
//!
//! The robot is a point that follows a list of waypoints at a constant
//! speed. Each [`WorldState::tick`] advances it by `speed · dt` but never past
//! the current waypoint: a step that would overshoot ends exactly on the
//! waypoint, so there is no oscillation around targets. Reaching the last
//! waypoint stops the robot and reports an arrival.
//!
//! Objects are static circles. A proximity event fires when the robot comes
//! within the threshold of an object's edge, once per approach: the object
//! must be left behind (beyond the threshold) before it can fire again.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actspec::ObjectInfo;
use crate::geometry::{segment_distance, Point};

pub const DEFAULT_DT: f64 = 0.1;
pub const DEFAULT_PROXIMITY_THRESHOLD: f64 = 1.0;

/// Positions closer than this are treated as equal.
const EPS: f64 = 1e-9;

/// What a motion request asks of the robot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MotionOp {
    #[default]
    None,
    Move,
    Suspend,
    Resume,
    Restart,
}

impl MotionOp {
    pub fn as_str(self) -> &'static str {
        match self {
            MotionOp::None => "none",
            MotionOp::Move => "move",
            MotionOp::Suspend => "suspend",
            MotionOp::Resume => "resume",
            MotionOp::Restart => "restart",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub name: String,
    pub color: String,
    pub position: Point,
    pub radius: f64,
    /// Whether the robot's world model starts out knowing this object.
    #[serde(default = "default_known")]
    pub known: bool,
}

fn default_known() -> bool {
    true
}

impl WorldObject {
    pub fn info(&self) -> ObjectInfo {
        ObjectInfo { name: self.name.clone(), color: self.color.clone(), position: self.position, radius: self.radius }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotDefinition {
    pub name: String,
    pub position: Point,
}

/// The contents of a world file.
///
/// ```toml
/// proximity_threshold = 1.0   # optional
/// dt = 0.1                    # optional, seconds per tick
///
/// [robot]
/// name = "Robot1"
/// position = [0.0, 0.0]
///
/// [[objects]]
/// name = "blue-box"
/// color = "blue"
/// position = [5.0, 0.0]
/// radius = 0.25
/// known = true                # optional
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldDefinition {
    #[serde(default = "default_threshold")]
    pub proximity_threshold: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub robot: RobotDefinition,
    #[serde(default)]
    pub objects: Vec<WorldObject>,
}

fn default_threshold() -> f64 {
    DEFAULT_PROXIMITY_THRESHOLD
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("cannot read world file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid world definition: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid world definition: {0}")]
    Invalid(String),
}

impl WorldDefinition {
    pub fn from_toml(text: &str) -> Result<Self, WorldError> {
        let def: WorldDefinition = toml::from_str(text)?;
        def.validate()?;
        Ok(def)
    }

    pub fn load(path: &Path) -> Result<Self, WorldError> {
        let text =
            fs::read_to_string(path).map_err(|source| WorldError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let bad = |msg: String| Err(WorldError::Invalid(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.proximity_threshold >= 0.0 && self.proximity_threshold.is_finite()) {
            return bad(format!("proximity_threshold must be non-negative, got {}", self.proximity_threshold));
        }
        if self.robot.name.is_empty() || !self.robot.position.is_finite() {
            return bad("robot needs a name and a finite position".into());
        }
        let mut names = BTreeSet::new();
        for o in &self.objects {
            if !names.insert(o.name.as_str()) {
                return bad(format!("duplicate object name `{}`", o.name));
            }
            if !o.position.is_finite() || !(o.radius >= 0.0 && o.radius.is_finite()) {
                return bad(format!("object `{}` needs a finite position and non-negative radius", o.name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityEvent {
    pub object: ObjectInfo,
    /// Seconds of world time at detection.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum WorldEvent {
    Arrival { position: Point, time: f64 },
    Proximity(ProximityEvent),
}

/// Read-only view of the world for displays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub time: f64,
    pub robot: RobotSnapshot,
    pub objects: Vec<WorldObject>,
    pub proximity_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotSnapshot {
    pub name: String,
    pub position: Point,
    pub velocity: Point,
    pub waypoints: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    robot_name: String,
    position: Point,
    velocity: Point,
    speed: f64,
    waypoints: VecDeque<Point>,
    /// Following waypoints (as opposed to suspended or idle).
    active: bool,
    arrival_pending: bool,
    objects: BTreeMap<String, WorldObject>,
    proximity_threshold: f64,
    time: f64,
    inside: BTreeSet<String>,
}

impl WorldState {
    pub fn new(def: &WorldDefinition) -> Self {
        let mut w = WorldState {
            robot_name: def.robot.name.clone(),
            position: def.robot.position,
            velocity: Point::ORIGIN,
            speed: 0.0,
            waypoints: VecDeque::new(),
            active: false,
            arrival_pending: false,
            objects: def.objects.iter().map(|o| (o.name.clone(), o.clone())).collect(),
            proximity_threshold: def.proximity_threshold,
            time: 0.0,
            inside: BTreeSet::new(),
        };
        // Objects already in range at start-up are not an approach.
        w.inside = w.objects.values().filter(|o| w.within_threshold(o, w.position)).map(|o| o.name.clone()).collect();
        w
    }

    pub fn robot_name(&self) -> &str {
        &self.robot_name
    }

    pub fn position(&self) -> Point {
        self.position
    }

    pub fn velocity(&self) -> Point {
        self.velocity
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn waypoints(&self) -> impl Iterator<Item = Point> + '_ {
        self.waypoints.iter().copied()
    }

    pub fn objects(&self) -> impl Iterator<Item = &WorldObject> {
        self.objects.values()
    }

    pub fn is_moving(&self) -> bool {
        self.active
    }

    fn within_threshold(&self, o: &WorldObject, p: Point) -> bool {
        o.position.distance(p) - o.radius <= self.proximity_threshold
    }

    fn aim(&mut self) {
        while self.waypoints.front().is_some_and(|w| w.distance(self.position) <= EPS) {
            self.waypoints.pop_front();
        }
        match self.waypoints.front() {
            Some(&w) if self.active => {
                self.velocity = (w - self.position).unit().unwrap_or(Point::ORIGIN) * self.speed;
            }
            _ => self.velocity = Point::ORIGIN,
        }
    }

    /// Applies a motion request. `Move` and `Restart` replace the route and
    /// speed; `Suspend` stops the robot but keeps its route; `Resume`
    /// continues along the kept route.
    pub fn apply(&mut self, op: MotionOp, waypoints: &[Point], speed: f64) {
        match op {
            MotionOp::None => return,
            MotionOp::Move | MotionOp::Restart => {
                self.waypoints = waypoints.iter().copied().collect();
                self.speed = speed;
                self.active = true;
                self.aim();
                if self.waypoints.is_empty() {
                    self.active = false;
                    self.arrival_pending = true;
                }
            }
            MotionOp::Suspend => {
                self.active = false;
                self.arrival_pending = false;
            }
            MotionOp::Resume => {
                self.active = !self.waypoints.is_empty();
            }
        }
        self.aim();
    }

    /// Advances world time by `dt` seconds.
    pub fn tick(&mut self, dt: f64) -> Vec<WorldEvent> {
        assert!(dt > 0.0, "tick needs a positive dt");
        let mut events = Vec::new();
        let from = self.position;
        self.time += dt;
        if self.active {
            if let Some(&target) = self.waypoints.front() {
                let step = self.speed * dt;
                let remaining = self.position.distance(target);
                if step + EPS >= remaining {
                    self.position = target;
                    self.waypoints.pop_front();
                } else {
                    self.position = self.position + self.velocity * dt;
                }
            }
            if self.waypoints.is_empty() {
                self.active = false;
                self.arrival_pending = true;
            }
            self.aim();
        }
        if self.arrival_pending {
            self.arrival_pending = false;
            events.push(WorldEvent::Arrival { position: self.position, time: self.time });
        }
        let to = self.position;
        for o in self.objects.values() {
            let near_path = segment_distance(from, to, o.position) - o.radius <= self.proximity_threshold;
            let near_now = self.within_threshold(o, to);
            if near_path && !self.inside.contains(&o.name) {
                events.push(WorldEvent::Proximity(ProximityEvent { object: o.info(), time: self.time }));
            }
            if near_now {
                self.inside.insert(o.name.clone());
            } else {
                self.inside.remove(&o.name);
            }
        }
        events
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        WorldSnapshot {
            time: self.time,
            robot: RobotSnapshot {
                name: self.robot_name.clone(),
                position: self.position,
                velocity: self.velocity,
                waypoints: self.waypoints.iter().copied().collect(),
            },
            objects: self.objects.values().cloned().collect(),
            proximity_threshold: self.proximity_threshold,
        }
    }
}
