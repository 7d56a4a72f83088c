//! The fixed operator command grammar.
//!
//! ```text
//! command := agent "," body [punct]
//! body    := ("amble" | "move" | "dash") "to" "the" color "box"
//!          | "stop" "moving"
//!          | "continue" "moving"
//! ```
//!
//! Matching ignores case and extra whitespace; trailing `!`, `.` or `?` are
//! optional. The verb picks the speed: amble is slow, move is normal and
//! dash is fast.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

use crate::actspec::{ActKind, ActSpec, Color, Predicate, Speed, BOX_SHAPE};

pub const DEFAULT_COLORS: [&str; 4] = ["red", "green", "blue", "yellow"];

const PRODUCTIONS: [&str; 5] = [
    "<agent>, amble to the <color> box!",
    "<agent>, move to the <color> box!",
    "<agent>, dash to the <color> box!",
    "<agent>, stop moving!",
    "<agent>, continue moving!",
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommandError {
    #[error("could not parse {text:?}; did you mean `{hint}`?")]
    NoMatch { text: String, hint: String },
    #[error("unknown color `{color}` (known: {})", known.join(", "))]
    UnknownColor { color: String, known: Vec<String> },
}

impl CommandError {
    /// The closest production, for syntax errors.
    pub fn hint(&self) -> Option<&str> {
        match self {
            CommandError::NoMatch { hint, .. } => Some(hint),
            CommandError::UnknownColor { .. } => None,
        }
    }
}

/// Agent, predicate, and for moves the speed and goal color.
type Matched<'t> = (&'t str, Predicate, Option<Speed>, Option<Color>);

/// Parses command text into [`ActSpec`]s, numbering them in parse order.
#[derive(Debug)]
pub struct CommandParser {
    colors: BTreeSet<String>,
    next_sequence: AtomicU64,
}

impl Default for CommandParser {
    fn default() -> Self {
        Self::with_colors(DEFAULT_COLORS)
    }
}

impl CommandParser {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_colors<I, S>(colors: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        CommandParser {
            colors: colors.into_iter().map(|c| c.as_ref().to_ascii_lowercase()).collect(),
            next_sequence: AtomicU64::new(1),
        }
    }

    pub fn colors(&self) -> impl Iterator<Item = &str> {
        self.colors.iter().map(String::as_str)
    }

    pub fn parse(&self, text: &str) -> Result<ActSpec, CommandError> {
        let (agent, predicate, speed, color) = self.match_text(text)?;
        let sequence = self.next_sequence.fetch_add(1, Ordering::Relaxed);
        Ok(match predicate {
            Predicate::Move => {
                ActSpec::move_to(agent, speed.expect("move has a verb"), color.expect("move has a goal"), sequence)
            }
            p => ActSpec::control(agent, p, sequence),
        })
    }

    fn match_text<'t>(&self, text: &'t str) -> Result<Matched<'t>, CommandError> {
        let no_match = || CommandError::NoMatch { text: text.to_owned(), hint: nearest_production(text).to_owned() };
        let trimmed = text.trim().trim_end_matches(['!', '.', '?']).trim_end();
        let (agent, body) = trimmed.split_once(',').ok_or_else(no_match)?;
        let agent = agent.trim();
        if agent.is_empty() || !agent.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-') {
            return Err(no_match());
        }
        let words: Vec<String> = body.split_whitespace().map(str::to_lowercase).collect();
        let words: Vec<&str> = words.iter().map(String::as_str).collect();
        match words.as_slice() {
            ["stop", "moving"] => Ok((agent, Predicate::Stop, None, None)),
            ["continue", "moving"] => Ok((agent, Predicate::Continue, None, None)),
            [verb, "to", "the", color, shape] if *shape == BOX_SHAPE => {
                let speed = Speed::from_verb(verb).ok_or_else(no_match)?;
                if !self.colors.contains(*color) {
                    return Err(CommandError::UnknownColor {
                        color: (*color).to_owned(),
                        known: self.colors.iter().cloned().collect(),
                    });
                }
                Ok((agent, Predicate::Move, Some(speed), Some(Color::new(color))))
            }
            _ => Err(no_match()),
        }
    }
}

/// The production whose shape is closest to `text`.
pub fn nearest_production(text: &str) -> &'static str {
    let body = text.split_once(',').map_or(text, |(_, b)| b);
    let body = body.trim().trim_end_matches(['!', '.', '?']).to_lowercase();
    // Compare against the bodies with the color slot removed, so the color
    // word does not dominate the distance.
    let words: Vec<&str> = body.split_whitespace().collect();
    let probe = match words.as_slice() {
        [verb, "to", "the", _, rest @ ..] => format!("{verb} to the {}", rest.join(" ")),
        _ => words.join(" "),
    };
    PRODUCTIONS
        .iter()
        .copied()
        .max_by(|a, b| {
            let score = |p: &str| {
                let body = p.split_once(", ").unwrap().1.trim_end_matches('!').replace("<color> ", "");
                strsim::normalized_levenshtein(&probe, &body)
            };
            score(a).total_cmp(&score(b))
        })
        .expect("productions are not empty")
}

/// Renders a command back into canonical text. Returns `None` for
/// notifications and for predicates the grammar cannot express.
pub fn to_command_text(a: &ActSpec) -> Option<String> {
    if a.kind != ActKind::Command {
        return None;
    }
    match a.predicate {
        Predicate::Move => {
            let goal = a.goal.as_ref()?;
            Some(format!("{}, {} to the {} {}!", a.agent, a.speed?.verb(), goal.color, goal.shape))
        }
        Predicate::Stop => Some(format!("{}, stop moving!", a.agent)),
        Predicate::Continue => Some(format!("{}, continue moving!", a.agent)),
        Predicate::RedirectImplicit | Predicate::Inform => None,
    }
}
