//! Traffic streams: an approach (direction of travel) paired with a turning
//! movement.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Direction of travel of the incoming traffic. `E` is eastbound traffic,
/// i.e. vehicles arriving from the west arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Approach {
    E,
    W,
    N,
    S,
}

impl Approach {
    pub const ALL: [Approach; 4] = [Approach::E, Approach::W, Approach::N, Approach::S];

    /// Unit heading of travel (x east, y north).
    pub fn heading(self) -> (f64, f64) {
        match self {
            Approach::E => (1.0, 0.0),
            Approach::W => (-1.0, 0.0),
            Approach::N => (0.0, 1.0),
            Approach::S => (0.0, -1.0),
        }
    }

    /// Travel direction after a left turn (right-hand traffic).
    pub fn left(self) -> Approach {
        match self {
            Approach::E => Approach::N,
            Approach::N => Approach::W,
            Approach::W => Approach::S,
            Approach::S => Approach::E,
        }
    }

    pub fn right(self) -> Approach {
        self.left().opposite()
    }

    pub fn opposite(self) -> Approach {
        match self {
            Approach::E => Approach::W,
            Approach::W => Approach::E,
            Approach::N => Approach::S,
            Approach::S => Approach::N,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Approach::E => "E",
            Approach::W => "W",
            Approach::N => "N",
            Approach::S => "S",
        }
    }
}

impl FromStr for Approach {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "E" => Ok(Approach::E),
            "W" => Ok(Approach::W),
            "N" => Ok(Approach::N),
            "S" => Ok(Approach::S),
            other => Err(Error::Parse(format!("unknown approach `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Movement {
    L,
    C,
    R,
}

impl Movement {
    pub fn as_str(self) -> &'static str {
        match self {
            Movement::L => "L",
            Movement::C => "C",
            Movement::R => "R",
        }
    }
}

/// Whether right turns are controlled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    EightDirection,
    TwelveDirection,
}

impl Mode {
    /// Number of controlled directions `J`.
    pub fn directions(self) -> usize {
        match self {
            Mode::EightDirection => 8,
            Mode::TwelveDirection => 12,
        }
    }

    pub fn from_directions(j: usize) -> Option<Mode> {
        match j {
            8 => Some(Mode::EightDirection),
            12 => Some(Mode::TwelveDirection),
            _ => None,
        }
    }

    /// Streams of this mode in canonical order.
    pub fn streams(self) -> &'static [StreamId] {
        match self {
            Mode::EightDirection => &CANONICAL[..8],
            Mode::TwelveDirection => &CANONICAL[..],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub approach: Approach,
    pub movement: Movement,
}

const fn sid(approach: Approach, movement: Movement) -> StreamId {
    StreamId { approach, movement }
}

/// Canonical direction order. Right turns are appended after the eight
/// through/left streams so the 8-direction layout is a prefix of the
/// 12-direction one.
pub const CANONICAL: [StreamId; 12] = [
    sid(Approach::E, Movement::L),
    sid(Approach::E, Movement::C),
    sid(Approach::W, Movement::L),
    sid(Approach::W, Movement::C),
    sid(Approach::N, Movement::L),
    sid(Approach::N, Movement::C),
    sid(Approach::S, Movement::L),
    sid(Approach::S, Movement::C),
    sid(Approach::E, Movement::R),
    sid(Approach::W, Movement::R),
    sid(Approach::N, Movement::R),
    sid(Approach::S, Movement::R),
];

impl StreamId {
    pub const fn new(approach: Approach, movement: Movement) -> Self {
        sid(approach, movement)
    }

    /// Position in the canonical order (also the index into per-direction
    /// arrays).
    pub fn index(self) -> usize {
        CANONICAL
            .iter()
            .position(|s| *s == self)
            .expect("every stream is canonical")
    }

    /// Travel direction after leaving the intersection.
    pub fn exit_heading(self) -> Approach {
        match self.movement {
            Movement::L => self.approach.left(),
            Movement::C => self.approach,
            Movement::R => self.approach.right(),
        }
    }
}

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.approach.as_str(), self.movement.as_str())
    }
}

impl FromStr for StreamId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (a, m) = s
            .split_once('-')
            .ok_or_else(|| Error::Parse(format!("stream `{s}` is not of the form A-M")))?;
        let movement = match m {
            "L" => Movement::L,
            "C" => Movement::C,
            "R" => Movement::R,
            other => return Err(Error::Parse(format!("unknown movement `{other}`"))),
        };
        Ok(StreamId::new(a.parse()?, movement))
    }
}
