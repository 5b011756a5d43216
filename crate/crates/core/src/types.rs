use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Wrist degree of freedom.
///
/// D1 is flexion/extension, D2 radial/ulnar deviation, D3 pronation/supination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dof {
    D1,
    D2,
    D3,
}

impl Dof {
    pub const ALL: [Dof; 3] = [Dof::D1, Dof::D2, Dof::D3];

    pub fn index(self) -> usize {
        match self {
            Dof::D1 => 0,
            Dof::D2 => 1,
            Dof::D3 => 2,
        }
    }

    pub fn motion_names(self) -> (&'static str, &'static str) {
        match self {
            Dof::D1 => ("flexion", "extension"),
            Dof::D2 => ("radial", "ulnar"),
            Dof::D3 => ("pronation", "supination"),
        }
    }
}

impl fmt::Display for Dof {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dof::D1 => "D1",
            Dof::D2 => "D2",
            Dof::D3 => "D3",
        };
        f.write_str(s)
    }
}

impl FromStr for Dof {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "D1" => Ok(Dof::D1),
            "D2" => Ok(Dof::D2),
            "D3" => Ok(Dof::D3),
            other => Err(Error::InvalidArgument(format!("unknown DOF {other:?}"))),
        }
    }
}

/// Direction of motion within one DOF. Positive is flexion, radial deviation
/// or pronation; negative is extension, ulnar deviation or supination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    Positive,
    Negative,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Positive, Direction::Negative];

    pub fn of_angle(angle: f64) -> Option<Direction> {
        if angle > 0.0 {
            Some(Direction::Positive)
        } else if angle < 0.0 {
            Some(Direction::Negative)
        } else {
            None
        }
    }

    pub fn signum(self) -> f64 {
        match self {
            Direction::Positive => 1.0,
            Direction::Negative => -1.0,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Positive => f.write_str("positive"),
            Direction::Negative => f.write_str("negative"),
        }
    }
}

/// Decoded or intended state of one DOF: one of the two directions, or rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
    Rest,
}

impl Sign {
    pub fn of_angle(angle: f64) -> Sign {
        match Direction::of_angle(angle) {
            Some(d) => d.into(),
            None => Sign::Rest,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sign::Positive => "positive",
            Sign::Negative => "negative",
            Sign::Rest => "rest",
        }
    }
}

impl From<Direction> for Sign {
    fn from(d: Direction) -> Self {
        match d {
            Direction::Positive => Sign::Positive,
            Direction::Negative => Sign::Negative,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Direct action moves away from rest, return action moves back to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum MovementPhase {
    #[default]
    Direct,
    Return,
}

impl MovementPhase {
    pub fn as_str(self) -> &'static str {
        match self {
            MovementPhase::Direct => "direct",
            MovementPhase::Return => "return",
        }
    }
}

impl FromStr for MovementPhase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "direct" | "" => Ok(MovementPhase::Direct),
            "return" => Ok(MovementPhase::Return),
            other => Err(Error::InvalidArgument(format!("unknown movement phase {other:?}"))),
        }
    }
}

/// Signed joint angles in degrees for D1, D2, D3.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointAngles(pub [f64; 3]);

impl JointAngles {
    pub fn zero() -> Self {
        JointAngles([0.0; 3])
    }

    pub fn single(dof: Dof, angle: f64) -> Self {
        let mut a = [0.0; 3];
        a[dof.index()] = angle;
        JointAngles(a)
    }

    pub fn get(&self, dof: Dof) -> f64 {
        self.0[dof.index()]
    }

    pub fn set(&mut self, dof: Dof, angle: f64) {
        self.0[dof.index()] = angle;
    }

    pub fn with(mut self, dof: Dof, angle: f64) -> Self {
        self.set(dof, angle);
        self
    }

    /// DOFs with a nonzero angle, in D1..D3 order.
    pub fn active(&self) -> impl Iterator<Item = Dof> + '_ {
        Dof::ALL.into_iter().filter(|d| self.get(*d) != 0.0)
    }
}
