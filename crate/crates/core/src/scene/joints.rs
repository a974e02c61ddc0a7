//! Hand-joint vocabulary for attaching tools and paddles to tracked hands.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Every joint name a tracked hand exposes, left hand first.
pub const JOINT_NAMES: [&str; 50] = [
    "L_Wrist",
    "L_Palm",
    "L_thumb_meta",
    "L_thumb_a",
    "L_thumb_b",
    "L_thumb_end",
    "L_index_meta",
    "L_index_b",
    "L_index_c",
    "L_index_end",
    "L_middle_meta",
    "L_middle_a",
    "L_middle_b",
    "L_middle_c",
    "L_middle_end",
    "L_ring_meta",
    "L_ring_a",
    "L_ring_b",
    "L_ring_c",
    "L_ring_end",
    "L_pinky_meta",
    "L_pinky_a",
    "L_pinky_b",
    "L_pinky_c",
    "L_pinky_end",
    "R_Wrist",
    "R_Palm",
    "R_thumb_meta",
    "R_thumb_a",
    "R_thumb_b",
    "R_thumb_end",
    "R_index_meta",
    "R_index_b",
    "R_index_c",
    "R_index_end",
    "R_middle_meta",
    "R_middle_a",
    "R_middle_b",
    "R_middle_c",
    "R_middle_end",
    "R_ring_meta",
    "R_ring_a",
    "R_ring_b",
    "R_ring_c",
    "R_ring_end",
    "R_pinky_meta",
    "R_pinky_a",
    "R_pinky_b",
    "R_pinky_c",
    "R_pinky_end",
];

/// A joint drawn from the closed [`JOINT_NAMES`] vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Joint(u8);

impl Joint {
    pub const R_PALM: Joint = Joint(26);
    pub const R_WRIST: Joint = Joint(25);

    pub fn from_name(name: &str) -> Option<Joint> {
        JOINT_NAMES.iter().position(|n| *n == name).map(|i| Joint(i as u8))
    }

    pub fn name(self) -> &'static str {
        JOINT_NAMES[self.0 as usize]
    }

    pub fn is_left(self) -> bool {
        self.0 < 25
    }

    pub fn all() -> impl Iterator<Item = Joint> {
        (0..JOINT_NAMES.len() as u8).map(Joint)
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownJoint(pub String);

impl fmt::Display for UnknownJoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown joint `{}`", self.0)
    }
}

impl FromStr for Joint {
    type Err = UnknownJoint;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Joint::from_name(s).ok_or_else(|| UnknownJoint(s.to_owned()))
    }
}

impl Serialize for Joint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Joint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which tracked user a hand belongs to. Player 0 and 1 in a pong match.
pub type HandId = u8;

/// A specific joint on a specific user's hands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JointKey {
    pub hand: HandId,
    pub joint: Joint,
}

impl JointKey {
    pub fn new(hand: HandId, joint: Joint) -> Self {
        Self { hand, joint }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_is_closed() {
        assert_eq!(Joint::from_name("R_Wrist"), Some(Joint::R_WRIST));
        assert_eq!(Joint::from_name("R_Palm"), Some(Joint::R_PALM));
        assert!(Joint::from_name("R_Elbow").is_none());
        // index finger has no `_a` segment in the tracked skeleton
        assert!(Joint::from_name("L_index_a").is_none());
        assert_eq!(Joint::all().count(), 50);
        assert_eq!(Joint::all().filter(|j| j.is_left()).count(), 25);
    }

    #[test]
    fn serde_uses_names() {
        let s = serde_json::to_string(&Joint::R_PALM).unwrap();
        assert_eq!(s, "\"R_Palm\"");
        let j: Joint = serde_json::from_str("\"L_pinky_end\"").unwrap();
        assert_eq!(j.name(), "L_pinky_end");
        assert!(serde_json::from_str::<Joint>("\"R_Elbow\"").is_err());
    }
}
