//! Deterministic scene graph: entities with axis-aligned bounds, placement,
//! joint attachment, fixed-tick kinematics and canonical hashing.
//!
//! A scene is owned by exactly one session loop; clone it to hand a read-only
//! copy to another thread.

mod entity;
mod graph;
pub mod joints;
mod physics;
mod snapshot;

pub use entity::{AssetRef, Entity, EntityId, EntityKind, EntitySpec, PrimitiveShape};
pub use graph::{SceneError, SceneGraph, SceneResult, HOLODECK_STRUCTURE, NUDGE_FRACTION, PLACEMENT_NUDGES};
pub use joints::{HandId, Joint, JointKey, JOINT_NAMES};
pub use physics::{SceneEvent, GRAVITY, TICK_DT, TICK_HZ};
pub use snapshot::{digest_bytes, Digest256, SceneSnapshot, SnapshotError, POSITION_QUANTUM, SNAPSHOT_VERSION};
