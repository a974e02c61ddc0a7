//! Canonical scene serialization and state digests.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::entity::Entity;
use super::graph::SceneGraph;
use super::joints::JointKey;
use crate::math::{Aabb, Vec3};

pub const SNAPSHOT_VERSION: u32 = 1;
/// Positions are hashed on a 0.1 mm grid.
pub const POSITION_QUANTUM: f64 = 1e-4;
const SCALAR_QUANTUM: f64 = 1e-6;

/// Versioned, id-ordered record list. Floats are written with full precision
/// so that a restored scene steps bit-identically to the original.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSnapshot {
    pub version: u32,
    pub bounds: Aabb,
    pub tick: u64,
    pub time_scale: f64,
    pub rng_seed: u64,
    pub next_id: u64,
    pub strict_names: bool,
    pub joint_poses: Vec<(JointKey, Vec3)>,
    pub entities: Vec<Entity>,
}

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("unsupported snapshot version {0}")]
    Version(u32),
    #[error("malformed snapshot: {0}")]
    Decode(#[from] serde_json::Error),
}

/// Hex-encoded SHA-256 state digest.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(transparent)]
pub struct Digest256(pub String);

impl std::fmt::Display for Digest256 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn q(v: f64, quantum: f64) -> i64 {
    (v / quantum).round() as i64
}

fn q3(v: Vec3, quantum: f64) -> [i64; 3] {
    [q(v.x, quantum), q(v.y, quantum), q(v.z, quantum)]
}

impl SceneGraph {
    pub fn snapshot(&self) -> SceneSnapshot {
        SceneSnapshot {
            version: SNAPSHOT_VERSION,
            bounds: self.bounds,
            tick: self.tick,
            time_scale: self.time_scale,
            rng_seed: self.rng_seed,
            next_id: self.next_id,
            strict_names: self.strict_names,
            joint_poses: self.joint_poses.iter().map(|(k, v)| (*k, *v)).collect(),
            entities: self.entities.values().cloned().collect(),
        }
    }

    pub fn from_snapshot(snap: SceneSnapshot) -> Result<Self, SnapshotError> {
        if snap.version != SNAPSHOT_VERSION {
            return Err(SnapshotError::Version(snap.version));
        }
        Ok(Self {
            bounds: snap.bounds,
            entities: snap.entities.into_iter().map(|e| (e.id, e)).collect(),
            tick: snap.tick,
            time_scale: snap.time_scale,
            rng_seed: snap.rng_seed,
            next_id: snap.next_id,
            joint_poses: snap.joint_poses.into_iter().collect(),
            strict_names: snap.strict_names,
        })
    }

    pub fn to_snapshot_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.snapshot()).expect("snapshot serializes")
    }

    pub fn from_snapshot_bytes(bytes: &[u8]) -> Result<Self, SnapshotError> {
        Self::from_snapshot(serde_json::from_slice(bytes)?)
    }

    /// Canonical byte encoding fed to [`SceneGraph::scene_hash`]: the same
    /// id-ordered record list as the snapshot, with continuous quantities
    /// snapped to their quanta.
    pub fn canonical_hash_bytes(&self) -> Vec<u8> {
        #[derive(Serialize)]
        struct Rec<'a> {
            id: u64,
            name: &'a str,
            kind: &'a super::entity::EntityKind,
            position: [i64; 3],
            velocity: [i64; 3],
            scale: i64,
            base_extents: [i64; 3],
            mass: Option<i64>,
            parent: Option<u64>,
            asset: Option<&'a str>,
        }
        #[derive(Serialize)]
        struct Canon<'a> {
            version: u32,
            tick: u64,
            time_scale: i64,
            joints: Vec<(JointKey, [i64; 3])>,
            entities: Vec<Rec<'a>>,
        }
        let canon = Canon {
            version: SNAPSHOT_VERSION,
            tick: self.tick,
            time_scale: q(self.time_scale, SCALAR_QUANTUM),
            joints: self.joint_poses.iter().map(|(k, v)| (*k, q3(*v, POSITION_QUANTUM))).collect(),
            entities: self
                .entities
                .values()
                .map(|e| Rec {
                    id: e.id.0,
                    name: &e.name,
                    kind: &e.kind,
                    position: q3(e.position, POSITION_QUANTUM),
                    velocity: q3(e.velocity, POSITION_QUANTUM),
                    scale: q(e.scale, SCALAR_QUANTUM),
                    base_extents: q3(e.base_extents, POSITION_QUANTUM),
                    mass: e.mass.map(|m| q(m, SCALAR_QUANTUM)),
                    parent: e.parent.map(|p| p.0),
                    asset: e.asset.as_ref().map(|a| a.id.as_str()),
                })
                .collect(),
        };
        serde_json::to_vec(&canon).expect("canonical form serializes")
    }

    pub fn scene_hash(&self) -> Digest256 {
        digest_bytes(&self.canonical_hash_bytes())
    }
}

pub fn digest_bytes(bytes: &[u8]) -> Digest256 {
    Digest256(hex::encode(Sha256::digest(bytes)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Quat;
    use crate::scene::entity::{EntityId, EntityKind, EntitySpec, PrimitiveShape};

    fn entity(id: u64, name: &str, pos: Vec3) -> Entity {
        Entity {
            id: EntityId(id),
            name: name.into(),
            kind: EntityKind::Primitive {
                shape: PrimitiveShape::Cube,
            },
            position: pos,
            rotation: Quat::IDENTITY,
            scale: 1.0,
            base_extents: Vec3::ONE,
            velocity: Vec3::ZERO,
            mass: None,
            parent: None,
            asset: None,
        }
    }

    #[test]
    fn insertion_order_invariant() {
        let mut a = SceneGraph::holodeck_room(1);
        let mut b = SceneGraph::holodeck_room(1);
        let e1 = entity(100, "lamp", Vec3::new(1.0, 1.0, 1.0));
        let e2 = entity(101, "bed", Vec3::new(-1.0, 1.0, 2.0));
        a.upsert_entity(e1.clone());
        a.upsert_entity(e2.clone());
        b.upsert_entity(e2);
        b.upsert_entity(e1);
        assert_eq!(a.scene_hash(), b.scene_hash());
        assert_eq!(a.to_snapshot_bytes(), b.to_snapshot_bytes());
    }

    #[test]
    fn sensitive_to_motion_above_quantum() {
        let mut a = SceneGraph::holodeck_room(1);
        let id = a
            .spawn_entity(EntitySpec::primitive("c", PrimitiveShape::Cube, Vec3::new(1.0, 1.0, 1.0)))
            .unwrap();
        let before = a.scene_hash();
        a.move_to(id, Vec3::new(2.0, 1.0, 1.0)).unwrap();
        assert_ne!(before, a.scene_hash());
    }

    #[test]
    fn jitter_below_quantum_is_invisible() {
        let mut a = SceneGraph::holodeck_room(1);
        let id = a
            .spawn_entity(EntitySpec::primitive("c", PrimitiveShape::Cube, Vec3::new(1.0, 1.0, 1.0)))
            .unwrap();
        let base = a.scene_hash();
        for jitter in [1e-6, -2e-5, 4.9e-5, -4.9e-5] {
            a.move_to(id, Vec3::new(1.0 + jitter, 1.0 - jitter, 1.0)).unwrap();
            assert_eq!(a.scene_hash(), base, "jitter {jitter}");
        }
        a.move_to(id, Vec3::new(1.0 + 2e-4, 1.0, 1.0)).unwrap();
        assert_ne!(a.scene_hash(), base);
    }

    #[test]
    fn snapshot_roundtrip_is_exact() {
        let mut a = SceneGraph::holodeck_room(9);
        let id = a
            .spawn_entity(
                EntitySpec::primitive("c", PrimitiveShape::Sphere, Vec3::new(0.1, 3.3, -0.7)).with_velocity(Vec3::new(
                    0.123456789,
                    0.0,
                    1.0 / 3.0,
                )),
            )
            .unwrap();
        a.add_physics(id, 0.25).unwrap();
        for _ in 0..17 {
            a.step(1.0 / 60.0);
        }
        let b = SceneGraph::from_snapshot_bytes(&a.to_snapshot_bytes()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_other_versions() {
        let mut snap = SceneGraph::holodeck_room(1).snapshot();
        snap.version = 99;
        assert!(matches!(SceneGraph::from_snapshot(snap), Err(SnapshotError::Version(99))));
    }
}
