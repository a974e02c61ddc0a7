use serde::{Deserialize, Serialize};

use super::message::EntityChange;
use crate::pong::{self, MatchEvent, MatchState, SkinTarget};
use crate::scene::{digest_bytes, Digest256, SceneGraph, SceneSnapshot, SnapshotError, TICK_DT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Pong,
    Holodeck,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "pong" => Ok(Mode::Pong),
            "holodeck" => Ok(Mode::Holodeck),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

/// Everything a replica must agree on: the scene and, in pong mode, the
/// match bookkeeping that rides alongside it.
#[derive(Debug, Clone, PartialEq)]
pub struct World {
    pub mode: Mode,
    pub scene: SceneGraph,
    pub pong: Option<MatchState>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub mode: Mode,
    pub scene: SceneSnapshot,
    pub pong: Option<MatchState>,
}

impl World {
    pub fn new(mode: Mode, seed: u64) -> Self {
        match mode {
            Mode::Pong => {
                let (scene, m) = pong::new_match(seed);
                Self {
                    mode,
                    scene,
                    pong: Some(m),
                }
            }
            Mode::Holodeck => Self {
                mode,
                scene: SceneGraph::holodeck_room(seed),
                pong: None,
            },
        }
    }

    pub fn tick(&self) -> u64 {
        self.scene.tick()
    }

    /// Advance one fixed tick.
    pub fn step(&mut self) -> Vec<MatchEvent> {
        match self.pong.as_mut() {
            Some(m) => pong::step_match(&mut self.scene, m, TICK_DT),
            None => {
                self.scene.step(TICK_DT);
                Vec::new()
            }
        }
    }

    pub fn digest(&self) -> Digest256 {
        let mut bytes = self.scene.canonical_hash_bytes();
        if let Some(m) = &self.pong {
            bytes.push(b'\n');
            bytes.extend(serde_json::to_vec(m).expect("match state serializes"));
        }
        digest_bytes(&bytes)
    }

    pub fn snapshot(&self) -> WorldSnapshot {
        WorldSnapshot {
            mode: self.mode,
            scene: self.scene.snapshot(),
            pong: self.pong.clone(),
        }
    }

    pub fn from_snapshot(snap: WorldSnapshot) -> Result<Self, SnapshotError> {
        Ok(Self {
            mode: snap.mode,
            scene: SceneGraph::from_snapshot(snap.scene)?,
            pong: snap.pong,
        })
    }

    pub fn apply_change(&mut self, change: &EntityChange) {
        match change {
            EntityChange::Upsert { entity } => self.scene.upsert_entity(entity.clone()),
            EntityChange::Remove { id } => {
                self.scene.remove_entity(*id);
            }
            EntityChange::Reskin { target, label, entity } => {
                self.scene.upsert_entity(entity.clone());
                if let Some(m) = self.pong.as_mut() {
                    match target {
                        SkinTarget::Ball => m.ball_label = label.clone(),
                        SkinTarget::Paddle(p) => m.paddle_labels[(*p).min(1)] = label.clone(),
                    }
                }
            }
        }
    }

    pub fn apply_commit(&mut self, changes: &[EntityChange], next_entity_id: u64) {
        for c in changes {
            self.apply_change(c);
        }
        self.scene.set_next_id(next_entity_id);
    }
}

/// Entity-level edits turning `before` into `after`.
pub fn diff_scenes(before: &SceneGraph, after: &SceneGraph) -> Vec<EntityChange> {
    let mut out: Vec<EntityChange> = after
        .entities()
        .filter(|e| before.entity(e.id) != Some(*e))
        .map(|e| EntityChange::Upsert { entity: e.clone() })
        .collect();
    out.extend(
        before
            .entities()
            .filter(|e| after.entity(e.id).is_none())
            .map(|e| EntityChange::Remove { id: e.id }),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::{AssetPipeline, MockCatalog, SimulatedFetcher, VirtualClock};
    use crate::dsl::{run_source, CapabilitySet};
    use std::sync::Arc;

    #[test]
    fn snapshot_restores_bitwise_trajectory() {
        let mut a = World::new(Mode::Pong, 11);
        for _ in 0..50 {
            a.step();
        }
        let bytes = serde_json::to_vec(&a.snapshot()).unwrap();
        let mut b = World::from_snapshot(serde_json::from_slice(&bytes).unwrap()).unwrap();
        for _ in 0..500 {
            a.step();
            b.step();
        }
        assert_eq!(a, b);
        assert_eq!(a.digest(), b.digest());
    }

    #[test]
    fn diff_reproduces_program_effects() {
        let clock = VirtualClock::new();
        let mut assets = AssetPipeline::new(
            Arc::new(MockCatalog::bundled()),
            Arc::new(SimulatedFetcher::new(clock.clone())),
            Arc::new(clock),
        );
        let before = World::new(Mode::Holodeck, 4);
        let mut after = before.clone();
        let src = "destroy_all\nload \"computer desk\" as desk\nscale desk 1.77\nplace desk next_to floor (0, 1, 0)\n";
        assert!(run_source(src, &mut after.scene, CapabilitySet::all(), &mut assets)
            .unwrap()
            .succeeded());
        let changes = diff_scenes(&before.scene, &after.scene);
        let mut replica = before.clone();
        replica.apply_commit(&changes, after.scene.next_id());
        assert_eq!(replica.digest(), after.digest());
        assert_eq!(replica.scene.next_id(), after.scene.next_id());
    }

    #[test]
    fn pong_state_is_part_of_the_digest() {
        let a = World::new(Mode::Pong, 1);
        let mut b = a.clone();
        b.pong.as_mut().unwrap().ball_label = "salmon".into();
        assert_ne!(a.digest(), b.digest());
    }
}
