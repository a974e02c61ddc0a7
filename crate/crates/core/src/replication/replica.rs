use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use tracing::warn;

use super::message::{ClientId, ClientMessage, Envelope, ReplicationMessage};
use super::world::World;
use crate::scene::Digest256;

/// How long a replica waits for a missing sequence number before skipping
/// past it.
pub const GAP_TIMEOUT: Duration = Duration::from_secs(2);

/// What the replica wants its host to do next.
#[derive(Debug, Clone, PartialEq)]
pub enum ReplicaAction {
    Send(ClientMessage),
    Download {
        asset_id: String,
        download_url: String,
        size_bytes: u64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReplicaStats {
    pub applied: u64,
    pub duplicates: u64,
    pub snapshots: u64,
    pub gap_skips: u64,
}

/// A client's copy of the world. Messages are applied strictly in sequence
/// order; each is applied at the tick it was stamped with, stepping the
/// local world forward first.
#[derive(Debug, Clone)]
pub struct Replica {
    pub client: ClientId,
    session: String,
    world: World,
    next_seq: u64,
    buffer: BTreeMap<u64, Envelope>,
    blocked_since: Option<Duration>,
    assets: BTreeSet<String>,
    downloading: BTreeSet<String>,
    stats: ReplicaStats,
}

impl Replica {
    pub fn new(client: ClientId, session: impl Into<String>, world: World) -> Self {
        Self {
            client,
            session: session.into(),
            world,
            next_seq: 0,
            buffer: BTreeMap::new(),
            blocked_since: None,
            assets: BTreeSet::new(),
            downloading: BTreeSet::new(),
            stats: ReplicaStats::default(),
        }
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    pub fn digest(&self) -> Digest256 {
        self.world.digest()
    }

    pub fn stats(&self) -> &ReplicaStats {
        &self.stats
    }

    /// Next sequence number the replica will apply.
    pub fn cursor(&self) -> u64 {
        self.next_seq
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn has_asset(&self, id: &str) -> bool {
        self.assets.contains(id)
    }

    /// When [`Replica::poll`] should next be called, if a gap is open.
    pub fn gap_deadline(&self) -> Option<Duration> {
        self.blocked_since.map(|t| t + GAP_TIMEOUT)
    }

    /// Accept one envelope at local time `now`.
    pub fn receive(&mut self, env: Envelope, now: Duration) -> Vec<ReplicaAction> {
        if env.session != self.session {
            warn!(session = %env.session, "message for another session ignored");
            return Vec::new();
        }
        if env.seq < self.next_seq || self.buffer.contains_key(&env.seq) {
            self.stats.duplicates += 1;
            return Vec::new();
        }
        let mut out = Vec::new();
        if matches!(env.message, ReplicationMessage::Snapshot { .. }) {
            // wholesale replacement needs no predecessor
            self.next_seq = env.seq;
            self.buffer.retain(|s, _| *s > env.seq);
            self.apply(env, &mut out);
            self.next_seq += 1;
        } else {
            self.buffer.insert(env.seq, env);
        }
        self.drain(now, &mut out);
        out
    }

    /// Skip an expired gap.
    pub fn poll(&mut self, now: Duration) -> Vec<ReplicaAction> {
        let mut out = Vec::new();
        if self.gap_deadline().is_some_and(|d| now >= d) {
            if let Some((&first, _)) = self.buffer.first_key_value() {
                self.stats.gap_skips += 1;
                self.next_seq = first;
            }
            self.blocked_since = None;
            self.drain(now, &mut out);
        }
        out
    }

    /// A download started by [`ReplicaAction::Download`] finished.
    pub fn download_finished(&mut self, asset_id: &str) -> Vec<ReplicaAction> {
        self.downloading.remove(asset_id);
        self.assets.insert(asset_id.to_owned());
        vec![ReplicaAction::Send(ClientMessage::AssetReady {
            asset_id: asset_id.to_owned(),
        })]
    }

    fn drain(&mut self, now: Duration, out: &mut Vec<ReplicaAction>) {
        while let Some(env) = self.buffer.remove(&self.next_seq) {
            self.apply(env, out);
            self.next_seq += 1;
        }
        if self.buffer.is_empty() {
            self.blocked_since = None;
        } else if self.blocked_since.is_none() {
            self.blocked_since = Some(now);
        }
    }

    /// Step the local world up to `tick`, as a client does between messages.
    pub fn advance_to(&mut self, tick: u64) {
        while self.world.tick() < tick {
            self.world.step();
        }
    }

    fn apply(&mut self, env: Envelope, out: &mut Vec<ReplicaAction>) {
        self.stats.applied += 1;
        if let ReplicationMessage::Snapshot { world } = env.message {
            match World::from_snapshot(world) {
                Ok(w) => {
                    self.world = w;
                    self.stats.snapshots += 1;
                }
                Err(e) => warn!(error = %e, "unusable snapshot"),
            }
            return;
        }
        self.advance_to(env.tick);
        match env.message {
            ReplicationMessage::SpawnCommit {
                changes, next_entity_id, ..
            } => self.world.apply_commit(&changes, next_entity_id),
            ReplicationMessage::TimeScale { factor } => {
                if let Err(e) = self.world.scene.set_time_scale(factor) {
                    warn!(error = %e, "bad time scale");
                }
            }
            ReplicationMessage::JointPose { key, position } => {
                if let Err(e) = self.world.scene.set_joint_pose(key, position) {
                    warn!(error = %e, "bad joint pose");
                }
            }
            ReplicationMessage::StateHash { .. } => out.push(ReplicaAction::Send(ClientMessage::StateHashReport {
                tick: self.world.tick(),
                digest: self.world.digest(),
            })),
            ReplicationMessage::AssetDirective {
                asset_id,
                download_url,
                size_bytes,
                ..
            } => {
                if self.assets.contains(&asset_id) {
                    out.push(ReplicaAction::Send(ClientMessage::AssetReady { asset_id }));
                } else if self.downloading.insert(asset_id.clone()) {
                    out.push(ReplicaAction::Download {
                        asset_id,
                        download_url,
                        size_bytes,
                    });
                }
            }
            // informational
            ReplicationMessage::CommandRequest { .. }
            | ReplicationMessage::ResolutionAnnounce { .. }
            | ReplicationMessage::AssetReady { .. }
            | ReplicationMessage::TicketStatus { .. }
            | ReplicationMessage::CodePanel { .. }
            | ReplicationMessage::MatchEvent { .. }
            | ReplicationMessage::Joined { .. }
            | ReplicationMessage::Snapshot { .. } => {}
        }
    }
}
