use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::world::WorldSnapshot;
use crate::math::Vec3;
use crate::pong::{MatchEvent, SkinTarget};
use crate::scene::{Digest256, Entity, EntityId, JointKey};

pub const WIRE_VERSION: u32 = 1;
/// Frames larger than this are rejected before allocation.
pub const MAX_FRAME_BYTES: usize = 16 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClientId(pub u32);

impl std::fmt::Display for ClientId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "client-{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TicketId(pub u64);

impl std::fmt::Display for TicketId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum TicketStatus {
    Queued,
    Resolving,
    Downloading,
    Committed,
    Failed { code: String, message: String },
}

impl TicketStatus {
    pub fn is_terminal(&self) -> bool {
        matches!(self, TicketStatus::Committed | TicketStatus::Failed { .. })
    }
}

/// One entity-level edit carried by a spawn commit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "change", rename_all = "snake_case")]
pub enum EntityChange {
    Upsert {
        entity: Entity,
    },
    Remove {
        id: EntityId,
    },
    /// A pong object swapped its model; `entity` is its full post-swap state.
    Reskin {
        target: SkinTarget,
        label: String,
        entity: Entity,
    },
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ReplicationMessage {
    CommandRequest {
        ticket: TicketId,
        client: Option<ClientId>,
        text: String,
    },
    ResolutionAnnounce {
        ticket: TicketId,
        ball: String,
        paddle: String,
        output: String,
    },
    AssetDirective {
        ticket: TicketId,
        asset_id: String,
        download_url: String,
        size_bytes: u64,
    },
    AssetReady {
        client: ClientId,
        asset_id: String,
    },
    SpawnCommit {
        ticket: TicketId,
        changes: Vec<EntityChange>,
        next_entity_id: u64,
    },
    TimeScale {
        factor: f64,
    },
    StateHash {
        tick: u64,
        digest: Digest256,
    },
    Snapshot {
        world: WorldSnapshot,
    },
    TicketStatus {
        ticket: TicketId,
        status: TicketStatus,
    },
    /// Canonical program text a holodeck ticket will execute.
    CodePanel {
        ticket: TicketId,
        source: String,
    },
    MatchEvent {
        event: MatchEvent,
    },
    JointPose {
        key: JointKey,
        position: Vec3,
    },
    /// Sent once after the join snapshot.
    Joined {
        client: ClientId,
        player: Option<usize>,
    },
}

impl ReplicationMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ReplicationMessage::Joined { .. } => "joined",
            ReplicationMessage::CommandRequest { .. } => "command_request",
            ReplicationMessage::ResolutionAnnounce { .. } => "resolution_announce",
            ReplicationMessage::AssetDirective { .. } => "asset_directive",
            ReplicationMessage::AssetReady { .. } => "asset_ready",
            ReplicationMessage::SpawnCommit { .. } => "spawn_commit",
            ReplicationMessage::TimeScale { .. } => "time_scale",
            ReplicationMessage::StateHash { .. } => "state_hash",
            ReplicationMessage::Snapshot { .. } => "snapshot",
            ReplicationMessage::TicketStatus { .. } => "ticket_status",
            ReplicationMessage::CodePanel { .. } => "code_panel",
            ReplicationMessage::MatchEvent { .. } => "match_event",
            ReplicationMessage::JointPose { .. } => "joint_pose",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub version: u32,
    pub session: String,
    /// Per-recipient, starting at 0 and increasing by one per message.
    pub seq: u64,
    /// Authoritative tick at which the message takes effect.
    pub tick: u64,
    pub message: ReplicationMessage,
}

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    SubmitCommand { text: String },
    StateHashReport { tick: u64, digest: Digest256 },
    AssetReady { asset_id: String },
    JointPose { key: JointKey, position: Vec3 },
}

impl ClientMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            ClientMessage::SubmitCommand { .. } => "submit_command",
            ClientMessage::StateHashReport { .. } => "state_hash_report",
            ClientMessage::AssetReady { .. } => "asset_ready",
            ClientMessage::JointPose { .. } => "joint_pose",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientEnvelope {
    pub version: u32,
    pub session: String,
    pub client: ClientId,
    pub message: ClientMessage,
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("frame is shorter than its length prefix")]
    Truncated,
    #[error("frame of {0} bytes exceeds the limit")]
    TooLarge(usize),
    #[error("malformed message: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported wire version {0}")]
    Version(u32),
}

/// Four-byte big-endian length followed by the JSON body.
pub fn encode_frame<T: Serialize>(value: &T) -> Vec<u8> {
    let body = serde_json::to_vec(value).expect("wire messages serialize");
    let mut out = Vec::with_capacity(body.len() + 4);
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

/// Decode one frame from the front of `bytes`, returning the value and the
/// number of bytes consumed.
pub fn decode_frame<T: DeserializeOwned>(bytes: &[u8]) -> Result<(T, usize), CodecError> {
    let Some(prefix) = bytes.get(..4) else {
        return Err(CodecError::Truncated);
    };
    let len = u32::from_be_bytes(prefix.try_into().expect("four bytes")) as usize;
    if len > MAX_FRAME_BYTES {
        return Err(CodecError::TooLarge(len));
    }
    let body = bytes.get(4..4 + len).ok_or(CodecError::Truncated)?;
    Ok((serde_json::from_slice(body)?, 4 + len))
}

pub fn decode_envelope(bytes: &[u8]) -> Result<Envelope, CodecError> {
    let (env, _): (Envelope, _) = decode_frame(bytes)?;
    if env.version != WIRE_VERSION {
        return Err(CodecError::Version(env.version));
    }
    Ok(env)
}

pub fn decode_client_envelope(bytes: &[u8]) -> Result<ClientEnvelope, CodecError> {
    let (env, _): (ClientEnvelope, _) = decode_frame(bytes)?;
    if env.version != WIRE_VERSION {
        return Err(CodecError::Version(env.version));
    }
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_round_trip_and_concatenate() {
        let a = Envelope {
            version: WIRE_VERSION,
            session: "s1".into(),
            seq: 3,
            tick: 120,
            message: ReplicationMessage::TimeScale { factor: 0.01 },
        };
        let b = ClientMessage::SubmitCommand {
            text: "change ball to salmon".into(),
        };
        let mut bytes = encode_frame(&a);
        let first = bytes.len();
        bytes.extend(encode_frame(&b));
        let (da, used): (Envelope, _) = decode_frame(&bytes).unwrap();
        assert_eq!((da, used), (a, first));
        let (db, _): (ClientMessage, _) = decode_frame(&bytes[used..]).unwrap();
        assert_eq!(db, b);
        assert!(matches!(
            decode_frame::<Envelope>(&bytes[..first - 1]),
            Err(CodecError::Truncated)
        ));
    }

    #[test]
    fn json_shape_is_tagged() {
        let m = ReplicationMessage::ResolutionAnnounce {
            ticket: TicketId(1),
            ball: "salmon".into(),
            paddle: "knife".into(),
            output: "sushi".into(),
        };
        let v = serde_json::to_value(&m).unwrap();
        assert_eq!(v["type"], "resolution_announce");
        assert_eq!(v["output"], "sushi");
        let c: ClientMessage = serde_json::from_str(r#"{"type":"submit_command","text":"hi"}"#).unwrap();
        assert_eq!(c.kind(), "submit_command");
    }

    #[test]
    fn wrong_version_is_rejected() {
        let env = Envelope {
            version: 99,
            session: "s".into(),
            seq: 0,
            tick: 0,
            message: ReplicationMessage::TimeScale { factor: 1.0 },
        };
        assert!(matches!(decode_envelope(&encode_frame(&env)), Err(CodecError::Version(99))));
    }
}
