//! Server-authoritative replication: the per-session state machine, client
//! replicas, the wire format and a deterministic network simulator.
//!
//! A session loop calls [`SessionState::tick_with`] once per fixed tick.
//! Every message is stamped with the authoritative tick it takes effect at;
//! a [`Replica`] steps its own copy of the world up to that tick before
//! applying it, so replicas that saw the same messages hold the same state.

mod backend;
mod message;
pub mod model;
pub mod netsim;
mod replica;
mod session;
mod world;

pub use backend::{
    interpret_with, load_queries, Announce, Backend, EngineBackend, Plan, PrepError, PrepJob, Prepared, RequestBody, SubmitError,
};
pub use message::{
    decode_client_envelope, decode_envelope, decode_frame, encode_frame, ClientEnvelope, ClientId, ClientMessage, CodecError,
    EntityChange, Envelope, ReplicationMessage, TicketId, TicketStatus, MAX_FRAME_BYTES, WIRE_VERSION,
};
pub use model::{model_check, ModelConfig, ModelReport};
pub use netsim::{random_script, simulate, simulate_with, NetworkConfig, ScriptAction, ScriptedAction, SimConfig, SimReport};
pub use replica::{Replica, ReplicaAction, ReplicaStats, GAP_TIMEOUT};
pub use session::{
    Directive, Outgoing, Pending, PendingPhase, QueuedRequest, SessionError, SessionState, AUDIT_PERIOD_TICKS,
    DIRECTIVE_RESEND_TICKS, MAX_SESSION_CLIENTS, TIME_DILATION,
};
pub use world::{diff_scenes, Mode, World, WorldSnapshot};
