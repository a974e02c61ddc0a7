//! Network front end: session lifecycle over HTTP, the replication stream
//! over WebSocket, configuration, and the on-disk completion log and match
//! traces.
//!
//! | route | |
//! |---|---|
//! | `POST /sessions` | `{"mode": "pong" \| "holodeck", "seed"?: u64}` → `{id, mode, token}` |
//! | `GET /sessions` | running sessions |
//! | `GET /sessions/{id}/state` | world snapshot JSON |
//! | `DELETE /sessions/{id}` | stop a session |
//! | `GET /sessions/{id}/ws?token=..` | replication stream |
//!
//! The socket carries length-prefixed JSON envelopes in binary frames, or
//! bare JSON text frames with `format=text`. Clients send client messages
//! (or client envelopes) as JSON text or length-prefixed binary.

pub mod config;
pub mod engine;
pub mod error;
#[cfg(feature = "live")]
pub mod live;
pub mod server;
pub mod session_loop;

pub use config::{Cli, GatewayConfig};
pub use error::{ApiError, GatewayError};
pub use server::{router, start, Gateway, Running, SessionCreated};
