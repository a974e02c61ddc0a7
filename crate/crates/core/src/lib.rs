//! Headless engine for speaking scenes into existence: natural-language
//! commands become semantic object transformations and sandboxed scene
//! programs, backed by a ranked asset repository, and are replicated to
//! several clients through a server-authoritative session.
//!
//! The crate is organized bottom-up:
//!
//! - [`scene`]: the deterministic scene graph every session owns.
//! - [`dsl`]: the scene-command language generated programs are written in.
//! - [`resolver`]: collision prompts, completion clients and the completion log.
//! - [`assets`]: repository search, like-ranked selection and deadline-bounded fetch.
//! - [`pong`]: the surreal tennis ruleset.
//! - [`replication`]: session state machine, replicas and the network simulator.
//! - [`sweep`]: batch runners over seeds (parallel with the `parallel` feature).

pub mod assets;
pub mod dsl;
pub mod math;
pub mod pong;
pub mod replication;
pub mod resolver;
pub mod scene;
pub mod sweep;

pub use math::{Aabb, Vec3};
