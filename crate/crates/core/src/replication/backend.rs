use std::collections::BTreeSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::message::TicketId;
use super::world::{Mode, World};
use crate::assets::{AssetError, AssetHandle, AssetPipeline, MockCatalog, SimulatedFetcher, VirtualClock};
use crate::dsl::{self, CapabilitySet, Node, Program, Statement};
use crate::pong::{parse_player_command, PlayerCommand, SkinTarget};
use crate::resolver::{Resolver, ResolverError};

/// What a queued ticket asks for once the text has been interpreted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RequestBody {
    Pong {
        command: PlayerCommand,
    },
    /// Raised by the session itself when transformed objects touch.
    Collision {
        ball: String,
        paddle: String,
        player: usize,
    },
    Program {
        source: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubmitError {
    #[error("{0}")]
    Validation(String),
    #[error("program generation failed: {0}")]
    Resolution(String),
}

impl SubmitError {
    pub fn code(&self) -> &'static str {
        match self {
            SubmitError::Validation(_) => "VALIDATION_FAILED",
            SubmitError::Resolution(_) => "RESOLUTION_FAILED",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrepJob {
    pub ticket: TicketId,
    pub body: RequestBody,
    /// Pong player index of the requester, if it has one.
    pub player: Option<usize>,
    pub scene_vertex_load: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Announce {
    pub ball: String,
    pub paddle: String,
    pub output: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "plan", rename_all = "snake_case")]
pub enum Plan {
    Reskin { target: SkinTarget, label: String },
    Program { source: String },
}

/// A resolved request whose assets are cached server-side, waiting for the
/// client barrier.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub announce: Option<Announce>,
    pub plan: Plan,
    /// Lowercased query paired with the handle that satisfied it.
    pub assets: Vec<(String, AssetHandle)>,
}

impl Prepared {
    /// Time the preparation would have taken on a real link.
    pub fn latency(&self) -> std::time::Duration {
        self.assets.iter().map(|(_, h)| h.fetch_latency).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PrepError {
    #[error("{detail}: {message}")]
    Resolution { detail: String, message: String },
    #[error("{detail}: {message}")]
    Asset { detail: String, message: String },
    #[error("{0}")]
    Invalid(String),
}

impl PrepError {
    pub fn code(&self) -> &'static str {
        match self {
            PrepError::Resolution { .. } => "RESOLUTION_FAILED",
            PrepError::Asset { .. } => "ASSET_FAILED",
            PrepError::Invalid(_) => "INVALID_REQUEST",
        }
    }
}

impl From<ResolverError> for PrepError {
    fn from(e: ResolverError) -> Self {
        PrepError::Resolution {
            detail: e.code().into(),
            message: e.to_string(),
        }
    }
}

impl From<AssetError> for PrepError {
    fn from(e: AssetError) -> Self {
        PrepError::Asset {
            detail: e.code().into(),
            message: e.to_string(),
        }
    }
}

/// The slow side of a session: language-model calls and asset downloads.
/// Called off the session loop, so implementations take `&self`.
pub trait Backend: Send + Sync {
    /// Turn submitted text into a queueable request.
    fn interpret(&self, world: &World, text: &str) -> Result<RequestBody, SubmitError>;
    fn prepare(&self, job: &PrepJob) -> Result<Prepared, PrepError>;
}

/// Resolver plus asset pipeline.
pub struct EngineBackend {
    pub resolver: Arc<Resolver>,
    pub assets: AssetPipeline,
    pub caps: CapabilitySet,
}

impl EngineBackend {
    pub fn new(resolver: Arc<Resolver>, assets: AssetPipeline) -> Self {
        Self {
            resolver,
            assets,
            caps: CapabilitySet::all(),
        }
    }

    /// Mock oracle, bundled catalog and a simulated fetcher on its own
    /// virtual clock.
    pub fn mock() -> Self {
        Self::mock_with(Arc::new(Resolver::mock()))
    }

    pub fn mock_with(resolver: Arc<Resolver>) -> Self {
        let clock = VirtualClock::new();
        let pipeline = AssetPipeline::new(
            Arc::new(MockCatalog::bundled()),
            Arc::new(SimulatedFetcher::new(clock.clone())),
            Arc::new(clock),
        );
        Self::new(resolver, pipeline)
    }

    fn acquire(&self, query: &str, load: u64) -> Result<(String, AssetHandle), PrepError> {
        Ok((query.to_lowercase(), self.assets.acquire(query, load)?))
    }
}

/// Distinct asset queries of every `load`, in first-use order.
pub fn load_queries(program: &Program) -> Vec<String> {
    fn walk(nodes: &[Node], seen: &mut BTreeSet<String>, out: &mut Vec<String>) {
        for n in nodes {
            match &n.stmt {
                Statement::Load { query, .. } => {
                    if seen.insert(query.to_lowercase()) {
                        out.push(query.clone());
                    }
                }
                Statement::Repeat { body, .. } => walk(body, seen, out),
                _ => {}
            }
        }
    }
    let mut out = Vec::new();
    walk(&program.statements, &mut BTreeSet::new(), &mut out);
    out
}

/// Interpretation rules shared by every backend: pong text must be a player
/// command; holodeck text is a program if it parses as one, otherwise it is
/// handed to `generate` for elaboration and code generation. Programs are
/// validated against the current scene and returned in canonical form.
pub fn interpret_with(
    world: &World,
    text: &str,
    caps: CapabilitySet,
    generate: impl FnOnce(&str) -> Result<String, SubmitError>,
) -> Result<RequestBody, SubmitError> {
    match world.mode {
        Mode::Pong => match parse_player_command(text) {
            PlayerCommand::NoCommand => Err(SubmitError::Validation(format!(
                "`{}` is not a command; say `change ball to X` or `change paddle to X`",
                text.trim()
            ))),
            command => Ok(RequestBody::Pong { command }),
        },
        Mode::Holodeck => {
            let program = match dsl::parse(text) {
                Ok(p) if !p.is_empty() => p,
                _ => {
                    let source = generate(text)?;
                    dsl::parse(&source).map_err(|e| SubmitError::Validation(format!("generated program: {e}")))?
                }
            };
            let diags = dsl::validate(&program, &world.scene, caps);
            if !diags.is_empty() {
                let lines: Vec<String> = diags.iter().map(ToString::to_string).collect();
                return Err(SubmitError::Validation(lines.join("\n")));
            }
            Ok(RequestBody::Program {
                source: dsl::format(&program),
            })
        }
    }
}

impl Backend for EngineBackend {
    fn interpret(&self, world: &World, text: &str) -> Result<RequestBody, SubmitError> {
        interpret_with(world, text, self.caps, |t| {
            self.resolver
                .scene_program(t)
                .map(|g| g.source)
                .map_err(|e| SubmitError::Resolution(format!("{}: {e}", e.code())))
        })
    }

    fn prepare(&self, job: &PrepJob) -> Result<Prepared, PrepError> {
        let load = job.scene_vertex_load;
        match &job.body {
            RequestBody::Pong { command } => {
                let (target, label) = match command {
                    PlayerCommand::ChangeBall(l) => (SkinTarget::Ball, l.clone()),
                    PlayerCommand::ChangePaddle(l) => {
                        let player = job
                            .player
                            .ok_or_else(|| PrepError::Invalid("only players have paddles".into()))?;
                        (SkinTarget::Paddle(player), l.clone())
                    }
                    PlayerCommand::NoCommand => return Err(PrepError::Invalid("not a command".into())),
                };
                Ok(Prepared {
                    announce: None,
                    assets: vec![self.acquire(&label, load)?],
                    plan: Plan::Reskin { target, label },
                })
            }
            RequestBody::Collision { ball, paddle, .. } => {
                let r = self.resolver.resolve_collision(ball, paddle)?;
                Ok(Prepared {
                    assets: vec![self.acquire(&r.output_object, load)?],
                    plan: Plan::Reskin {
                        target: SkinTarget::Ball,
                        label: r.output_object.clone(),
                    },
                    announce: Some(Announce {
                        ball: r.ball_object,
                        paddle: r.paddle_object,
                        output: r.output_object,
                    }),
                })
            }
            RequestBody::Program { source } => {
                let program = dsl::parse(source).map_err(|e| PrepError::Invalid(e.to_string()))?;
                let assets = load_queries(&program)
                    .iter()
                    .map(|q| self.acquire(q, load))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(Prepared {
                    announce: None,
                    plan: Plan::Program { source: source.clone() },
                    assets,
                })
            }
        }
    }
}
