use serde::{Deserialize, Serialize};

use super::oracle::{mock_elaboration, mock_program, MockOracle};
use super::prompt::{parse_codegen_instruction, parse_collision_query, parse_elaboration_request};
use super::ResolverError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Purpose {
    Collision,
    Codegen,
    Elaboration,
}

impl Purpose {
    pub fn as_str(self) -> &'static str {
        match self {
            Purpose::Collision => "collision",
            Purpose::Codegen => "codegen",
            Purpose::Elaboration => "elaboration",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Mock,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub purpose: Purpose,
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub frequency_penalty: f64,
    pub max_tokens: u32,
    pub stop: Vec<String>,
}

/// A text-completion backend. Implementations must be safe to call from
/// worker threads; the session loop never calls them directly.
pub trait CompletionClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ResolverError>;
    fn provenance(&self) -> Provenance;
}

/// Answers from fixed tables. Temperature and penalties are ignored.
#[derive(Debug, Clone, Default)]
pub struct MockClient {
    pub oracle: MockOracle,
}

impl MockClient {
    pub fn new(oracle: MockOracle) -> Self {
        Self { oracle }
    }
}

impl CompletionClient for MockClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String, ResolverError> {
        let bad = || ResolverError::ClientError(format!("mock cannot read a {} prompt", request.purpose.as_str()));
        match request.purpose {
            Purpose::Collision => {
                let (ball, paddle) = parse_collision_query(&request.prompt).ok_or_else(bad)?;
                Ok(format!(" {}.\n", self.oracle.resolve(&ball, &paddle)))
            }
            Purpose::Codegen => {
                let instruction = parse_codegen_instruction(&request.prompt).ok_or_else(bad)?;
                Ok(mock_program(&instruction))
            }
            Purpose::Elaboration => {
                let req = parse_elaboration_request(&request.prompt).ok_or_else(bad)?;
                Ok(format!(" {}", mock_elaboration(&req)))
            }
        }
    }

    fn provenance(&self) -> Provenance {
        Provenance::Mock
    }
}

/// Always fails; stands in for an unreachable live endpoint.
#[derive(Debug, Clone, Default)]
pub struct FailingClient {
    pub timeout: bool,
}

impl CompletionClient for FailingClient {
    fn complete(&self, _request: &CompletionRequest) -> Result<String, ResolverError> {
        if self.timeout {
            Err(ResolverError::ClientTimeout)
        } else {
            Err(ResolverError::ClientError("connection refused".into()))
        }
    }

    fn provenance(&self) -> Provenance {
        Provenance::Live
    }
}
