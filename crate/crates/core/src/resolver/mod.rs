//! Semantic resolution: few-shot collision prompts, scene elaboration and
//! program generation through a pluggable completion client, with every
//! completion logged.

mod client;
mod log;
pub mod oracle;
pub mod prompt;

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{CompletionClient, CompletionRequest, FailingClient, MockClient, Provenance, Purpose};
pub use log::{replay, CompletionLog, LogError, LogRecord};
pub use oracle::{MockOracle, CONTEXT_PAIRS, TABLE_ONE};
pub use prompt::{build_collision_prompt, parse_completion, COLLISION_CONTEXT, HAND_TOOLS_CONTEXT, HOLODECK_CONTEXT};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ResolverError {
    #[error("object labels must be nonempty")]
    EmptyLabel,
    #[error("the completion contained no object name")]
    EmptyCompletion,
    #[error("the completion service did not answer in time")]
    ClientTimeout,
    #[error("completion service error: {0}")]
    ClientError(String),
    #[error("invalid resolver configuration: {0}")]
    InvalidConfig(String),
    #[error("could not write the completion log: {0}")]
    Log(String),
}

impl ResolverError {
    pub fn code(&self) -> &'static str {
        match self {
            ResolverError::EmptyLabel => "EMPTY_LABEL",
            ResolverError::EmptyCompletion => "EMPTY_COMPLETION",
            ResolverError::ClientTimeout => "CLIENT_TIMEOUT",
            ResolverError::ClientError(_) => "CLIENT_ERROR",
            ResolverError::InvalidConfig(_) => "INVALID_CONFIG",
            ResolverError::Log(_) => "LOG_ERROR",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClientKind {
    #[default]
    Mock,
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Elaboration {
    Disabled,
    #[default]
    Enabled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResolverConfig {
    pub collision_temperature: f64,
    pub codegen_temperature: f64,
    pub frequency_penalty: f64,
    pub elaboration_temperature: f64,
    pub max_tokens: u32,
    pub client_kind: ClientKind,
    pub elaboration: Elaboration,
    pub text_model: String,
    pub code_model: String,
}

impl Default for ResolverConfig {
    fn default() -> Self {
        Self {
            collision_temperature: 0.5,
            codegen_temperature: 0.0,
            frequency_penalty: 0.2,
            elaboration_temperature: 0.9,
            max_tokens: 256,
            client_kind: ClientKind::Mock,
            elaboration: Elaboration::Enabled,
            text_model: "text-davinci-002".into(),
            code_model: "code-davinci-002".into(),
        }
    }
}

impl ResolverConfig {
    pub fn validate(&self) -> Result<(), ResolverError> {
        for (name, t) in [
            ("collision_temperature", self.collision_temperature),
            ("codegen_temperature", self.codegen_temperature),
            ("elaboration_temperature", self.elaboration_temperature),
        ] {
            if !(0.0..=2.0).contains(&t) {
                return Err(ResolverError::InvalidConfig(format!("{name} must lie in [0, 2], got {t}")));
            }
        }
        if self.frequency_penalty.is_nan() || self.frequency_penalty < 0.0 {
            return Err(ResolverError::InvalidConfig("frequency_penalty must be non-negative".into()));
        }
        if self.max_tokens == 0 {
            return Err(ResolverError::InvalidConfig("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteractionResolution {
    pub ball_object: String,
    pub paddle_object: String,
    pub output_object: String,
    pub prompt_text: String,
    pub raw_completion: String,
    pub provenance: Provenance,
    pub timestamp: u64,
    pub config: ResolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratedProgram {
    pub instruction: String,
    /// Elaborated instruction the program was generated from, if any.
    pub elaborated: Option<String>,
    pub source: String,
}

pub type Timestamper = Arc<dyn Fn() -> u64 + Send + Sync>;

fn unix_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Stateless apart from the append-only log; share it behind an `Arc`.
#[derive(Clone)]
pub struct Resolver {
    pub config: ResolverConfig,
    client: Arc<dyn CompletionClient>,
    log: Arc<CompletionLog>,
    clock: Timestamper,
}

impl std::fmt::Debug for Resolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Resolver")
            .field("config", &self.config)
            .field("provenance", &self.client.provenance())
            .field("log", &self.log)
            .finish()
    }
}

impl Resolver {
    pub fn new(config: ResolverConfig, client: Arc<dyn CompletionClient>, log: Arc<CompletionLog>) -> Self {
        Self {
            config,
            client,
            log,
            clock: Arc::new(unix_millis),
        }
    }

    /// Mock client with an in-memory log.
    pub fn mock() -> Self {
        Self::new(
            ResolverConfig::default(),
            Arc::new(MockClient::default()),
            Arc::new(CompletionLog::in_memory()),
        )
    }

    pub fn with_clock(mut self, clock: Timestamper) -> Self {
        self.clock = clock;
        self
    }

    pub fn log(&self) -> &CompletionLog {
        &self.log
    }

    pub fn provenance(&self) -> Provenance {
        self.client.provenance()
    }

    fn request(&self, purpose: Purpose, prompt: String) -> CompletionRequest {
        let (model, temperature, stop) = match purpose {
            Purpose::Collision => (
                &self.config.text_model,
                self.config.collision_temperature,
                vec!["\n".to_owned()],
            ),
            Purpose::Codegen => (
                &self.config.code_model,
                self.config.codegen_temperature,
                vec!["\n#".to_owned()],
            ),
            Purpose::Elaboration => (&self.config.text_model, self.config.elaboration_temperature, vec![]),
        };
        CompletionRequest {
            purpose,
            model: model.clone(),
            prompt,
            temperature,
            frequency_penalty: self.config.frequency_penalty,
            max_tokens: self.config.max_tokens,
            stop,
        }
    }

    fn record(
        &self,
        req: &CompletionRequest,
        ball: Option<&str>,
        paddle: Option<&str>,
        input: Option<&str>,
        output: &str,
        raw: &str,
    ) -> Result<u64, ResolverError> {
        let timestamp = (self.clock)();
        self.log
            .append(&LogRecord {
                timestamp,
                kind: req.purpose,
                ball: ball.map(str::to_owned),
                paddle: paddle.map(str::to_owned),
                input: input.map(str::to_owned),
                output: output.to_owned(),
                provenance: self.client.provenance(),
                temperature: req.temperature,
                raw_completion: raw.to_owned(),
            })
            .map_err(|e| ResolverError::Log(e.to_string()))?;
        Ok(timestamp)
    }

    /// Ask what a collision between the two objects spawns.
    pub fn resolve_collision(&self, ball: &str, paddle: &str) -> Result<InteractionResolution, ResolverError> {
        let ball = prompt::normalize_label(ball).ok_or(ResolverError::EmptyLabel)?;
        let paddle = prompt::normalize_label(paddle).ok_or(ResolverError::EmptyLabel)?;
        let prompt_text = build_collision_prompt(&ball, &paddle)?;
        let req = self.request(Purpose::Collision, prompt_text);
        let raw = self.client.complete(&req)?;
        let output = parse_completion(&raw);
        let logged = output.as_deref().unwrap_or("");
        let timestamp = self.record(&req, Some(&ball), Some(&paddle), None, logged, &raw)?;
        Ok(InteractionResolution {
            ball_object: ball,
            paddle_object: paddle,
            output_object: output?,
            prompt_text: req.prompt,
            raw_completion: raw,
            provenance: self.client.provenance(),
            timestamp,
            config: self.config.clone(),
        })
    }

    /// Expand a terse scene request into step-by-step instructions.
    pub fn elaborate_scene_prompt(&self, user_prompt: &str) -> Result<String, ResolverError> {
        let user_prompt = user_prompt.trim();
        if user_prompt.is_empty() {
            return Err(ResolverError::EmptyLabel);
        }
        if self.config.elaboration == Elaboration::Disabled {
            return Ok(user_prompt.to_owned());
        }
        let req = self.request(Purpose::Elaboration, prompt::build_elaboration_prompt(user_prompt));
        let raw = self.client.complete(&req)?;
        let out = raw.trim().to_owned();
        self.record(&req, None, None, Some(user_prompt), &out, &raw)?;
        if out.is_empty() {
            return Err(ResolverError::EmptyCompletion);
        }
        Ok(out)
    }

    /// Generate a scene-command program for an instruction. The result is not
    /// parsed here.
    pub fn generate_program(&self, instruction: &str) -> Result<String, ResolverError> {
        let instruction = instruction.trim();
        if instruction.is_empty() {
            return Err(ResolverError::EmptyLabel);
        }
        let req = self.request(Purpose::Codegen, prompt::build_codegen_prompt(instruction));
        let raw = self.client.complete(&req)?;
        self.record(&req, None, None, Some(instruction), &raw, &raw)?;
        Ok(raw)
    }

    /// Elaborate (if enabled) and then generate.
    pub fn scene_program(&self, user_prompt: &str) -> Result<GeneratedProgram, ResolverError> {
        let elaborated = self.elaborate_scene_prompt(user_prompt)?;
        let source = self.generate_program(&format!("{} {}", user_prompt.trim(), elaborated))?;
        Ok(GeneratedProgram {
            instruction: user_prompt.trim().to_owned(),
            elaborated: (self.config.elaboration == Elaboration::Enabled).then_some(elaborated),
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixed() -> Resolver {
        Resolver::mock().with_clock(Arc::new(|| 42))
    }

    #[test]
    fn oracle_examples() {
        let r = fixed();
        assert_eq!(r.resolve_collision("salmon", "knife").unwrap().output_object, "sushi");
        assert_eq!(r.resolve_collision("fire", "ice").unwrap().output_object, "water");
        assert_eq!(r.resolve_collision("egg", "frying pan").unwrap().output_object, "fried egg");
        assert_eq!(r.log().len(), 3);
    }

    #[test]
    fn one_record_per_call() {
        let r = fixed();
        for i in 0..10 {
            r.resolve_collision(&format!("thing{i}"), "clock").unwrap();
            assert_eq!(r.log().len(), i + 1);
        }
        let recs = r.log().records().unwrap();
        assert_eq!(recs[0].output, "thing0-clock fusion");
        assert_eq!(recs[0].kind, Purpose::Collision);
        assert_eq!(recs[0].temperature, 0.5);
    }

    #[test]
    fn mock_ignores_temperature() {
        let mut hot = fixed();
        hot.config.collision_temperature = 1.7;
        let a = fixed().resolve_collision("memory", "disaster").unwrap();
        let b = hot.resolve_collision("memory", "disaster").unwrap();
        assert_eq!(a.output_object, b.output_object);
        assert_eq!(a.raw_completion, b.raw_completion);
    }

    #[test]
    fn empty_labels_rejected() {
        assert_eq!(fixed().resolve_collision("", "knife").unwrap_err().code(), "EMPTY_LABEL");
        assert_eq!(fixed().log().len(), 0);
    }

    #[test]
    fn elaboration_modes() {
        let mut r = fixed();
        r.config.elaboration = Elaboration::Disabled;
        assert_eq!(r.elaborate_scene_prompt("a bedroom").unwrap(), "a bedroom");
        assert_eq!(r.log().len(), 0);
        let r = fixed();
        let text = r.elaborate_scene_prompt("a bedroom").unwrap();
        assert!(text.contains("Step 1") && text.contains("bed"));
        assert_eq!(r.log().records().unwrap()[0].temperature, 0.9);
    }

    #[test]
    fn live_failures_surface() {
        let r = Resolver::new(
            ResolverConfig::default(),
            Arc::new(FailingClient { timeout: true }),
            Arc::new(CompletionLog::in_memory()),
        );
        assert_eq!(r.resolve_collision("salmon", "knife").unwrap_err().code(), "CLIENT_TIMEOUT");
    }

    #[test]
    fn config_bounds() {
        assert!(ResolverConfig::default().validate().is_ok());
        let bad = ResolverConfig {
            collision_temperature: 2.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scene_program_for_bedroom() {
        let r = fixed();
        let g = r.scene_program("Change the scene into a bedroom").unwrap();
        assert!(g.source.contains("load \"Bed\" as bed"));
        assert_eq!(r.log().len(), 2);
    }
}
