use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Parser;
use figment::providers::{Env, Format, Serialized, Toml};
use figment::Figment;
use holoforge_core::assets::{AcquireOptions, Budget};
use holoforge_core::replication::{Mode, AUDIT_PERIOD_TICKS};
use holoforge_core::resolver::ResolverConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_PREFIX: &str = "HOLOFORGE_";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {0} does not exist")]
    Missing(PathBuf),
    #[error("{0}")]
    Load(#[from] Box<figment::Error>),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Everything the gateway reads at startup. Values come from the defaults
/// below, then the TOML file, then `HOLOFORGE_*` variables (nested keys
/// joined with `__`, e.g. `HOLOFORGE_ASSETS__DEADLINE_MS`), then flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatewayConfig {
    /// Default `127.0.0.1`.
    pub bind: String,
    /// Default 8080; 0 picks a free port.
    pub port: u16,
    /// Completion log, match traces and the asset cache live here. Default `data`.
    pub data_dir: PathBuf,
    /// Default 16.
    pub max_sessions: usize,
    /// Mode for `POST /sessions` without one. Default pong.
    pub default_mode: Mode,
    /// Session loop iterations per wall-clock second. Each iteration is one
    /// fixed 1/60 s world step. Default 60.
    pub loop_hz: f64,
    /// Ticks between state audits. Default 120.
    pub audit_period_ticks: u64,
    pub resolver: ResolverConfig,
    pub llm: LlmConfig,
    pub assets: AssetsConfig,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("data"),
            max_sessions: 16,
            default_mode: Mode::Pong,
            loop_hz: 60.0,
            audit_period_ticks: AUDIT_PERIOD_TICKS,
            resolver: ResolverConfig::default(),
            llm: LlmConfig::default(),
            assets: AssetsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LlmConfig {
    /// Answer from the built-in oracle tables. Default true.
    pub mock: bool,
    /// OpenAI-compatible endpoint. Default `https://api.openai.com/v1`.
    pub api_base: String,
    /// Variable holding the API key. Default `OPENAI_API_KEY`.
    pub api_key_env: String,
    /// Default 10000.
    pub timeout_ms: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        Self {
            mock: true,
            api_base: "https://api.openai.com/v1".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            timeout_ms: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssetsConfig {
    /// Bundled catalog with simulated downloads. Default true.
    pub mock: bool,
    /// Catalog file (same schema as the bundled one); required when `mock`
    /// is off. Default unset.
    pub catalog: Option<PathBuf>,
    /// Per-attempt download deadline. Default 5000.
    pub deadline_ms: u64,
    /// Default 3.
    pub max_attempts: u32,
    /// Candidates considered after ranking by likes. Default 10.
    pub top_k: usize,
    /// Default 500000.
    pub max_scene_vertices: u64,
    /// Default 100000.
    pub max_single_asset_vertices: u64,
}

impl Default for AssetsConfig {
    fn default() -> Self {
        let o = AcquireOptions::default();
        Self {
            mock: true,
            catalog: None,
            deadline_ms: o.deadline.as_millis() as u64,
            max_attempts: o.max_attempts,
            top_k: o.top_k,
            max_scene_vertices: o.budget.max_scene_vertices,
            max_single_asset_vertices: o.budget.max_single_asset_vertices,
        }
    }
}

impl AssetsConfig {
    pub fn acquire_options(&self) -> Result<AcquireOptions, ConfigError> {
        let budget = Budget::new(self.max_scene_vertices, self.max_single_asset_vertices).map_err(ConfigError::Invalid)?;
        Ok(AcquireOptions {
            deadline: Duration::from_millis(self.deadline_ms),
            max_attempts: self.max_attempts,
            budget,
            top_k: self.top_k,
            seed: 0,
        })
    }
}

#[derive(Debug, Clone, Default, Parser)]
#[command(name = "holoforge", version, about = "Prompt-driven multiplayer scene server")]
pub struct Cli {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub bind: Option<String>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Use the built-in completion oracle (`--mock-llm false` for a live endpoint).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub mock_llm: Option<bool>,
    /// Use the bundled asset catalog with simulated downloads.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub mock_assets: Option<bool>,
}

impl GatewayConfig {
    /// Defaults, then `file`, then the environment.
    pub fn load(file: Option<&Path>) -> Result<Self, ConfigError> {
        Self::figment(file)?.extract().map_err(|e| ConfigError::Load(Box::new(e)))
    }

    pub fn figment(file: Option<&Path>) -> Result<Figment, ConfigError> {
        let mut f = Figment::from(Serialized::defaults(GatewayConfig::default()));
        if let Some(path) = file {
            if !path.exists() {
                return Err(ConfigError::Missing(path.to_path_buf()));
            }
            f = f.merge(Toml::file(path));
        }
        Ok(f.merge(Env::prefixed(ENV_PREFIX).split("__")))
    }

    /// [`GatewayConfig::load`] followed by the command-line overrides.
    pub fn from_cli(cli: &Cli) -> Result<Self, ConfigError> {
        let mut c = Self::load(cli.config.as_deref())?;
        if let Some(b) = &cli.bind {
            c.bind = b.clone();
        }
        if let Some(p) = cli.port {
            c.port = p;
        }
        if let Some(d) = &cli.data_dir {
            c.data_dir = d.clone();
        }
        if let Some(m) = cli.mock_llm {
            c.llm.mock = m;
        }
        if let Some(m) = cli.mock_assets {
            c.assets.mock = m;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.resolver.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.assets.acquire_options()?;
        if !(self.loop_hz.is_finite() && self.loop_hz > 0.0) {
            return Err(ConfigError::Invalid("loop_hz must be positive".into()));
        }
        if self.max_sessions == 0 {
            return Err(ConfigError::Invalid("max_sessions must be positive".into()));
        }
        if self.assets.max_attempts == 0 || self.assets.top_k == 0 {
            return Err(ConfigError::Invalid(
                "assets.max_attempts and assets.top_k must be positive".into(),
            ));
        }
        if !self.assets.mock && self.assets.catalog.is_none() {
            return Err(ConfigError::Invalid(
                "assets.catalog is required when mock assets are off".into(),
            ));
        }
        if !cfg!(feature = "live") && (!self.llm.mock || !self.assets.mock) {
            return Err(ConfigError::Invalid(
                "this build has no live adapters; rebuild with `--features live`".into(),
            ));
        }
        self.bind_addr()?;
        Ok(())
    }

    pub fn bind_addr(&self) -> Result<SocketAddr, ConfigError> {
        format!("{}:{}", self.bind, self.port)
            .parse()
            .map_err(|e| ConfigError::Invalid(format!("bind address: {e}")))
    }

    pub fn completion_log_path(&self) -> PathBuf {
        self.data_dir.join("completions.jsonl")
    }

    pub fn traces_dir(&self) -> PathBuf {
        self.data_dir.join("traces")
    }

    pub fn asset_cache_dir(&self) -> PathBuf {
        self.data_dir.join("assets")
    }
}

#[cfg(test)]
#[allow(clippy::result_large_err)]
mod tests {
    use super::*;
    use figment::Jail;

    #[test]
    fn defaults_are_valid() {
        let c = GatewayConfig::default();
        c.validate().unwrap();
        assert_eq!(c.port, 8080);
        assert!(c.llm.mock && c.assets.mock);
        assert_eq!(c.resolver.frequency_penalty, 0.2);
        assert_eq!(c.assets.deadline_ms, 5000);
        assert_eq!(c.assets.top_k, 10);
    }

    #[test]
    fn file_then_env_then_flags() {
        Jail::expect_with(|jail| {
            jail.create_file(
                "gw.toml",
                r#"
                port = 9000
                max_sessions = 3
                [resolver]
                collision_temperature = 0.7
                [assets]
                deadline_ms = 2000
                "#,
            )?;
            jail.set_env("HOLOFORGE_MAX_SESSIONS", "5");
            jail.set_env("HOLOFORGE_ASSETS__TOP_K", "4");
            let cli = Cli {
                config: Some("gw.toml".into()),
                port: Some(9100),
                data_dir: Some("elsewhere".into()),
                ..Cli::default()
            };
            let c = GatewayConfig::from_cli(&cli).unwrap();
            assert_eq!(c.port, 9100);
            assert_eq!(c.max_sessions, 5);
            assert_eq!(c.resolver.collision_temperature, 0.7);
            assert_eq!(c.resolver.codegen_temperature, 0.0);
            assert_eq!(c.assets.deadline_ms, 2000);
            assert_eq!(c.assets.top_k, 4);
            assert_eq!(c.data_dir, PathBuf::from("elsewhere"));
            Ok(())
        });
    }

    #[test]
    fn readme_example_is_the_defaults() {
        let readme = include_str!("../../../README.md");
        let toml = readme.split("```toml\n").nth(1).and_then(|s| s.split("```").next()).unwrap();
        Jail::expect_with(|jail| {
            jail.create_file("gw.toml", toml)?;
            let c = GatewayConfig::load(Some(Path::new("gw.toml"))).unwrap();
            let want = GatewayConfig {
                assets: AssetsConfig {
                    catalog: Some(PathBuf::from("catalog.json")),
                    ..AssetsConfig::default()
                },
                ..GatewayConfig::default()
            };
            assert_eq!(c, want);
            Ok(())
        });
    }

    #[test]
    fn missing_file_is_an_error() {
        let err = GatewayConfig::load(Some(Path::new("/nonexistent/holoforge.toml"))).unwrap_err();
        assert!(matches!(err, ConfigError::Missing(_)));
    }

    #[test]
    fn bad_values_are_rejected() {
        let mut c = GatewayConfig::default();
        c.resolver.collision_temperature = 3.0;
        assert!(c.validate().is_err());
        let mut c = GatewayConfig::default();
        c.assets.max_single_asset_vertices = c.assets.max_scene_vertices + 1;
        assert!(c.validate().is_err());
        let mut c = GatewayConfig::default();
        c.assets.mock = false;
        assert!(c.validate().is_err());
    }

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from(["holoforge", "--port", "7000", "--mock-llm", "--mock-assets", "true"]).unwrap();
        assert_eq!(cli.port, Some(7000));
        assert_eq!(cli.mock_llm, Some(true));
        assert_eq!(cli.mock_assets, Some(true));
        let cli = Cli::try_parse_from(["holoforge", "--mock-llm", "false"]).unwrap();
        assert_eq!(cli.mock_llm, Some(false));
    }
}
