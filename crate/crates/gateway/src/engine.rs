use std::sync::Arc;

use holoforge_core::assets::{
    AssetCache, AssetPipeline, Clock, Fetcher, MockCatalog, Repository, SimulatedFetcher, VirtualClock,
};
use holoforge_core::replication::EngineBackend;
use holoforge_core::resolver::{ClientKind, CompletionClient, CompletionLog, MockClient, Resolver};

use crate::config::GatewayConfig;
use crate::error::GatewayError;

type FetchParts = (Arc<dyn Fetcher>, Arc<dyn Clock>);

/// The resolver and asset pipeline shared by every session.
pub struct Engine {
    pub resolver: Arc<Resolver>,
    pub backend: Arc<EngineBackend>,
}

pub fn build_backend(config: &GatewayConfig) -> Result<Engine, GatewayError> {
    std::fs::create_dir_all(&config.data_dir)?;
    let log = Arc::new(CompletionLog::open(config.completion_log_path())?);
    let mut rc = config.resolver.clone();
    let client: Arc<dyn CompletionClient> = if config.llm.mock {
        rc.client_kind = ClientKind::Mock;
        Arc::new(MockClient::default())
    } else {
        rc.client_kind = ClientKind::Live;
        live_client(config)?
    };
    let resolver = Arc::new(Resolver::new(rc, client, log));

    let (repo, fetcher, clock): (Arc<dyn Repository>, Arc<dyn Fetcher>, Arc<dyn Clock>) = if config.assets.mock {
        let clock = VirtualClock::new();
        (
            Arc::new(MockCatalog::bundled()),
            Arc::new(SimulatedFetcher::new(clock.clone())),
            Arc::new(clock),
        )
    } else {
        let path = config.assets.catalog.as_ref().expect("validated");
        let catalog = MockCatalog::from_path(path).map_err(|e| GatewayError::Setup(format!("{}: {e}", path.display())))?;
        let (fetcher, clock) = live_fetcher(config)?;
        (Arc::new(catalog), fetcher, clock)
    };
    let assets = AssetPipeline::new(repo, fetcher, clock)
        .with_cache(Arc::new(AssetCache::on_disk(config.asset_cache_dir())))
        .with_options(config.assets.acquire_options()?);
    Ok(Engine {
        backend: Arc::new(EngineBackend::new(resolver.clone(), assets)),
        resolver,
    })
}

#[cfg(feature = "live")]
fn live_client(config: &GatewayConfig) -> Result<Arc<dyn CompletionClient>, GatewayError> {
    Ok(Arc::new(crate::live::OpenAiClient::from_config(&config.llm)?))
}

#[cfg(not(feature = "live"))]
fn live_client(_: &GatewayConfig) -> Result<Arc<dyn CompletionClient>, GatewayError> {
    Err(GatewayError::Setup("built without the `live` feature".into()))
}

#[cfg(feature = "live")]
fn live_fetcher(config: &GatewayConfig) -> Result<FetchParts, GatewayError> {
    let _ = config;
    Ok((
        Arc::new(crate::live::HttpFetcher::default()),
        Arc::new(holoforge_core::assets::SystemClock::default()),
    ))
}

#[cfg(not(feature = "live"))]
fn live_fetcher(_: &GatewayConfig) -> Result<FetchParts, GatewayError> {
    Err(GatewayError::Setup("built without the `live` feature".into()))
}
