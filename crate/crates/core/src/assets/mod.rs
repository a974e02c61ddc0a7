//! Model repository access: search, like-ranked low-poly selection,
//! deadline-bounded fetch with fallback, caching and the vertex budget gate.

mod budget;
mod catalog;
mod fetch;
mod pipeline;
mod record;
mod select;

pub use budget::{check_budget, Admission, Budget, DenyReason};
pub use catalog::{CatalogError, MockCatalog, Repository};
pub use fetch::{Clock, FetchOutcome, Fetcher, LinkModel, SimulatedFetcher, SystemClock, VirtualClock};
pub use pipeline::{AcquireOptions, AssetCache, AssetPipeline, FetchLimiter, FetchPermit};
pub use record::{AssetHandle, AssetRecord};
pub use select::{search, select, DEFAULT_TOP_K};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssetError {
    #[error("no model matches \"{query}\"")]
    NotFound { query: String },
    #[error("every download for \"{query}\" timed out or failed after {attempts} attempts")]
    AllAttemptsTimedOut { query: String, attempts: u32 },
    #[error("\"{query}\" is too complex for this scene ({reason}); other objects must be removed from the scene first")]
    BudgetExceeded { query: String, reason: DenyReason },
    #[error("invalid acquire options: {0}")]
    InvalidOptions(String),
}

impl AssetError {
    pub fn code(&self) -> &'static str {
        match self {
            AssetError::NotFound { .. } => "NOT_FOUND",
            AssetError::AllAttemptsTimedOut { .. } => "ALL_ATTEMPTS_TIMED_OUT",
            AssetError::BudgetExceeded { .. } => "BUDGET_EXCEEDED",
            AssetError::InvalidOptions(_) => "INVALID_VALUE",
        }
    }
}

/// Anything that can turn a model name into a fetched asset.
pub trait AssetProvider {
    fn acquire(&mut self, query: &str, scene_vertex_load: u64) -> Result<AssetHandle, AssetError>;
}

impl<P: AssetProvider + ?Sized> AssetProvider for &mut P {
    fn acquire(&mut self, query: &str, scene_vertex_load: u64) -> Result<AssetHandle, AssetError> {
        (**self).acquire(query, scene_vertex_load)
    }
}

/// Provider over already-fetched handles keyed by lowercased query. Used by
/// replicas and by the server once the spawn barrier has cleared.
#[derive(Debug, Clone, Default)]
pub struct PrefetchedAssets {
    pub handles: std::collections::BTreeMap<String, AssetHandle>,
}

impl PrefetchedAssets {
    pub fn insert(&mut self, query: &str, handle: AssetHandle) {
        self.handles.insert(query.trim().to_lowercase(), handle);
    }
}

impl AssetProvider for PrefetchedAssets {
    fn acquire(&mut self, query: &str, _scene_vertex_load: u64) -> Result<AssetHandle, AssetError> {
        self.handles
            .get(&query.trim().to_lowercase())
            .cloned()
            .ok_or_else(|| AssetError::NotFound { query: query.into() })
    }
}
