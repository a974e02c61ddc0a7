use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex, RwLock};
use std::time::Duration;

use sha2::{Digest, Sha256};
use tracing::{debug, warn};

use super::budget::{check_budget, Admission, Budget};
use super::catalog::Repository;
use super::fetch::{Clock, FetchOutcome, Fetcher};
use super::record::AssetHandle;
use super::select::{select, DEFAULT_TOP_K};
use super::{AssetError, AssetProvider};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquireOptions {
    pub deadline: Duration,
    pub max_attempts: u32,
    pub budget: Budget,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for AcquireOptions {
    fn default() -> Self {
        Self {
            deadline: Duration::from_secs(5),
            max_attempts: 3,
            budget: Budget::default(),
            top_k: DEFAULT_TOP_K,
            seed: 0,
        }
    }
}

/// Fetched handles keyed by record id, optionally mirrored on disk as
/// `<dir>/<id>/record.json`.
#[derive(Debug, Default)]
pub struct AssetCache {
    map: RwLock<HashMap<String, AssetHandle>>,
    dir: Option<PathBuf>,
    writer: Mutex<()>,
}

impl AssetCache {
    pub fn in_memory() -> Self {
        Self::default()
    }

    pub fn on_disk(dir: impl Into<PathBuf>) -> Self {
        Self {
            dir: Some(dir.into()),
            ..Self::default()
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn record_path(dir: &Path, id: &str) -> PathBuf {
        let safe: String = id
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        dir.join(safe).join("record.json")
    }

    pub fn get(&self, id: &str) -> Option<AssetHandle> {
        if let Some(h) = self.map.read().unwrap_or_else(|e| e.into_inner()).get(id) {
            return Some(h.clone());
        }
        let dir = self.dir.as_ref()?;
        let path = Self::record_path(dir, id);
        let text = std::fs::read_to_string(&path).ok()?;
        let mut handle: AssetHandle = serde_json::from_str(&text).ok()?;
        if handle.record.id != id {
            return None;
        }
        handle.cache_path = Some(path);
        self.map
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id.to_owned(), handle.clone());
        Some(handle)
    }

    pub fn insert(&self, mut handle: AssetHandle) -> AssetHandle {
        let _w = self.writer.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(dir) = &self.dir {
            let path = Self::record_path(dir, &handle.record.id);
            handle.cache_path = Some(path.clone());
            let written = path
                .parent()
                .map(std::fs::create_dir_all)
                .unwrap_or(Ok(()))
                .and_then(|_| std::fs::write(&path, serde_json::to_vec_pretty(&handle).unwrap_or_default()));
            if let Err(e) = written {
                warn!(id = %handle.record.id, error = %e, "could not persist asset cache entry");
                handle.cache_path = None;
            }
        }
        self.map
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(handle.record.id.clone(), handle.clone());
        handle
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Counting semaphore bounding concurrent downloads.
#[derive(Debug)]
pub struct FetchLimiter {
    max: usize,
    active: Mutex<usize>,
    freed: Condvar,
}

pub struct FetchPermit<'a> {
    limiter: &'a FetchLimiter,
}

impl FetchLimiter {
    pub const DEFAULT_CONCURRENCY: usize = 2;

    pub fn new(max: usize) -> Self {
        Self {
            max: max.max(1),
            active: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> FetchPermit<'_> {
        let mut n = self.active.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.max {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        FetchPermit { limiter: self }
    }

    pub fn in_flight(&self) -> usize {
        *self.active.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn max(&self) -> usize {
        self.max
    }
}

impl Default for FetchLimiter {
    fn default() -> Self {
        Self::new(Self::DEFAULT_CONCURRENCY)
    }
}

impl Drop for FetchPermit<'_> {
    fn drop(&mut self) {
        let mut n = self.limiter.active.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.limiter.freed.notify_one();
    }
}

fn query_seed(seed: u64, query: &str) -> u64 {
    let d = Sha256::digest(query.as_bytes());
    seed ^ u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Search, gate, select and fetch, falling back to the next candidate when a
/// download misses its deadline.
#[derive(Clone)]
pub struct AssetPipeline {
    repo: Arc<dyn Repository>,
    fetcher: Arc<dyn Fetcher>,
    clock: Arc<dyn Clock>,
    cache: Arc<AssetCache>,
    limiter: Arc<FetchLimiter>,
    pub options: AcquireOptions,
}

impl AssetPipeline {
    pub fn new(repo: Arc<dyn Repository>, fetcher: Arc<dyn Fetcher>, clock: Arc<dyn Clock>) -> Self {
        Self {
            repo,
            fetcher,
            clock,
            cache: Arc::new(AssetCache::in_memory()),
            limiter: Arc::new(FetchLimiter::default()),
            options: AcquireOptions::default(),
        }
    }

    pub fn with_cache(mut self, cache: Arc<AssetCache>) -> Self {
        self.cache = cache;
        self
    }

    pub fn with_options(mut self, options: AcquireOptions) -> Self {
        self.options = options;
        self
    }

    pub fn cache(&self) -> &AssetCache {
        &self.cache
    }

    pub fn limiter(&self) -> &FetchLimiter {
        &self.limiter
    }

    pub fn repository(&self) -> &dyn Repository {
        &*self.repo
    }

    pub fn acquire_with(&self, query: &str, opts: &AcquireOptions, scene_vertex_load: u64) -> Result<AssetHandle, AssetError> {
        if !(opts.deadline > Duration::ZERO) {
            return Err(AssetError::InvalidOptions("deadline must be positive".into()));
        }
        if opts.max_attempts == 0 {
            return Err(AssetError::InvalidOptions("max_attempts must be at least 1".into()));
        }
        let found = self.repo.search(query);
        if found.is_empty() {
            return Err(AssetError::NotFound { query: query.into() });
        }
        let mut denied = None;
        let mut pool: Vec<_> = found
            .into_iter()
            .filter(|r| match check_budget(scene_vertex_load, r, &opts.budget) {
                Admission::Admit => true,
                Admission::Deny(reason) => {
                    if denied.is_none() {
                        denied = Some(reason);
                    }
                    false
                }
            })
            .collect();
        if pool.is_empty() {
            return Err(AssetError::BudgetExceeded {
                query: query.into(),
                reason: denied.expect("something was denied"),
            });
        }

        let seed = query_seed(opts.seed, &query.trim().to_lowercase());
        let mut excluded = BTreeSet::new();
        let mut attempts = 0;
        while attempts < opts.max_attempts && !pool.is_empty() {
            let pick = select(&pool, seed.wrapping_add(attempts as u64), opts.top_k)?.clone();
            if let Some(mut hit) = self.cache.get(&pick.id) {
                hit.fetch_latency = Duration::ZERO;
                hit.from_cache = true;
                return Ok(hit);
            }
            attempts += 1;
            let outcome = {
                let _permit = self.limiter.acquire();
                self.fetcher.fetch(&pick, opts.deadline)
            };
            match outcome {
                FetchOutcome::Completed { latency } if latency <= opts.deadline => {
                    debug!(id = %pick.id, ?latency, "fetched");
                    return Ok(self.cache.insert(AssetHandle::new(pick, latency)));
                }
                other => {
                    debug!(id = %pick.id, ?other, "fetch attempt abandoned");
                    excluded.insert(pick.id.clone());
                    pool.retain(|r| !excluded.contains(&r.id));
                }
            }
        }
        Err(AssetError::AllAttemptsTimedOut {
            query: query.into(),
            attempts,
        })
    }

    pub fn acquire(&self, query: &str, scene_vertex_load: u64) -> Result<AssetHandle, AssetError> {
        let opts = self.options;
        self.acquire_with(query, &opts, scene_vertex_load)
    }

    pub fn now(&self) -> Duration {
        self.clock.now()
    }
}

impl AssetProvider for AssetPipeline {
    fn acquire(&mut self, query: &str, scene_vertex_load: u64) -> Result<AssetHandle, AssetError> {
        AssetPipeline::acquire(self, query, scene_vertex_load)
    }
}
