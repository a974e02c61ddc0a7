//! Download side of the repository: clocks and fetchers.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use super::record::AssetRecord;

pub trait Clock: Send + Sync {
    fn now(&self) -> Duration;
}

/// Wall-clock time since construction.
#[derive(Debug, Clone)]
pub struct SystemClock {
    origin: Instant,
}

impl Default for SystemClock {
    fn default() -> Self {
        Self { origin: Instant::now() }
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }
}

/// Manually advanced clock shared between a simulated fetcher and whoever
/// measures it.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock {
    now: Arc<Mutex<Duration>>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, by: Duration) {
        *self.now.lock().unwrap_or_else(|e| e.into_inner()) += by;
    }

    pub fn now(&self) -> Duration {
        *self.now.lock().unwrap_or_else(|e| e.into_inner())
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        VirtualClock::now(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchOutcome {
    Completed { latency: Duration },
    TimedOut { waited: Duration },
    Failed { reason: String },
}

/// Downloads a record's payload by URL, giving up at `deadline`.
pub trait Fetcher: Send + Sync {
    fn fetch(&self, record: &AssetRecord, deadline: Duration) -> FetchOutcome;
}

/// Latency model for records without a scripted latency.
#[derive(Debug, Clone, Copy)]
pub struct LinkModel {
    pub base: Duration,
    pub bytes_per_sec: u64,
}

impl Default for LinkModel {
    fn default() -> Self {
        // ~40 Mbit/s after a 150 ms handshake
        Self {
            base: Duration::from_millis(150),
            bytes_per_sec: 5_000_000,
        }
    }
}

impl LinkModel {
    pub fn latency_for(&self, record: &AssetRecord) -> Duration {
        self.base + Duration::from_secs_f64(record.size_bytes as f64 / self.bytes_per_sec.max(1) as f64)
    }
}

/// Fetcher that spends virtual time instead of doing I/O. Latencies can be
/// scripted per record id; unscripted records use the link model.
pub struct SimulatedFetcher {
    clock: VirtualClock,
    scripted: HashMap<String, Duration>,
    failing: Vec<String>,
    link: LinkModel,
    fetches: AtomicUsize,
    log: Mutex<Vec<String>>,
}

impl SimulatedFetcher {
    pub fn new(clock: VirtualClock) -> Self {
        Self {
            clock,
            scripted: HashMap::new(),
            failing: Vec::new(),
            link: LinkModel::default(),
            fetches: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn with_latency(mut self, id: impl Into<String>, latency: Duration) -> Self {
        self.scripted.insert(id.into(), latency);
        self
    }

    pub fn with_failure(mut self, id: impl Into<String>) -> Self {
        self.failing.push(id.into());
        self
    }

    pub fn with_link(mut self, link: LinkModel) -> Self {
        self.link = link;
        self
    }

    pub fn clock(&self) -> &VirtualClock {
        &self.clock
    }

    /// Number of fetch attempts made so far.
    pub fn fetch_count(&self) -> usize {
        self.fetches.load(Ordering::SeqCst)
    }

    /// Record ids in the order they were fetched.
    pub fn fetched_ids(&self) -> Vec<String> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl Fetcher for SimulatedFetcher {
    fn fetch(&self, record: &AssetRecord, deadline: Duration) -> FetchOutcome {
        self.fetches.fetch_add(1, Ordering::SeqCst);
        self.log.lock().unwrap_or_else(|e| e.into_inner()).push(record.id.clone());
        if self.failing.contains(&record.id) {
            return FetchOutcome::Failed {
                reason: format!("{} refused the connection", record.download_url),
            };
        }
        let latency = self
            .scripted
            .get(&record.id)
            .copied()
            .unwrap_or_else(|| self.link.latency_for(record));
        if latency > deadline {
            self.clock.advance(deadline);
            FetchOutcome::TimedOut { waited: deadline }
        } else {
            self.clock.advance(latency);
            FetchOutcome::Completed { latency }
        }
    }
}

impl<F: Fetcher + ?Sized> Fetcher for Arc<F> {
    fn fetch(&self, record: &AssetRecord, deadline: Duration) -> FetchOutcome {
        (**self).fetch(record, deadline)
    }
}
