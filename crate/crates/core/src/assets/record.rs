use std::collections::BTreeSet;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::math::Vec3;
use crate::scene::AssetRef;

/// One entry of the model repository.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetRecord {
    pub id: String,
    pub name: String,
    pub tags: BTreeSet<String>,
    pub likes: u64,
    pub vertex_count: u64,
    pub size_bytes: u64,
    pub download_url: String,
    /// Real-world extents of the model in meters.
    pub base_extents: Vec3,
}

impl AssetRecord {
    pub fn matches(&self, needle_lower: &str) -> bool {
        self.name.to_lowercase().contains(needle_lower) || self.tags.iter().any(|t| t.to_lowercase().contains(needle_lower))
    }

    pub fn asset_ref(&self) -> AssetRef {
        AssetRef {
            id: self.id.clone(),
            download_url: self.download_url.clone(),
            vertex_count: self.vertex_count,
        }
    }
}

/// A fetched asset, ready to spawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetHandle {
    pub record: AssetRecord,
    /// Set once the extents have been fitted into the unit box.
    pub normalized: bool,
    pub cache_path: Option<PathBuf>,
    pub fetch_latency: Duration,
    pub from_cache: bool,
}

impl AssetHandle {
    pub fn new(record: AssetRecord, fetch_latency: Duration) -> Self {
        Self {
            normalized: record.base_extents.max_component() > 0.0,
            record,
            cache_path: None,
            fetch_latency,
            from_cache: false,
        }
    }

    /// Extents scaled so the largest side is 1, which is how freshly loaded
    /// models arrive in the scene.
    pub fn unit_extents(&self) -> Vec3 {
        let m = self.record.base_extents.max_component();
        if m > 0.0 {
            self.record.base_extents * (1.0 / m)
        } else {
            Vec3::ONE
        }
    }

    /// Largest real-world side in meters.
    pub fn natural_max_extent(&self) -> f64 {
        self.record.base_extents.max_component()
    }

    pub fn asset_ref(&self) -> AssetRef {
        self.record.asset_ref()
    }
}
