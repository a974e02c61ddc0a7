use serde::{Deserialize, Serialize};

use super::record::AssetRecord;

/// Geometric complexity caps standing in for frame-rate protection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_scene_vertices: u64,
    pub max_single_asset_vertices: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_scene_vertices: 500_000,
            max_single_asset_vertices: 100_000,
        }
    }
}

impl Budget {
    pub fn new(max_scene_vertices: u64, max_single_asset_vertices: u64) -> Result<Self, String> {
        if max_single_asset_vertices > max_scene_vertices {
            return Err("per-asset vertex cap exceeds the per-scene cap".into());
        }
        Ok(Self {
            max_scene_vertices,
            max_single_asset_vertices,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DenyReason {
    SingleAssetCap { vertices: u64, cap: u64 },
    SceneCap { load: u64, vertices: u64, cap: u64 },
}

impl std::fmt::Display for DenyReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DenyReason::SingleAssetCap { vertices, cap } => {
                write!(f, "model has {vertices} vertices, above the per-model cap of {cap}")
            }
            DenyReason::SceneCap { load, vertices, cap } => write!(
                f,
                "scene already holds {load} vertices; adding {vertices} exceeds the scene cap of {cap}"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Admit,
    Deny(DenyReason),
}

pub fn check_budget(scene_vertex_load: u64, record: &AssetRecord, budget: &Budget) -> Admission {
    if record.vertex_count > budget.max_single_asset_vertices {
        return Admission::Deny(DenyReason::SingleAssetCap {
            vertices: record.vertex_count,
            cap: budget.max_single_asset_vertices,
        });
    }
    if scene_vertex_load.saturating_add(record.vertex_count) > budget.max_scene_vertices {
        return Admission::Deny(DenyReason::SceneCap {
            load: scene_vertex_load,
            vertices: record.vertex_count,
            cap: budget.max_scene_vertices,
        });
    }
    Admission::Admit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Vec3;

    fn rec(verts: u64) -> AssetRecord {
        AssetRecord {
            id: "r".into(),
            name: "r".into(),
            tags: Default::default(),
            likes: 0,
            vertex_count: verts,
            size_bytes: 0,
            download_url: "mock://r".into(),
            base_extents: Vec3::ONE,
        }
    }

    #[test]
    fn default_caps() {
        let b = Budget::default();
        assert_eq!(check_budget(0, &rec(50_000), &b), Admission::Admit);
        // 480k + 50k = 530k > 500k
        assert!(matches!(
            check_budget(480_000, &rec(50_000), &b),
            Admission::Deny(DenyReason::SceneCap { .. })
        ));
        // 200k > 100k per-asset cap
        assert!(matches!(
            check_budget(0, &rec(200_000), &b),
            Admission::Deny(DenyReason::SingleAssetCap { .. })
        ));
        // exactly at the scene cap is still admitted
        assert_eq!(check_budget(450_000, &rec(50_000), &b), Admission::Admit);
    }

    #[test]
    fn caps_must_nest() {
        assert!(Budget::new(10, 20).is_err());
        assert!(Budget::new(20, 20).is_ok());
    }
}
