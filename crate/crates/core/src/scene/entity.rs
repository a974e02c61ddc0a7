use std::fmt;

use serde::{Deserialize, Serialize};

use super::joints::JointKey;
use crate::math::{Aabb, Quat, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u64);

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveShape {
    Cube,
    Sphere,
    Cylinder,
    Plane,
}

impl PrimitiveShape {
    pub const ALL: [PrimitiveShape; 4] = [
        PrimitiveShape::Cube,
        PrimitiveShape::Sphere,
        PrimitiveShape::Cylinder,
        PrimitiveShape::Plane,
    ];

    /// Extents at scale 1, following the usual engine primitives.
    pub fn unit_extents(self) -> Vec3 {
        match self {
            PrimitiveShape::Cube | PrimitiveShape::Sphere => Vec3::ONE,
            PrimitiveShape::Cylinder => Vec3::new(1.0, 2.0, 1.0),
            PrimitiveShape::Plane => Vec3::new(10.0, 0.0, 10.0),
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            PrimitiveShape::Cube => "cube",
            PrimitiveShape::Sphere => "sphere",
            PrimitiveShape::Cylinder => "cylinder",
            PrimitiveShape::Plane => "plane",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.keyword() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EntityKind {
    LoadedAsset,
    Primitive { shape: PrimitiveShape },
    Structural,
    JointAnchor { key: JointKey },
}

impl EntityKind {
    pub fn tag(&self) -> &'static str {
        match self {
            EntityKind::LoadedAsset => "loaded_asset",
            EntityKind::Primitive { .. } => "primitive",
            EntityKind::Structural => "structural",
            EntityKind::JointAnchor { .. } => "joint_anchor",
        }
    }

    /// Kinds that take part in overlap checks and destroy-all.
    pub fn is_content(&self) -> bool {
        matches!(self, EntityKind::LoadedAsset | EntityKind::Primitive { .. })
    }
}

/// Repository reference for a loaded asset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssetRef {
    pub id: String,
    pub download_url: String,
    pub vertex_count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub name: String,
    pub kind: EntityKind,
    /// Center of the bounding box.
    pub position: Vec3,
    pub rotation: Quat,
    pub scale: f64,
    /// Full axis-aligned extents at scale 1.
    pub base_extents: Vec3,
    pub velocity: Vec3,
    /// Present iff physics is enabled.
    pub mass: Option<f64>,
    /// Joint-anchor entity this entity follows.
    pub parent: Option<EntityId>,
    pub asset: Option<AssetRef>,
}

impl Entity {
    pub fn extents(&self) -> Vec3 {
        self.base_extents * self.scale
    }

    pub fn half_extents(&self) -> Vec3 {
        self.extents() * 0.5
    }

    pub fn max_extent(&self) -> f64 {
        self.extents().max_component()
    }

    pub fn aabb(&self) -> Aabb {
        Aabb::from_center_extents(self.position, self.extents())
    }

    pub fn has_physics(&self) -> bool {
        self.mass.is_some()
    }
}

/// Description used to spawn a new entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySpec {
    pub name: String,
    pub kind: EntityKind,
    pub position: Vec3,
    /// Defaults to the primitive's unit extents, or the unit box for loaded
    /// assets.
    pub base_extents: Option<Vec3>,
    pub scale: Option<f64>,
    pub velocity: Vec3,
    pub asset: Option<AssetRef>,
}

impl EntitySpec {
    pub fn new(name: impl Into<String>, kind: EntityKind, position: Vec3) -> Self {
        Self {
            name: name.into(),
            kind,
            position,
            base_extents: None,
            scale: None,
            velocity: Vec3::ZERO,
            asset: None,
        }
    }

    pub fn primitive(name: impl Into<String>, shape: PrimitiveShape, position: Vec3) -> Self {
        Self::new(name, EntityKind::Primitive { shape }, position)
    }

    pub fn loaded(name: impl Into<String>, asset: AssetRef, base_extents: Vec3, position: Vec3) -> Self {
        let mut spec = Self::new(name, EntityKind::LoadedAsset, position);
        spec.asset = Some(asset);
        spec.base_extents = Some(base_extents);
        spec
    }

    pub fn with_extents(mut self, extents: Vec3) -> Self {
        self.base_extents = Some(extents);
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = Some(scale);
        self
    }

    pub fn with_velocity(mut self, velocity: Vec3) -> Self {
        self.velocity = velocity;
        self
    }

    pub(crate) fn resolved_extents(&self) -> Vec3 {
        self.base_extents.unwrap_or(match self.kind {
            EntityKind::Primitive { shape } => shape.unit_extents(),
            EntityKind::JointAnchor { .. } => Vec3::ZERO,
            EntityKind::LoadedAsset | EntityKind::Structural => Vec3::ONE,
        })
    }
}
