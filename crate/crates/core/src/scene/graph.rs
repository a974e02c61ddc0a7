use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::entity::{Entity, EntityId, EntityKind, EntitySpec};
use super::joints::{HandId, Joint, JointKey};
use crate::math::{Aabb, Axis, Quat, Vec3, CONTACT_EPS};

/// Number of extra placement attempts made after an overlapping first guess.
pub const PLACEMENT_NUDGES: u32 = 16;
/// Each nudge pushes the candidate a further 10% of the base offset.
pub const NUDGE_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("an entity named `{0}` already exists")]
    DuplicateName(String),
    #[error("position {0} lies outside the scene bounds")]
    OutOfBounds(Vec3),
    #[error("entity has degenerate (all-zero) extents")]
    DegenerateExtents,
    #[error("no admissible non-overlapping placement found")]
    Overlap,
    #[error("mass must be positive, got {0}")]
    NonpositiveMass(f64),
    #[error("unknown joint `{0}`")]
    UnknownJoint(String),
    #[error("no entity with id {0}")]
    UnknownEntity(EntityId),
    #[error("anchor and placed entity are the same ({0})")]
    SelfAnchor(EntityId),
    #[error("structural entity {0} cannot be modified")]
    Structural(EntityId),
    #[error("invalid value: {0}")]
    InvalidValue(String),
}

impl SceneError {
    /// Stable error code used on the wire and in reports.
    pub fn code(&self) -> &'static str {
        match self {
            SceneError::DuplicateName(_) => "DUPLICATE_NAME",
            SceneError::OutOfBounds(_) => "OUT_OF_BOUNDS",
            SceneError::DegenerateExtents => "DEGENERATE_EXTENTS",
            SceneError::Overlap => "OVERLAP",
            SceneError::NonpositiveMass(_) => "NONPOSITIVE_MASS",
            SceneError::UnknownJoint(_) => "UNKNOWN_JOINT",
            SceneError::UnknownEntity(_) => "UNKNOWN_ENTITY",
            SceneError::SelfAnchor(_) => "SELF_ANCHOR",
            SceneError::Structural(_) => "STRUCTURAL",
            SceneError::InvalidValue(_) => "INVALID_VALUE",
        }
    }
}

pub type SceneResult<T> = Result<T, SceneError>;

/// The replicated world state: a bounded room of entities stepped on a fixed
/// logical tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub(crate) bounds: Aabb,
    pub(crate) entities: BTreeMap<EntityId, Entity>,
    pub(crate) tick: u64,
    pub(crate) time_scale: f64,
    pub(crate) rng_seed: u64,
    pub(crate) next_id: u64,
    pub(crate) joint_poses: BTreeMap<JointKey, Vec3>,
    pub(crate) strict_names: bool,
}

/// Names of the six structural entities of the holodeck room, with their
/// center and extents. Walls are zero-thickness slabs.
pub const HOLODECK_STRUCTURE: [(&str, Vec3, Vec3); 6] = [
    ("Floor", Vec3::new(0.0, 0.0, 0.0), Vec3::new(10.0, 0.0, 10.0)),
    ("Ceiling", Vec3::new(0.0, 10.0, 0.0), Vec3::new(10.0, 0.0, 10.0)),
    ("North Wall", Vec3::new(0.0, 0.0, 5.0), Vec3::new(10.0, 10.0, 0.0)),
    ("East Wall", Vec3::new(5.0, 0.0, 0.0), Vec3::new(0.0, 10.0, 10.0)),
    ("South Wall", Vec3::new(0.0, 0.0, -5.0), Vec3::new(10.0, 10.0, 0.0)),
    ("West Wall", Vec3::new(-5.0, 0.0, 0.0), Vec3::new(0.0, 10.0, 10.0)),
];

impl SceneGraph {
    pub fn new(bounds: Aabb, rng_seed: u64) -> Self {
        Self {
            bounds,
            entities: BTreeMap::new(),
            tick: 0,
            time_scale: 1.0,
            rng_seed,
            next_id: 1,
            joint_poses: BTreeMap::new(),
            strict_names: false,
        }
    }

    /// The empty 10×10×10 m room: floor at y = 0, ceiling at y = 10, walls at
    /// x/z = ±5.
    pub fn holodeck_room(rng_seed: u64) -> Self {
        let bounds = Aabb::new(Vec3::new(-5.0, 0.0, -5.0), Vec3::new(5.0, 10.0, 5.0));
        let mut scene = Self::new(bounds, rng_seed);
        for (name, center, extents) in HOLODECK_STRUCTURE {
            scene
                .spawn_entity(EntitySpec::new(name, EntityKind::Structural, center).with_extents(extents))
                .expect("room structure fits its own bounds");
        }
        scene
    }

    /// Reject duplicate names on spawn instead of accepting them.
    pub fn set_strict_names(&mut self, strict: bool) {
        self.strict_names = strict;
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time_scale(&self) -> f64 {
        self.time_scale
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn next_id(&self) -> u64 {
        self.next_id
    }

    pub fn set_time_scale(&mut self, factor: f64) -> SceneResult<()> {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(SceneError::InvalidValue(format!("time scale {factor} outside (0, 1]")));
        }
        self.time_scale = factor;
        Ok(())
    }

    pub fn entity(&self, id: EntityId) -> Option<&Entity> {
        self.entities.get(&id)
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn find_by_name(&self, name: &str) -> Option<&Entity> {
        self.entities.values().find(|e| e.name == name)
    }

    pub fn joint_pose(&self, key: JointKey) -> Vec3 {
        self.joint_poses.get(&key).copied().unwrap_or_default()
    }

    /// Set the tracked pose of a joint. Anchors and attachments follow it on
    /// the next step.
    pub fn set_joint_pose(&mut self, key: JointKey, position: Vec3) -> SceneResult<()> {
        if !position.is_finite() {
            return Err(SceneError::InvalidValue("non-finite joint pose".into()));
        }
        self.joint_poses.insert(key, position);
        Ok(())
    }

    pub(crate) fn entity_mut(&mut self, id: EntityId) -> SceneResult<&mut Entity> {
        self.entities.get_mut(&id).ok_or(SceneError::UnknownEntity(id))
    }

    fn mutable_entity(&mut self, id: EntityId) -> SceneResult<&mut Entity> {
        let e = self.entity_mut(id)?;
        if e.kind == EntityKind::Structural {
            return Err(SceneError::Structural(id));
        }
        Ok(e)
    }

    /// Total vertex count of loaded assets currently in the scene.
    pub fn vertex_load(&self) -> u64 {
        self.entities
            .values()
            .filter_map(|e| e.asset.as_ref())
            .map(|a| a.vertex_count)
            .sum()
    }

    pub fn spawn_entity(&mut self, spec: EntitySpec) -> SceneResult<EntityId> {
        if self.strict_names && self.find_by_name(&spec.name).is_some() {
            return Err(SceneError::DuplicateName(spec.name));
        }
        let extents = spec.resolved_extents();
        if !extents.is_finite() || extents.min_component() < 0.0 {
            return Err(SceneError::InvalidValue(format!("extents {extents}")));
        }
        let anchor = matches!(spec.kind, EntityKind::JointAnchor { .. });
        if !anchor && extents.max_component() <= 0.0 {
            return Err(SceneError::DegenerateExtents);
        }
        if !spec.position.is_finite() || !self.bounds.contains_point(spec.position) {
            return Err(SceneError::OutOfBounds(spec.position));
        }
        let scale = spec.scale.unwrap_or(1.0);
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(SceneError::InvalidValue(format!("scale {scale}")));
        }
        let id = EntityId(self.next_id);
        self.next_id += 1;
        self.entities.insert(
            id,
            Entity {
                id,
                name: spec.name,
                kind: spec.kind,
                position: spec.position,
                rotation: Quat::IDENTITY,
                scale,
                base_extents: extents,
                velocity: spec.velocity,
                mass: None,
                parent: None,
                asset: spec.asset,
            },
        );
        Ok(id)
    }

    /// Insert or replace an entity under its own id (replication path).
    pub fn upsert_entity(&mut self, entity: Entity) {
        self.next_id = self.next_id.max(entity.id.0 + 1);
        self.entities.insert(entity.id, entity);
    }

    pub fn remove_entity(&mut self, id: EntityId) -> Option<Entity> {
        let removed = self.entities.remove(&id)?;
        for e in self.entities.values_mut() {
            if e.parent == Some(id) {
                e.parent = None;
            }
        }
        Some(removed)
    }

    pub(crate) fn set_next_id(&mut self, next: u64) {
        self.next_id = self.next_id.max(next);
    }

    /// Rescale so the largest effective extent equals `target`. Returns the
    /// factor applied relative to the previous scale.
    pub fn normalize_scale(&mut self, id: EntityId, target_max_extent: f64) -> SceneResult<f64> {
        if !(target_max_extent > 0.0 && target_max_extent.is_finite()) {
            return Err(SceneError::InvalidValue(format!("target extent {target_max_extent}")));
        }
        let e = self.mutable_entity(id)?;
        let base_max = e.base_extents.max_component();
        if base_max <= 0.0 {
            return Err(SceneError::DegenerateExtents);
        }
        let new_scale = target_max_extent / base_max;
        let factor = new_scale / e.scale;
        e.scale = new_scale;
        Ok(factor)
    }

    /// Move `id` next to `anchor`: the new center is the anchor center plus
    /// `direction ⊙ (anchor half-extents + entity half-extents)`, shifted
    /// just enough that the whole box stays inside the room. On overlap the
    /// candidate is pushed further along the direction.
    pub fn place_next_to(&mut self, anchor: EntityId, id: EntityId, direction: Vec3) -> SceneResult<Vec3> {
        if anchor == id {
            return Err(SceneError::SelfAnchor(id));
        }
        if !direction.is_finite() {
            return Err(SceneError::InvalidValue("non-finite direction".into()));
        }
        let anchor_e = self.entity(anchor).ok_or(SceneError::UnknownEntity(anchor))?;
        let placed = self.entity(id).ok_or(SceneError::UnknownEntity(id))?;
        if placed.kind == EntityKind::Structural {
            return Err(SceneError::Structural(id));
        }
        let base_offset = direction.mul_elem(anchor_e.half_extents() + placed.half_extents());
        let origin = anchor_e.position;
        let extents = placed.extents();

        for attempt in 0..=PLACEMENT_NUDGES {
            let raw = origin + base_offset * (1.0 + NUDGE_FRACTION * attempt as f64);
            if !self.bounds.contains_point(raw) {
                return Err(SceneError::OutOfBounds(raw));
            }
            let candidate = self.settle_inside(raw, extents).ok_or(SceneError::OutOfBounds(raw))?;
            let footprint = Aabb::from_center_extents(candidate, extents);
            let blocked = self
                .entities
                .values()
                .filter(|o| o.id != id && o.kind.is_content())
                .any(|o| o.aabb().overlaps(&footprint));
            if !blocked {
                self.entity_mut(id)?.position = candidate;
                return Ok(candidate);
            }
        }
        Err(SceneError::Overlap)
    }

    /// Nearest center to `center` whose box fits the bounds; `None` if the
    /// box is larger than the room along some axis.
    fn settle_inside(&self, center: Vec3, extents: Vec3) -> Option<Vec3> {
        let mut out = center;
        for a in Axis::ALL {
            let half = extents.get(a) * 0.5;
            let (lo, hi) = (self.bounds.min.get(a) + half, self.bounds.max.get(a) - half);
            if lo > hi + CONTACT_EPS {
                return None;
            }
            out.set(a, center.get(a).clamp(lo, hi.max(lo)));
        }
        Some(out)
    }

    pub fn move_to(&mut self, id: EntityId, position: Vec3) -> SceneResult<()> {
        if !position.is_finite() || !self.bounds.contains_point(position) {
            return Err(SceneError::OutOfBounds(position));
        }
        self.mutable_entity(id)?.position = position;
        Ok(())
    }

    pub fn add_physics(&mut self, id: EntityId, mass: f64) -> SceneResult<()> {
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(SceneError::NonpositiveMass(mass));
        }
        self.mutable_entity(id)?.mass = Some(mass);
        Ok(())
    }

    fn anchor_for(&mut self, key: JointKey) -> SceneResult<EntityId> {
        let existing = self
            .entities
            .values()
            .find(|e| e.kind == EntityKind::JointAnchor { key })
            .map(|e| e.id);
        if let Some(id) = existing {
            return Ok(id);
        }
        let pose = self.joint_pose(key);
        let name = if key.hand == 0 {
            key.joint.name().to_owned()
        } else {
            format!("{}#{}", key.joint.name(), key.hand)
        };
        let mut spec = EntitySpec::new(name, EntityKind::JointAnchor { key }, pose);
        spec.base_extents = Some(Vec3::ZERO);
        // tracked hands can sit outside the room; anchors are not bounded
        let id = EntityId(self.next_id);
        self.next_id += 1;
        self.entities.insert(
            id,
            Entity {
                id,
                name: spec.name,
                kind: spec.kind,
                position: pose,
                rotation: Quat::IDENTITY,
                scale: 1.0,
                base_extents: Vec3::ZERO,
                velocity: Vec3::ZERO,
                mass: None,
                parent: None,
                asset: None,
            },
        );
        Ok(id)
    }

    /// Parent `id` to a hand joint, detaching whatever was held there.
    pub fn attach_to_joint(&mut self, id: EntityId, hand: HandId, joint: &str) -> SceneResult<EntityId> {
        let joint = Joint::from_name(joint).ok_or_else(|| SceneError::UnknownJoint(joint.to_owned()))?;
        {
            let e = self.entity(id).ok_or(SceneError::UnknownEntity(id))?;
            if !e.kind.is_content() {
                return Err(SceneError::Structural(id));
            }
        }
        let key = JointKey::new(hand, joint);
        let anchor = self.anchor_for(key)?;
        let pose = self.entities[&anchor].position;
        for e in self.entities.values_mut() {
            if e.parent == Some(anchor) && e.id != id {
                e.parent = None;
            }
        }
        let e = self.entity_mut(id)?;
        e.parent = Some(anchor);
        e.position = pose;
        e.velocity = Vec3::ZERO;
        Ok(anchor)
    }

    /// Remove every loaded-asset and primitive entity. Structure and joint
    /// anchors stay.
    pub fn destroy_loaded(&mut self) -> usize {
        let doomed: Vec<EntityId> = self.entities.values().filter(|e| e.kind.is_content()).map(|e| e.id).collect();
        for id in &doomed {
            self.entities.remove(id);
        }
        doomed.len()
    }
}
