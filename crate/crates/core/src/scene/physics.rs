//! Fixed-tick integration: semi-implicit Euler, floor/wall contact for
//! physics bodies, resting support on other content, and event reporting.

use serde::{Deserialize, Serialize};

use super::entity::{EntityId, EntityKind};
use super::graph::SceneGraph;
use crate::math::{Aabb, Axis, Vec3};

pub const GRAVITY: f64 = 9.81;
/// Logical tick rate of every session loop.
pub const TICK_HZ: f64 = 60.0;
pub const TICK_DT: f64 = 1.0 / TICK_HZ;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SceneEvent {
    /// Two content entities' boxes intersect after the step; `a < b`.
    Collision { a: EntityId, b: EntityId },
    /// A kinematic entity's center left the bounds along `axis`.
    OutOfBounds { id: EntityId, axis: Axis, high: bool },
}

impl SceneGraph {
    /// Advance one logical tick of `dt` seconds, dilated by the scene's time
    /// scale.
    pub fn step(&mut self, dt: f64) -> Vec<SceneEvent> {
        assert!(dt > 0.0 && dt.is_finite(), "step requires dt > 0");
        let dt = dt * self.time_scale;
        let mut events = Vec::new();

        // anchors follow tracked joints, attachments follow anchors
        let anchor_poses: Vec<(EntityId, Vec3)> = self
            .entities
            .values()
            .filter_map(|e| match e.kind {
                EntityKind::JointAnchor { key } => Some((e.id, self.joint_pose(key))),
                _ => None,
            })
            .collect();
        for (id, pose) in &anchor_poses {
            if let Some(e) = self.entities.get_mut(id) {
                e.position = *pose;
            }
        }
        for e in self.entities.values_mut() {
            if let Some(parent) = e.parent {
                if let Some((_, pose)) = anchor_poses.iter().find(|(id, _)| *id == parent) {
                    e.position = *pose;
                }
            }
        }

        for e in self.entities.values_mut() {
            if !e.kind.is_content() || e.parent.is_some() {
                continue;
            }
            if e.has_physics() {
                e.velocity.y -= GRAVITY * dt;
            }
            e.position += e.velocity * dt;
        }

        self.resolve_contacts();

        for e in self.entities.values() {
            if !e.kind.is_content() || e.parent.is_some() || e.has_physics() {
                continue;
            }
            for axis in Axis::ALL {
                let p = e.position.get(axis);
                if p < self.bounds.min.get(axis) {
                    events.push(SceneEvent::OutOfBounds {
                        id: e.id,
                        axis,
                        high: false,
                    });
                } else if p > self.bounds.max.get(axis) {
                    events.push(SceneEvent::OutOfBounds {
                        id: e.id,
                        axis,
                        high: true,
                    });
                }
            }
        }

        let movers: Vec<(EntityId, Aabb, bool)> = self
            .entities
            .values()
            .filter(|e| e.kind.is_content())
            .map(|e| (e.id, e.aabb(), e.velocity != Vec3::ZERO || e.parent.is_some()))
            .collect();
        for (i, (a, abox, amoving)) in movers.iter().enumerate() {
            for (b, bbox, bmoving) in &movers[i + 1..] {
                if (*amoving || *bmoving) && abox.overlaps(bbox) {
                    events.push(SceneEvent::Collision { a: *a, b: *b });
                }
            }
        }

        self.tick += 1;
        events
    }

    /// Keep physics bodies inside the room and let them rest on top of other
    /// content below them. Bodies are settled lowest first.
    fn resolve_contacts(&mut self) {
        let mut bodies: Vec<(f64, EntityId)> = self
            .entities
            .values()
            .filter(|e| e.kind.is_content() && e.has_physics() && e.parent.is_none())
            .map(|e| (e.aabb().min.y, e.id))
            .collect();
        bodies.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        for (_, id) in bodies {
            let bounds = self.bounds;
            let (mut pos, mut vel, half) = {
                let e = &self.entities[&id];
                (e.position, e.velocity, e.half_extents())
            };
            for axis in Axis::ALL {
                let lo = bounds.min.get(axis) + half.get(axis);
                let hi = bounds.max.get(axis) - half.get(axis);
                let p = pos.get(axis);
                if p < lo {
                    pos.set(axis, lo);
                    if vel.get(axis) < 0.0 {
                        vel.set(axis, 0.0);
                    }
                } else if p > hi {
                    pos.set(axis, hi);
                    if vel.get(axis) > 0.0 {
                        vel.set(axis, 0.0);
                    }
                }
            }

            let me = Aabb::from_center_extents(pos, half * 2.0);
            let support = self
                .entities
                .values()
                .filter(|o| o.id != id && o.kind.is_content())
                .filter(|o| {
                    let ob = o.aabb();
                    ob.overlaps(&me) && o.position.y < pos.y
                })
                .map(|o| o.aabb().max.y)
                .fold(f64::NEG_INFINITY, f64::max);
            if support.is_finite() && me.min.y < support {
                pos.y = (support + half.y).min(bounds.max.y - half.y);
                if vel.y < 0.0 {
                    vel.y = 0.0;
                }
            }

            let e = self.entities.get_mut(&id).expect("body exists");
            e.position = pos;
            e.velocity = vel;
        }
    }
}
