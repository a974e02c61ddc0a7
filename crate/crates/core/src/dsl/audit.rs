//! Classify scene changes by the statement kinds able to cause them, without
//! looking at the program that ran.

use serde::Serialize;

use super::ast::{CapabilitySet, StatementKind};
use crate::scene::{EntityKind, SceneGraph};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mutation {
    pub what: String,
    /// Statement kinds that could have produced this change.
    pub causes: Vec<StatementKind>,
}

pub fn scene_mutations(before: &SceneGraph, after: &SceneGraph) -> Vec<Mutation> {
    use StatementKind as K;
    let mut out = Vec::new();
    let mut push = |what: String, causes: &[StatementKind]| {
        out.push(Mutation {
            what,
            causes: causes.to_vec(),
        })
    };
    for e in after.entities() {
        let Some(old) = before.entity(e.id) else {
            let causes: &[StatementKind] = match e.kind {
                EntityKind::LoadedAsset => &[K::Load],
                EntityKind::Primitive { .. } => &[K::Primitive],
                EntityKind::JointAnchor { .. } => &[K::Attach],
                EntityKind::Structural => &[],
            };
            push(format!("created {} `{}`", e.kind.tag(), e.name), causes);
            continue;
        };
        if old.kind != e.kind || old.name != e.name || old.base_extents != e.base_extents || old.asset != e.asset {
            push(format!("identity of `{}` changed", e.name), &[]);
        }
        if old.scale != e.scale {
            push(format!("`{}` rescaled", e.name), &[K::Scale]);
        }
        if old.mass != e.mass {
            push(format!("`{}` mass changed", e.name), &[K::Physics]);
        }
        if old.parent != e.parent {
            push(format!("`{}` reparented", e.name), &[K::Attach]);
        }
        if old.position != e.position || old.velocity != e.velocity {
            push(format!("`{}` moved", e.name), &[K::Place, K::Move, K::Attach]);
        }
    }
    for e in before.entities() {
        if after.entity(e.id).is_none() {
            push(format!("removed `{}`", e.name), &[K::DestroyAll]);
        }
    }
    if before.tick() != after.tick() || before.time_scale() != after.time_scale() {
        push("clock changed".into(), &[]);
    }
    out
}

/// Mutations none of whose possible causes is enabled.
pub fn unexplained(before: &SceneGraph, after: &SceneGraph, caps: CapabilitySet) -> Vec<Mutation> {
    scene_mutations(before, after)
        .into_iter()
        .filter(|m| !m.causes.iter().any(|k| caps.contains(*k)))
        .collect()
}
