use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ast::{binding_key, CapabilitySet, Node, Program, Span, Statement, MAX_DEPTH, MAX_REPEAT};
use crate::math::Vec3;
use crate::scene::{EntityId, EntityKind, Joint, SceneGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagnosticKind {
    Unbound,
    Bounds,
    Capability,
    RepeatLimit,
    NestingDepth,
    UnknownJoint,
    InvalidValue,
    Immutable,
}

impl DiagnosticKind {
    pub fn code(self) -> &'static str {
        match self {
            DiagnosticKind::Unbound => "UNBOUND",
            DiagnosticKind::Bounds => "BOUNDS",
            DiagnosticKind::Capability => "CAPABILITY",
            DiagnosticKind::RepeatLimit => "REPEAT_LIMIT",
            DiagnosticKind::NestingDepth => "NESTING_DEPTH",
            DiagnosticKind::UnknownJoint => "UNKNOWN_JOINT",
            DiagnosticKind::InvalidValue => "INVALID_VALUE",
            DiagnosticKind::Immutable => "IMMUTABLE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub message: String,
    pub span: Span,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}:{}: {}: {}",
            self.span.start_line,
            self.span.start_col,
            self.kind.code(),
            self.message
        )
    }
}

/// Names a program can refer to without binding them first: every content
/// and structural entity in the scene, keyed by [`binding_key`].
pub fn scene_bindings(scene: &SceneGraph) -> BTreeMap<String, (EntityId, bool)> {
    scene
        .entities()
        .filter(|e| e.kind.is_content() || e.kind == EntityKind::Structural)
        .map(|e| (binding_key(&e.name), (e.id, e.kind == EntityKind::Structural)))
        .collect()
}

struct Checker<'a> {
    scene: &'a SceneGraph,
    caps: CapabilitySet,
    /// binding -> is structural
    env: BTreeMap<String, bool>,
    out: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn push(&mut self, kind: DiagnosticKind, span: Span, message: String) {
        self.out.push(Diagnostic { kind, message, span });
    }

    fn target(&mut self, name: &str, span: Span, mutates: bool) {
        match self.env.get(name) {
            None => self.push(DiagnosticKind::Unbound, span, format!("`{name}` is not bound")),
            Some(true) if mutates => self.push(
                DiagnosticKind::Immutable,
                span,
                format!("`{name}` is part of the room and cannot change"),
            ),
            Some(_) => {}
        }
    }

    fn in_bounds(&mut self, p: Vec3, span: Span) {
        if !self.scene.bounds().contains_point(p) {
            let b = self.scene.bounds();
            self.push(
                DiagnosticKind::Bounds,
                span,
                format!("position {p} is outside the room bounds {} .. {}", b.min, b.max),
            );
        }
    }

    fn positive(&mut self, what: &str, v: f64, span: Span) {
        if !(v > 0.0 && v.is_finite()) {
            self.push(
                DiagnosticKind::InvalidValue,
                span,
                format!("{what} must be positive, got {v}"),
            );
        }
    }

    fn block(&mut self, nodes: &[Node], depth: usize) {
        for node in nodes {
            let span = node.span;
            let kind = node.stmt.kind();
            if !self.caps.contains(kind) {
                self.push(
                    DiagnosticKind::Capability,
                    span,
                    format!("`{}` is not enabled for this session", kind.keyword()),
                );
            }
            match &node.stmt {
                Statement::Load { binding, query } => {
                    if query.trim().is_empty() {
                        self.push(DiagnosticKind::InvalidValue, span, "empty model name".into());
                    }
                    self.env.insert(binding.as_str().to_owned(), false);
                }
                Statement::Primitive { binding, .. } => {
                    self.env.insert(binding.as_str().to_owned(), false);
                }
                Statement::Scale { binding, target } => {
                    self.target(binding.as_str(), span, true);
                    self.positive("target size", *target, span);
                }
                Statement::Place {
                    binding,
                    anchor,
                    direction,
                } => {
                    self.target(binding.as_str(), span, true);
                    self.target(anchor.as_str(), span, false);
                    if binding == anchor {
                        self.push(
                            DiagnosticKind::InvalidValue,
                            span,
                            "cannot place a model next to itself".into(),
                        );
                    }
                    if !direction.is_finite() {
                        self.push(DiagnosticKind::InvalidValue, span, "direction must be finite".into());
                    }
                }
                Statement::Move { binding, position } => {
                    self.target(binding.as_str(), span, true);
                    self.in_bounds(*position, span);
                }
                Statement::Physics { binding, mass } => {
                    self.target(binding.as_str(), span, true);
                    self.positive("mass", *mass, span);
                }
                Statement::DestroyAll => {}
                Statement::Attach { binding, joint } => {
                    self.target(binding.as_str(), span, true);
                    if Joint::from_name(joint).is_none() {
                        self.push(DiagnosticKind::UnknownJoint, span, format!("unknown joint `{joint}`"));
                    }
                }
                Statement::Repeat { count, body } => {
                    if !(1..=MAX_REPEAT).contains(count) {
                        self.push(
                            DiagnosticKind::RepeatLimit,
                            span,
                            format!("repeat count {count} outside 1..={MAX_REPEAT}"),
                        );
                    }
                    if depth + 1 > MAX_DEPTH {
                        self.push(
                            DiagnosticKind::NestingDepth,
                            span,
                            format!("repeat nesting deeper than {MAX_DEPTH}"),
                        );
                    }
                    self.block(body, depth + 1);
                }
            }
        }
    }
}

/// Collect every static problem with `program` against `scene`. An empty
/// list means the program may be executed.
pub fn validate(program: &Program, scene: &SceneGraph, caps: CapabilitySet) -> Vec<Diagnostic> {
    let env = scene_bindings(scene).into_iter().map(|(k, (_, s))| (k, s)).collect();
    let mut c = Checker {
        scene,
        caps,
        env,
        out: Vec::new(),
    };
    c.block(&program.statements, 0);
    c.out
}
