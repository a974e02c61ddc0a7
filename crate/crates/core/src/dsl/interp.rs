use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{CapabilitySet, Node, Program, Span, Statement, StatementKind, MAX_DEPTH, MAX_REPEAT};
use super::validate::scene_bindings;
use crate::assets::{AssetError, AssetProvider};
use crate::math::Vec3;
use crate::scene::{EntityId, EntitySpec, HandId, SceneError, SceneGraph};

/// Upper bound on statements executed by one program after loop expansion.
pub const MAX_EXECUTED_STATEMENTS: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("`{}` is not enabled for this session", .0.keyword())]
    Capability(StatementKind),
    #[error("`{0}` is not bound")]
    Unbound(String),
    #[error("{0}")]
    Limit(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Asset(#[from] AssetError),
}

impl ExecError {
    pub fn code(&self) -> &'static str {
        match self {
            ExecError::Capability(_) => "CAPABILITY",
            ExecError::Unbound(_) => "UNBOUND",
            ExecError::Limit(_) => "REPEAT_LIMIT",
            ExecError::Scene(SceneError::OutOfBounds(_)) => "BOUNDS",
            ExecError::Scene(e) => e.code(),
            ExecError::Asset(e) => e.code(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatementOutcome {
    pub kind: StatementKind,
    pub span: Span,
    pub ok: bool,
    /// Error code on failure, short description on success.
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExecutionReport {
    pub outcomes: Vec<StatementOutcome>,
    pub created: Vec<EntityId>,
    pub wall_time: Duration,
    /// Index into `outcomes` of the statement that stopped execution.
    pub failed_at: Option<usize>,
    pub error: Option<String>,
    pub error_code: Option<String>,
}

impl ExecutionReport {
    pub fn succeeded(&self) -> bool {
        self.failed_at.is_none()
    }
}

/// Runs validated programs against a scene.
pub struct Interpreter<'a> {
    caps: CapabilitySet,
    hand: HandId,
    assets: &'a mut dyn AssetProvider,
}

struct Run<'s, 'a> {
    scene: &'s mut SceneGraph,
    caps: CapabilitySet,
    hand: HandId,
    assets: &'s mut (dyn AssetProvider + 'a),
    env: BTreeMap<String, EntityId>,
    report: ExecutionReport,
    executed: u64,
}

impl<'a> Interpreter<'a> {
    pub fn new(caps: CapabilitySet, assets: &'a mut dyn AssetProvider) -> Self {
        Self { caps, hand: 0, assets }
    }

    /// Hand whose joints `attach` refers to.
    pub fn with_hand(mut self, hand: HandId) -> Self {
        self.hand = hand;
        self
    }

    /// Execute statements in order, stopping at the first failure. Effects of
    /// earlier statements are kept.
    pub fn execute(&mut self, program: &Program, scene: &mut SceneGraph) -> ExecutionReport {
        let started = Instant::now();
        let env = scene_bindings(scene).into_iter().map(|(k, (id, _))| (k, id)).collect();
        let mut run = Run {
            scene,
            caps: self.caps,
            hand: self.hand,
            assets: &mut *self.assets,
            env,
            report: ExecutionReport::default(),
            executed: 0,
        };
        if let Err(e) = run.block(&program.statements, 0) {
            run.report.error_code = Some(e.code().to_owned());
            run.report.error = Some(e.to_string());
        }
        let mut report = run.report;
        report.wall_time = started.elapsed();
        report
    }
}

/// Rest a freshly created entity on the floor at the room's center.
fn spawn_point(scene: &SceneGraph, extents: Vec3) -> Vec3 {
    let b = scene.bounds();
    let c = b.center();
    Vec3::new(c.x, b.min.y + extents.y * 0.5, c.z)
}

fn fresh_name(scene: &SceneGraph, binding: &str) -> String {
    if scene.find_by_name(binding).is_none() {
        return binding.to_owned();
    }
    (1..)
        .map(|i| format!("{binding}_{i}"))
        .find(|n| scene.find_by_name(n).is_none())
        .expect("unbounded suffix search")
}

impl Run<'_, '_> {
    fn lookup(&self, name: &str) -> Result<EntityId, ExecError> {
        self.env.get(name).copied().ok_or_else(|| ExecError::Unbound(name.to_owned()))
    }

    fn block(&mut self, nodes: &[Node], depth: usize) -> Result<(), ExecError> {
        for node in nodes {
            let kind = node.stmt.kind();
            let slot = self.report.outcomes.len();
            self.report.outcomes.push(StatementOutcome {
                kind,
                span: node.span,
                ok: true,
                detail: String::new(),
            });
            match self.statement(&node.stmt, depth) {
                Ok(detail) => self.report.outcomes[slot].detail = detail,
                Err(e) => {
                    // a failure inside a loop body is reported on the body statement
                    if self.report.failed_at.is_none() {
                        self.report.failed_at = Some(slot);
                        self.report.outcomes[slot].ok = false;
                        self.report.outcomes[slot].detail = e.code().to_owned();
                    } else {
                        self.report.outcomes[slot].ok = false;
                        self.report.outcomes[slot].detail = "ABORTED".into();
                    }
                    return Err(e);
                }
            }
        }
        Ok(())
    }

    fn statement(&mut self, stmt: &Statement, depth: usize) -> Result<String, ExecError> {
        let kind = stmt.kind();
        if !self.caps.contains(kind) {
            return Err(ExecError::Capability(kind));
        }
        self.executed += 1;
        if self.executed > MAX_EXECUTED_STATEMENTS {
            return Err(ExecError::Limit(format!(
                "program would run more than {MAX_EXECUTED_STATEMENTS} statements"
            )));
        }
        match stmt {
            Statement::Load { query, binding } => {
                let handle = self.assets.acquire(query, self.scene.vertex_load())?;
                let extents = handle.unit_extents();
                let name = fresh_name(self.scene, binding.as_str());
                let spec = EntitySpec::loaded(name.clone(), handle.asset_ref(), extents, spawn_point(self.scene, extents));
                let id = self.scene.spawn_entity(spec)?;
                self.env.insert(binding.as_str().to_owned(), id);
                self.report.created.push(id);
                Ok(format!("loaded {} as {name}", handle.record.id))
            }
            Statement::Primitive { shape, binding } => {
                let extents = shape.unit_extents();
                let name = fresh_name(self.scene, binding.as_str());
                let spec = EntitySpec::primitive(name.clone(), *shape, spawn_point(self.scene, extents));
                let id = self.scene.spawn_entity(spec)?;
                self.env.insert(binding.as_str().to_owned(), id);
                self.report.created.push(id);
                Ok(format!("created {} {name}", shape.keyword()))
            }
            Statement::Scale { binding, target } => {
                let id = self.lookup(binding.as_str())?;
                self.scene.normalize_scale(id, *target)?;
                Ok(format!("scaled {binding} to {target}"))
            }
            Statement::Place {
                binding,
                anchor,
                direction,
            } => {
                let id = self.lookup(binding.as_str())?;
                let anchor_id = self.lookup(anchor.as_str())?;
                let at = self.scene.place_next_to(anchor_id, id, *direction)?;
                Ok(format!("placed {binding} at {at}"))
            }
            Statement::Move { binding, position } => {
                let id = self.lookup(binding.as_str())?;
                self.scene.move_to(id, *position)?;
                Ok(format!("moved {binding} to {position}"))
            }
            Statement::Physics { binding, mass } => {
                let id = self.lookup(binding.as_str())?;
                self.scene.add_physics(id, *mass)?;
                Ok(format!("{binding} has mass {mass}"))
            }
            Statement::DestroyAll => {
                let n = self.scene.destroy_loaded();
                let scene = &*self.scene;
                self.env.retain(|_, id| scene.entity(*id).is_some());
                Ok(format!("removed {n}"))
            }
            Statement::Attach { binding, joint } => {
                let id = self.lookup(binding.as_str())?;
                self.scene.attach_to_joint(id, self.hand, joint)?;
                Ok(format!("attached {binding} to {joint}"))
            }
            Statement::Repeat { count, body } => {
                if !(1..=MAX_REPEAT).contains(count) {
                    return Err(ExecError::Limit(format!("repeat count {count} outside 1..={MAX_REPEAT}")));
                }
                if depth + 1 > MAX_DEPTH {
                    return Err(ExecError::Limit(format!("repeat nesting deeper than {MAX_DEPTH}")));
                }
                for _ in 0..*count {
                    self.block(body, depth + 1)?;
                }
                Ok(format!("repeated {count} times"))
            }
        }
    }
}

/// Parse, validate and run in one go. Validation failures are returned as a
/// report with nothing executed.
pub fn run_source(
    source: &str,
    scene: &mut SceneGraph,
    caps: CapabilitySet,
    assets: &mut dyn AssetProvider,
) -> Result<ExecutionReport, String> {
    let program = super::parse(source).map_err(|e| e.to_string())?;
    let diags = super::validate(&program, scene, caps);
    if let Some(d) = diags.first() {
        return Err(d.to_string());
    }
    Ok(Interpreter::new(caps, assets).execute(&program, scene))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::{AssetPipeline, MockCatalog, SimulatedFetcher, VirtualClock};
    use crate::dsl::parse;
    use crate::scene::EntityKind;
    use std::sync::Arc;

    pub(crate) fn mock_pipeline() -> AssetPipeline {
        let clock = VirtualClock::new();
        AssetPipeline::new(
            Arc::new(MockCatalog::bundled()),
            Arc::new(SimulatedFetcher::new(clock.clone())),
            Arc::new(clock),
        )
    }

    fn run(src: &str, scene: &mut SceneGraph) -> ExecutionReport {
        let mut p = mock_pipeline();
        let prog = parse(src).unwrap();
        assert!(crate::dsl::validate(&prog, scene, CapabilitySet::all()).is_empty());
        Interpreter::new(CapabilitySet::all(), &mut p).execute(&prog, scene)
    }

    const DESK_AND_FLASHLIGHT: &str = r#"
load "Computer Desk" as desk
scale desk 1.77
physics desk 30
place desk next_to north_wall (0, 0, -0.5)
load "Flashlight" as flashlight
scale flashlight 0.2
place flashlight next_to desk (0, 1, 0)
physics flashlight 0.25
"#;

    #[test]
    fn desk_and_flashlight() {
        let mut scene = SceneGraph::holodeck_room(1);
        let r = run(DESK_AND_FLASHLIGHT, &mut scene);
        assert!(r.succeeded(), "{r:?}");
        assert_eq!(r.created.len(), 2);
        let desk = scene.find_by_name("desk").unwrap();
        let light = scene.find_by_name("flashlight").unwrap();
        assert!((desk.max_extent() - 1.77).abs() < 1e-6);
        assert!((light.max_extent() - 0.2).abs() < 1e-6);
        assert_eq!(desk.mass, Some(30.0));
        assert_eq!(light.mass, Some(0.25));
        assert!(light.aabb().min.y >= desk.aabb().max.y - 1e-9);
        assert!(scene.bounds().contains_box(&desk.aabb()) && scene.bounds().contains_box(&light.aabb()));
        assert!((desk.aabb().min.y).abs() < 1e-9 && (desk.aabb().max.z - 5.0).abs() < 1e-9);
    }

    #[test]
    fn destroy_all_clears_content() {
        let mut scene = SceneGraph::holodeck_room(1);
        run("primitive cube as a\nprimitive sphere as b", &mut scene);
        let structure = scene.len() - 2;
        let r = run("destroy_all", &mut scene);
        assert!(r.succeeded());
        assert_eq!(scene.len(), structure);
        assert!(scene.entities().all(|e| !e.kind.is_content()));
    }

    #[test]
    fn repeat_deduplicates_names() {
        let mut scene = SceneGraph::holodeck_room(1);
        let r = run("repeat 3 { primitive cube as c }", &mut scene);
        assert_eq!(r.created.len(), 3);
        let names: Vec<_> = r.created.iter().map(|id| scene.entity(*id).unwrap().name.clone()).collect();
        assert_eq!(names, ["c", "c_1", "c_2"]);
    }

    #[test]
    fn failure_keeps_earlier_effects() {
        let mut scene = SceneGraph::holodeck_room(1);
        let mut p = mock_pipeline();
        let prog = parse("primitive cube as a\nload \"zzqx\" as b\nprimitive cube as c").unwrap();
        let r = Interpreter::new(CapabilitySet::all(), &mut p).execute(&prog, &mut scene);
        assert_eq!(r.failed_at, Some(1));
        assert_eq!(r.error_code.as_deref(), Some("NOT_FOUND"));
        assert_eq!(r.outcomes.len(), 2);
        assert!(scene.find_by_name("a").is_some());
        assert!(scene.find_by_name("c").is_none());
    }

    #[test]
    fn runtime_capability_check() {
        let mut scene = SceneGraph::holodeck_room(1);
        let mut p = mock_pipeline();
        let prog = parse("primitive cube as a\nattach a to R_Palm").unwrap();
        let caps = CapabilitySet::all().without(StatementKind::Attach);
        let r = Interpreter::new(caps, &mut p).execute(&prog, &mut scene);
        assert_eq!(r.error_code.as_deref(), Some("CAPABILITY"));
        assert!(scene.entities().all(|e| !matches!(e.kind, EntityKind::JointAnchor { .. })));
    }

    #[test]
    fn move_outside_is_bounds_error() {
        let mut scene = SceneGraph::holodeck_room(1);
        let mut p = mock_pipeline();
        let prog = parse("primitive cube as a\nmove a to (0, 0, 12)").unwrap();
        let r = Interpreter::new(CapabilitySet::all(), &mut p).execute(&prog, &mut scene);
        assert_eq!(r.error_code.as_deref(), Some("BOUNDS"));
    }

    #[test]
    fn attach_uses_selected_hand() {
        let mut scene = SceneGraph::holodeck_room(1);
        let mut p = mock_pipeline();
        let prog = parse("load \"medical saw\" as h\nattach h to R_Palm").unwrap();
        let r = Interpreter::new(CapabilitySet::all(), &mut p)
            .with_hand(1)
            .execute(&prog, &mut scene);
        assert!(r.succeeded(), "{r:?}");
        let h = scene.find_by_name("h").unwrap();
        let anchor = scene.entity(h.parent.unwrap()).unwrap();
        assert!(matches!(anchor.kind, EntityKind::JointAnchor { key } if key.hand == 1));
    }
}
