//! The surreal tennis ruleset: command grammar, ball and paddle kinematics,
//! transformation triggers and scoring.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assets::AssetHandle;
use crate::math::{Aabb, Vec3};
use crate::resolver::prompt::normalize_label;
use crate::scene::{EntityId, EntityKind, EntitySpec, Joint, JointKey, PrimitiveShape, SceneGraph, SceneResult};

pub const DEFAULT_BALL: &str = "ball";
pub const DEFAULT_PADDLE: &str = "paddle";
pub const SERVE_SPEED: f64 = 2.0;
pub const SERVE_JITTER_DEG: f64 = 15.0;
pub const BALL_SIZE: (f64, f64) = (0.1, 0.5);
pub const PADDLE_SIZE: (f64, f64) = (0.2, 0.6);
const DEFAULT_BALL_SIZE: f64 = 0.2;
const PADDLE_EXTENTS: Vec3 = Vec3::new(0.5, 0.5, 0.05);
/// Distance of each player's resting paddle from the center line.
pub const PADDLE_DEPTH: f64 = 1.8;

/// Playing volume: 2 m wide, 2 m high, 4 m long, end lines at z = ±2.
pub fn court() -> Aabb {
    Aabb::new(Vec3::new(-1.0, 0.0, -2.0), Vec3::new(1.0, 2.0, 2.0))
}

fn scene_bounds() -> Aabb {
    let c = court();
    Aabb::new(c.min - Vec3::splat(1.0), c.max + Vec3::splat(1.0))
}

pub fn rest_pose(player: usize) -> Vec3 {
    let z = if player == 0 { -PADDLE_DEPTH } else { PADDLE_DEPTH };
    Vec3::new(0.0, 1.0, z)
}

/// Unit normal of a player's paddle face, pointing at the center of the court.
pub fn paddle_normal(player: usize) -> Vec3 {
    if player == 0 {
        Vec3::new(0.0, 0.0, 1.0)
    } else {
        Vec3::new(0.0, 0.0, -1.0)
    }
}

pub fn paddle_key(player: usize) -> JointKey {
    JointKey::new(player as u8, Joint::R_PALM)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", content = "label", rename_all = "snake_case")]
pub enum PlayerCommand {
    ChangeBall(String),
    ChangePaddle(String),
    NoCommand,
}

/// `change ball to X` / `change paddle to X`, case-insensitive.
pub fn parse_player_command(text: &str) -> PlayerCommand {
    let lower = text.trim().to_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    let rest = |n: usize| words[n..].join(" ");
    let (target, label) = match words.as_slice() {
        ["change", "ball", "to", ..] if words.len() > 3 => (0, rest(3)),
        ["change", "paddle", "to", ..] if words.len() > 3 => (1, rest(3)),
        ["change", "ball", "into", ..] if words.len() > 3 => (0, rest(3)),
        ["change", "paddle", "into", ..] if words.len() > 3 => (1, rest(3)),
        _ => return PlayerCommand::NoCommand,
    };
    match normalize_label(&label) {
        Some(l) if target == 0 => PlayerCommand::ChangeBall(l),
        Some(l) => PlayerCommand::ChangePaddle(l),
        None => PlayerCommand::NoCommand,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "target", content = "player", rename_all = "snake_case")]
pub enum SkinTarget {
    Ball,
    Paddle(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum MatchEvent {
    Hit {
        player: usize,
        ball: String,
        paddle: String,
    },
    /// A hit between transformed objects that the session should resolve.
    Transform {
        player: usize,
        ball: String,
        paddle: String,
    },
    Bounce {
        axis: crate::math::Axis,
    },
    Score {
        player: usize,
        scores: [u32; 2],
    },
    Serve {
        toward: usize,
        velocity: Vec3,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchState {
    pub ball: EntityId,
    pub ball_label: String,
    pub paddles: [EntityId; 2],
    pub paddle_labels: [String; 2],
    pub scores: [u32; 2],
    pub serving: usize,
    pub serve_count: u64,
    pub seed: u64,
}

/// Build the court scene with a default ball and both paddles on their
/// players' right palms, then serve.
pub fn new_match(seed: u64) -> (SceneGraph, MatchState) {
    let mut scene = SceneGraph::new(scene_bounds(), seed);
    let ball = scene
        .spawn_entity(
            EntitySpec::primitive(DEFAULT_BALL, PrimitiveShape::Sphere, Vec3::new(0.0, 1.0, 0.0)).with_scale(DEFAULT_BALL_SIZE),
        )
        .expect("ball fits the court");
    let mut paddles = [EntityId(0); 2];
    for (p, slot) in paddles.iter_mut().enumerate() {
        let key = paddle_key(p);
        scene.set_joint_pose(key, rest_pose(p)).expect("finite pose");
        let id = scene
            .spawn_entity(
                EntitySpec::primitive(format!("paddle_{p}"), PrimitiveShape::Cube, rest_pose(p)).with_extents(PADDLE_EXTENTS),
            )
            .expect("paddle fits the court");
        scene.attach_to_joint(id, key.hand, key.joint.name()).expect("palm exists");
        *slot = id;
    }
    let mut state = MatchState {
        ball,
        ball_label: DEFAULT_BALL.into(),
        paddles,
        paddle_labels: [DEFAULT_PADDLE.into(), DEFAULT_PADDLE.into()],
        scores: [0, 0],
        serving: 0,
        serve_count: 0,
        seed,
    };
    serve(&mut scene, &mut state);
    (scene, state)
}

fn serve(scene: &mut SceneGraph, state: &mut MatchState) -> Vec3 {
    let mut rng = ChaCha8Rng::seed_from_u64(state.seed ^ state.serve_count.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    state.serve_count += 1;
    let angle = rng.random_range(-SERVE_JITTER_DEG..=SERVE_JITTER_DEG).to_radians();
    let dz = -paddle_normal(state.serving).z;
    let velocity = Vec3::new(SERVE_SPEED * angle.sin(), 0.0, SERVE_SPEED * angle.cos() * dz);
    if let Ok(e) = scene.entity_mut(state.ball) {
        e.position = Vec3::new(0.0, 1.0, 0.0);
        e.velocity = velocity;
    }
    velocity
}

/// Elastic reflection off a paddle, with the trigger rule for transforms.
pub fn on_paddle_hit(scene: &mut SceneGraph, state: &MatchState, player: usize) -> Vec<MatchEvent> {
    let n = paddle_normal(player);
    if let Ok(e) = scene.entity_mut(state.ball) {
        e.velocity = e.velocity.reflect(n);
    }
    let ball = state.ball_label.clone();
    let paddle = state.paddle_labels[player].clone();
    let mut out = vec![MatchEvent::Hit {
        player,
        ball: ball.clone(),
        paddle: paddle.clone(),
    }];
    if ball != DEFAULT_BALL || paddle != DEFAULT_PADDLE {
        out.push(MatchEvent::Transform { player, ball, paddle });
    }
    out
}

/// One tick of play: integrate, bounce, hit and score.
pub fn step_match(scene: &mut SceneGraph, state: &mut MatchState, dt: f64) -> Vec<MatchEvent> {
    scene.step(dt);
    let mut events = Vec::new();
    let c = court();
    let Some(ball) = scene.entity(state.ball).cloned() else {
        return events;
    };
    let (p, h) = (ball.position, ball.half_extents());
    let mut v = ball.velocity;
    if (p.x - h.x < c.min.x && v.x < 0.0) || (p.x + h.x > c.max.x && v.x > 0.0) {
        v.x = -v.x;
        events.push(MatchEvent::Bounce {
            axis: crate::math::Axis::X,
        });
    }
    if (p.y - h.y < c.min.y && v.y < 0.0) || (p.y + h.y > c.max.y && v.y > 0.0) {
        v.y = -v.y;
        events.push(MatchEvent::Bounce {
            axis: crate::math::Axis::Y,
        });
    }
    if v != ball.velocity {
        if let Ok(e) = scene.entity_mut(state.ball) {
            e.velocity = v;
        }
    }

    let bbox = ball.aabb();
    for player in 0..2 {
        let Some(paddle) = scene.entity(state.paddles[player]) else {
            continue;
        };
        if bbox.overlaps(&paddle.aabb()) && v.dot(paddle_normal(player)) < 0.0 {
            events.extend(on_paddle_hit(scene, state, player));
            break;
        }
    }

    let scorer = if p.z > c.max.z {
        Some(0)
    } else if p.z < c.min.z {
        Some(1)
    } else {
        None
    };
    if let Some(player) = scorer {
        state.scores[player] += 1;
        events.push(MatchEvent::Score {
            player,
            scores: state.scores,
        });
        state.serving = player;
        let velocity = serve(scene, state);
        events.push(MatchEvent::Serve {
            toward: player,
            velocity,
        });
    }
    events
}

/// Swap the ball's or a paddle's model, keeping its motion untouched.
pub fn apply_transformation(
    scene: &mut SceneGraph,
    state: &mut MatchState,
    target: SkinTarget,
    label: &str,
    handle: &AssetHandle,
) -> SceneResult<()> {
    let (id, (lo, hi)) = match target {
        SkinTarget::Ball => (state.ball, BALL_SIZE),
        SkinTarget::Paddle(p) => (state.paddles[p.min(1)], PADDLE_SIZE),
    };
    let size = handle.natural_max_extent().clamp(lo, hi);
    let e = scene.entity_mut(id)?;
    e.kind = EntityKind::LoadedAsset;
    e.asset = Some(handle.asset_ref());
    e.base_extents = handle.unit_extents();
    e.scale = size / e.base_extents.max_component();
    let label = normalize_label(label).unwrap_or_else(|| label.to_owned());
    match target {
        SkinTarget::Ball => state.ball_label = label,
        SkinTarget::Paddle(p) => state.paddle_labels[p.min(1)] = label,
    }
    Ok(())
}
