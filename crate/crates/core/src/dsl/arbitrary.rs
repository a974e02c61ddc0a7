//! Seeded random program generator for round-trip and sandbox testing.

use rand::seq::IndexedRandom;
use rand::Rng;

use super::ast::{Ident, Node, Program, Statement, MAX_DEPTH, MAX_REPEAT};
use crate::math::Vec3;
use crate::scene::{PrimitiveShape, JOINT_NAMES};

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub max_statements: usize,
    pub max_depth: usize,
    pub max_repeat: u32,
    /// Binding names to draw from; random identifiers are mixed in when
    /// `random_idents` is set.
    pub bindings: Vec<String>,
    pub random_idents: bool,
    pub queries: Vec<String>,
    /// Coordinates are drawn from `[-extent, extent]`.
    pub extent: f64,
    /// Allow values the validator would reject (zero mass, unknown joints, ...).
    pub allow_invalid: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            max_statements: 8,
            max_depth: MAX_DEPTH,
            max_repeat: MAX_REPEAT,
            bindings: ["a", "b", "desk", "c_1", "_tmp"].iter().map(|s| s.to_string()).collect(),
            random_idents: true,
            queries: [
                "Computer Desk",
                "flashlight",
                "a \"quoted\" lamp",
                "back\\slash",
                "multi\nline",
                "ünïcode 🌴",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            extent: 1e3,
            allow_invalid: true,
        }
    }
}

impl GenConfig {
    /// Small, mostly valid programs for executing against the holodeck room.
    pub fn executable() -> Self {
        Self {
            max_statements: 6,
            max_depth: 2,
            max_repeat: 3,
            bindings: ["a", "b", "c", "north_wall", "floor"].iter().map(|s| s.to_string()).collect(),
            random_idents: false,
            queries: ["Computer Desk", "Flashlight", "lamp", "medical saw", "zzqx"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            extent: 6.0,
            allow_invalid: false,
        }
    }
}

fn ident<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Ident {
    if cfg.random_idents && rng.random_bool(0.3) {
        const HEAD: &[u8] = b"abcdefghijklmnopqrstuvwxyz_";
        const TAIL: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789_";
        let len = rng.random_range(0..32);
        let mut s = String::new();
        s.push(*HEAD.choose(rng).expect("nonempty") as char);
        for _ in 0..len {
            s.push(*TAIL.choose(rng).expect("nonempty") as char);
        }
        return Ident::new(s).expect("generated a valid identifier");
    }
    Ident::new(cfg.bindings.choose(rng).map(String::as_str).unwrap_or("a")).expect("configured binding is valid")
}

fn number<R: Rng>(rng: &mut R, cfg: &GenConfig) -> f64 {
    match rng.random_range(0..6) {
        0 => rng.random_range(-10i32..=10) as f64,
        1 => rng.random_range(-10i32..=10) as f64 * 0.25,
        2 => f64::from_bits(rng.random::<u64>() >> 12 | 0x3FF0_0000_0000_0000) - 1.0,
        3 => rng.random_range(-cfg.extent..=cfg.extent),
        4 => rng.random_range(1e-9..1e-3),
        _ => rng.random_range(-cfg.extent..=cfg.extent) * 1e-5,
    }
}

fn positive<R: Rng>(rng: &mut R, cfg: &GenConfig) -> f64 {
    if cfg.allow_invalid && rng.random_bool(0.1) {
        return -number(rng, cfg).abs();
    }
    let v = number(rng, cfg).abs();
    if v == 0.0 {
        0.5
    } else {
        v.min(cfg.extent)
    }
}

fn vector<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Vec3 {
    Vec3::new(number(rng, cfg), number(rng, cfg), number(rng, cfg))
}

fn direction<R: Rng>(rng: &mut R) -> Vec3 {
    let axis = [
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(-1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(0.0, 0.0, -1.0),
        Vec3::new(0.0, 0.0, -0.5),
    ];
    *axis.choose(rng).expect("nonempty")
}

fn statement<R: Rng>(rng: &mut R, cfg: &GenConfig, depth: usize) -> Statement {
    let kinds = if depth < cfg.max_depth { 9 } else { 8 };
    match rng.random_range(0..kinds) {
        0 => Statement::Load {
            query: cfg.queries.choose(rng).cloned().unwrap_or_else(|| "cube".into()),
            binding: ident(rng, cfg),
        },
        1 => Statement::Scale {
            binding: ident(rng, cfg),
            target: positive(rng, cfg),
        },
        2 => Statement::Place {
            binding: ident(rng, cfg),
            anchor: ident(rng, cfg),
            direction: if cfg.allow_invalid { vector(rng, cfg) } else { direction(rng) },
        },
        3 => Statement::Move {
            binding: ident(rng, cfg),
            position: vector(rng, cfg),
        },
        4 => Statement::Physics {
            binding: ident(rng, cfg),
            mass: positive(rng, cfg),
        },
        5 => Statement::DestroyAll,
        6 => Statement::Primitive {
            shape: *[
                PrimitiveShape::Cube,
                PrimitiveShape::Sphere,
                PrimitiveShape::Cylinder,
                PrimitiveShape::Plane,
            ]
            .choose(rng)
            .expect("nonempty"),
            binding: ident(rng, cfg),
        },
        7 => Statement::Attach {
            binding: ident(rng, cfg),
            joint: if cfg.allow_invalid && rng.random_bool(0.1) {
                "R_Elbow".into()
            } else {
                JOINT_NAMES.choose(rng).expect("nonempty").to_string()
            },
        },
        _ => {
            let n = rng.random_range(0..=cfg.max_statements.min(4));
            Statement::Repeat {
                count: rng.random_range(1..=cfg.max_repeat.max(1)),
                body: (0..n).map(|_| Node::new(statement(rng, cfg, depth + 1))).collect(),
            }
        }
    }
}

pub fn random_program<R: Rng>(rng: &mut R, cfg: &GenConfig) -> Program {
    let n = rng.random_range(0..=cfg.max_statements);
    Program::new((0..n).map(|_| statement(rng, cfg, 0)).collect())
}
