use std::fmt::Write;

use super::ast::{Node, Program, Statement};
use crate::math::Vec3;

const INDENT: &str = "  ";

/// Canonical text: one statement per line, LF endings, two-space indent
/// inside `repeat` blocks.
pub fn format(program: &Program) -> String {
    let mut out = String::new();
    write_block(&mut out, &program.statements, 0);
    out
}

fn num(v: f64) -> String {
    // `Display` for f64 is the shortest text that parses back to the same bits
    format!("{v}")
}

fn vec3(v: Vec3) -> String {
    format!("({}, {}, {})", num(v.x), num(v.y), num(v.z))
}

fn quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        match c {
            '"' => q.push_str("\\\""),
            '\\' => q.push_str("\\\\"),
            '\n' => q.push_str("\\n"),
            c => q.push(c),
        }
    }
    q.push('"');
    q
}

fn write_block(out: &mut String, nodes: &[Node], depth: usize) {
    for node in nodes {
        let pad = INDENT.repeat(depth);
        let _ = match &node.stmt {
            Statement::Load { query, binding } => writeln!(out, "{pad}load {} as {binding}", quote(query)),
            Statement::Scale { binding, target } => writeln!(out, "{pad}scale {binding} {}", num(*target)),
            Statement::Place {
                binding,
                anchor,
                direction,
            } => writeln!(out, "{pad}place {binding} next_to {anchor} {}", vec3(*direction)),
            Statement::Move { binding, position } => writeln!(out, "{pad}move {binding} to {}", vec3(*position)),
            Statement::Physics { binding, mass } => writeln!(out, "{pad}physics {binding} {}", num(*mass)),
            Statement::DestroyAll => writeln!(out, "{pad}destroy_all"),
            Statement::Primitive { shape, binding } => writeln!(out, "{pad}primitive {} as {binding}", shape.keyword()),
            Statement::Attach { binding, joint } => writeln!(out, "{pad}attach {binding} to {joint}"),
            Statement::Repeat { count, body } => {
                let _ = writeln!(out, "{pad}repeat {count} {{");
                write_block(out, body, depth + 1);
                writeln!(out, "{pad}}}")
            }
        };
    }
}
