use std::fmt;

use serde::{Deserialize, Serialize};

use crate::math::Vec3;
use crate::scene::PrimitiveShape;

pub const MAX_REPEAT: u32 = 64;
pub const MAX_DEPTH: usize = 4;
pub const MAX_IDENT_LEN: usize = 32;

/// A binding name: `[a-z_][a-z0-9_]{0,31}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Ident(String);

impl Ident {
    pub fn new(s: impl Into<String>) -> Result<Self, String> {
        let s = s.into();
        if is_valid_ident(&s) {
            Ok(Ident(s))
        } else {
            Err(format!("`{s}` is not a valid binding name"))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub fn is_valid_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c == '_' => {}
        _ => return false,
    }
    s.len() <= MAX_IDENT_LEN && chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Derive a binding-style key from a free-form entity name:
/// `"North Wall"` becomes `north_wall`.
pub fn binding_key(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    if out.starts_with(|c: char| c.is_ascii_digit()) {
        out.insert(0, '_');
    }
    out
}

impl TryFrom<String> for Ident {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        Ident::new(s)
    }
}

impl From<Ident> for String {
    fn from(i: Ident) -> String {
        i.0
    }
}

impl fmt::Display for Ident {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// 1-based line/column range in the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Span {
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

/// A statement together with where it came from. Equality ignores the span.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Node {
    pub stmt: Statement,
    pub span: Span,
}

impl Node {
    pub fn new(stmt: Statement) -> Self {
        Self {
            stmt,
            span: Span::default(),
        }
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.stmt == other.stmt
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Statement {
    Load { query: String, binding: Ident },
    Scale { binding: Ident, target: f64 },
    Place { binding: Ident, anchor: Ident, direction: Vec3 },
    Move { binding: Ident, position: Vec3 },
    Physics { binding: Ident, mass: f64 },
    DestroyAll,
    Primitive { shape: PrimitiveShape, binding: Ident },
    Attach { binding: Ident, joint: String },
    Repeat { count: u32, body: Vec<Node> },
}

impl Statement {
    pub fn kind(&self) -> StatementKind {
        match self {
            Statement::Load { .. } => StatementKind::Load,
            Statement::Scale { .. } => StatementKind::Scale,
            Statement::Place { .. } => StatementKind::Place,
            Statement::Move { .. } => StatementKind::Move,
            Statement::Physics { .. } => StatementKind::Physics,
            Statement::DestroyAll => StatementKind::DestroyAll,
            Statement::Primitive { .. } => StatementKind::Primitive,
            Statement::Attach { .. } => StatementKind::Attach,
            Statement::Repeat { .. } => StatementKind::Repeat,
        }
    }
}

/// A parsed scene-command program.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Program {
    pub statements: Vec<Node>,
    /// Original text when the program came from the parser.
    pub source: Option<String>,
}

impl Program {
    pub fn new(statements: Vec<Statement>) -> Self {
        Self {
            statements: statements.into_iter().map(Node::new).collect(),
            source: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    /// Statement count after expanding every `repeat`.
    pub fn expanded_len(&self) -> u64 {
        fn count(nodes: &[Node]) -> u64 {
            nodes
                .iter()
                .map(|n| match &n.stmt {
                    Statement::Repeat { count: c, body } => 1 + u64::from(*c) * count(body),
                    _ => 1,
                })
                .sum()
        }
        count(&self.statements)
    }

    pub fn max_depth(&self) -> usize {
        fn depth(nodes: &[Node]) -> usize {
            nodes
                .iter()
                .map(|n| match &n.stmt {
                    Statement::Repeat { body, .. } => 1 + depth(body),
                    _ => 0,
                })
                .max()
                .unwrap_or(0)
        }
        depth(&self.statements)
    }
}

impl PartialEq for Program {
    fn eq(&self, other: &Self) -> bool {
        self.statements == other.statements
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    Load,
    Scale,
    Place,
    Move,
    Physics,
    DestroyAll,
    Primitive,
    Attach,
    Repeat,
}

impl StatementKind {
    pub const ALL: [StatementKind; 9] = [
        StatementKind::Load,
        StatementKind::Scale,
        StatementKind::Place,
        StatementKind::Move,
        StatementKind::Physics,
        StatementKind::DestroyAll,
        StatementKind::Primitive,
        StatementKind::Attach,
        StatementKind::Repeat,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            StatementKind::Load => "load",
            StatementKind::Scale => "scale",
            StatementKind::Place => "place",
            StatementKind::Move => "move",
            StatementKind::Physics => "physics",
            StatementKind::DestroyAll => "destroy_all",
            StatementKind::Primitive => "primitive",
            StatementKind::Attach => "attach",
            StatementKind::Repeat => "repeat",
        }
    }

    fn bit(self) -> u16 {
        1 << (self as u16)
    }
}

/// The closed set of statement kinds a session may execute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CapabilitySet(u16);

impl CapabilitySet {
    pub fn all() -> Self {
        StatementKind::ALL.iter().fold(Self::none(), |s, k| s.with(*k))
    }

    pub fn none() -> Self {
        CapabilitySet(0)
    }

    pub fn with(self, kind: StatementKind) -> Self {
        CapabilitySet(self.0 | kind.bit())
    }

    pub fn without(self, kind: StatementKind) -> Self {
        CapabilitySet(self.0 & !kind.bit())
    }

    pub fn contains(self, kind: StatementKind) -> bool {
        self.0 & kind.bit() != 0
    }

    pub fn kinds(self) -> impl Iterator<Item = StatementKind> {
        StatementKind::ALL.into_iter().filter(move |k| self.contains(*k))
    }
}

impl Default for CapabilitySet {
    fn default() -> Self {
        Self::all()
    }
}

impl FromIterator<StatementKind> for CapabilitySet {
    fn from_iter<I: IntoIterator<Item = StatementKind>>(iter: I) -> Self {
        iter.into_iter().fold(Self::none(), |s, k| s.with(k))
    }
}

impl Serialize for CapabilitySet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.kinds())
    }
}

impl<'de> Deserialize<'de> for CapabilitySet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let kinds = Vec::<StatementKind>::deserialize(d)?;
        Ok(kinds.into_iter().collect())
    }
}
