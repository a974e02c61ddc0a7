//! The scene-command language: generated programs are parsed, checked
//! against the scene and the session's capability whitelist, then run by a
//! small interpreter.

pub mod arbitrary;
pub mod ast;
mod audit;
mod format;
mod interp;
mod parser;
mod validate;

pub use ast::{binding_key, CapabilitySet, Ident, Node, Program, Span, Statement, StatementKind, MAX_DEPTH, MAX_REPEAT};
pub use audit::{scene_mutations, unexplained, Mutation};
pub use format::format;
pub use interp::{run_source, ExecError, ExecutionReport, Interpreter, StatementOutcome, MAX_EXECUTED_STATEMENTS};
pub use parser::{parse, ParseError};
pub use validate::{scene_bindings, validate, Diagnostic, DiagnosticKind};
