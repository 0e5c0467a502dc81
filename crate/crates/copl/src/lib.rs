//! COP-lite: a small language where classes can be included in *concepts*.
//!
//! A concept pairs an object class with a reference class. Instances of a
//! type included in a concept chain are represented by complex references
//! — ordered by-value segments, one per ancestor reference class — and
//! every method call on such a reference is resolved segment by segment:
//! each segment's `continue` method runs, resolves its part of the
//! address, and hands control inward until the target object's business
//! method executes, then unwinds back out.
//!
//! Pipeline: [`lexer::tokenize`] → [`parser::parse`] →
//! [`hierarchy::build_hierarchy`] → [`check::check`] → [`interp::run`].

pub mod ast;
pub mod builtins;
pub mod check;
pub mod diag;
pub mod hierarchy;
pub mod interp;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod value;

use crate::check::CheckedProgram;
use crate::diag::Diagnostic;

/// Tokenizes, parses, and validates a program in one step.
pub fn compile(source: &str) -> Result<CheckedProgram, Vec<Diagnostic>> {
    let tokens = lexer::tokenize(source).map_err(|d| vec![d])?;
    let ast = parser::parse(tokens).map_err(|d| vec![d])?;
    let hierarchy = hierarchy::build_hierarchy(&ast)?;
    check::check(ast, hierarchy)
}
