//! Concrete syntax (`.sct`), parsing and checking.

pub mod diag;
pub mod lexer;
pub mod parser;
pub mod pretty;
pub mod typecheck;

pub use diag::{has_errors, Code, Diagnostic, Severity};
pub use parser::{parse_annotations, parse_program};
pub use typecheck::{check_annotations, typecheck, Signature, TypedProgram};

use crate::ast::Program;

/// Parse source text; warnings are dropped.
pub fn parse(src: &str) -> Result<Program, Vec<Diagnostic>> {
    parse_program(src).map(|(p, _)| p)
}

/// Parse and check in one go.
pub fn load(src: &str) -> Result<TypedProgram, Vec<Diagnostic>> {
    let (p, warnings) = parse_program(src)?;
    typecheck(p, warnings)
}

pub fn pretty_print(p: &Program) -> String {
    pretty::program(p)
}
