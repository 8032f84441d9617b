//! Synchronous cooperative threads with static resource control.
//!
//! The crate covers the whole pipeline: a `.sct` frontend, a reference
//! interpreter, the read-once call-graph analysis, control points and
//! their ordering constraints, LPO termination, max-plus
//! quasi-interpretations with size bounds, a bytecode compiler, a virtual
//! machine and a bytecode shape verifier.

pub mod analysis;
pub mod ast;
pub mod bytecode;
pub mod cfa;
pub mod cli;
pub mod control_points;
pub mod frontend;
pub mod interp;
pub mod qi;
pub mod shape;
pub mod term;
pub mod termination;
pub mod vm;
