//! Core library of the minidafny verifier.
//!
//! The pipeline runs in stages, each of which is its own module:
//!
//! 1. [`lexer`] / [`parser`] — turn `.mdfy` source into a span-annotated AST.
//! 2. [`typecheck`] — name resolution, type checking (`nat` as refined `int`),
//!    ghost-usage rules and static `reads`/`modifies` frame checks.
//! 3. [`ir`] — lower each method to an acyclic guarded-command block graph
//!    (assume/assert/assign/havoc), cutting loops at their invariants.
//! 4. [`vcgen`] — weakest preconditions over the block graph; one closed
//!    first-order verification condition per assert, plus function
//!    well-formedness and termination conditions.
//! 5. [`prover`] — discharge VCs with the built-in decision procedure
//!    (quantifier instantiation + DPLL over linear integer arithmetic and
//!    arrays) or an external SMT-LIB2 solver; extract models on failure.
//! 6. [`replay`] — concretely execute a method under a counterexample model
//!    to confirm the reported obligation really fails.
//!
//! [`pipeline`] ties the stages together and produces [`report`] values the
//! CLI renders as human-readable diagnostics or stable JSON.

pub mod ast;
pub mod diag;
pub mod ir;
pub mod lexer;
pub mod logic;
pub mod parser;
pub mod pipeline;
pub mod prover;
pub mod replay;
pub mod report;
pub mod span;
pub mod typecheck;
pub mod vcgen;
