//! Definite Horn-clause engine used to check dilemma ground truth.
//!
//! Supported subset: facts, rules, integer comparisons (`<`, `>`, `=<`, `>=`, `=:=`)
//! on ground integers. No negation, cut, lists or database updates.
//!
//! Step accounting: `steps` counts clause resolutions on the accepted proof;
//! comparison built-ins are not resolution steps. `explored` counts every
//! resolution performed, including those later undone by backtracking.

mod parser;
mod solver;
mod term;
mod verify;

pub use parser::{parse_program, parse_query, ParseError};
pub use solver::{
    solve, solve_with, CompiledProgram, ProofResult, SolveError, SolveOptions, Solver, DEFAULT_DEPTH_LIMIT,
    DEFAULT_EXPLORED_LIMIT,
};
pub use term::{is_comparison, Clause, Program, Term, COMPARISON_OPS};
pub use verify::{
    assign_tiers, quartile_cutoffs, tier_for, tiers_from_steps, verify_pair, verify_pair_with, PairVerification,
    DECISION_PREDICATE,
};
