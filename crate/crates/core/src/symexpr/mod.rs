//! The computer-algebra substrate: expression trees, parsing, printing,
//! differentiation, normalization and numeric evaluation.
//!
//! Deliberately not a general-purpose CAS: no integration, no factorization,
//! no trigonometric rewriting. Normalization plus explicit [`Expr::expand`]
//! is enough to decide the polynomial identities the rest of the crate
//! relies on, and [`equivalent_numeric`] is the randomized fallback oracle
//! for everything else.

mod ast;
mod calculus;
mod display;
mod eval;
mod linsolve;
mod parser;

pub use ast::{Expr, UnaryFun, VarId};
pub use eval::{equivalent_numeric, Bindings, EquivalenceError, EvalError, NumericCheck};
pub use linsolve::{det_symbolic, solve_symbolic, LinearSolveError};
pub use parser::{parse_expr, ParseError, SymbolScope};

pub(crate) use ast::Node;
