//! σ-symmetries of ODE systems and dynamical systems: prolongation, determining
//! equations, invariant-based reduction and DS/ODE conversion, with every
//! symbolic claim checked by randomized evaluation.

pub mod error;
pub mod expr;
pub mod jet;
pub mod ansatz;
pub mod linalg;
pub mod integrate;
pub mod reduction;
pub mod symmetry;
pub mod system;
pub mod transform;

pub use error::{Error, Result};
pub use expr::{parse, Expr, ParseContext, Point, Symbol, Verdict, ZeroTest};
