//! Small dense LP/MILP toolkit.
//!
//! [`solve_lp`] is a bounded-variable revised simplex that returns primal
//! values, row duals and reduced costs; [`solve_milp`] layers a best-bound
//! branch and bound on top of it. Both are deterministic for a fixed input.

mod error;
mod lp;
mod milp;
mod simplex;

pub use error::LpError;
pub use lp::{Basis, Constraint, LinearProgram, LpSolution, LpStatus, Relation, VarStatus};
pub use milp::{solve_milp, MilpModel, MilpOptions, MilpSolution, MilpStatus};
pub use simplex::{solve_lp, solve_lp_factored, solve_lp_warm, FactoredBasis};
