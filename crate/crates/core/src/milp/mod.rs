//! Mixed-integer linear programs: model, simplex relaxation, branch-and-bound
//! and LP-file export.

pub mod branch;
pub mod lp_format;
pub mod model;
pub mod simplex;

pub use branch::{
    solve_milp, solve_milp_with, Checkpoint, MilpOptions, MilpSolution, MilpStatus, DEFAULT_GAP_TOLERANCE,
    DEFAULT_TIME_LIMIT, INTEGRALITY_TOLERANCE,
};
pub use lp_format::{escape_name, export_lp_format, parse_lp_format, unescape_name, LpParseError};
pub use model::{LinearConstraint, Milp, MilpExpr, MilpVar};
pub use simplex::{solve_lp, solve_relaxation, LpSolution, LpStatus, Pricing, PRIMAL_TOLERANCE};
