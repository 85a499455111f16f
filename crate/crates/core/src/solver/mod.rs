//! LP relaxation solver and branch and bound.

pub mod bnb;
pub mod simplex;

pub use bnb::{
    mip_gap, solve_milp, solve_milp_with, Branching, MilpResult, MilpStatus, NodeOrder, PrimalHeuristic, SolveConfig,
};
pub use simplex::{solve_lp, LpData, LpResult, LpStatus};
