//! Polynomial-time DoF-achievability checking for 2-antenna networks.
//!
//! [`check_dof`] decides whether a tuple of per-user degrees of freedom
//! is achievable by linear transceivers when every node carries at most
//! two antennas, and produces a constructive subspace certificate for
//! achievable tuples. The decision procedure decomposes the full-rank
//! cross-link graph ([`graphs`]), encodes the residual discrete choices
//! as 2-SAT ([`twosat`], [`checker`]), and instantiates continuous
//! freedoms generically. [`oracle_grid`] is an independent grid-search
//! witness finder used to validate the checker.

pub mod checker;
pub mod graphs;
pub mod oracle;
pub mod subspace;
pub mod twosat;

pub use checker::{
    certificate_verify, certificate_verify_tol, check_dof, check_dof_report, emit_clauses,
    induced_certificate, preprocess, Certificate, CheckReport, FeasibilityOutcome, Preprocessed,
    ReducedInstance,
};
pub use graphs::{analyze_components, build_link_graphs, CompClass, Component, LinkGraphs};
pub use oracle::{oracle_grid, OracleOutcome};
pub use subspace::{Rank, Subspace1D};
pub use twosat::{solve_2sat, ClauseTag, Lit, SatResult, TwoSatInstance, Var};

#[cfg(test)]
mod tests;
