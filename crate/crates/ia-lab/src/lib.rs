//! Workbench for linear transceiver design on MIMO interference channels.
//!
//! The crate covers three connected problem areas:
//!
//! - **Transceiver optimization** ([`transceiver`]): weighted sum-rate
//!   maximization over transmit covariance matrices via an iterative
//!   concave-lower-bound scheme with per-user subproblems, plus an
//!   "unselfish" interference-minimizing algorithm for sum-DoF and a
//!   classical alternating leakage-minimization baseline.
//! - **DoF feasibility** ([`feasibility`]): a polynomial-time checker that
//!   decides whether a tuple of degrees of freedom is achievable on a
//!   network where every node has at most two antennas, by decomposing the
//!   full-rank interference graph and reducing the remaining alignment
//!   constraints to 2-SAT. Achievable verdicts come with a constructive
//!   subspace certificate.
//! - **Hardness reductions** ([`hardness`]): executable graph reductions
//!   showing that maximizing total DoF encodes maximum independent set and
//!   that checking a DoF tuple with three antennas per node encodes graph
//!   3-colorability, together with brute-force oracles for small graphs.
//!
//! Shared infrastructure lives in [`numerics`] (small dense complex
//! Hermitian kernels) and [`channel`] (the interference-channel data model,
//! MMSE receivers, SINR and rate evaluation). [`experiments`] provides a
//! Monte-Carlo SNR sweep harness emitting CSV tables.
//!
//! See the `examples/` directory for runnable entry points, one per major
//! capability, and the `ia-lab` binary for file-based workflows.

pub mod channel;
pub mod error;
pub mod experiments;
pub mod feasibility;
pub mod hardness;
pub mod numerics;
pub mod transceiver;

pub use error::{Error, Result};
