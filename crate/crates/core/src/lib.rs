//! Optimal dispatch for networks of multi-carrier energy hubs.
//!
//! The crate provides, bottom up:
//!
//! - [`timegrid`]: uniform and multi-horizon prediction grids with exact
//!   integer-minute arithmetic.
//! - [`milp`]: an embedded sparse LP / branch-and-bound MILP solver with
//!   proximal (diagonal quadratic) term support and a brute-force oracle.
//! - [`hubmodel`]: device, storage, balance and coupling constraints of an
//!   energy hub as solver fragments, plus point-wise plant physics.
//! - [`scenario`]: scenario files, profile ingestion, synthetic profiles and
//!   the bundled three-hub benchmark.
//! - [`controllers`]: decentralized, centralized and consensus-ADMM model
//!   predictive controllers over a deterministic in-process message fabric.
//! - [`simloop`]: the receding-horizon closed-loop plant simulator with run
//!   comparison and network-scaling utilities.

pub mod controllers;
pub mod hubmodel;
pub mod milp;
pub mod scenario;
pub mod simloop;
pub mod timegrid;

pub use timegrid::TimeGrid;
