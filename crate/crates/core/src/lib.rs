//! PeerNomination: impartial selection of `k` agents from `n` when every agent
//! reviews `m` others and no agent can influence their own selection.
//!
//! The crate covers the mechanism itself, its analytic acceptance model, the
//! baseline mechanisms it is compared with, and a reproducible Monte-Carlo
//! harness. All randomness is driven by explicit seeds.

pub mod analytic;
pub mod assignment;
pub mod baselines;
pub mod domain;
pub mod error;
pub mod harness;
pub mod mechanism;
pub mod metrics;
pub mod noise;
pub mod report;
pub mod seed;

pub use domain::{validate_assignment, Assignment, Instance, Profile, SelectionResult};
pub use error::{Error, Result};
pub use mechanism::{exact_selection_probabilities, run_peer_nomination, NominationQuota};
