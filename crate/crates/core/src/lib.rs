//! Implicit variational time stepping for gradient flows with general transport costs.
//!
//! Each step minimises a discrete transport cost plus an internal energy under
//! a relaxed continuity constraint, solved by primal-dual splitting whose
//! primal update is a pointwise prox of a perspective function.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constraints;
pub mod costs;
pub mod energies;
pub mod error;
pub mod grid;
pub mod jko;
pub mod oracle;
pub mod par;
pub mod pd;
pub mod presets;
pub mod prox;
pub mod rng;
pub mod root;
pub mod validation;

pub use constraints::ConstraintSystem;
pub use costs::CostSpec;
pub use energies::{EnergyScaling, EnergySpec};
pub use error::{Error, Result};
pub use grid::{DensityField, GridSpec, MomentumField, PrimalState};
pub use par::Exec;
