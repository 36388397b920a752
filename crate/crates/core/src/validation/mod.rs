//! Analytic reference solutions and error metrics.

pub mod barenblatt;
pub mod metrics;
pub mod quadrature;
pub mod reference;

pub use barenblatt::{
    barenblatt_normalization, barenblatt_value, heat_kernel_value, Barenblatt, BarenblattParams,
    Regime,
};
pub use metrics::{convergence_order, error_norms, front_position, linear_fit, ErrorNorms};
pub use reference::ReferenceProfile;
