//! Capacity bounds for peak-constrained, spatially correlated, underspread
//! WSSUS MIMO channels, computed directly from the scattering function.
//!
//! Rates are in nats/s unless stated otherwise.

pub mod asymptotics;
pub mod channel_model;
pub mod error;
pub mod lower_bound;
pub mod quadrature;
pub mod scenario;
pub mod spatial;
pub mod special;
pub mod upper_bound;

pub use channel_model::{spectral_density, GridParams, ScatteringFunction, DEFAULT_TF_PRODUCT};
pub use error::{Error, Result};
pub use quadrature::{QuadratureRule, QuadratureSpec};
pub use spatial::{majorizes, CorrelationMatrix, SpatialSpectrum};
pub use upper_bound::{BoundValue, Diagnostics, LinkBudget};
