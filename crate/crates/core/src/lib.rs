//! Outage analysis for a lossy-forward UAV relay serving ground users over
//! Nakagami-m fading links.
//!
//! The crate is layered bottom-up: [`channel`] turns geometry into average
//! SNRs, [`rate_distortion`] describes which link rates reach a distortion
//! target, and [`outage`] integrates (or samples) the fading to get the
//! probability the target is missed.

pub mod channel;
pub mod error;
pub mod outage;
pub mod quadrature;
pub mod rate_distortion;
pub mod scenario;
pub mod special;

pub use channel::{AirGroundParams, FadingSpec, GroundModel, LinkBudget, NodeLayout, Position3D, RadioConfig};
pub use error::{Error, Result};
pub use outage::{
    outage_case_decomposition, outage_closed_form, outage_closed_form_printed, outage_monte_carlo, system_outage,
    CaseBreakdown, Method, MonteCarloConfig, OutageEstimate, SystemOutage,
};
pub use quadrature::QuadratureConfig;
pub use rate_distortion::DistortionSpec;
pub use scenario::SystemModel;
