//! Physical-layer secrecy in downlink multi-antenna cellular networks.
//!
//! Two independent paths compute the same quantities:
//!
//! * a Monte Carlo simulator of Poisson-distributed base stations and users
//!   with regularized channel inversion (RCI) precoding
//!   ([`geometry`], [`physical`], [`montecarlo`]);
//! * an analytic evaluator built on large-system deterministic equivalents,
//!   shot-noise Laplace transforms and lognormal fits ([`analytic`]).
//!
//! All powers are normalized to unit noise, so the transmit power equals the
//! SNR `ρ`.

pub mod analytic;
pub mod geometry;
pub mod montecarlo;
pub mod params;
pub mod physical;
pub mod rng;

pub use geometry::{GeometryError, NetworkRealization, Point, SceneMode};
pub use montecarlo::{EstimateWithCI, McConfig, McError};
pub use params::{derive_params, optimal_regularization, CooperationConfig, RawConfig, SystemParams};

use thiserror::Error;

/// Any failure of the toolkit, by originating module.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Params(#[from] params::ParamsError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Physical(#[from] physical::PhysicalError),
    #[error(transparent)]
    Analytic(#[from] analytic::AnalyticError),
    #[error(transparent)]
    MonteCarlo(#[from] McError),
}

impl Error {
    /// Whether the failure stems from the inputs rather than from a
    /// numerical breakdown during evaluation.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Params(_) => true,
            Error::Geometry(_) => true,
            Error::Analytic(analytic::AnalyticError::Domain(_)) => true,
            Error::Analytic(analytic::AnalyticError::Unsupported(_)) => true,
            Error::MonteCarlo(McError::Contract(_)) => true,
            Error::MonteCarlo(McError::Geometry(_)) => true,
            Error::MonteCarlo(McError::Analytic(analytic::AnalyticError::Domain(_))) => true,
            _ => false,
        }
    }
}
