//! Markov-functional interest rate model with Black and UVDD digital mappings.
//!
//! The numerical core (`analytic`, `quadrature`, `driver`, `mapping`, `pricing`) is generic over
//! [`Real`]; market data, calibration, hedging and the pipeline glue work in `f64`.

pub mod analytic;
pub mod calibration;
pub mod driver;
pub mod hedging;
pub mod mapping;
pub mod market;
pub mod normal;
pub mod pipeline;
pub mod pricing;
pub mod quadrature;
pub mod roots;
pub mod scalar;
pub mod toy;

pub use scalar::Real;

use thiserror::Error;

/// Crate-wide error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Market(#[from] market::MarketError),
    #[error(transparent)]
    Analytic(#[from] analytic::AnalyticError),
    #[error(transparent)]
    Quadrature(#[from] quadrature::QuadratureError),
    #[error(transparent)]
    Driver(#[from] driver::DriverError),
    #[error(transparent)]
    Mapping(#[from] mapping::MappingError),
    #[error(transparent)]
    Pricing(#[from] pricing::PricingError),
    #[error(transparent)]
    Root(#[from] roots::RootError),
    #[error(transparent)]
    Calibration(#[from] calibration::CalibrationError),
    #[error(transparent)]
    Hedging(#[from] hedging::HedgingError),
}

impl Error {
    /// True for bad or inconsistent inputs, false for numerical failures.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Market(_) => true,
            Error::Pricing(pricing::PricingError::Mapping(e)) | Error::Mapping(e) => matches!(
                e,
                mapping::MappingError::Strip(_)
                    | mapping::MappingError::ModelCount(..)
                    | mapping::MappingError::ResetOutOfRange(..)
                    | mapping::MappingError::DumpVersion(_)
                    | mapping::MappingError::Dump(_)
            ),
            Error::Pricing(e) => matches!(
                e,
                pricing::PricingError::NoExercise
                    | pricing::PricingError::BadExercise(..)
                    | pricing::PricingError::BadConditioning { .. }
                    | pricing::PricingError::BadNode(_)
            ),
            Error::Calibration(e) => e.is_data_error(),
            Error::Hedging(e) => !matches!(e, hedging::HedgingError::Resample(..)),
            _ => false,
        }
    }
}

pub type SwaptionSpec = analytic::SwaptionSpec<f64>;
pub type UvddParams = analytic::UvddParams<f64>;
pub type Mixture = analytic::Mixture<f64>;
pub type MarketStrip = mapping::MarketStrip<f64>;
pub type MappingModel = mapping::MappingModel<f64>;
pub type MfLattice = mapping::MfLattice<f64>;
pub type KernelSet = mapping::KernelSet<f64>;
pub type LatticeDump = mapping::LatticeDump<f64>;
pub type BermudanTrade = pricing::BermudanTrade<f64>;
pub type BermudanValue = pricing::BermudanValue<f64>;
pub type Smile = pricing::Smile<f64>;
pub type DriverSpec = driver::DriverSpec<f64>;
pub type PiecewisePoly = quadrature::PiecewisePoly<f64>;

pub use analytic::OptionKind;
pub use mapping::{GridSpec, MappingCase};
pub use pipeline::Setup;
