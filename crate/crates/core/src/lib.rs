//! Steady-state photodynamics of NV centres in a seeded optical cavity.
//!
//! The seven-level NV⁻/NV⁰ rate model ([`kinetics`]) is driven by green pump
//! and red seed intensities ([`model`]); its steady state gives the
//! amplification and spontaneous-emission factors ([`observables`]).
//! [`spectroscopy`] derives the stimulated-emission cross-section from a
//! multi-Lorentzian emission spectrum and [`experiments`] runs the power
//! sweeps.

pub mod experiments;
pub mod kinetics;
pub mod lm;
pub mod model;
pub mod observables;
pub mod spectroscopy;

pub use experiments::{
    evaluate_point, fit_inverse_square, line_cut, sweep_grid, sweep_green, ExperimentError, GridResult,
    GridRow, LawFit, SweepConfig,
};
pub use kinetics::{
    build_rate_matrix, evolve, residual, steady_state, KineticsError, Level, Populations, RateMatrix,
    Variant,
};
pub use model::{
    default_parameters, driving_rates, intensity, CavityGeometry, Channel, DrivingRates, LaserDrive,
    NvParameters, PhysicalConstants,
};
pub use observables::{
    amplification_factor, charge_fractions, spontaneous_factor, GainContext, ObservableError,
    ObservablePoint,
};
pub use spectroscopy::{
    cross_section_at, fit_peaks, fl_cross_section, lorentzian_sum, synthesize_spectrum, LorentzianPeak,
    PeakFitResult, Spectrum, SpectroscopyError,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Observable(#[from] ObservableError),
    #[error(transparent)]
    Spectroscopy(#[from] SpectroscopyError),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
}
