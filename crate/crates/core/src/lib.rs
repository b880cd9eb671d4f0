//! Amplitude-frequency tests of a momentum-deformed commutator.
//!
//! A quartic momentum term `beta0 p^4 / (3 m (M_p c)^2)` in an oscillator
//! Hamiltonian makes its resonance frequency depend on amplitude. This crate
//! computes the expected shift and the bound on `beta0` implied by an
//! unresolved shift, simulates ringdowns of the perturbed oscillator, runs the
//! measurement pipeline (peak tracking, decay, lineshape and regression fits,
//! Allan deviation), and analyses physical-pendulum period data.
//!
//! Everything numeric is generic over [`scalar::Real`] (`f32` or `f64`). The
//! aliases below fix the scalar to `f64`, which is what the file formats use.

// `!(x > 0)` style guards are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dynamics;
pub mod error;
pub mod numeric;
pub mod pendulum;
pub mod physics;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type PhysicalConstants = physics::PhysicalConstants<f64>;
pub type GupModel = physics::GupModel<f64>;
pub type OscillatorSpec = physics::OscillatorSpec<f64>;
pub type OscillatorState = physics::OscillatorState<f64>;
pub type DampingModel = dynamics::DampingModel<f64>;
pub type NoiseSpec = dynamics::NoiseSpec<f64>;
pub type TransducerSpec = dynamics::TransducerSpec<f64>;
pub type TimeSeries = dynamics::TimeSeries<f64>;
pub type IntegrationControl = dynamics::IntegrationControl<f64>;
pub type RingdownRecord = analysis::RingdownRecord<f64>;
pub type RecordEntry = analysis::RecordEntry<f64>;
pub type FitResult = analysis::FitResult<f64>;
pub type BoundReport = analysis::BoundReport<f64>;
pub type BoundInputs = analysis::BoundInputs<f64>;
pub type SummaryRow = analysis::SummaryRow<f64>;
pub type DuffingFitOptions = analysis::DuffingFitOptions<f64>;
pub type PendulumSpec = pendulum::PendulumSpec<f64>;
pub type PeriodDataset = pendulum::PeriodDataset<f64>;
pub type PeriodPoint = pendulum::PeriodPoint<f64>;

pub use dynamics::Channel;
pub use analysis::{BoundMethod, ModelTracker};
