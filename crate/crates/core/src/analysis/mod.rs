//! Measurement pipeline: peak tracking, decay and lineshape fits,
//! amplitude-frequency regression, simulation-in-the-loop fitting, Allan
//! deviation and bound reporting.

mod allan;
mod bounds;
mod duffing;
mod fits;
mod record;
mod report;
mod tracking;

pub use allan::{allan_deviation, AllanPoint};
pub use bounds::{
    beta0_bound_from_fit, beta0_bound_null, literature_points, summary_plot_data, BoundInputs, BoundMethod, BoundReport,
    SummaryRow,
};
pub use duffing::{duffing_fit, DuffingFitOptions, ModelTracker};
pub use fits::{fit_amplitude_frequency, fit_exponential_decay, fit_lineshape};
pub use record::{RecordEntry, RingdownRecord};
pub use report::{FitResult, REPORT_FORMAT_VERSION};
pub use tracking::{track_spectral_peak, track_zero_crossings, zero_crossing_frequency};
