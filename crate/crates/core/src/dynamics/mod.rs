//! Time-domain simulation of the perturbed damped oscillator, the readout
//! chain and synthetic instrument noise.

mod damping;
mod noise;
mod sim;
mod timeseries;
mod transducer;

pub use damping::DampingModel;
pub use noise::{synthesize_frequency_noise, white_noise, NoiseSpec};
pub use sim::{
    equations_of_motion, integrate_trajectory, simulate_ringdown, IntegrationControl, StateDerivative,
    MAX_SHIFT, MIN_OVERSAMPLING,
};
pub use timeseries::{Channel, TimeSeries};
pub use transducer::{drive_response, ifd_response, ifd_value, transduce, TransducerSpec};
