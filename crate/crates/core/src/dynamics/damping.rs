use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::physics::OscillatorSpec;
use crate::scalar::Real;

/// Momentum-proportional loss `dp/dt = -gamma p`.
///
/// The displacement envelope decays as `exp(-gamma t / 2)`, so the amplitude
/// decay time is `2 / gamma`. `gamma = 0` is the undamped limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DampingModel<T> {
    pub gamma: T,
    pub amplitude_decay_time: T,
}

impl<T: Real> DampingModel<T> {
    pub fn from_gamma(gamma: T) -> Result<Self> {
        if !(gamma >= T::zero() && gamma.is_finite()) {
            return Err(invalid("gamma", format!("must be finite and >= 0, got {gamma}")));
        }
        Ok(Self {
            gamma,
            amplitude_decay_time: T::lit(2.0) / gamma,
        })
    }

    pub fn from_decay_time(tau: T) -> Result<Self> {
        if !(tau > T::zero()) {
            return Err(invalid("amplitude_decay_time", format!("must be positive, got {tau}")));
        }
        Ok(Self {
            gamma: T::lit(2.0) / tau,
            amplitude_decay_time: tau,
        })
    }

    pub fn undamped() -> Self {
        Self {
            gamma: T::zero(),
            amplitude_decay_time: T::infinity(),
        }
    }

    /// Linewidth implied by the oscillator's quality factor.
    pub fn from_oscillator(osc: &OscillatorSpec<T>) -> Self {
        Self::from_gamma(osc.gamma).expect("oscillator gamma is positive")
    }

    /// `Q = Omega0 tau_a / 2`.
    pub fn quality_factor(&self, omega0: T) -> T {
        omega0 * self.amplitude_decay_time / T::lit(2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_time_and_gamma() {
        let d = DampingModel::<f64>::from_decay_time(173.0).unwrap();
        assert!((d.gamma * d.amplitude_decay_time - 2.0).abs() < 1e-15);
        let g = DampingModel::from_gamma(0.25).unwrap();
        assert_eq!(g.amplitude_decay_time, 8.0);
        assert!(DampingModel::from_gamma(-1.0).is_err());
        assert!(DampingModel::from_decay_time(0.0).is_err());
        assert!(DampingModel::<f64>::undamped().amplitude_decay_time.is_infinite());
    }

    #[test]
    fn sapphire_quality_factor_from_decay_time() {
        // Omega0 tau / 2 with 127071 Hz and 173 s
        let d = DampingModel::<f64>::from_decay_time(173.0).unwrap();
        let q = d.quality_factor(std::f64::consts::TAU * 127_071.0);
        assert!((q - 6.906e7).abs() / 6.906e7 < 1e-3, "{q}");
    }
}
