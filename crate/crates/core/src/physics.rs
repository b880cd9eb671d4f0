//! Physical constants, the deformed-commutator model and the closed-form
//! amplitude-frequency relation of a mechanical mode.
//!
//! The momentum deformation `p -> p - beta0 p^3 / (3 (M_p c)^2)` restores the
//! canonical commutator at the cost of a quartic term in the Hamiltonian:
//!
//! ```text
//! H = p^2 / 2m + m Omega0^2 x^2 / 2 + beta0 p^4 / (3 m (M_p c)^2)
//! ```
//!
//! The fractional frequency shift used for bounding `beta0` is
//! `beta0 (m Omega0 A / M_p c)^2` ([`gup_frequency_shift`]). First-order
//! averaging of the quartic term over a harmonic cycle gives half of that
//! ([`secular_shift_oracle`]); both are exposed and kept separate.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Reduced Planck constant, J s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
/// Newtonian constant of gravitation, m^3 / (kg s^2).
pub const GRAVITATIONAL_CONSTANT: f64 = 6.674_30e-11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants<T> {
    pub hbar: T,
    pub c: T,
    pub big_g: T,
    pub planck_mass: T,
    pub planck_length: T,
    pub planck_momentum: T,
}

impl<T: Real> PhysicalConstants<T> {
    /// CODATA 2018 values of hbar, c and G with derived Planck scales.
    pub fn codata() -> Self {
        Self::from_fundamental(T::lit(HBAR), T::lit(SPEED_OF_LIGHT), T::lit(GRAVITATIONAL_CONSTANT))
            .expect("CODATA constants are positive")
    }

    pub fn from_fundamental(hbar: T, c: T, big_g: T) -> Result<Self> {
        for (name, v) in [("hbar", hbar), ("c", c), ("G", big_g)] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        let planck_mass = (hbar * c / big_g).sqrt();
        // hbar G / c^3 underflows f32 before the square root; go through M_p.
        let planck_length = hbar / (planck_mass * c);
        Ok(Self {
            hbar,
            c,
            big_g,
            planck_mass,
            planck_length,
            planck_momentum: planck_mass * c,
        })
    }
}

impl<T: Real> Default for PhysicalConstants<T> {
    fn default() -> Self {
        Self::codata()
    }
}

/// Strength of the quadratic momentum correction to the commutator.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GupModel<T> {
    beta0: T,
}

impl<T: Real> GupModel<T> {
    pub fn new(beta0: T) -> Result<Self> {
        if !(beta0 >= T::zero() && beta0.is_finite()) {
            return Err(invalid("beta0", format!("must be finite and >= 0, got {beta0}")));
        }
        Ok(Self { beta0 })
    }

    pub fn unperturbed() -> Self {
        Self { beta0: T::zero() }
    }

    pub fn beta0(&self) -> T {
        self.beta0
    }
}

/// A single mechanical mode: effective mass, angular frequency and loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatorSpec<T> {
    pub label: String,
    pub m_eff: T,
    pub omega0: T,
    pub quality_factor: T,
    pub gamma: T,
}

impl<T: Real> OscillatorSpec<T> {
    pub fn new(label: impl Into<String>, m_eff: T, omega0: T, quality_factor: T) -> Result<Self> {
        if !(m_eff > T::zero() && m_eff.is_finite()) {
            return Err(invalid("m_eff", format!("must be positive, got {m_eff}")));
        }
        if !(omega0 > T::zero() && omega0.is_finite()) {
            return Err(invalid("omega0", format!("must be positive, got {omega0}")));
        }
        if !(quality_factor > T::zero() && quality_factor.is_finite()) {
            return Err(invalid(
                "quality_factor",
                format!("must be positive, got {quality_factor}"),
            ));
        }
        Ok(Self {
            label: label.into(),
            m_eff,
            omega0,
            quality_factor,
            gamma: omega0 / quality_factor,
        })
    }

    /// Build from a frequency in Hz rather than rad/s.
    pub fn from_hz(label: impl Into<String>, m_eff: T, f0_hz: T, quality_factor: T) -> Result<Self> {
        Self::new(label, m_eff, T::TAU() * f0_hz, quality_factor)
    }

    pub fn frequency_hz(&self) -> T {
        self.omega0 / T::TAU()
    }

    /// Momentum amplitude `m Omega0 A` of a harmonic oscillation.
    pub fn momentum_amplitude(&self, amplitude: T) -> T {
        self.m_eff * self.omega0 * amplitude
    }
}

/// Classical phase-space point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OscillatorState<T> {
    pub x: T,
    pub p: T,
    pub t: T,
}

impl<T: Real> OscillatorState<T> {
    pub fn new(x: T, p: T, t: T) -> Self {
        Self { x, p, t }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.p.is_finite() && self.t.is_finite()
    }
}

fn check_amplitude<T: Real>(amplitude: T) -> Result<()> {
    if !(amplitude >= T::zero() && amplitude.is_finite()) {
        return Err(invalid("amplitude", format!("must be finite and >= 0, got {amplitude}")));
    }
    Ok(())
}

/// `(m Omega0 A / M_p c)^2`, the dimensionless momentum scale of an oscillation.
pub fn momentum_ratio_sq<T: Real>(osc: &OscillatorSpec<T>, amplitude: T) -> T {
    let pc = PhysicalConstants::<T>::codata().planck_momentum;
    let r = osc.momentum_amplitude(amplitude) / pc;
    r * r
}

/// Fractional resonance shift `beta0 (m Omega0 A / M_p c)^2`.
pub fn gup_frequency_shift<T: Real>(osc: &OscillatorSpec<T>, gup: GupModel<T>, amplitude: T) -> Result<T> {
    check_amplitude(amplitude)?;
    Ok(gup.beta0() * momentum_ratio_sq(osc, amplitude))
}

/// Largest `beta0` compatible with an unresolved shift at the given amplitude.
pub fn beta0_upper_bound<T: Real>(osc: &OscillatorSpec<T>, amplitude: T, shift_resolution: T) -> Result<GupModel<T>> {
    if !(amplitude > T::zero() && amplitude.is_finite()) {
        return Err(invalid("amplitude", format!("bound undefined for amplitude {amplitude}")));
    }
    if !(shift_resolution > T::zero() && shift_resolution.is_finite()) {
        return Err(invalid(
            "shift_resolution",
            format!("must be positive, got {shift_resolution}"),
        ));
    }
    GupModel::new(shift_resolution / momentum_ratio_sq(osc, amplitude))
}

/// Total energy including the quartic momentum term.
pub fn perturbed_hamiltonian<T: Real>(state: &OscillatorState<T>, osc: &OscillatorSpec<T>, gup: GupModel<T>) -> T {
    let pc = PhysicalConstants::<T>::codata().planck_momentum;
    let m = osc.m_eff;
    let p2 = state.p * state.p;
    let kinetic = p2 / (T::lit(2.0) * m);
    let potential = m * osc.omega0 * osc.omega0 * state.x * state.x / T::lit(2.0);
    let quartic = gup.beta0() * p2 * p2 / (T::lit(3.0) * m * pc * pc);
    kinetic + potential + quartic
}

/// Cycle-averaged first-order shift of the quartic term, `(beta0 / 2)(m Omega0 A / M_p c)^2`.
///
/// `<p^4> = 3/8 (m Omega0 A)^4` over a harmonic cycle and
/// `delta Omega = Omega0 d<dH>/dE` give exactly half of [`gup_frequency_shift`].
pub fn secular_shift_oracle<T: Real>(osc: &OscillatorSpec<T>, gup: GupModel<T>, amplitude: T) -> Result<T> {
    check_amplitude(amplitude)?;
    Ok(gup.beta0() * momentum_ratio_sq(osc, amplitude) / T::lit(2.0))
}

/// `hbar sqrt(beta0) / (M_p c)`.
pub fn min_position_uncertainty<T: Real>(gup: GupModel<T>, constants: &PhysicalConstants<T>) -> T {
    constants.hbar * gup.beta0().sqrt() / constants.planck_momentum
}
