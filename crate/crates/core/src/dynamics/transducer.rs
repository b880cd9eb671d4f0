//! Readout chain: frequency discriminator lineshape and displacement/drive
//! calibration.

use serde::{Deserialize, Serialize};

use super::timeseries::{Channel, TimeSeries};
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Calibration of the displacement readout.
///
/// `transduction_constant` (m/V) is the inverse of the product of the
/// discriminator slope and the displacement-to-frequency slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransducerSpec<T> {
    /// Quadrature mismatch between the discriminator arms, degrees.
    pub mixing_angle_deg: T,
    /// du/df, V/Hz.
    pub discriminator_slope: T,
    /// df/dx, Hz/m.
    pub displacement_to_frequency: T,
    /// dx/du, m/V.
    pub transduction_constant: T,
    /// Electromagnetic drive coupling.
    pub drive_coupling: T,
}

impl<T: Real> TransducerSpec<T> {
    pub fn new(mixing_angle_deg: T, discriminator_slope: T, displacement_to_frequency: T, drive_coupling: T) -> Result<Self> {
        if !(mixing_angle_deg >= T::zero() && mixing_angle_deg < T::lit(90.0)) {
            return Err(invalid(
                "mixing_angle_deg",
                format!("must lie in [0, 90), got {mixing_angle_deg}"),
            ));
        }
        let gain = discriminator_slope * displacement_to_frequency;
        if !(gain > T::zero() && gain.is_finite()) {
            return Err(invalid(
                "discriminator_slope",
                "discriminator and displacement slopes must give a positive gain",
            ));
        }
        if !drive_coupling.is_finite() {
            return Err(invalid("drive_coupling", "must be finite"));
        }
        Ok(Self {
            mixing_angle_deg,
            discriminator_slope,
            displacement_to_frequency,
            transduction_constant: T::one() / gain,
            drive_coupling,
        })
    }

    /// Build from a measured dx/du; df/dx follows from the discriminator slope.
    pub fn from_transduction_constant(
        mixing_angle_deg: T,
        transduction_constant: T,
        discriminator_slope: T,
        drive_coupling: T,
    ) -> Result<Self> {
        if !(transduction_constant > T::zero() && discriminator_slope > T::zero()) {
            return Err(invalid(
                "transduction_constant",
                "transduction constant and discriminator slope must be positive",
            ));
        }
        let mut spec = Self::new(
            mixing_angle_deg,
            discriminator_slope,
            T::one() / (transduction_constant * discriminator_slope),
            drive_coupling,
        )?;
        spec.transduction_constant = transduction_constant;
        Ok(spec)
    }
}

/// Composite absorptive/dispersive response at detuning `f - f0`.
///
/// `half_width` is half the FWHM linewidth; `theta` is in radians.
pub fn ifd_value<T: Real>(detuning: T, half_width: T, theta: T, scale: T) -> T {
    let d2 = detuning * detuning + half_width * half_width;
    let absorptive = half_width * half_width / d2;
    let dispersive = half_width * detuning / d2;
    scale * (theta.cos() * absorptive + theta.sin() * dispersive)
}

/// Discriminator output over a frequency grid for a resonance at `center`
/// with FWHM `linewidth` (Hz) and mixing angle in degrees.
pub fn ifd_response<T: Real>(freq_grid: &[T], center: T, linewidth: T, mixing_angle_deg: T, scale: T) -> Result<Vec<T>> {
    if !(linewidth > T::zero()) {
        return Err(invalid("linewidth", format!("must be positive, got {linewidth}")));
    }
    let theta = mixing_angle_deg.to_radians();
    let hw = linewidth / T::lit(2.0);
    Ok(freq_grid.iter().map(|f| ifd_value(*f - center, hw, theta, scale)).collect())
}

/// Displacement record to discriminator voltage, `u = x / (dx/du)`.
pub fn transduce<T: Real>(displacement: &TimeSeries<T>, spec: &TransducerSpec<T>) -> Result<TimeSeries<T>> {
    if displacement.channel != Channel::Displacement {
        return Err(invalid(
            "displacement",
            format!("expected a displacement channel, got {}", displacement.channel),
        ));
    }
    let k = spec.transduction_constant;
    Ok(displacement.map(Channel::Voltage, |x| x / k))
}

/// Discriminator voltage produced by a modulated drive power,
/// `du = chi (du/df) (df/dx)^2 dP`.
pub fn drive_response<T: Real>(power_modulation: T, spec: &TransducerSpec<T>) -> Result<T> {
    if !(power_modulation >= T::zero()) {
        return Err(invalid(
            "power_modulation",
            format!("must be >= 0, got {power_modulation}"),
        ));
    }
    let dfdx = spec.displacement_to_frequency;
    Ok(spec.drive_coupling * spec.discriminator_slope * dfdx * dfdx * power_modulation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sapphire_readout() -> TransducerSpec<f64> {
        // 526 nm/mV with an arbitrary 1 mV/Hz discriminator slope
        TransducerSpec::from_transduction_constant(55.0, 526e-9 / 1e-3, 1e-3, 2.0).unwrap()
    }

    #[test]
    fn pure_lorentzian_peaks_at_scale() {
        let u = ifd_response(&[100.0], 100.0, 0.5, 0.0, 3.0).unwrap();
        assert_eq!(u[0], 3.0);
        let grid: Vec<f64> = (0..201).map(|i| 99.0 + i as f64 * 0.01).collect();
        let u = ifd_response(&grid, 100.0, 0.5, 0.0, 3.0).unwrap();
        assert!(u.iter().all(|v| *v <= 3.0));
        // half power at +-linewidth/2
        let half = ifd_response(&[100.25, 99.75], 100.0, 0.5, 0.0, 3.0).unwrap();
        assert_relative_eq!(half[0], 1.5, max_relative = 1e-12);
        assert_relative_eq!(half[1], 1.5, max_relative = 1e-12);
    }

    #[test]
    fn dispersive_is_odd() {
        let f0: f64 = 127_070.969_5;
        let lw: f64 = 3.5e-3;
        assert!(ifd_response(&[f0], f0, lw, 90.0, 1.0).unwrap()[0].abs() < 1e-15);
        for d in [1e-4, 1e-3, 5e-3, 2e-2] {
            let u = ifd_response(&[f0 + d, f0 - d], f0, lw, 90.0, 1.0).unwrap();
            assert!((u[0] + u[1]).abs() < 1e-9 * u[0].abs(), "{u:?}");
        }
    }

    #[test]
    fn rejects_zero_linewidth() {
        assert!(ifd_response(&[1.0], 1.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn transduction_constant_calibration() {
        let spec = sapphire_readout();
        let x = TimeSeries::new(Channel::Displacement, 1.0, 0.0, vec![526e-9, 0.0, -1052e-9]).unwrap();
        let u = transduce(&x, &spec).unwrap();
        assert_eq!(u.channel, Channel::Voltage);
        assert_relative_eq!(u.values[0], 1e-3, max_relative = 1e-12);
        assert_eq!(u.values[1], 0.0);
        assert_relative_eq!(u.values[2], -2e-3, max_relative = 1e-12);
        assert!(transduce(&u, &spec).is_err());
    }

    #[test]
    fn transduction_is_linear() {
        let spec = sapphire_readout();
        let x = TimeSeries::new(Channel::Displacement, 1.0, 0.0, vec![1e-9, -3e-10, 7e-11]).unwrap();
        let a = 3.7;
        let ux = transduce(&x, &spec).unwrap();
        let uax = transduce(&x.map(Channel::Displacement, |v| a * v), &spec).unwrap();
        for (p, q) in ux.values.iter().zip(&uax.values) {
            assert_relative_eq!(*q, a * p, max_relative = 1e-15);
        }
    }

    #[test]
    fn drive_calibration_by_hand() {
        // du/df = 2e-3 V/Hz, df/dx = 5e8 Hz/m, chi = 1.5e-12
        let spec = TransducerSpec::new(10.0, 2e-3, 5e8, 1.5e-12).unwrap();
        assert_eq!(drive_response(0.0, &spec).unwrap(), 0.0);
        let du = drive_response(0.25, &spec).unwrap();
        assert_relative_eq!(du, 1.5e-12 * 2e-3 * 2.5e17 * 0.25, max_relative = 1e-14);
        assert_relative_eq!(drive_response(0.5, &spec).unwrap(), 2.0 * du, max_relative = 1e-15);
        // Displacement per watt from the two calibrations: chi df/dx.
        let dx = du * spec.transduction_constant;
        assert_relative_eq!(dx / 0.25, 1.5e-12 * 5e8, max_relative = 1e-14);
        assert!(drive_response(-1.0, &spec).is_err());
    }

    #[test]
    fn mixing_angle_range() {
        assert!(TransducerSpec::new(90.0, 1.0, 1.0, 0.0).is_err());
        assert!(TransducerSpec::new(-1.0, 1.0, 1.0, 0.0).is_err());
        assert!(TransducerSpec::new(0.0, 1.0, 0.0, 0.0).is_err());
    }
}
