use super::record::RingdownRecord;
use super::report::FitResult;
use crate::dynamics::ifd_value;
use crate::error::{Error, Result};
use crate::numeric::linalg::weighted_least_squares;
use crate::numeric::lsq::{levenberg_marquardt, LmSettings};
use crate::physics::{momentum_ratio_sq, OscillatorSpec};
use crate::scalar::Real;

fn rms<T: Real>(r: &[T]) -> T {
    if r.is_empty() {
        return T::zero();
    }
    (r.iter().fold(T::zero(), |s, v| s + *v * *v) / T::from_count(r.len())).sqrt()
}

/// Fit `A(t) = A0 exp(-t / tau_a)` to the record's amplitudes.
///
/// Reports `A0`, `tau_a` and, when the record carries frequencies,
/// `Q = Omega0 tau_a / 2` with `Omega0` from the median tracked frequency.
/// Uncertainties come from the fit covariance scaled by the residual variance.
pub fn fit_exponential_decay<T: Real>(record: &RingdownRecord<T>) -> FitResult<T> {
    const KIND: &str = "exponential_decay";
    let pts: Vec<(T, T)> = record
        .entries
        .iter()
        .filter(|e| e.amplitude > T::zero())
        .map(|e| (e.time, e.amplitude))
        .collect();
    if pts.len() < 3 {
        return FitResult::failed(KIND, "fewer than three positive amplitudes");
    }
    // Log-linear regression for the starting point.
    let design: Vec<Vec<T>> = pts.iter().map(|(t, _)| vec![T::one(), *t]).collect();
    let logs: Vec<T> = pts.iter().map(|(_, a)| a.ln()).collect();
    let weights: Vec<T> = pts.iter().map(|(_, a)| *a * *a).collect();
    let Some((coef, _)) = weighted_least_squares(&design, &logs, &weights) else {
        return FitResult::failed(KIND, "degenerate time axis");
    };
    let rate0 = -coef[1];
    if !(rate0 > T::zero()) {
        return FitResult::failed(KIND, "amplitude does not decay");
    }
    let a0 = coef[0].exp();
    let out = levenberg_marquardt(
        |p: &[T]| Some(pts.iter().map(|(t, a)| p[0] * (-p[1] * *t).exp() - *a).collect()),
        &[a0, rate0],
        &[a0, rate0],
        &LmSettings::default(),
    );
    let sig = out.sigmas(true);
    let (amp, rate) = (out.params[0], out.params[1]);
    let mut fit = FitResult::new(KIND);
    fit.converged = out.converged;
    if !out.converged {
        fit.note(out.message.clone());
    }
    if !(rate > T::zero()) || rate <= T::lit(2.0) * sig[1] {
        fit.converged = false;
        fit.note("decay rate is not significantly positive");
    }
    let tau = T::one() / rate;
    fit.set("A0", amp, sig[0]);
    fit.set("tau_a", tau, sig[1] / (rate * rate));
    if let Some(f) = record.reference_frequency() {
        let omega = T::TAU() * f;
        fit.set("Q", omega * tau / T::lit(2.0), omega * sig[1] / (rate * rate) / T::lit(2.0));
    }
    let span = pts[pts.len() - 1].0 - pts[0].0;
    if pts.len() < 10 {
        fit.note(format!("only {} entries; at least 10 recommended", pts.len()));
    }
    if span < tau {
        fit.note("record spans less than one decay time");
    }
    let resid: Vec<T> = pts.iter().map(|(t, a)| amp * (-rate * *t).exp() - *a).collect();
    fit.residual_rms = rms(&resid);
    fit
}

/// Data-driven starting point `(f0, half_width, theta, scale)`.
fn lineshape_guess<T: Real>(curve: &[(T, T)]) -> (T, T, T, T) {
    let (i_max, _) = curve
        .iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |b, (i, (_, u))| if *u > b.1 { (i, *u) } else { b });
    let (i_min, _) = curve
        .iter()
        .enumerate()
        .fold((0, T::infinity()), |b, (i, (_, u))| if *u < b.1 { (i, *u) } else { b });
    let (f_max, u_max) = curve[i_max];
    let (f_min, u_min) = curve[i_min];
    let span = u_max - u_min;

    // Half-power width around the maximum, measured above the baseline.
    let half = (u_max + u_min.min(T::zero())) / T::lit(2.0);
    let mut lo = i_max;
    while lo > 0 && curve[lo - 1].1 >= half {
        lo -= 1;
    }
    let mut hi = i_max;
    while hi + 1 < curve.len() && curve[hi + 1].1 >= half {
        hi += 1;
    }
    let step = (curve[curve.len() - 1].0 - curve[0].0).abs() / T::from_count(curve.len().max(2) - 1);
    let hp_width = ((curve[hi].0 - curve[lo].0).abs()).max(step);

    // A response with a clear negative lobe is read off the lobe ratio:
    // extremes are scale (1 + cos theta) / 2 and scale (cos theta - 1) / 2.
    if u_min < -T::lit(0.05) * u_max && span > T::zero() {
        let cos_t = ((u_max + u_min) / span).max(-T::one()).min(T::one());
        let mag = cos_t.acos();
        let theta = if f_max > f_min { mag } else { -mag };
        // extrema sit at x = tan(theta/2) and -cot(theta/2) half-widths
        let sin_t = theta.sin().abs();
        let hw = if sin_t > T::lit(0.2) {
            (f_max - f_min).abs() * sin_t / T::lit(2.0)
        } else {
            hp_width / T::lit(2.0)
        };
        let mid = (f_max + f_min) / T::lit(2.0);
        let f0 = mid + hw / theta.tan();
        (f0, hw, theta, span)
    } else {
        (f_max, hp_width / T::lit(2.0), T::zero(), u_max)
    }
}

/// Fit the composite absorptive/dispersive discriminator response.
///
/// Parameters: `f0` (Hz), `linewidth` (FWHM, Hz), `mixing_angle` (degrees)
/// and `scale`. The centre is fitted as an offset from the initial guess so
/// that finite-difference steps resolve sub-millihertz structure on a
/// ~100 kHz carrier.
pub fn fit_lineshape<T: Real>(curve: &[(T, T)]) -> Result<FitResult<T>> {
    const KIND: &str = "lineshape";
    if curve.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "lineshape fit needs at least 8 points, got {}",
            curve.len()
        )));
    }
    let (f_ref, hw0, theta0, scale0) = lineshape_guess(curve);
    let detunings: Vec<T> = curve.iter().map(|(f, _)| *f - f_ref).collect();
    let model = |p: &[T]| -> Option<Vec<T>> {
        Some(
            detunings
                .iter()
                .zip(curve)
                .map(|(d, (_, u))| ifd_value(*d - p[0], p[1], p[2], p[3]) - *u)
                .collect(),
        )
    };
    let out = levenberg_marquardt(
        model,
        &[T::zero(), hw0, theta0, scale0],
        &[hw0, hw0, T::lit(0.1), scale0.abs()],
        &LmSettings::default(),
    );
    let sig = out.sigmas(true);
    let mut p = out.params.clone();
    // Canonical form: positive width and scale, angle in (-180, 180].
    p[1] = p[1].abs();
    if p[3] < T::zero() {
        p[3] = -p[3];
        p[2] += T::PI();
    }
    let two_pi = T::TAU();
    p[2] = p[2] - two_pi * ((p[2] + T::PI()) / two_pi).floor();
    if p[2] <= -T::PI() {
        p[2] += two_pi;
    }

    let mut fit = FitResult::new(KIND);
    fit.converged = out.converged;
    if !out.converged {
        fit.note(out.message.clone());
    }
    fit.set("f0", f_ref + p[0], sig[0]);
    fit.set("linewidth", T::lit(2.0) * p[1], T::lit(2.0) * sig[1]);
    fit.set("mixing_angle", p[2].to_degrees(), sig[2].to_degrees());
    fit.set("scale", p[3], sig[3]);
    let width = T::lit(2.0) * p[1];
    let span = (curve[curve.len() - 1].0 - curve[0].0).abs();
    if span < T::lit(3.0) * width {
        fit.note("frequency span is less than three linewidths");
    }
    fit.residual_rms = (out.cost / T::from_count(curve.len())).sqrt();
    Ok(fit)
}

/// Weighted regression of tracked frequency against amplitude squared.
///
/// Fits `f = f_A0 (1 + c A^2)` with weights proportional to `A^2` and reports
/// `quadratic_coefficient` (c, in 1/amplitude^2), `frequency_intercept`, and
/// `beta0_closed_form`, the value of beta0 that the closed-form shift relation
/// assigns to `c` when amplitudes are displacements in metres. A known
/// intrinsic quadratic coefficient is subtracted before that conversion.
///
/// Uncertainties are scaled by the weighted residual variance. When the
/// record spans less than a factor of two in amplitude, a warning is added
/// and the uncertainties are widened by the shortfall in `A^2` lever arm.
pub fn fit_amplitude_frequency<T: Real>(
    record: &RingdownRecord<T>,
    osc: &OscillatorSpec<T>,
    intrinsic_coefficient: Option<T>,
) -> FitResult<T> {
    const KIND: &str = "amplitude_frequency";
    let pts: Vec<(T, T)> = record
        .entries
        .iter()
        .filter(|e| e.amplitude > T::zero() && e.frequency > T::zero())
        .map(|e| (e.amplitude * e.amplitude, e.frequency))
        .collect();
    if pts.len() < 3 {
        return FitResult::failed(KIND, "fewer than three usable entries");
    }
    let wsum = pts.iter().fold(T::zero(), |s, (a2, _)| s + *a2);
    let x_bar = pts.iter().fold(T::zero(), |s, (a2, _)| s + *a2 * *a2) / wsum;
    let f_ref = pts.iter().fold(T::zero(), |s, (a2, f)| s + *a2 * *f) / wsum;
    let design: Vec<Vec<T>> = pts.iter().map(|(a2, _)| vec![T::one(), *a2 - x_bar]).collect();
    let y: Vec<T> = pts.iter().map(|(_, f)| *f - f_ref).collect();
    let w: Vec<T> = pts.iter().map(|(a2, _)| *a2 / x_bar).collect();
    let Some((coef, cov)) = weighted_least_squares(&design, &y, &w) else {
        return FitResult::failed(KIND, "amplitudes carry no lever arm");
    };
    let resid: Vec<T> = design
        .iter()
        .zip(&y)
        .map(|(d, yi)| coef[0] + coef[1] * d[1] - *yi)
        .collect();
    let dof = pts.len().saturating_sub(2).max(1);
    let chi2 = resid.iter().zip(&w).fold(T::zero(), |s, (r, wi)| s + *wi * *r * *r);
    let s2 = chi2 / T::from_count(dof);

    let slope = coef[1];
    let intercept = f_ref + coef[0] - slope * x_bar;
    let var_b = cov.get(1, 1) * s2;
    let var_a = (cov.get(0, 0) + x_bar * x_bar * cov.get(1, 1) - T::lit(2.0) * x_bar * cov.get(0, 1)) * s2;
    let cov_ab = (cov.get(0, 1) - x_bar * cov.get(1, 1)) * s2;
    let c = slope / intercept;
    let i2 = intercept * intercept;
    let var_c = var_b / i2 + slope * slope * var_a / (i2 * i2) - T::lit(2.0) * slope * cov_ab / (i2 * intercept);
    let mut sigma_c = var_c.max(T::zero()).sqrt();
    let mut sigma_a = var_a.max(T::zero()).sqrt();

    let mut fit = FitResult::new(KIND);
    fit.converged = true;
    let a_max = pts.iter().fold(T::zero(), |m, (a2, _)| m.max(*a2));
    let a_min = pts.iter().fold(T::infinity(), |m, (a2, _)| m.min(*a2));
    let ratio_sq = a_max / a_min;
    if ratio_sq < T::lit(4.0) {
        let widen = T::lit(0.75) / (T::one() - T::one() / ratio_sq);
        sigma_c *= widen;
        sigma_a *= widen;
        fit.note(format!(
            "amplitude spans only a factor {:.3}; uncertainties widened by {:.3}",
            ratio_sq.sqrt().as_f64(),
            widen.as_f64()
        ));
    }
    fit.set("quadratic_coefficient", c, sigma_c);
    fit.set("frequency_intercept", intercept, sigma_a);
    let net = c - intrinsic_coefficient.unwrap_or(T::zero());
    let per_m2 = momentum_ratio_sq(osc, T::one());
    fit.set("beta0_closed_form", net / per_m2, sigma_c / per_m2);
    if intrinsic_coefficient.is_some() {
        fit.note("intrinsic quadratic coefficient subtracted before conversion to beta0");
    }
    fit.residual_rms = rms(&resid);
    fit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::record::RecordEntry;
    use crate::dynamics::{ifd_response, white_noise};

    fn decay_record(tau: f64, a0: f64, noise: f64, seed: u64) -> RingdownRecord<f64> {
        let n = 40;
        let t: Vec<f64> = (0..n).map(|i| 0.1 + i as f64 * 0.2).collect();
        let z = white_noise(n, noise, seed);
        let entries = t
            .iter()
            .zip(&z)
            .map(|(t, z)| {
                let a = a0 * (-t / tau).exp();
                RecordEntry {
                    time: *t,
                    frequency: 1000.0,
                    amplitude: (a * (1.0 + z)).max(0.0),
                }
            })
            .collect();
        RingdownRecord::new(entries, 0.2, 5.0).unwrap()
    }

    #[test]
    fn decay_noiseless() {
        let fit = fit_exponential_decay(&decay_record(3.0, 1e-9, 0.0, 0));
        assert!(fit.converged, "{:?}", fit.diagnostics);
        assert!((fit.value("tau_a").unwrap() - 3.0).abs() / 3.0 < 1e-3);
        let q = fit.value("Q").unwrap();
        assert!((q - std::f64::consts::TAU * 1000.0 * 3.0 / 2.0).abs() / q < 1e-3);
    }

    #[test]
    fn constant_amplitude_does_not_converge() {
        let fit = fit_exponential_decay(&decay_record(f64::INFINITY, 1e-9, 0.0, 0));
        assert!(!fit.converged);
    }

    #[test]
    fn decay_with_one_percent_noise() {
        let fit = fit_exponential_decay(&decay_record(3.0, 1e-9, 0.01, 5));
        assert!(fit.converged);
        assert!((fit.value("tau_a").unwrap() - 3.0).abs() / 3.0 < 0.02);
    }

    fn lineshape_curve(f0: f64, lw: f64, deg: f64) -> Vec<(f64, f64)> {
        let grid: Vec<f64> = (0..121).map(|i| f0 - 6.0 * lw + i as f64 * 0.1 * lw).collect();
        let u = ifd_response(&grid, f0, lw, deg, 2.0).unwrap();
        grid.into_iter().zip(u).collect()
    }

    #[test]
    fn pure_lorentzian_exact_recovery() {
        let curve = lineshape_curve(127_070.969_5, 3.5e-3, 0.0);
        let fit = fit_lineshape(&curve).unwrap();
        assert!(fit.converged, "{:?}", fit.diagnostics);
        assert!((fit.value("f0").unwrap() - 127_070.969_5).abs() < 1e-9);
        assert!((fit.value("linewidth").unwrap() - 3.5e-3).abs() < 1e-10);
        assert!(fit.value("mixing_angle").unwrap().abs() < 1e-6);
        assert!((fit.value("scale").unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn mirrored_axis_flips_angle() {
        let f0 = 127_070.969_5;
        let curve = lineshape_curve(f0, 3.5e-3, 55.0);
        let mirrored: Vec<(f64, f64)> = curve.iter().rev().map(|(f, u)| (2.0 * f0 - f, *u)).collect();
        let a = fit_lineshape(&curve).unwrap();
        let b = fit_lineshape(&mirrored).unwrap();
        let ta = a.value("mixing_angle").unwrap();
        let tb = b.value("mixing_angle").unwrap();
        assert!((ta - 55.0).abs() < 1e-6, "{ta}");
        assert!((tb + 55.0).abs() < 1e-6, "{tb}");
    }

    #[test]
    fn lineshape_needs_eight_points() {
        assert!(fit_lineshape(&lineshape_curve(1.0, 0.1, 0.0)[..7]).is_err());
    }

    fn af_record(c: f64, f0: f64) -> RingdownRecord<f64> {
        let entries = (0..50)
            .map(|i| {
                let a = 1e-9 * (-(i as f64) / 30.0).exp();
                RecordEntry {
                    time: i as f64 * 0.2,
                    frequency: f0 * (1.0 + c * a * a),
                    amplitude: a,
                }
            })
            .collect();
        RingdownRecord::new(entries, 0.2, 5.0).unwrap()
    }

    #[test]
    fn regression_null_is_zero() {
        let osc = OscillatorSpec::from_hz("s", 0.3, 127_071.0, 1e7).unwrap();
        let fit = fit_amplitude_frequency(&af_record(0.0, 127_071.0), &osc, None);
        let c = fit.value("quadratic_coefficient").unwrap();
        assert!((c * 1e-18).abs() < 1e-12, "{c}");
    }

    #[test]
    fn regression_recovers_injected_coefficient() {
        let osc = OscillatorSpec::from_hz("s", 0.3, 1000.0, 1e7).unwrap();
        let fit = fit_amplitude_frequency(&af_record(1e14, 1000.0), &osc, None);
        let c = fit.value("quadratic_coefficient").unwrap();
        assert!((c - 1e14).abs() / 1e14 < 1e-9, "{c}");
        assert!((fit.value("frequency_intercept").unwrap() - 1000.0).abs() < 1e-9);
        let with_intrinsic = fit_amplitude_frequency(&af_record(1e14, 1000.0), &osc, Some(1e14));
        assert!(with_intrinsic.value("beta0_closed_form").unwrap().abs() < 1e-6 * fit.value("beta0_closed_form").unwrap());
    }

    #[test]
    fn narrow_amplitude_range_widens_uncertainty() {
        let osc = OscillatorSpec::from_hz("s", 0.3, 1000.0, 1e7).unwrap();
        let noisy = |span: f64| {
            let z = white_noise(50, 1e-4, 9);
            let entries = (0..50)
                .map(|i| {
                    let a = 1e-9 * (1.0 - span * i as f64 / 49.0);
                    RecordEntry { time: i as f64, frequency: 1000.0 + z[i], amplitude: a }
                })
                .collect();
            fit_amplitude_frequency(&RingdownRecord::new(entries, 1.0, 1.0).unwrap(), &osc, None)
        };
        let narrow = noisy(0.2);
        assert!(!narrow.diagnostics.is_empty());
        assert!(noisy(0.7).diagnostics.is_empty());
    }
}
