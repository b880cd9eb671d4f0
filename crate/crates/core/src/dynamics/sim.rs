use super::damping::DampingModel;
use super::noise::{stream, synthesize_frequency_noise, NoiseSpec};
use super::timeseries::{Channel, TimeSeries};
use crate::error::{invalid, Error, Result};
use crate::numeric::ode::{step_for_tolerance, GaussLegendre6, OdeSystem};
use crate::physics::{momentum_ratio_sq, GupModel, OscillatorSpec, OscillatorState, PhysicalConstants};
use crate::scalar::Real;

/// Sampling must be at least this multiple of the resonance frequency.
pub const MIN_OVERSAMPLING: f64 = 4.0;

/// Largest closed-form fractional shift the integrator accepts. Beyond it
/// the quartic term dominates the motion and the step count explodes.
pub const MAX_SHIFT: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative<T> {
    pub dx: T,
    pub dp: T,
}

/// Phase-space flow of the perturbed Hamiltonian with momentum damping.
#[derive(Debug, Clone, Copy)]
struct Flow<T> {
    mass: T,
    stiffness: T,
    quartic: T,
    gamma: T,
}

impl<T: Real> Flow<T> {
    fn new(osc: &OscillatorSpec<T>, gup: GupModel<T>, damping: &DampingModel<T>) -> Self {
        let pc = PhysicalConstants::<T>::codata().planck_momentum;
        let m = osc.m_eff;
        Self {
            mass: m,
            stiffness: m * osc.omega0 * osc.omega0,
            quartic: T::lit(4.0) * gup.beta0() / (T::lit(3.0) * m * pc * pc),
            gamma: damping.gamma,
        }
    }

    #[inline]
    fn eval(&self, x: T, p: T) -> (T, T) {
        let dx = p / self.mass + self.quartic * p * p * p;
        let dp = -self.stiffness * x - self.gamma * p;
        (dx, dp)
    }
}

impl<T: Real> OdeSystem<T, 2> for Flow<T> {
    fn rhs(&self, _t: T, y: &[T; 2]) -> [T; 2] {
        let (dx, dp) = self.eval(y[0], y[1]);
        [dx, dp]
    }
}

/// `dx/dt = dH/dp`, `dp/dt = -dH/dx - gamma p`.
pub fn equations_of_motion<T: Real>(
    state: &OscillatorState<T>,
    osc: &OscillatorSpec<T>,
    gup: GupModel<T>,
    damping: &DampingModel<T>,
) -> StateDerivative<T> {
    let (dx, dp) = Flow::new(osc, gup, damping).eval(state.x, state.p);
    StateDerivative { dx, dp }
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrationControl<T> {
    /// Per-step phase error budget in radians.
    pub rtol: T,
    /// Spacing of returned states; defaults to 1/16 of the unperturbed period.
    pub output_interval: Option<T>,
}

impl<T: Real> Default for IntegrationControl<T> {
    fn default() -> Self {
        Self {
            rtol: T::lit(1e-10),
            output_interval: None,
        }
    }
}

struct Stepper<T> {
    flow: Flow<T>,
    gl: GaussLegendre6<T>,
    h_max: T,
    scale: [T; 2],
}

impl<T: Real> Stepper<T> {
    fn new(
        initial: &OscillatorState<T>,
        osc: &OscillatorSpec<T>,
        gup: GupModel<T>,
        damping: &DampingModel<T>,
        rtol: T,
    ) -> Result<Self> {
        if !(rtol > T::zero() && rtol < T::one()) {
            return Err(invalid("rtol", format!("must lie in (0, 1), got {rtol}")));
        }
        if !initial.is_finite() {
            return Err(invalid("initial", "state must be finite"));
        }
        let flow = Flow::new(osc, gup, damping);
        let mw = osc.m_eff * osc.omega0;
        let amplitude = (initial.x * initial.x + (initial.p / mw) * (initial.p / mw)).sqrt();
        let amplitude = if amplitude > T::zero() { amplitude } else { T::one() };
        // The quartic term speeds the oscillation up by about twice the
        // closed-form shift; budget for it and for the loss rate.
        let shift = gup.beta0() * momentum_ratio_sq(osc, amplitude);
        if !(shift <= T::lit(MAX_SHIFT)) {
            return Err(invalid(
                "beta0",
                format!(
                    "closed-form shift {:e} at amplitude {:e} exceeds {MAX_SHIFT}; the motion is not a perturbed oscillation",
                    shift.as_f64(),
                    amplitude.as_f64()
                ),
            ));
        }
        let rate = osc.omega0 * (T::one() + T::lit(2.0) * shift) + damping.gamma;
        let h_max = step_for_tolerance(rate, rtol);
        Ok(Self {
            flow,
            gl: GaussLegendre6 {
                min_step: h_max / T::lit(1024.0),
                ..Default::default()
            },
            h_max,
            scale: [amplitude, mw * amplitude],
        })
    }

    fn advance(&self, t: T, y: &[T; 2], dt: T) -> Result<[T; 2]> {
        let next = self.gl.advance(&self.flow, t, y, dt, self.h_max, &self.scale)?;
        if !(next[0].is_finite() && next[1].is_finite()) {
            return Err(Error::IntegrationFailed {
                time: (t + dt).as_f64(),
                reason: "state became non-finite".into(),
            });
        }
        Ok(next)
    }
}

/// Integrate the perturbed oscillator for `duration` seconds.
///
/// Uses sixth-order Gauss-Legendre collocation with a step chosen so the
/// phase error per step stays below `control.rtol`. Returns states at the
/// output interval, starting with `initial` and ending exactly at
/// `initial.t + duration`.
pub fn integrate_trajectory<T: Real>(
    initial: &OscillatorState<T>,
    osc: &OscillatorSpec<T>,
    gup: GupModel<T>,
    damping: &DampingModel<T>,
    duration: T,
    control: &IntegrationControl<T>,
) -> Result<Vec<OscillatorState<T>>> {
    if !(duration > T::zero() && duration.is_finite()) {
        return Err(invalid("duration", format!("must be positive, got {duration}")));
    }
    let interval = control
        .output_interval
        .unwrap_or_else(|| T::TAU() / (osc.omega0 * T::lit(16.0)));
    if !(interval > T::zero()) {
        return Err(invalid("output_interval", "must be positive"));
    }
    let stepper = Stepper::new(initial, osc, gup, damping, control.rtol)?;
    let full = (duration / interval).floor().to_usize().unwrap_or(0);
    let mut out = Vec::with_capacity(full + 2);
    out.push(*initial);
    let mut y = [initial.x, initial.p];
    for k in 0..full {
        let t = initial.t + T::from_count(k) * interval;
        y = stepper.advance(t, &y, interval)?;
        out.push(OscillatorState::new(y[0], y[1], initial.t + T::from_count(k + 1) * interval));
    }
    let covered = T::from_count(full) * interval;
    let rest = duration - covered;
    if rest > interval * T::lit(1e-9) {
        y = stepper.advance(initial.t + covered, &y, rest)?;
        out.push(OscillatorState::new(y[0], y[1], initial.t + duration));
    }
    Ok(out)
}

/// Seeded displacement record of a free decay starting at rest at `a0`.
///
/// Fractional-frequency noise in `noise` modulates the rate at which the
/// oscillator's internal clock runs; additive white noise is added to the
/// sampled displacement afterwards. The series has `round(duration * rate)`
/// samples taken at `t = k / rate`.
pub fn simulate_ringdown<T: Real>(
    osc: &OscillatorSpec<T>,
    gup: GupModel<T>,
    damping: &DampingModel<T>,
    a0: T,
    duration: T,
    sample_rate: T,
    noise: &NoiseSpec<T>,
) -> Result<TimeSeries<T>> {
    if !(a0 > T::zero() && a0.is_finite()) {
        return Err(invalid("a0", format!("initial amplitude must be positive, got {a0}")));
    }
    if !(duration > T::zero() && duration.is_finite()) {
        return Err(invalid("duration", format!("must be positive, got {duration}")));
    }
    let required = T::lit(MIN_OVERSAMPLING) * osc.frequency_hz();
    if !(sample_rate >= required) {
        return Err(Error::Undersampled {
            given: sample_rate.as_f64(),
            required: required.as_f64(),
        });
    }
    let n = (duration * sample_rate).round().to_usize().unwrap_or(0).max(1);
    let dt = T::one() / sample_rate;
    let initial = OscillatorState::new(a0, T::zero(), T::zero());
    let stepper = Stepper::new(&initial, osc, gup, damping, T::lit(1e-10))?;

    let clock = if noise.has_frequency_noise() {
        Some(synthesize_frequency_noise(noise, T::from_count(n) / sample_rate, sample_rate)?.values)
    } else {
        None
    };

    let mut values = Vec::with_capacity(n);
    let mut y = [a0, T::zero()];
    let mut t_internal = T::zero();
    values.push(a0);
    for k in 1..n {
        let step = match &clock {
            Some(yf) => dt * (T::one() + yf[k - 1]),
            None => dt,
        };
        y = stepper.advance(t_internal, &y, step)?;
        t_internal += step;
        values.push(y[0]);
    }

    if noise.additive_white_rms > T::zero() {
        let mut r = super::noise::rng(noise.seed, stream::ADDITIVE);
        for v in values.iter_mut() {
            let z: f64 = rand::Rng::sample(&mut r, rand_distr::StandardNormal);
            *v += noise.additive_white_rms * T::lit(z);
        }
    }
    Ok(TimeSeries::new(Channel::Displacement, sample_rate, T::zero(), values)?.with_seed(noise.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{perturbed_hamiltonian, secular_shift_oracle};
    use approx::assert_relative_eq;

    fn unit_osc() -> OscillatorSpec<f64> {
        OscillatorSpec::from_hz("desk", 0.3, 1000.0, 1e6).unwrap()
    }

    /// beta0 giving a secular fractional shift `target` at amplitude `a`.
    fn beta_for_secular(osc: &OscillatorSpec<f64>, a: f64, target: f64) -> GupModel<f64> {
        GupModel::new(2.0 * target / momentum_ratio_sq(osc, a)).unwrap()
    }

    #[test]
    fn turning_point_derivative() {
        let o = unit_osc();
        let a = 2e-9;
        let d = equations_of_motion(
            &OscillatorState::new(a, 0.0, 0.0),
            &o,
            GupModel::unperturbed(),
            &DampingModel::undamped(),
        );
        assert_eq!(d.dx, 0.0);
        assert_relative_eq!(d.dp, -o.m_eff * o.omega0 * o.omega0 * a, max_relative = 1e-15);
    }

    #[test]
    fn quartic_velocity_term_by_hand() {
        let o = unit_osc();
        let g = GupModel::new(1e12).unwrap();
        let p0 = 1e-3;
        let d = equations_of_motion(&OscillatorState::new(0.0, p0, 0.0), &o, g, &DampingModel::undamped());
        let pc = PhysicalConstants::<f64>::codata().planck_momentum;
        let extra = 4.0 * 1e12 / (3.0 * 0.3 * pc * pc) * p0.powi(3);
        assert_relative_eq!(d.dx - p0 / 0.3, extra, max_relative = 1e-9);
    }

    #[test]
    fn returns_to_start_after_one_period() {
        let o = unit_osc();
        let a = 1e-9;
        let traj = integrate_trajectory(
            &OscillatorState::new(a, 0.0, 0.0),
            &o,
            GupModel::unperturbed(),
            &DampingModel::undamped(),
            1e-3,
            &IntegrationControl::default(),
        )
        .unwrap();
        let last = traj.last().unwrap();
        assert_relative_eq!(last.t, 1e-3, max_relative = 1e-15);
        assert!((last.x - a).abs() / a < 1e-8);
        assert!(last.p.abs() / (o.m_eff * o.omega0 * a) < 1e-8);
        assert_eq!(traj.len(), 17);
    }

    #[test]
    fn harmonic_energy_conserved_over_1000_cycles() {
        let o = unit_osc();
        let g = GupModel::unperturbed();
        let a = 5e-10;
        let s0 = OscillatorState::new(a, 0.0, 0.0);
        let traj = integrate_trajectory(&s0, &o, g, &DampingModel::undamped(), 1.0, &IntegrationControl::default()).unwrap();
        let e0 = perturbed_hamiltonian(&s0, &o, g);
        let drift = traj
            .iter()
            .map(|s| ((perturbed_hamiltonian(s, &o, g) - e0) / e0).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-9, "{drift}");
        // phase error after N cycles below N * 1e-8 rad
        let last = traj.last().unwrap();
        let phase = (-last.p / (o.m_eff * o.omega0)).atan2(last.x);
        assert!(phase.abs() < 1000.0 * 1e-8, "{phase}");
    }

    #[test]
    fn perturbed_energy_conserved() {
        let o = unit_osc();
        let a = 5e-10;
        let g = beta_for_secular(&o, a, 1e-3);
        let s0 = OscillatorState::new(a, 0.0, 0.0);
        let traj = integrate_trajectory(&s0, &o, g, &DampingModel::undamped(), 1.0, &IntegrationControl::default()).unwrap();
        let e0 = perturbed_hamiltonian(&s0, &o, g);
        let drift = traj
            .iter()
            .map(|s| ((perturbed_hamiltonian(s, &o, g) - e0) / e0).abs())
            .fold(0.0, f64::max);
        assert!(drift < 1e-9, "{drift}");
    }

    #[test]
    fn damped_envelope_matches_closed_form() {
        let o = unit_osc();
        let damping = DampingModel::from_decay_time(0.05).unwrap();
        let a = 1e-9;
        let traj = integrate_trajectory(
            &OscillatorState::new(a, 0.0, 0.0),
            &o,
            GupModel::unperturbed(),
            &damping,
            0.1,
            &IntegrationControl::default(),
        )
        .unwrap();
        let g = damping.gamma;
        let wd = (o.omega0 * o.omega0 - g * g / 4.0).sqrt();
        for s in traj.iter().step_by(97) {
            let env = a * (-s.t * g / 2.0).exp();
            let exact = env * ((wd * s.t).cos() + g / (2.0 * wd) * (wd * s.t).sin());
            assert!((s.x - exact).abs() < 1e-6 * env, "t={} {} vs {}", s.t, s.x, exact);
        }
    }

    #[test]
    fn hardening_shift_matches_secular_prediction() {
        let o = unit_osc();
        let a = 1e-9;
        let target = 1e-4;
        let g = beta_for_secular(&o, a, target);
        let predicted = secular_shift_oracle(&o, g, a).unwrap();
        assert_relative_eq!(predicted, target, max_relative = 1e-12);
        let rate = 16_000.0;
        let ts = simulate_ringdown(&o, g, &DampingModel::undamped(), a, 0.2, rate, &NoiseSpec::silent(0)).unwrap();
        // upward zero crossings via cubic refinement, then slope of phase
        let f = crate::analysis::zero_crossing_frequency(&ts.values, rate).unwrap();
        let shift = f / 1000.0 - 1.0;
        assert!((shift / predicted - 1.0).abs() < 0.02, "{shift} vs {predicted}");
        assert!(shift > 0.0);
    }

    #[test]
    fn noiseless_unperturbed_ringdown_is_damped_cosine() {
        let o = unit_osc();
        let damping = DampingModel::from_decay_time(0.02).unwrap();
        let a = 3e-11;
        let rate = 16_000.0;
        let ts = simulate_ringdown(&o, GupModel::unperturbed(), &damping, a, 0.05, rate, &NoiseSpec::silent(0)).unwrap();
        assert_eq!(ts.len(), 800);
        let g = damping.gamma;
        let wd = (o.omega0 * o.omega0 - g * g / 4.0).sqrt();
        for (k, x) in ts.values.iter().enumerate() {
            let t = k as f64 / rate;
            let env = a * (-t * g / 2.0).exp();
            let exact = env * ((wd * t).cos() + g / (2.0 * wd) * (wd * t).sin());
            assert!((x - exact).abs() < 1e-6 * env);
        }
    }

    #[test]
    fn ringdown_is_reproducible_per_seed() {
        let o = unit_osc();
        let d = DampingModel::from_decay_time(0.02).unwrap();
        let noise = NoiseSpec::new(1e-12, 1e-6, 1e-8, 11).unwrap();
        let run = || simulate_ringdown(&o, GupModel::new(1e10).unwrap(), &d, 1e-9, 0.02, 8000.0, &noise).unwrap();
        let a = run();
        let b = run();
        assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let other = simulate_ringdown(&o, GupModel::new(1e10).unwrap(), &d, 1e-9, 0.02, 8000.0, &NoiseSpec { seed: 12, ..noise }).unwrap();
        assert_ne!(a.values, other.values);
    }

    #[test]
    fn non_perturbative_beta_is_rejected() {
        let o = unit_osc();
        let gup = beta_for_secular(&o, 1e-9, 10.0);
        let err = simulate_ringdown(&o, gup, &DampingModel::undamped(), 1e-9, 0.01, 16e3, &NoiseSpec::silent(0));
        assert!(matches!(err, Err(Error::InvalidParameter { name: "beta0", .. })), "{err:?}");
    }

    #[test]
    fn undersampling_is_rejected() {
        let o = unit_osc();
        let err = simulate_ringdown(&o, GupModel::unperturbed(), &DampingModel::undamped(), 1e-9, 0.01, 3000.0, &NoiseSpec::silent(0))
            .unwrap_err();
        match err {
            Error::Undersampled { required, .. } => assert!((required - 4000.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }
}
