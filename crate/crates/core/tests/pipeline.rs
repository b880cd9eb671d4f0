//! End-to-end runs through the public API and the file formats.

use gupmech::analysis::{
    beta0_bound_from_fit, beta0_bound_null, fit_amplitude_frequency, fit_exponential_decay, track_spectral_peak,
    track_zero_crossings,
};
use gupmech::dynamics::{simulate_ringdown, transduce};
use gupmech::pendulum::{degree_steps, fit_pendulum_beta0, synthetic_dataset};
use gupmech::physics::secular_shift_oracle;
use gupmech::{
    BoundInputs, BoundReport, Channel, DampingModel, FitResult, GupModel, NoiseSpec, OscillatorSpec, PendulumSpec,
    PeriodDataset, RingdownRecord, TimeSeries, TransducerSpec,
};
use proptest::prelude::*;

fn desk() -> OscillatorSpec {
    OscillatorSpec::from_hz("desk", 0.3, 1000.0, 1e6).unwrap()
}

fn through_csv(ts: &TimeSeries) -> TimeSeries {
    let mut buf = Vec::new();
    ts.write_csv(&mut buf).unwrap();
    TimeSeries::read_csv(buf.as_slice()).unwrap()
}

#[test]
fn ringdown_survives_files_and_both_trackers_agree() {
    let osc = desk();
    let damping = DampingModel::from_decay_time(1.0).unwrap();
    let ts = simulate_ringdown(&osc, GupModel::unperturbed(), &damping, 1e-3, 2.0, 16e3, &NoiseSpec::additive(1e-6, 9))
        .unwrap();
    let back = through_csv(&ts);
    assert_eq!(back, ts);
    assert_eq!(back.seed, Some(9));

    let zc = track_zero_crossings(&back, 0.05).unwrap();
    let sp = track_spectral_peak(&back, 0.05, 20.0).unwrap();
    let mut buf = Vec::new();
    zc.write_csv(&mut buf).unwrap();
    assert_eq!(RingdownRecord::read_csv(buf.as_slice()).unwrap(), zc);

    for rec in [&zc, &sp] {
        let decay = fit_exponential_decay(rec);
        assert!(decay.converged, "{:?}", decay.diagnostics);
        assert!((decay.value("tau_a").unwrap() - 1.0).abs() < 0.01);
        let f0 = rec.reference_frequency().unwrap();
        assert!((f0 / osc.frequency_hz() - 1.0).abs() < 1e-4, "{f0}");
    }
}

#[test]
fn injected_shift_flows_into_a_bound_report() {
    let osc = desk();
    let a0 = 1e-3;
    let gup = GupModel::new(1.2e-3).unwrap();
    let damping = DampingModel::from_decay_time(4.0).unwrap();
    let ts = simulate_ringdown(&osc, gup, &damping, a0, 10.0, 16e3, &NoiseSpec::additive(1e-6, 1)).unwrap();
    let rec = track_zero_crossings(&ts, 0.02).unwrap();
    let fit = fit_amplitude_frequency(&rec, &osc, None);
    let c = fit.value("quadratic_coefficient").unwrap();
    let expected = secular_shift_oracle(&osc, gup, a0).unwrap() / (a0 * a0);
    assert!((c / expected - 1.0).abs() < 0.05, "c = {c:e}, expected {expected:e}");

    let text = fit.to_toml_string().unwrap();
    assert_eq!(FitResult::from_toml_str(&text).unwrap(), fit);

    let report = beta0_bound_from_fit(&fit, BoundInputs::from_oscillator(&osc, rec.max_amplitude(), 0.0)).unwrap();
    // The closed-form inverse expects twice the cycle-averaged shift per unit
    // beta0, so a regression bound brackets beta0 / 2.
    let half = gup.beta0() / 2.0;
    assert!(report.beta0_upper > half && report.beta0_upper < 1.2 * half, "{}", report.beta0_upper);
    let text = report.to_toml_string().unwrap();
    assert_eq!(BoundReport::from_toml_str(&text).unwrap(), report);
}

#[test]
fn voltage_record_scales_back_to_displacement() {
    let osc = desk();
    let damping = DampingModel::from_decay_time(1.0).unwrap();
    let x = simulate_ringdown(&osc, GupModel::unperturbed(), &damping, 1e-6, 0.5, 16e3, &NoiseSpec::silent(0)).unwrap();
    let spec = TransducerSpec::from_transduction_constant(55.0, 5.26e-4, 2.0, 1.0).unwrap();
    let u = through_csv(&transduce(&x, &spec).unwrap());
    assert_eq!(u.channel, Channel::Voltage);
    let rec_u = track_zero_crossings(&u, 0.05).unwrap();
    let rec_x = track_zero_crossings(&x, 0.05).unwrap();
    let ratio = rec_u.max_amplitude() * spec.transduction_constant / rec_x.max_amplitude();
    assert!((ratio - 1.0).abs() < 1e-12, "{ratio}");
}

#[test]
fn pendulum_dataset_round_trip_and_fit() {
    let spec = PendulumSpec::reference();
    let data = synthetic_dataset(&spec, GupModel::unperturbed(), &degree_steps(), 1e-6, 4).unwrap();
    let mut buf = Vec::new();
    data.write_csv(&mut buf).unwrap();
    let back = PeriodDataset::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back, data);
    let fit = fit_pendulum_beta0(&spec, &back);
    assert!(fit.converged);
    assert!(fit.value("beta0_upper").unwrap() < 1e-4);
}

#[test]
fn single_precision_bound_matches_double() {
    let osc64 = OscillatorSpec::from_hz("sb", 0.3, 127_070.97, 3.4e7).unwrap();
    let osc32 = gupmech::physics::OscillatorSpec::<f32>::from_hz("sb", 0.3, 127_070.97, 3.4e7).unwrap();
    let b64 = beta0_bound_null(&osc64, 75e-12, 3.9e-5).unwrap().beta0_upper;
    let b32 = beta0_bound_null(&osc32, 75e-12, 3.9e-5).unwrap().beta0_upper;
    assert!((b32 as f64 / b64 - 1.0).abs() < 1e-5, "{b32} vs {b64}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn null_bound_scales_with_its_inputs(
        m in 1e-9f64..1e3,
        f in 1.0f64..1e8,
        a in 1e-15f64..1e-3,
        res in 1e-15f64..1e-3,
        k in 1.5f64..10.0,
    ) {
        let osc = OscillatorSpec::from_hz("p", m, f, 1e6).unwrap();
        let base = beta0_bound_null(&osc, a, res).unwrap().beta0_upper;
        let heavy = OscillatorSpec::from_hz("p", k * m, f, 1e6).unwrap();
        let by_mass = beta0_bound_null(&heavy, a, res).unwrap().beta0_upper;
        let by_res = beta0_bound_null(&osc, a, k * res).unwrap().beta0_upper;
        let by_amp = beta0_bound_null(&osc, k * a, res).unwrap().beta0_upper;
        prop_assert!((by_mass * k * k / base - 1.0).abs() < 1e-12);
        prop_assert!((by_res / (k * base) - 1.0).abs() < 1e-12);
        prop_assert!((by_amp * k * k / base - 1.0).abs() < 1e-12);
    }
}
