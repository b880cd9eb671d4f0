use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};
use gupmech::analysis::{
    beta0_bound_from_fit, beta0_bound_null, duffing_fit, fit_amplitude_frequency, fit_exponential_decay, fit_lineshape,
};
use gupmech::dynamics::{ifd_response, white_noise};
use gupmech::{
    BoundInputs, Channel, DuffingFitOptions, FitResult, ModelTracker, OscillatorSpec, RingdownRecord, TimeSeries,
};
use serde::Serialize;

use super::{csv_bytes, num, track, Outcome, Output, Stages};
use crate::config::{ExperimentConfig, TrackerChoice};
use crate::plot::{Plot, Series, Style};

/// Q from the decay time and from the linewidth disagree beyond this.
const Q_TOLERANCE: f64 = 0.1;

#[derive(Serialize)]
struct QualityFactors {
    from_decay_time: Option<f64>,
    from_linewidth: Option<f64>,
    disagree: bool,
}

#[derive(Serialize)]
struct AnalysisDoc {
    input: String,
    quality_factor: QualityFactors,
    #[serde(flatten)]
    stages: Stages,
}

pub fn run(cfg: &ExperimentConfig, input: &Path) -> Result<Outcome> {
    let file = File::open(input).with_context(|| format!("opening {}", input.display()))?;
    let raw = TimeSeries::read_csv(file).with_context(|| format!("reading {}", input.display()))?;
    let ts = match raw.channel {
        Channel::Displacement => raw,
        Channel::Voltage => {
            let Some(t) = cfg.transducer()? else {
                bail!("{} holds voltages; converting them needs a [transducer] section", input.display());
            };
            raw.map(Channel::Displacement, |u| u * t.transduction_constant)
        }
        Channel::FractionalFrequency => bail!("{} holds fractional frequency, not a ringdown", input.display()),
    };
    let phys = cfg.physical_oscillator()?;
    let osc = cfg.simulated_oscillator()?;
    let run = cfg.run()?;
    let out = Output::create(&cfg.output.directory, &[input])?;
    let mut stages = Stages::default();
    let mut q_tau = None;

    match track(&ts, run) {
        Ok(rec) => {
            stages.ok("tracking");
            let mut csv = Vec::new();
            rec.write_csv(&mut csv)?;
            out.write("ringdown_record.csv", csv)?;

            let decay = fit_exponential_decay(&rec);
            stages.fit("exponential_decay", &decay);
            out.write_fit("decay_fit.toml", &decay)?;
            if decay.converged {
                q_tau = decay.value("tau_a").map(|tau| phys.omega0 * tau / 2.0);
            }

            let intrinsic = cfg.bound.as_ref().and_then(|b| b.intrinsic_coefficient);
            let af = fit_amplitude_frequency(&rec, &osc, intrinsic);
            stages.fit("amplitude_frequency", &af);
            out.write_fit("amplitude_frequency_fit.toml", &af)?;
            if af.converged {
                let inputs = BoundInputs::from_oscillator(&osc, rec.max_amplitude(), 0.0);
                match beta0_bound_from_fit(&af, inputs) {
                    Ok(r) => {
                        out.write("bound_regression.toml", r.to_toml_string()?)?;
                    }
                    Err(e) => stages.fail("regression_bound", e),
                }
            }
            out.write("ringdown.svg", ringdown_plot(&rec, &decay))?;
            out.write("frequency_vs_amplitude2.svg", regression_plot(&rec, &af))?;

            if run.duffing {
                let options = DuffingFitOptions {
                    sample_rate: Some(ts.sample_rate),
                    tracker: match run.tracker {
                        TrackerChoice::Spectral => ModelTracker::Spectral,
                        TrackerChoice::ZeroCrossing => ModelTracker::ZeroCrossing,
                    },
                    ..Default::default()
                };
                match duffing_fit(&rec, &osc, &cfg.damping()?, &options) {
                    Ok(fit) => {
                        stages.fit("duffing_fit", &fit);
                        out.write_fit("duffing_fit.toml", &fit)?;
                        if fit.converged {
                            let inputs = BoundInputs::from_oscillator(&osc, rec.max_amplitude(), 0.0);
                            let r = beta0_bound_from_fit(&fit, inputs)?;
                            out.write("bound_duffing.toml", r.to_toml_string()?)?;
                        }
                    }
                    Err(e) => stages.fail("duffing_fit", e),
                }
            }
        }
        Err(e) => stages.fail("tracking", e),
    }

    if let Some(b) = &cfg.bound {
        let report = beta0_bound_null(&phys, b.amplitude, b.shift_resolution).context("[bound]")?;
        out.write("bound_report.toml", report.to_toml_string()?)?;
        println!("null-shift bound: beta0 < {:.4e}", report.beta0_upper);
    }

    let mut q_width = None;
    if cfg.scan.is_some() {
        match lineshape_scan(cfg, &phys, &out) {
            Ok(fit) => {
                stages.fit("lineshape", &fit);
                if fit.converged {
                    q_width = match (fit.value("f0"), fit.value("linewidth")) {
                        (Some(f0), Some(w)) if w > 0.0 => Some(f0 / w),
                        _ => None,
                    };
                }
            }
            Err(e) => stages.fail("lineshape", format!("{e:#}")),
        }
    }

    let disagree = match (q_tau, q_width) {
        (Some(a), Some(b)) => (a / b - 1.0).abs() > Q_TOLERANCE,
        _ => false,
    };
    if disagree {
        eprintln!(
            "warning: Q from decay time ({:.3e}) and from linewidth ({:.3e}) disagree",
            q_tau.unwrap_or(f64::NAN),
            q_width.unwrap_or(f64::NAN)
        );
    }
    let outcome = stages.outcome();
    let doc = AnalysisDoc {
        input: input.display().to_string(),
        quality_factor: QualityFactors {
            from_decay_time: q_tau,
            from_linewidth: q_width,
            disagree,
        },
        stages,
    };
    out.write("analysis.toml", toml::to_string(&doc)?)?;
    Ok(outcome)
}

/// Seeded drive scan across the physical resonance, fitted with the IFD
/// lineshape. Writes the curve, the fit and a plot.
fn lineshape_scan(cfg: &ExperimentConfig, phys: &OscillatorSpec, out: &Output) -> Result<FitResult> {
    let scan = cfg.scan.as_ref().expect("caller checked [scan]");
    let f0 = phys.frequency_hz();
    let width = scan.linewidth_hz.unwrap_or(f0 / phys.quality_factor);
    let angle = cfg.transducer()?.map_or(0.0, |t| t.mixing_angle_deg);
    let n = scan.points;
    let grid: Vec<f64> = (0..n)
        .map(|k| f0 + (k as f64 / (n - 1) as f64 - 0.5) * scan.span_linewidths * width)
        .collect();
    let clean = ifd_response(&grid, f0, width, angle, 1.0)?;
    let peak = clean.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let noise = white_noise(n, scan.noise_rel * peak, cfg.noise.seed);
    let curve: Vec<(f64, f64)> = grid.iter().zip(clean.iter().zip(&noise)).map(|(f, (v, z))| (*f, v + z)).collect();

    let rows = curve.iter().map(|(f, v)| vec![num(*f), num(*v)]);
    out.write("lineshape.csv", csv_bytes(&["frequency_hz", "voltage_v"], rows)?)?;
    let fit = fit_lineshape(&curve)?;
    out.write_fit("lineshape_fit.toml", &fit)?;

    let mut plot = Plot::new("Drive scan", "detuning from f0 (Hz)", "IFD output (V)");
    plot.add(Series::new("scan", curve.iter().map(|(f, v)| (f - f0, *v)).collect(), Style::Markers));
    if let (Some(c), Some(w), Some(a), Some(s)) =
        (fit.value("f0"), fit.value("linewidth"), fit.value("mixing_angle"), fit.value("scale"))
    {
        let fine: Vec<f64> = (0..=400).map(|k| grid[0] + (grid[n - 1] - grid[0]) * k as f64 / 400.0).collect();
        if let Ok(model) = ifd_response(&fine, c, w, a, s) {
            plot.add(Series::new(
                "fit",
                fine.iter().zip(model).map(|(f, v)| (f - f0, v)).collect(),
                Style::Line,
            ));
        }
    }
    out.write("lineshape.svg", plot.to_svg())?;
    Ok(fit)
}

fn ringdown_plot(rec: &RingdownRecord, decay: &FitResult) -> String {
    let mut plot = Plot::new("Ringdown", "time (s)", "amplitude (m)").log_y();
    plot.add(Series::new(
        "tracked",
        rec.entries.iter().map(|e| (e.time, e.amplitude)).collect(),
        Style::Markers,
    ));
    if let (Some(a0), Some(tau)) = (decay.value("A0"), decay.value("tau_a")) {
        let t: Vec<f64> = rec.times();
        plot.add(Series::new(
            "exponential fit",
            t.iter().map(|&t| (t, a0 * (-t / tau).exp())).collect(),
            Style::Line,
        ));
    }
    plot.to_svg()
}

fn regression_plot(rec: &RingdownRecord, af: &FitResult) -> String {
    let f_int = af.value("frequency_intercept").unwrap_or_else(|| rec.reference_frequency().unwrap_or(0.0));
    let mut plot = Plot::new("Frequency against squared amplitude", "A^2 (m^2)", "f - f(A=0) (Hz)");
    plot.add(Series::new(
        "tracked",
        rec.entries.iter().map(|e| (e.amplitude * e.amplitude, e.frequency - f_int)).collect(),
        Style::Markers,
    ));
    if let Some(c) = af.value("quadratic_coefficient") {
        let a2: Vec<f64> = rec.amplitudes().iter().map(|a| a * a).collect();
        let hi = a2.iter().fold(0.0f64, |m, v| m.max(*v));
        plot.add(Series::new(
            "regression",
            vec![(0.0, 0.0), (hi, c * f_int * hi)],
            Style::Line,
        ));
    }
    plot.to_svg()
}
