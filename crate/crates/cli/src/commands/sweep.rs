use std::thread;

use anyhow::{bail, Context, Result};
use gupmech::analysis::{beta0_bound_null, fit_amplitude_frequency};
use gupmech::dynamics::simulate_ringdown;
use gupmech::physics::secular_shift_oracle;
use gupmech::{BoundReport, OscillatorSpec};
use serde::Serialize;

use super::{csv_bytes, num, track, Outcome, Output};
use crate::config::{ExperimentConfig, SweepParameter};
use crate::plot::{Plot, Series, Style};

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let Some(sweep) = &cfg.sweep else {
        bail!("config has no [sweep] section");
    };
    match sweep.parameter {
        SweepParameter::Seed => {
            let n = sweep.seeds.unwrap_or(sweep.values.len() as u64);
            if n == 0 {
                bail!("[sweep] seed sweep needs `seeds` > 0");
            }
            seed_sweep(cfg, n)
        }
        p => bound_sweep(cfg, p, &sweep.values),
    }
}

/// Null-shift bound as one input is varied, one report per value.
fn bound_sweep(cfg: &ExperimentConfig, parameter: SweepParameter, values: &[f64]) -> Result<Outcome> {
    if values.is_empty() {
        bail!("[sweep] field `values` is empty");
    }
    let Some(bound) = &cfg.bound else {
        bail!("a bound sweep needs a [bound] section");
    };
    let phys = cfg.physical_oscillator()?;
    let out = Output::create(&cfg.output.directory, &[])?;
    let (name, unit) = match parameter {
        SweepParameter::MEff => ("m_eff", "kg"),
        SweepParameter::Amplitude => ("amplitude", "m"),
        SweepParameter::ShiftResolution => ("shift_resolution", ""),
        SweepParameter::Seed => unreachable!(),
    };
    let mut reports: Vec<BoundReport> = Vec::with_capacity(values.len());
    for (i, &v) in values.iter().enumerate() {
        let (mut amp, mut res) = (bound.amplitude, bound.shift_resolution);
        let label = format!("{} {name}={v:e}", phys.label);
        let osc = match parameter {
            SweepParameter::MEff => OscillatorSpec::new(label, v, phys.omega0, phys.quality_factor),
            _ => OscillatorSpec::new(label, phys.m_eff, phys.omega0, phys.quality_factor),
        }
        .with_context(|| format!("[sweep] value {v}"))?;
        match parameter {
            SweepParameter::Amplitude => amp = v,
            SweepParameter::ShiftResolution => res = v,
            _ => {}
        }
        let report = beta0_bound_null(&osc, amp, res).with_context(|| format!("[sweep] value {v}"))?;
        out.write(&format!("reports/bound_{i:03}.toml"), report.to_toml_string()?)?;
        reports.push(report);
    }
    let rows = values
        .iter()
        .zip(&reports)
        .map(|(v, r)| vec![num(*v), num(r.beta0_upper)]);
    out.write("sweep.csv", csv_bytes(&[name, "beta0_upper"], rows)?)?;
    let x_label = if unit.is_empty() { name.to_string() } else { format!("{name} ({unit})") };
    let mut plot = Plot::new("Null-shift bound sweep", x_label, "beta0 upper bound").log_log();
    plot.add(Series::new(
        "bound",
        values.iter().zip(&reports).map(|(v, r)| (*v, r.beta0_upper)).collect(),
        Style::Markers,
    ));
    out.write("sweep.svg", plot.to_svg())?;
    println!("swept {name} over {} values", values.len());
    Ok(Outcome::default())
}

#[derive(Debug, Clone)]
struct SeedRow {
    seed: u64,
    coefficient: f64,
    sigma: f64,
    converged: bool,
    error: Option<String>,
}

#[derive(Serialize)]
struct SeedSummary {
    seeds: u64,
    converged: usize,
    expected_coefficient: f64,
    coverage_2sigma: f64,
    mean_z: f64,
    rms_z: f64,
}

/// Simulate, track and regress over consecutive seeds, in parallel.
/// The quadratic coefficient of each run is compared with the secular
/// prediction for the configured beta0.
fn seed_sweep(cfg: &ExperimentConfig, n: u64) -> Result<Outcome> {
    let osc = cfg.simulated_oscillator()?;
    let run = cfg.run()?;
    let gup = cfg.gup()?;
    let damping = cfg.damping()?;
    let noise = cfg.noise()?;
    let intrinsic = cfg.bound.as_ref().and_then(|b| b.intrinsic_coefficient);
    let expected = secular_shift_oracle(&osc, gup, run.amplitude)? / (run.amplitude * run.amplitude)
        + intrinsic.unwrap_or(0.0);
    let first = noise.seed;

    let one = |seed: u64| -> SeedRow {
        let mut row = SeedRow {
            seed,
            coefficient: f64::NAN,
            sigma: f64::NAN,
            converged: false,
            error: None,
        };
        let mut spec = noise;
        spec.seed = seed;
        let result = simulate_ringdown(&osc, gup, &damping, run.amplitude, run.duration, run.sample_rate, &spec)
            .and_then(|ts| track(&ts, run));
        match result {
            Ok(rec) => {
                let fit = fit_amplitude_frequency(&rec, &osc, intrinsic);
                row.coefficient = fit.value("quadratic_coefficient").unwrap_or(f64::NAN);
                row.sigma = fit.sigma("quadratic_coefficient").unwrap_or(f64::NAN);
                row.converged = fit.converged;
            }
            Err(e) => row.error = Some(e.to_string()),
        }
        row
    };

    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(n as usize);
    let mut rows: Vec<SeedRow> = thread::scope(|s| {
        let handles: Vec<_> = (0..workers as u64)
            .map(|w| {
                let one = &one;
                s.spawn(move || (first + w..first + n).step_by(workers).map(one).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("seed worker panicked")).collect()
    });
    rows.sort_by_key(|r| r.seed);

    let out = Output::create(&cfg.output.directory, &[])?;
    let csv = csv_bytes(
        &["seed", "quadratic_coefficient", "sigma", "z", "converged"],
        rows.iter().map(|r| {
            vec![
                r.seed.to_string(),
                num(r.coefficient),
                num(r.sigma),
                num((r.coefficient - expected) / r.sigma),
                r.converged.to_string(),
            ]
        }),
    )?;
    out.write("sweep.csv", csv)?;

    let z: Vec<f64> = rows
        .iter()
        .filter(|r| r.converged)
        .map(|r| (r.coefficient - expected) / r.sigma)
        .filter(|z| z.is_finite())
        .collect();
    let k = z.len().max(1) as f64;
    let summary = SeedSummary {
        seeds: n,
        converged: rows.iter().filter(|r| r.converged).count(),
        expected_coefficient: expected,
        coverage_2sigma: z.iter().filter(|z| z.abs() <= 2.0).count() as f64 / k,
        mean_z: z.iter().sum::<f64>() / k,
        rms_z: (z.iter().map(|z| z * z).sum::<f64>() / k).sqrt(),
    };
    out.write("sweep_summary.toml", toml::to_string(&summary)?)?;
    println!(
        "{} of {n} seeds converged; 2-sigma coverage {:.1}%",
        summary.converged,
        100.0 * summary.coverage_2sigma
    );
    let failed = rows
        .iter()
        .filter(|r| !r.converged)
        .map(|r| format!("seed {}: {}", r.seed, r.error.as_deref().unwrap_or("regression did not converge")))
        .collect();
    Ok(Outcome { failed })
}
