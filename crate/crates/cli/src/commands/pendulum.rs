use std::fs::File;
use std::path::Path;

use anyhow::{Context, Result};
use gupmech::analysis::beta0_bound_from_fit;
use gupmech::pendulum::{degree_steps, exact_period, fit_pendulum_beta0, synthetic_dataset};
use gupmech::{FitResult, GupModel, PendulumSpec, PeriodDataset};

use super::{Outcome, Output, Stages};
use crate::config::ExperimentConfig;
use crate::plot::{Plot, Series, Style};

/// Fit a period table (given, configured, or synthesised) and bound beta0.
pub fn run(cfg: &ExperimentConfig, dataset: Option<&Path>) -> Result<Outcome> {
    let section = cfg.pendulum()?;
    let spec = PendulumSpec::new(section.mass, section.length, section.gravity).context("[pendulum]")?;
    let source = dataset.or(section.dataset.as_deref());
    let inputs: Vec<&Path> = source.into_iter().collect();
    let out = Output::create(&cfg.output.directory, &inputs)?;

    let data = match source {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
            PeriodDataset::read_csv(file).with_context(|| format!("reading {}", path.display()))?
        }
        None => {
            let thetas = match &section.angles_deg {
                Some(deg) => deg.iter().map(|d| d.to_radians()).collect(),
                None => degree_steps(),
            };
            let gup = GupModel::new(section.beta0).context("[pendulum] beta0")?;
            let data = synthetic_dataset(&spec, gup, &thetas, section.sigma_rel, cfg.noise.seed).context("[pendulum]")?;
            let mut csv = Vec::new();
            data.write_csv(&mut csv)?;
            out.write("dataset.csv", csv)?;
            data
        }
    };

    let fit = fit_pendulum_beta0(&spec, &data);
    let mut stages = Stages::default();
    stages.fit("pendulum_beta0", &fit);
    out.write_fit("pendulum_fit.toml", &fit)?;
    if fit.converged {
        let report = beta0_bound_from_fit(&fit, spec.bound_inputs(section.label.clone(), data.max_theta()))?;
        out.write("bound_report.toml", report.to_toml_string()?)?;
        println!("pendulum: beta0 < {:.3e} ({})", report.beta0_upper, report.confidence_note);
    }
    out.write("period_vs_theta2.svg", period_plot(&spec, &data, &fit))?;
    Ok(stages.outcome())
}

fn period_plot(spec: &PendulumSpec, data: &PeriodDataset, fit: &FitResult) -> String {
    let mut plot = Plot::new("Pendulum period against squared amplitude", "theta0^2 (rad^2)", "period (s)");
    plot.add(Series::new(
        "measured",
        data.points.iter().map(|p| (p.theta0 * p.theta0, p.period)).collect(),
        Style::Markers,
    ));
    if let (Some(t0), Some(beta)) = (fit.value("T0_fitted"), fit.value("beta0_best")) {
        let hi = data.max_theta();
        let c = spec.gup_coefficient();
        let model: Vec<(f64, f64)> = (1..=200)
            .filter_map(|k| {
                let th = hi * k as f64 / 200.0;
                let ratio = exact_period(spec, th).ok()? / spec.t0();
                Some((th * th, t0 * (ratio - beta * c * th * th)))
            })
            .collect();
        plot.add(Series::new("model", model, Style::Line));
    }
    plot.to_svg()
}
