use anyhow::{Context, Result};
use gupmech::dynamics::simulate_ringdown;
use serde::Serialize;

use super::{Outcome, Output};
use crate::config::ExperimentConfig;

#[derive(Serialize)]
struct Metadata {
    generator: String,
    command: &'static str,
    samples: usize,
    simulated_frequency_hz: f64,
}

#[derive(Serialize)]
struct MetadataDoc<'a> {
    metadata: Metadata,
    #[serde(flatten)]
    config: &'a ExperimentConfig,
}

/// Seeded ringdown to `timeseries.csv`, plus `metadata.toml` echoing the
/// resolved config.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let osc = cfg.simulated_oscillator()?;
    let run = cfg.run()?;
    let ts = simulate_ringdown(
        &osc,
        cfg.gup()?,
        &cfg.damping()?,
        run.amplitude,
        run.duration,
        run.sample_rate,
        &cfg.noise()?,
    )
    .context("simulating the ringdown")?;

    let out = Output::create(&cfg.output.directory, &[])?;
    let mut csv = Vec::new();
    ts.write_csv(&mut csv)?;
    let path = out.write("timeseries.csv", csv)?;
    let doc = MetadataDoc {
        metadata: Metadata {
            generator: concat!("gupmech ", env!("CARGO_PKG_VERSION")).into(),
            command: "simulate",
            samples: ts.len(),
            simulated_frequency_hz: osc.frequency_hz(),
        },
        config: cfg,
    };
    out.write("metadata.toml", toml::to_string(&doc)?)?;
    println!("wrote {} samples to {}", ts.len(), path.display());
    Ok(Outcome::default())
}
