use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use gupmech::{DampingModel, GupModel, NoiseSpec, OscillatorSpec, PendulumSpec, TransducerSpec};
use serde::{Deserialize, Serialize};

/// Runs above this many samples need `--full-scale`.
pub const DESK_SAMPLE_LIMIT: f64 = 5e7;

pub const PRESETS: &[(&str, &str)] = &[
    ("sapphire-sb", include_str!("../presets/sapphire-sb.toml")),
    ("quartz-baw", include_str!("../presets/quartz-baw.toml")),
    ("atkinson-pendulum", include_str!("../presets/atkinson-pendulum.toml")),
];

/// Everything one invocation needs. Sections a command does not use may be
/// absent; the command reports the missing section by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oscillator: Option<OscillatorSection>,
    #[serde(default)]
    pub gup: GupSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<DampingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transducer: Option<TransducerSection>,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run: Option<RunSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pendulum: Option<PendulumSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub summary: SummarySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorSection {
    #[serde(default = "default_label")]
    pub label: String,
    pub m_eff: f64,
    pub frequency_hz: f64,
    /// Falls back to `pi f tau` when only a decay time is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality_factor: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GupSection {
    #[serde(default)]
    pub beta0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingSection {
    pub amplitude_decay_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransducerSection {
    pub mixing_angle_deg: f64,
    /// dx/du in m/V.
    pub transduction_constant: f64,
    /// du/df in V/Hz.
    #[serde(default = "one")]
    pub discriminator_slope: f64,
    #[serde(default = "one")]
    pub drive_coupling: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub additive_white_rms: f64,
    #[serde(default)]
    pub fractional_frequency_white: f64,
    #[serde(default)]
    pub fractional_frequency_random_walk: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackerChoice {
    Spectral,
    ZeroCrossing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Initial displacement amplitude in m.
    pub amplitude: f64,
    pub duration: f64,
    pub sample_rate: f64,
    pub bin_duration: f64,
    pub resolution_bandwidth: f64,
    /// Simulated frequency over the physical one; the decay time is kept.
    #[serde(default = "one")]
    pub frequency_scale: f64,
    #[serde(default = "spectral")]
    pub tracker: TrackerChoice,
    #[serde(default)]
    pub duffing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub full_scale: Option<FullScale>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FullScale {
    pub duration: f64,
    pub sample_rate: f64,
    pub bin_duration: f64,
    pub resolution_bandwidth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundSection {
    pub amplitude: f64,
    pub shift_resolution: f64,
    /// Known non-GUP quadratic coefficient (1/m^2) removed before bounding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intrinsic_coefficient: Option<f64>,
}

/// Synthetic drive scan across the resonance, fitted with the IFD lineshape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSection {
    /// FWHM in Hz; defaults to f0 / Q.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linewidth_hz: Option<f64>,
    #[serde(default = "scan_points")]
    pub points: usize,
    #[serde(default = "scan_span")]
    pub span_linewidths: f64,
    #[serde(default)]
    pub noise_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumSection {
    #[serde(default = "default_label")]
    pub label: String,
    pub mass: f64,
    pub length: f64,
    #[serde(default = "standard_gravity")]
    pub gravity: f64,
    /// Period table to fit; without it a synthetic set is generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    #[serde(default = "pendulum_sigma")]
    pub sigma_rel: f64,
    /// Injected into synthetic data only.
    #[serde(default)]
    pub beta0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angles_deg: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    MEff,
    Amplitude,
    ShiftResolution,
    Seed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    #[serde(default)]
    pub values: Vec<f64>,
    /// Number of consecutive seeds for a seed sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummarySection {
    /// Add the built-in literature bounds.
    #[serde(default)]
    pub reference_points: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub literature: Vec<LiteraturePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiteraturePoint {
    pub label: String,
    pub mass: f64,
    pub beta0_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_output")]
    pub directory: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_output(),
        }
    }
}

fn default_label() -> String {
    "oscillator".into()
}
fn one() -> f64 {
    1.0
}
fn spectral() -> TrackerChoice {
    TrackerChoice::Spectral
}
fn scan_points() -> usize {
    201
}
fn scan_span() -> f64 {
    10.0
}
fn standard_gravity() -> f64 {
    9.81
}
fn pendulum_sigma() -> f64 {
    1e-6
}
fn default_output() -> PathBuf {
    PathBuf::from("gupmech-out")
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub full_scale: bool,
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| anyhow!("invalid config {origin}: {e}"))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            anyhow!("unknown preset `{name}` (known: {})", known.join(", "))
        })?;
        Self::parse(text, &format!("preset {name}"))
    }

    /// Apply overrides and settle the run scale. The result is what gets
    /// echoed into metadata.
    pub fn resolve(mut self, o: &Overrides) -> Result<Self> {
        if let Some(seed) = o.seed {
            self.noise.seed = seed;
        }
        if let Some(out) = &o.out {
            self.output.directory = out.clone();
        }
        if let Some(run) = self.run.as_mut() {
            let full = run.full_scale.take();
            if o.full_scale {
                if let Some(f) = full {
                    run.duration = f.duration;
                    run.sample_rate = f.sample_rate;
                    run.bin_duration = f.bin_duration;
                    run.resolution_bandwidth = f.resolution_bandwidth;
                }
                run.frequency_scale = 1.0;
            } else {
                let samples = run.duration * run.sample_rate;
                if samples > DESK_SAMPLE_LIMIT {
                    bail!("[run] asks for {samples:.3e} samples; runs above {DESK_SAMPLE_LIMIT:.0e} need --full-scale");
                }
            }
        }
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.oscillator.is_some() {
            self.physical_oscillator()?;
            self.damping()?;
        }
        self.gup()?;
        self.noise()?;
        self.transducer()?;
        if let Some(run) = &self.run {
            for (name, v) in [
                ("amplitude", run.amplitude),
                ("duration", run.duration),
                ("sample_rate", run.sample_rate),
                ("bin_duration", run.bin_duration),
                ("resolution_bandwidth", run.resolution_bandwidth),
                ("frequency_scale", run.frequency_scale),
            ] {
                if !(v > 0.0 && v.is_finite()) {
                    bail!("[run] field `{name}` must be positive, got {v}");
                }
            }
        }
        if let Some(b) = &self.bound {
            for (name, v) in [("amplitude", b.amplitude), ("shift_resolution", b.shift_resolution)] {
                if !(v > 0.0 && v.is_finite()) {
                    bail!("[bound] field `{name}` must be positive, got {v}");
                }
            }
        }
        if let Some(s) = &self.scan {
            if s.points < 8 {
                bail!("[scan] field `points` must be at least 8, got {}", s.points);
            }
            if !(s.span_linewidths > 0.0 && s.noise_rel >= 0.0) {
                bail!("[scan] `span_linewidths` must be positive and `noise_rel` non-negative");
            }
        }
        if let Some(p) = &self.pendulum {
            PendulumSpec::new(p.mass, p.length, p.gravity).context("[pendulum]")?;
        }
        Ok(())
    }

    pub fn oscillator_section(&self) -> Result<&OscillatorSection> {
        self.oscillator.as_ref().ok_or_else(|| anyhow!("config has no [oscillator] section"))
    }

    pub fn run(&self) -> Result<&RunSection> {
        self.run.as_ref().ok_or_else(|| anyhow!("config has no [run] section"))
    }

    pub fn pendulum(&self) -> Result<&PendulumSection> {
        self.pendulum.as_ref().ok_or_else(|| anyhow!("config has no [pendulum] section"))
    }

    /// The oscillator the bounds refer to.
    pub fn physical_oscillator(&self) -> Result<OscillatorSpec> {
        let s = self.oscillator_section()?;
        let q = match (s.quality_factor, &self.damping) {
            (Some(q), _) => q,
            (None, Some(d)) => std::f64::consts::PI * s.frequency_hz * d.amplitude_decay_time,
            (None, None) => bail!("[oscillator] needs `quality_factor` or a [damping] section"),
        };
        OscillatorSpec::from_hz(s.label.clone(), s.m_eff, s.frequency_hz, q).context("[oscillator]")
    }

    /// The oscillator that is integrated: frequency scaled by
    /// `run.frequency_scale`, decay rate unchanged.
    pub fn simulated_oscillator(&self) -> Result<OscillatorSpec> {
        let phys = self.physical_oscillator()?;
        let scale = self.run.as_ref().map_or(1.0, |r| r.frequency_scale);
        Ok(OscillatorSpec::new(
            phys.label.clone(),
            phys.m_eff,
            phys.omega0 * scale,
            phys.quality_factor * scale,
        )?)
    }

    pub fn damping(&self) -> Result<DampingModel> {
        match &self.damping {
            Some(d) => DampingModel::from_decay_time(d.amplitude_decay_time).context("[damping]"),
            None => Ok(DampingModel::from_oscillator(&self.physical_oscillator()?)),
        }
    }

    pub fn gup(&self) -> Result<GupModel> {
        GupModel::new(self.gup.beta0).context("[gup]")
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        let n = &self.noise;
        NoiseSpec::new(
            n.additive_white_rms,
            n.fractional_frequency_white,
            n.fractional_frequency_random_walk,
            n.seed,
        )
        .context("[noise]")
    }

    pub fn transducer(&self) -> Result<Option<TransducerSpec>> {
        self.transducer
            .as_ref()
            .map(|t| {
                TransducerSpec::from_transduction_constant(
                    t.mixing_angle_deg,
                    t.transduction_constant,
                    t.discriminator_slope,
                    t.drive_coupling,
                )
                .context("[transducer]")
            })
            .transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_resolve_and_round_trip() {
        for (name, _) in PRESETS {
            let cfg = ExperimentConfig::preset(name).unwrap().resolve(&Overrides::default()).unwrap();
            let text = toml::to_string(&cfg).unwrap();
            assert_eq!(ExperimentConfig::parse(&text, "echo").unwrap(), cfg, "{name}");
        }
    }

    #[test]
    fn missing_mass_names_the_field() {
        let err = ExperimentConfig::parse("[oscillator]\nfrequency_hz = 1e3\nquality_factor = 1e4\n", "t").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("m_eff"), "{msg}");
        assert!(msg.contains("line"), "{msg}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let err = ExperimentConfig::parse("[gup]\nbeta = 1.0\n", "t").unwrap_err();
        assert!(format!("{err:#}").contains("beta"));
    }

    #[test]
    fn full_scale_swaps_in_the_real_run() {
        let o = Overrides {
            full_scale: true,
            ..Default::default()
        };
        let cfg = ExperimentConfig::preset("sapphire-sb").unwrap().resolve(&o).unwrap();
        let run = cfg.run().unwrap();
        assert_eq!(run.frequency_scale, 1.0);
        assert_eq!(run.bin_duration, 0.2);
        assert_eq!(run.resolution_bandwidth, 5.0);
        assert!(run.full_scale.is_none());
    }

    #[test]
    fn oversized_desk_runs_are_refused() {
        let mut cfg = ExperimentConfig::preset("sapphire-sb").unwrap();
        cfg.run.as_mut().unwrap().frequency_scale = 1.0;
        cfg.run.as_mut().unwrap().sample_rate = 520000.0;
        let err = cfg.resolve(&Overrides::default()).unwrap_err();
        assert!(err.to_string().contains("--full-scale"));
    }

    #[test]
    fn simulated_oscillator_keeps_the_decay_rate() {
        let cfg = ExperimentConfig::preset("quartz-baw").unwrap();
        let phys = cfg.physical_oscillator().unwrap();
        let sim = cfg.simulated_oscillator().unwrap();
        assert!((sim.frequency_hz() - 100.0).abs() < 1e-9);
        assert!((sim.gamma / phys.gamma - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overrides_replace_seed_and_output() {
        let o = Overrides {
            seed: Some(7),
            out: Some("elsewhere".into()),
            full_scale: false,
        };
        let cfg = ExperimentConfig::preset("atkinson-pendulum").unwrap().resolve(&o).unwrap();
        assert_eq!(cfg.noise.seed, 7);
        assert_eq!(cfg.output.directory, PathBuf::from("elsewhere"));
    }
}
