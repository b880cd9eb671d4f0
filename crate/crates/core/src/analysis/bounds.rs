use std::fmt;

use serde::{Deserialize, Serialize};

use super::report::{FitResult, REPORT_FORMAT_VERSION};
use crate::error::{invalid, Error, Result};
use crate::physics::{beta0_upper_bound, momentum_ratio_sq, OscillatorSpec};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    NullShift,
    Regression,
    DuffingFit,
    Pendulum,
}

impl fmt::Display for BoundMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NullShift => "null-shift",
            Self::Regression => "regression",
            Self::DuffingFit => "duffing-fit",
            Self::Pendulum => "pendulum",
        })
    }
}

/// What a bound was computed from.
///
/// `amplitude` is a displacement in metres; for a pendulum it is the arc
/// `L theta0` and `omega0 = 2 pi / T0`, so that `m_eff omega0 amplitude` is
/// the momentum amplitude in every case. `quality_factor` is absent when the
/// source has none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs<T> {
    pub label: String,
    pub m_eff: T,
    pub omega0: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quality_factor: Option<T>,
    pub amplitude: T,
    pub shift_resolution: T,
}

impl<T: Real> BoundInputs<T> {
    pub fn from_oscillator(osc: &OscillatorSpec<T>, amplitude: T, shift_resolution: T) -> Self {
        Self {
            label: osc.label.clone(),
            m_eff: osc.m_eff,
            omega0: osc.omega0,
            quality_factor: Some(osc.quality_factor),
            amplitude,
            shift_resolution,
        }
    }

    fn momentum_ratio_sq(&self) -> Result<T> {
        // Q does not enter the momentum scale.
        let osc = OscillatorSpec::new(self.label.clone(), self.m_eff, self.omega0, T::one())?;
        Ok(momentum_ratio_sq(&osc, self.amplitude))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport<T> {
    pub method: BoundMethod,
    pub beta0_upper: T,
    pub confidence_note: String,
    pub inputs: BoundInputs<T>,
}

impl<T: Real> BoundReport<T> {
    fn checked(self) -> Result<Self> {
        if !(self.beta0_upper > T::zero() && self.beta0_upper.is_finite()) {
            return Err(invalid(
                "beta0_upper",
                format!("bound must be positive and finite, got {}", self.beta0_upper),
            ));
        }
        Ok(self)
    }
}

#[derive(Serialize, Deserialize)]
struct BoundDocument {
    format_version: u32,
    #[serde(flatten)]
    report: BoundReport<f64>,
}

impl BoundReport<f64> {
    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(&BoundDocument {
            format_version: REPORT_FORMAT_VERSION,
            report: self.clone(),
        })?)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: BoundDocument = toml::from_str(text)?;
        if doc.format_version != REPORT_FORMAT_VERSION {
            return Err(invalid(
                "format_version",
                format!("unsupported bound report version {}", doc.format_version),
            ));
        }
        doc.report.checked()
    }
}

/// Bound from an unresolved shift at a known amplitude.
pub fn beta0_bound_null<T: Real>(osc: &OscillatorSpec<T>, max_amplitude: T, shift_resolution: T) -> Result<BoundReport<T>> {
    let gup = beta0_upper_bound(osc, max_amplitude, shift_resolution)?;
    BoundReport {
        method: BoundMethod::NullShift,
        beta0_upper: gup.beta0(),
        confidence_note: format!(
            "no shift resolved at fractional resolution {:e}; bound taken at the stated resolution",
            shift_resolution.as_f64()
        ),
        inputs: BoundInputs::from_oscillator(osc, max_amplitude, shift_resolution),
    }
    .checked()
}

/// Bound from a fit result.
///
/// * `amplitude_frequency`: the 2 sigma upper edge of the quadratic
///   coefficient, clipped at zero, is read as a shift resolution at the
///   largest amplitude.
/// * `duffing_fit` and `pendulum_beta0`: the fit's `beta0_upper` is used
///   as is, and the equivalent shift resolution is recorded.
///
/// `inputs.shift_resolution` is overwritten with the resolution implied by
/// the fit.
pub fn beta0_bound_from_fit<T: Real>(fit: &FitResult<T>, mut inputs: BoundInputs<T>) -> Result<BoundReport<T>> {
    if !fit.converged {
        return Err(Error::InsufficientData(format!(
            "{} fit did not converge; no bound can be derived",
            fit.kind
        )));
    }
    let missing = |name: &str| Error::InsufficientData(format!("{} fit has no {name}", fit.kind));
    let ratio = inputs.momentum_ratio_sq()?;
    let two = T::lit(2.0);
    let (method, beta, note) = match fit.kind.as_str() {
        "amplitude_frequency" => {
            let c = fit.value("quadratic_coefficient").ok_or_else(|| missing("quadratic_coefficient"))?;
            let s = fit.sigma("quadratic_coefficient").ok_or_else(|| missing("quadratic_coefficient"))?;
            let resolution = (c.max(T::zero()) + two * s) * inputs.amplitude * inputs.amplitude;
            inputs.shift_resolution = resolution;
            (
                BoundMethod::Regression,
                resolution / ratio,
                format!(
                    "2 sigma upper edge of the fitted quadratic coefficient, c = {:e} +- {:e}",
                    c.as_f64(),
                    s.as_f64()
                ),
            )
        }
        "duffing_fit" | "pendulum_beta0" => {
            let upper = fit.value("beta0_upper").ok_or_else(|| missing("beta0_upper"))?;
            inputs.shift_resolution = upper * ratio;
            if fit.kind == "duffing_fit" {
                (
                    BoundMethod::DuffingFit,
                    upper,
                    "2 sigma upper edge of a simulation-in-the-loop ringdown fit".to_string(),
                )
            } else {
                (
                    BoundMethod::Pendulum,
                    upper,
                    "estimate only: 2 sigma edge of a period-versus-amplitude fit; \
                     pendulum stability and suspension systematics are not characterised"
                        .to_string(),
                )
            }
        }
        other => return Err(invalid("fit", format!("no bound rule for fit kind {other:?}"))),
    };
    BoundReport {
        method,
        beta0_upper: beta,
        confidence_note: note,
        inputs,
    }
    .checked()
}

/// One row of the bound-versus-mass table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow<T> {
    pub mass: T,
    pub beta0_upper: T,
    pub label: String,
    /// Literature value shown for context rather than computed here.
    pub annotation: bool,
}

impl<T: Real> SummaryRow<T> {
    pub fn literature(label: impl Into<String>, mass: T, beta0_upper: T) -> Self {
        Self {
            mass,
            beta0_upper,
            label: label.into(),
            annotation: true,
        }
    }
}

/// Published context values: the micro-oscillator range endpoints and the
/// hydrogen Lamb-shift bound, placed at the hydrogen atom mass.
pub fn literature_points<T: Real>() -> Vec<SummaryRow<T>> {
    vec![
        SummaryRow::literature("micro-oscillators (low mass end)", T::lit(1e-11), T::lit(3e7)),
        SummaryRow::literature("micro-oscillators (high mass end)", T::lit(1e-5), T::lit(3e7)),
        SummaryRow::literature("hydrogen Lamb shift", T::lit(1.6735575e-27), T::lit(1e36)),
    ]
}

/// Rows sorted by mass, ties kept in input order with reports ahead of
/// annotations.
pub fn summary_plot_data<T: Real>(reports: &[BoundReport<T>], literature: &[SummaryRow<T>]) -> Vec<SummaryRow<T>> {
    let mut rows: Vec<SummaryRow<T>> = reports
        .iter()
        .map(|r| SummaryRow {
            mass: r.inputs.m_eff,
            beta0_upper: r.beta0_upper,
            label: format!("{} ({})", r.inputs.label, r.method),
            annotation: false,
        })
        .chain(literature.iter().cloned())
        .collect();
    rows.sort_by(|a, b| a.mass.partial_cmp(&b.mass).unwrap_or(std::cmp::Ordering::Equal));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sapphire() -> OscillatorSpec<f64> {
        OscillatorSpec::from_hz("sapphire", 0.3, 127_071.0, 3.4e7).unwrap()
    }

    #[test]
    fn sapphire_null_bound() {
        let r = beta0_bound_null(&sapphire(), 75e-12, 3.9e-5).unwrap();
        assert_eq!(r.method, BoundMethod::NullShift);
        assert!((r.beta0_upper / 5.2e6 - 1.0).abs() < 0.05, "{}", r.beta0_upper);
    }

    #[test]
    fn quartz_estimate() {
        let q = OscillatorSpec::<f64>::from_hz("quartz", 5e-6, 10e6, 1e10).unwrap();
        let r = beta0_bound_null(&q, 1e-9, 1e-10).unwrap();
        assert!((r.beta0_upper / 4e4 - 1.0).abs() < 0.1, "{}", r.beta0_upper);
    }

    #[test]
    fn linear_in_resolution_and_monotone() {
        let a = beta0_bound_null(&sapphire(), 75e-12, 3.9e-5).unwrap().beta0_upper;
        let b = beta0_bound_null(&sapphire(), 75e-12, 1.95e-5).unwrap().beta0_upper;
        assert_relative_eq!(b, a / 2.0, max_relative = 1e-14);
        let c = beta0_bound_null(&sapphire(), 150e-12, 3.9e-5).unwrap().beta0_upper;
        assert!(c < a);
    }

    #[test]
    fn regression_bound_uses_two_sigma_edge() {
        let osc = sapphire();
        let mut fit = FitResult::new("amplitude_frequency");
        fit.converged = true;
        fit.set("quadratic_coefficient", -1e10, 3e15);
        let inputs = BoundInputs::from_oscillator(&osc, 75e-12, 0.0);
        let r = beta0_bound_from_fit(&fit, inputs).unwrap();
        let res = 6e15 * 75e-12 * 75e-12;
        assert_relative_eq!(r.inputs.shift_resolution, res, max_relative = 1e-14);
        let null = beta0_bound_null(&osc, 75e-12, res).unwrap();
        assert_relative_eq!(r.beta0_upper, null.beta0_upper, max_relative = 1e-12);
    }

    #[test]
    fn unconverged_fit_gives_no_bound() {
        let fit = FitResult::<f64>::failed("duffing_fit", "x");
        assert!(beta0_bound_from_fit(&fit, BoundInputs::from_oscillator(&sapphire(), 1e-12, 0.0)).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let r = beta0_bound_null(&sapphire(), 75e-12, 3.9e-5).unwrap();
        let text = r.to_toml_string().unwrap();
        assert!(text.contains("format_version = 1"));
        assert!(text.contains("method = \"null-shift\""));
        assert!(text.contains("[inputs]"));
        assert_eq!(BoundReport::from_toml_str(&text).unwrap(), r);
        let bad = text.replace("format_version = 1", "format_version = 7");
        assert!(BoundReport::from_toml_str(&bad).is_err());
    }

    fn reference_reports() -> Vec<BoundReport<f64>> {
        let mk = |label: &str, m: f64, beta: f64, method| BoundReport {
            method,
            beta0_upper: beta,
            confidence_note: String::new(),
            inputs: BoundInputs {
                label: label.into(),
                m_eff: m,
                omega0: 1.0,
                quality_factor: None,
                amplitude: 1.0,
                shift_resolution: 1.0,
            },
        };
        vec![
            mk("pendulum", 6.0, 1e-4, BoundMethod::Pendulum),
            mk("sapphire", 0.3, 5.2e6, BoundMethod::NullShift),
            mk("quartz", 5e-6, 4e4, BoundMethod::NullShift),
        ]
    }

    #[test]
    fn summary_rank_order() {
        let lit = vec![SummaryRow::literature("micro-oscillators", 1e-8, 3e7)];
        let rows = summary_plot_data(&reference_reports(), &lit);
        let labels: Vec<&str> = rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(
            labels,
            ["micro-oscillators", "quartz (null-shift)", "sapphire (null-shift)", "pendulum (pendulum)"]
        );
        assert!(rows.windows(2).all(|w| w[0].mass <= w[1].mass));
    }

    #[test]
    fn summary_single_and_duplicates() {
        let reps = reference_reports();
        assert_eq!(summary_plot_data(&reps[..1], &[]).len(), 1);
        let mut dup = reps[1].clone();
        dup.inputs.label = "sapphire rerun".into();
        let rows = summary_plot_data(&[reps[1].clone(), dup], &[]);
        assert_eq!(rows.len(), 2);
        assert_ne!(rows[0].label, rows[1].label);
    }
}
