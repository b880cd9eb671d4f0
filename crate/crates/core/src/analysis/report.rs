use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Version written into every serialized fit or bound report.
pub const REPORT_FORMAT_VERSION: u32 = 1;

/// Named parameters with matching one-sigma uncertainties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult<T> {
    /// What produced the fit, e.g. `exponential_decay`.
    pub kind: String,
    pub parameters: BTreeMap<String, T>,
    pub uncertainties: BTreeMap<String, T>,
    pub residual_rms: T,
    pub converged: bool,
    #[serde(default)]
    pub diagnostics: Vec<String>,
}

impl<T: Real> FitResult<T> {
    pub fn new(kind: impl Into<String>) -> Self {
        Self {
            kind: kind.into(),
            parameters: BTreeMap::new(),
            uncertainties: BTreeMap::new(),
            residual_rms: T::zero(),
            converged: false,
            diagnostics: Vec::new(),
        }
    }

    /// Non-converged result carrying only a diagnostic.
    pub fn failed(kind: impl Into<String>, why: impl Into<String>) -> Self {
        let mut r = Self::new(kind);
        r.diagnostics.push(why.into());
        r
    }

    pub fn set(&mut self, name: &str, value: T, sigma: T) {
        self.parameters.insert(name.to_string(), value);
        self.uncertainties.insert(name.to_string(), sigma);
    }

    pub fn value(&self, name: &str) -> Option<T> {
        self.parameters.get(name).copied()
    }

    pub fn sigma(&self, name: &str) -> Option<T> {
        self.uncertainties.get(name).copied()
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.diagnostics.push(msg.into());
    }
}

#[derive(Serialize, Deserialize)]
struct FitDocument {
    format_version: u32,
    #[serde(flatten)]
    fit: FitResult<f64>,
}

impl FitResult<f64> {
    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string(&FitDocument {
            format_version: REPORT_FORMAT_VERSION,
            fit: self.clone(),
        })?)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let doc: FitDocument = toml::from_str(text)?;
        if doc.format_version != REPORT_FORMAT_VERSION {
            return Err(invalid(
                "format_version",
                format!("unsupported fit report version {}", doc.format_version),
            ));
        }
        let keys_match = doc.fit.parameters.keys().eq(doc.fit.uncertainties.keys());
        if !keys_match {
            return Err(invalid("uncertainties", "keys must match the parameter keys"));
        }
        Ok(doc.fit)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_field_names() {
        let mut f = FitResult::<f64>::new("exponential_decay");
        f.set("tau_a", 173.0, 0.5);
        f.set("A0", 7.5e-11, 1e-13);
        f.residual_rms = 1e-13;
        f.converged = true;
        f.note("span shorter than one decay time");
        let text = f.to_toml_string().unwrap();
        assert!(text.contains("format_version = 1"));
        assert!(text.contains("[parameters]"));
        assert!(text.contains("[uncertainties]"));
        assert!(text.contains("residual_rms"));
        assert_eq!(FitResult::from_toml_str(&text).unwrap(), f);
    }

    #[test]
    fn rejects_other_versions_and_key_mismatch() {
        let bad = "format_version = 2\nkind = \"x\"\nresidual_rms = 0.0\nconverged = true\n[parameters]\n[uncertainties]\n";
        assert!(FitResult::from_toml_str(bad).is_err());
        let mismatch =
            "format_version = 1\nkind = \"x\"\nresidual_rms = 0.0\nconverged = true\n[parameters]\na = 1.0\n[uncertainties]\n";
        assert!(FitResult::from_toml_str(mismatch).is_err());
    }
}
