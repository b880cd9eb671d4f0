//! Physical pendulum: exact period, the quartic series with the GUP term,
//! and beta0 extraction from period-versus-amplitude data.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::analysis::{BoundInputs, FitResult};
use crate::dynamics::white_noise;
use crate::error::{invalid, Error, Result};
use crate::numeric::elliptic::complete_k;
use crate::numeric::linalg::weighted_least_squares;
use crate::physics::{GupModel, PhysicalConstants};
use crate::scalar::Real;

/// Largest amplitude (rad) at which the quartic series is trusted.
pub const SERIES_VALIDITY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PendulumParams<T>", into = "PendulumParams<T>")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct PendulumSpec<T> {
    mass: T,
    length: T,
    gravity: T,
    t0: T,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct PendulumParams<T> {
    mass: T,
    length: T,
    gravity: T,
}

impl<T: Real> TryFrom<PendulumParams<T>> for PendulumSpec<T> {
    type Error = Error;

    fn try_from(p: PendulumParams<T>) -> Result<Self> {
        Self::new(p.mass, p.length, p.gravity)
    }
}

impl<T: Real> From<PendulumSpec<T>> for PendulumParams<T> {
    fn from(s: PendulumSpec<T>) -> Self {
        Self {
            mass: s.mass,
            length: s.length,
            gravity: s.gravity,
        }
    }
}

impl<T: Real> PendulumSpec<T> {
    pub fn new(mass: T, length: T, gravity: T) -> Result<Self> {
        for (name, v) in [("mass", mass), ("length", length), ("gravity", gravity)] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        Ok(Self {
            mass,
            length,
            gravity,
            t0: T::TAU() * (length / gravity).sqrt(),
        })
    }

    /// 6 kg, 1 m, g = 9.81 m/s^2.
    pub fn reference() -> Self {
        Self::new(T::lit(6.0), T::one(), T::lit(9.81)).expect("valid constants")
    }

    pub fn mass(&self) -> T {
        self.mass
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn gravity(&self) -> T {
        self.gravity
    }

    /// Small-angle period `2 pi sqrt(L / g)`.
    pub fn t0(&self) -> T {
        self.t0
    }

    /// `(2 pi m L / (M_p c T0))^2`, the factor multiplying beta0 in the
    /// `theta0^2` coefficient.
    pub fn gup_coefficient(&self) -> T {
        let pc = PhysicalConstants::<T>::codata().planck_momentum;
        let r = T::TAU() * self.mass * self.length / (pc * self.t0);
        r * r
    }

    /// Bound inputs for a dataset reaching `theta_max`: the arc `L theta_max`
    /// at angular frequency `2 pi / T0`.
    pub fn bound_inputs(&self, label: impl Into<String>, theta_max: T) -> BoundInputs<T> {
        BoundInputs {
            label: label.into(),
            m_eff: self.mass,
            omega0: T::TAU() / self.t0,
            quality_factor: None,
            amplitude: self.length * theta_max,
            shift_resolution: T::zero(),
        }
    }
}

/// `T(theta0) = T0 (2 / pi) K(sin(theta0 / 2))`.
pub fn exact_period<T: Real>(spec: &PendulumSpec<T>, theta0: T) -> Result<T> {
    Ok(spec.t0 * exact_ratio(theta0)?)
}

fn exact_ratio<T: Real>(theta0: T) -> Result<T> {
    if !(theta0 >= T::zero()) {
        return Err(invalid("theta0", format!("must be >= 0, got {theta0}")));
    }
    if theta0 >= T::PI() {
        return Err(invalid(
            "theta0",
            format!("{theta0} rad is at or beyond pi; the pendulum rotates"),
        ));
    }
    Ok(T::lit(2.0) * complete_k((theta0 / T::lit(2.0)).sin()) / T::PI())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodDeviation<T> {
    /// `delta T / T0`.
    pub value: T,
    /// Amplitude exceeds [`SERIES_VALIDITY`]; the series is truncated too early.
    pub outside_validity: bool,
}

/// `[1/16 - beta0 (2 pi m L / (M_p c T0))^2] theta0^2 + (11/3072) theta0^4`.
pub fn gup_period_deviation<T: Real>(spec: &PendulumSpec<T>, gup: GupModel<T>, theta0: T) -> PeriodDeviation<T> {
    let th2 = theta0 * theta0;
    let quadratic = T::one() / T::lit(16.0) - gup.beta0() * spec.gup_coefficient();
    PeriodDeviation {
        value: quadratic * th2 + T::lit(11.0) / T::lit(3072.0) * th2 * th2,
        outside_validity: theta0.abs() > T::lit(SERIES_VALIDITY),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodPoint<T> {
    pub theta0: T,
    pub period: T,
    pub sigma: T,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeriodDataset<T> {
    pub points: Vec<PeriodPoint<T>>,
}

impl<T: Real> PeriodDataset<T> {
    pub fn new(points: Vec<PeriodPoint<T>>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            check_point(p).map_err(|reason| Error::Format { line: i + 1, reason })?;
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_theta(&self) -> T {
        self.points.iter().fold(T::zero(), |m, p| m.max(p.theta0))
    }
}

fn check_point<T: Real>(p: &PeriodPoint<T>) -> std::result::Result<(), String> {
    if !(p.theta0 > T::zero() && p.theta0 < T::PI()) {
        return Err(format!("theta0 must lie in (0, pi), got {}", p.theta0));
    }
    if !(p.period > T::zero() && p.period.is_finite()) {
        return Err(format!("period must be positive, got {}", p.period));
    }
    if !(p.sigma > T::zero() && p.sigma.is_finite()) {
        return Err(format!("sigma must be positive, got {}", p.sigma));
    }
    Ok(())
}

const DATASET_HEADER: [&str; 3] = ["theta0_rad", "period_s", "sigma_s"];

impl PeriodDataset<f64> {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(DATASET_HEADER)?;
        for p in &self.points {
            w.write_record([format!("{:e}", p.theta0), format!("{:e}", p.period), format!("{:e}", p.sigma)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `theta0_rad,period_s,sigma_s` rows; errors carry the file line.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(reader);
        let mut rows = r.records();
        let header = rows.next().ok_or(Error::Format {
            line: 1,
            reason: "empty file".into(),
        })??;
        if header.iter().ne(DATASET_HEADER) {
            return Err(Error::Format {
                line: 1,
                reason: format!("expected header {}", DATASET_HEADER.join(",")),
            });
        }
        let mut points = Vec::new();
        for (i, row) in rows.enumerate() {
            let line = i + 2;
            let row = row?;
            if row.len() != 3 {
                return Err(Error::Format {
                    line,
                    reason: format!("expected 3 fields, got {}", row.len()),
                });
            }
            let field = |k: usize| -> Result<f64> {
                row[k].parse().map_err(|_| Error::Format {
                    line,
                    reason: format!("{} is not a number: {:?}", DATASET_HEADER[k], &row[k]),
                })
            };
            let p = PeriodPoint {
                theta0: field(0)?,
                period: field(1)?,
                sigma: field(2)?,
            };
            check_point(&p).map_err(|reason| Error::Format { line, reason })?;
            points.push(p);
        }
        Ok(Self { points })
    }
}

/// `T / T0` at zero beta0: the series up to [`SERIES_VALIDITY`], the exact
/// elliptic ratio beyond.
fn intrinsic_ratio<T: Real>(theta0: T) -> Result<T> {
    if theta0 <= T::lit(SERIES_VALIDITY) {
        let th2 = theta0 * theta0;
        Ok(T::one() + th2 / T::lit(16.0) + T::lit(11.0) / T::lit(3072.0) * th2 * th2)
    } else {
        exact_ratio(theta0)
    }
}

/// Weighted fit of `T = T0f [g(theta0) - beta0 C theta0^2]` with `T0f` and
/// `beta0` free, where `g` is the intrinsic period ratio and `C` is
/// [`PendulumSpec::gup_coefficient`].
///
/// The model is linear in `(T0f, T0f beta0)`, so the fit is a single
/// weighted solve with weights `1 / sigma^2`. Uncertainties are taken from
/// the stated sigmas without rescaling by the scatter. Reports
/// `beta0_best`, `beta0_upper` (best clipped at zero plus 2 sigma) and
/// `T0_fitted`.
pub fn fit_pendulum_beta0<T: Real>(spec: &PendulumSpec<T>, data: &PeriodDataset<T>) -> FitResult<T> {
    const KIND: &str = "pendulum_beta0";
    if data.len() < 5 {
        return FitResult::failed(KIND, format!("need at least 5 points, got {}", data.len()));
    }
    let lo = data.points.iter().fold(T::infinity(), |m, p| m.min(p.theta0));
    let hi = data.max_theta();
    if hi < T::lit(2.0) * lo {
        return FitResult::failed(
            KIND,
            format!("angle range {:.4}..{:.4} rad spans less than a factor 2", lo.as_f64(), hi.as_f64()),
        );
    }
    let c = spec.gup_coefficient();
    let mut design = Vec::with_capacity(data.len());
    for p in &data.points {
        let Ok(g) = intrinsic_ratio(p.theta0) else {
            return FitResult::failed(KIND, "amplitude outside the oscillating regime");
        };
        design.push(vec![g, -c * p.theta0 * p.theta0]);
    }
    let y: Vec<T> = data.points.iter().map(|p| p.period).collect();
    let w: Vec<T> = data.points.iter().map(|p| T::one() / (p.sigma * p.sigma)).collect();
    let Some((coef, cov)) = weighted_least_squares(&design, &y, &w) else {
        return FitResult::failed(KIND, "degenerate design matrix");
    };
    let (a, b) = (coef[0], coef[1]);
    let beta = b / a;
    let var = cov.get(1, 1) / (a * a) + b * b * cov.get(0, 0) / (a * a * a * a)
        - T::lit(2.0) * b * cov.get(0, 1) / (a * a * a);
    let sigma = var.max(T::zero()).sqrt();

    let mut fit = FitResult::new(KIND);
    fit.converged = sigma.is_finite() && sigma > T::zero();
    if !fit.converged {
        fit.note("beta0 is not constrained by the data");
    }
    fit.set("beta0_best", beta, sigma);
    fit.set("beta0_upper", beta.max(T::zero()) + T::lit(2.0) * sigma, sigma);
    fit.set("T0_fitted", a, cov.get(0, 0).max(T::zero()).sqrt());
    if hi > T::lit(SERIES_VALIDITY) {
        fit.note("points above 0.5 rad use the exact elliptic period");
    }
    let resid: Vec<T> = design
        .iter()
        .zip(&y)
        .map(|(d, yi)| a * d[0] + b * d[1] - *yi)
        .collect();
    fit.residual_rms = (resid.iter().fold(T::zero(), |s, r| s + *r * *r) / T::from_count(resid.len())).sqrt();
    fit
}

/// Synthetic period measurements at the given amplitudes: exact period with
/// the GUP term of the series, plus seeded Gaussian errors of
/// `sigma_rel * T0`.
pub fn synthetic_dataset<T: Real>(
    spec: &PendulumSpec<T>,
    gup: GupModel<T>,
    thetas: &[T],
    sigma_rel: T,
    seed: u64,
) -> Result<PeriodDataset<T>> {
    if !(sigma_rel > T::zero()) {
        return Err(invalid("sigma_rel", "must be positive"));
    }
    let sigma = sigma_rel * spec.t0;
    let noise = white_noise(thetas.len(), sigma, seed);
    let c = spec.gup_coefficient();
    let points = thetas
        .iter()
        .zip(noise)
        .map(|(&th, z)| {
            let ratio = exact_ratio(th)? - gup.beta0() * c * th * th;
            Ok(PeriodPoint {
                theta0: th,
                period: spec.t0 * ratio + z,
                sigma,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PeriodDataset::new(points)
}

/// Amplitudes from 1 to 10 degrees in 1 degree steps.
pub fn degree_steps<T: Real>() -> Vec<T> {
    (1..=10).map(|d| T::from_count(d).to_radians()).collect()
}
