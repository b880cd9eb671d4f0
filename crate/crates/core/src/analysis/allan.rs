use crate::dynamics::{Channel, TimeSeries};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// One averaging time and its deviation, or the reason it was not computed.
#[derive(Debug)]
pub struct AllanPoint<T> {
    pub tau: T,
    pub result: Result<T>,
}

impl<T: Real> AllanPoint<T> {
    pub fn adev(&self) -> Option<T> {
        self.result.as_ref().ok().copied()
    }
}

/// Overlapping Allan deviation of a fractional-frequency series.
///
/// Each `tau` is rounded to a whole number of samples `m`; the reported
/// `tau` is `m / rate`. Averaging times below two samples or above a
/// quarter of the record give a per-point `TauOutOfRange` error.
pub fn allan_deviation<T: Real>(y: &TimeSeries<T>, taus: &[T]) -> Result<Vec<AllanPoint<T>>> {
    if y.channel != Channel::FractionalFrequency {
        return Err(invalid(
            "y",
            format!("expected a fractional_frequency channel, got {}", y.channel),
        ));
    }
    let rate = y.sample_rate;
    let tau0 = T::one() / rate;
    let n = y.len();
    let duration = T::from_count(n) * tau0;
    let (lo, hi) = (T::lit(2.0) * tau0, duration / T::lit(4.0));

    // Phase x_i = tau0 * sum y_k, with x_0 = 0.
    let mut x = Vec::with_capacity(n + 1);
    x.push(T::zero());
    let mut acc = T::zero();
    for v in &y.values {
        acc += *v * tau0;
        x.push(acc);
    }

    Ok(taus
        .iter()
        .map(|&tau| {
            let m = (tau * rate).round().to_usize().unwrap_or(0);
            let out_of_range = || Error::TauOutOfRange {
                tau: tau.as_f64(),
                min: lo.as_f64(),
                max: hi.as_f64(),
            };
            if !tau.is_finite() || m < 2 || T::from_count(m) * tau0 > hi * (T::one() + T::epsilon() * T::lit(8.0)) {
                return AllanPoint { tau, result: Err(out_of_range()) };
            }
            let terms = n + 1 - 2 * m;
            let mut sum = T::zero();
            for i in 0..terms {
                let d = x[i + 2 * m] - T::lit(2.0) * x[i + m] + x[i];
                sum += d * d;
            }
            let t = T::from_count(m) * tau0;
            let var = sum / (T::lit(2.0) * t * t * T::from_count(terms));
            AllanPoint { tau: t, result: Ok(var.sqrt()) }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{synthesize_frequency_noise, NoiseSpec};

    fn series(values: Vec<f64>, rate: f64) -> TimeSeries<f64> {
        TimeSeries::new(Channel::FractionalFrequency, rate, 0.0, values).unwrap()
    }

    #[test]
    fn constant_is_zero() {
        let y = series(vec![3e-7; 400], 10.0);
        for p in allan_deviation(&y, &[0.2, 1.0, 10.0]).unwrap() {
            // only rounding of the accumulated phase remains
            assert!(p.adev().unwrap() < 1e-18);
        }
    }

    #[test]
    fn out_of_range_taus_are_per_point() {
        let y = series(vec![0.0; 400], 10.0);
        let pts = allan_deviation(&y, &[0.1, 1.0, 10.0, 10.5]).unwrap();
        assert!(matches!(pts[0].result, Err(Error::TauOutOfRange { .. })));
        assert!(pts[1].result.is_ok());
        assert!(pts[2].result.is_ok());
        assert!(pts[3].result.is_err());
    }

    #[test]
    fn alternating_series_by_hand() {
        // y = +a, -a, ...: at m = 2 every second difference of phase is zero
        let a = 1e-6;
        let v: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { a } else { -a }).collect();
        let p = allan_deviation(&series(v, 1.0), &[2.0]).unwrap();
        assert!(p[0].adev().unwrap() < 1e-20);
        // a single step of size s in y gives a known m = 2 contribution
        let mut v = vec![0.0; 40];
        for x in v.iter_mut().skip(20) {
            *x = 1.0;
        }
        let got = allan_deviation(&series(v, 1.0), &[2.0]).unwrap()[0].adev().unwrap();
        // second differences of x with m = 2 are 1, 2, 1 around the step
        let expect = ((1.0 + 4.0 + 1.0) / (2.0 * 4.0 * 37.0_f64)).sqrt();
        assert!((got - expect).abs() < 1e-12, "{got} {expect}");
    }

    #[test]
    fn white_fm_slope() {
        let spec = NoiseSpec::<f64>::new(0.0, 1e-5, 0.0, 17).unwrap();
        let y = synthesize_frequency_noise(&spec, 20_000.0, 10.0).unwrap();
        let pts = allan_deviation(&y, &[1.0, 10.0, 100.0]).unwrap();
        for p in &pts {
            let expect = 1e-5 / p.tau.sqrt();
            let got = p.adev().unwrap();
            assert!((got / expect - 1.0).abs() < 0.1, "tau {} {got} {expect}", p.tau);
        }
    }

    #[test]
    fn self_concatenation_agrees() {
        let spec = NoiseSpec::<f64>::new(0.0, 1e-5, 0.0, 3).unwrap();
        let y = synthesize_frequency_noise(&spec, 5_000.0, 10.0).unwrap();
        let mut doubled = y.values.clone();
        doubled.extend_from_slice(&y.values);
        let a = allan_deviation(&y, &[1.0, 10.0]).unwrap();
        let b = allan_deviation(&series(doubled, 10.0), &[1.0, 10.0]).unwrap();
        for (p, q) in a.iter().zip(&b) {
            let r = p.adev().unwrap() / q.adev().unwrap();
            assert!((r - 1.0).abs() < 0.1, "{r}");
        }
    }
}
