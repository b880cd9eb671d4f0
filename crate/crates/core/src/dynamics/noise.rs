use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::timeseries::{Channel, TimeSeries};
use crate::error::{invalid, Result};
use crate::scalar::Real;

/// Independent random streams derived from one seed.
pub(crate) mod stream {
    pub const ADDITIVE: u64 = 1;
    pub const FREQUENCY: u64 = 2;
}

/// Noise levels used to emulate an instrument.
///
/// Fractional-frequency levels are Allan deviations at 1 s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec<T> {
    pub additive_white_rms: T,
    pub fractional_frequency_white: T,
    pub fractional_frequency_random_walk: T,
    pub seed: u64,
}

impl<T: Real> NoiseSpec<T> {
    pub fn new(additive_white_rms: T, white: T, random_walk: T, seed: u64) -> Result<Self> {
        for (name, v) in [
            ("additive_white_rms", additive_white_rms),
            ("fractional_frequency_white", white),
            ("fractional_frequency_random_walk", random_walk),
        ] {
            if !(v >= T::zero() && v.is_finite()) {
                return Err(invalid(name, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self {
            additive_white_rms,
            fractional_frequency_white: white,
            fractional_frequency_random_walk: random_walk,
            seed,
        })
    }

    pub fn silent(seed: u64) -> Self {
        Self {
            additive_white_rms: T::zero(),
            fractional_frequency_white: T::zero(),
            fractional_frequency_random_walk: T::zero(),
            seed,
        }
    }

    pub fn additive(rms: T, seed: u64) -> Self {
        Self {
            additive_white_rms: rms,
            ..Self::silent(seed)
        }
    }

    pub fn has_frequency_noise(&self) -> bool {
        self.fractional_frequency_white > T::zero() || self.fractional_frequency_random_walk > T::zero()
    }
}

pub(crate) fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gauss<T: Real>(rng: &mut ChaCha8Rng) -> T {
    let z: f64 = rng.sample(StandardNormal);
    T::lit(z)
}

/// `n` independent Gaussian samples with the given rms.
pub fn white_noise<T: Real>(n: usize, rms: T, seed: u64) -> Vec<T> {
    let mut r = rng(seed, stream::ADDITIVE);
    (0..n).map(|_| rms * gauss::<T>(&mut r)).collect()
}

/// Seeded white FM plus random-walk FM fractional-frequency samples.
///
/// For samples at rate `r`, white FM with `sigma_y(1 s) = w` has per-sample
/// standard deviation `w sqrt(r)`; random-walk FM with `sigma_y(1 s) = q`
/// has per-sample increments of standard deviation `q sqrt(3 / r)`.
pub fn synthesize_frequency_noise<T: Real>(spec: &NoiseSpec<T>, duration: T, rate: T) -> Result<TimeSeries<T>> {
    if !spec.has_frequency_noise() {
        return Err(invalid(
            "noise",
            "at least one fractional-frequency noise level must be positive",
        ));
    }
    if !(rate > T::zero() && duration > T::zero()) {
        return Err(invalid("duration", "duration and rate must be positive"));
    }
    let n = (duration * rate).round().to_usize().unwrap_or(0).max(1);
    let white_sd = spec.fractional_frequency_white * rate.sqrt();
    let walk_sd = spec.fractional_frequency_random_walk * (T::lit(3.0) / rate).sqrt();
    let mut r = rng(spec.seed, stream::FREQUENCY);
    let mut walk = T::zero();
    let values = (0..n)
        .map(|_| {
            let w: T = gauss(&mut r);
            let s: T = gauss(&mut r);
            walk += walk_sd * s;
            white_sd * w + walk
        })
        .collect();
    Ok(TimeSeries::new(Channel::FractionalFrequency, rate, T::zero(), values)?.with_seed(spec.seed))
}
