//! Frequency and amplitude tracking of a sampled oscillation, bin by bin.
//!
//! Two trackers produce a [`RingdownRecord`]:
//! - [`track_spectral_peak`] emulates an FFT analyzer with a marker on the
//!   spectral maximum, refined by a three-point parabola.
//! - [`track_zero_crossings`] times upward zero crossings and regresses
//!   phase against time inside each bin; used for precise frequency
//!   extraction from simulated trajectories.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::record::{RecordEntry, RingdownRecord};
use crate::dynamics::TimeSeries;
use crate::error::{invalid, Error, Result};
use crate::numeric::linalg::weighted_least_squares;
use crate::scalar::Real;

/// Zero-padding factor applied before locating the spectral maximum.
const ZERO_PAD: usize = 4;

fn bin_layout<T: Real>(signal: &TimeSeries<T>, bin_duration: T) -> Result<(usize, usize)> {
    let per_bin = (bin_duration * signal.sample_rate).round().to_usize().unwrap_or(0);
    if per_bin < 16 {
        return Err(invalid(
            "bin_duration",
            format!("a bin must hold at least 16 samples, got {per_bin}"),
        ));
    }
    let bins = signal.len() / per_bin;
    if bins == 0 {
        return Err(Error::InsufficientData(format!(
            "signal of {} samples is shorter than one bin of {per_bin}",
            signal.len()
        )));
    }
    Ok((per_bin, bins))
}

/// Spectral peak of one real segment: frequency in Hz and sinusoid amplitude.
fn spectral_peak<T: Real>(segment: &[T], sample_rate: T, planner: &mut FftPlanner<T>) -> Option<(T, T)> {
    let n = segment.len();
    let nfft = n * ZERO_PAD;
    let two_pi = T::TAU();
    let denom = T::from_count(n);
    let mut window_sum = T::zero();
    let mut buf: Vec<Complex<T>> = Vec::with_capacity(nfft);
    for (i, v) in segment.iter().enumerate() {
        let w = (T::one() - (two_pi * T::from_count(i) / denom).cos()) / T::lit(2.0);
        window_sum += w;
        buf.push(Complex::new(*v * w, T::zero()));
    }
    buf.resize(nfft, Complex::new(T::zero(), T::zero()));
    planner.plan_fft_forward(nfft).process(&mut buf);
    let half = nfft / 2;
    let mags: Vec<T> = buf[..=half].iter().map(|c| c.norm()).collect();
    let (k, peak) = mags
        .iter()
        .enumerate()
        .skip(1)
        .take(half.saturating_sub(1))
        .fold((0, T::zero()), |best, (i, m)| if *m > best.1 { (i, *m) } else { best });
    if k == 0 || peak == T::zero() {
        return None;
    }
    let (a, b, c) = (mags[k - 1].ln(), mags[k].ln(), mags[k + 1].ln());
    let curvature = a - T::lit(2.0) * b + c;
    let (delta, log_peak) = if curvature < T::zero() && a.is_finite() && c.is_finite() {
        let d = (a - c) / (T::lit(2.0) * curvature);
        (d, b - (a - c) * d / T::lit(4.0))
    } else {
        (T::zero(), b)
    };
    let freq = (T::from_count(k) + delta) * sample_rate / T::from_count(nfft);
    let amplitude = T::lit(2.0) * log_peak.exp() / window_sum;
    Some((freq, amplitude))
}

/// Locate the spectral maximum in each bin of `signal`.
///
/// Each bin is analysed with a Hann-windowed FFT over a segment of
/// `1 / resolution_bandwidth` seconds centred in the bin, zero-padded by 4,
/// and refined by a parabola through the log-magnitudes of the three
/// samples around the maximum. Entries are stamped at bin centres.
pub fn track_spectral_peak<T: Real>(signal: &TimeSeries<T>, bin_duration: T, resolution_bandwidth: T) -> Result<RingdownRecord<T>> {
    if !(bin_duration > T::zero()) {
        return Err(invalid("bin_duration", "must be positive"));
    }
    if !(resolution_bandwidth * bin_duration >= T::one() - T::lit(1e-9)) {
        return Err(invalid(
            "resolution_bandwidth",
            format!(
                "must be at least 1/bin_duration = {} Hz, got {}",
                T::one() / bin_duration,
                resolution_bandwidth
            ),
        ));
    }
    let (per_bin, bins) = bin_layout(signal, bin_duration)?;
    let seg_len = ((signal.sample_rate / resolution_bandwidth).round().to_usize().unwrap_or(per_bin)).clamp(16, per_bin);
    let offset = (per_bin - seg_len) / 2;
    let mut planner = FftPlanner::new();
    let mut entries = Vec::with_capacity(bins);
    let mut skipped = Vec::new();
    for b in 0..bins {
        let start = b * per_bin + offset;
        let segment = &signal.values[start..start + seg_len];
        if segment.iter().all(|v| *v == T::zero()) {
            skipped.push(b);
            continue;
        }
        match spectral_peak(segment, signal.sample_rate, &mut planner) {
            Some((f, a)) => entries.push(RecordEntry {
                time: signal.time(b * per_bin) + T::from_count(per_bin) / (T::lit(2.0) * signal.sample_rate),
                frequency: f,
                amplitude: a,
            }),
            None => skipped.push(b),
        }
    }
    if entries.is_empty() {
        return Err(Error::InsufficientData("no bin produced a spectral peak".into()));
    }
    let mut rec = RingdownRecord::new(entries, bin_duration, resolution_bandwidth)?;
    rec.skipped_bins = skipped;
    Ok(rec)
}

/// Sub-sample time (in samples) of each upward zero crossing.
///
/// The crossing is first located by linear interpolation, then refined on
/// the cubic through the four surrounding samples.
fn upward_crossings<T: Real>(v: &[T]) -> Vec<T> {
    let mut out = Vec::new();
    for i in 0..v.len().saturating_sub(1) {
        let (y0, y1) = (v[i], v[i + 1]);
        if !(y0 < T::zero() && y1 >= T::zero()) {
            continue;
        }
        let lin = y0 / (y0 - y1);
        let mut s = lin;
        if i >= 1 && i + 2 < v.len() {
            let ym = v[i - 1];
            let y2 = v[i + 2];
            // Lagrange cubic through nodes -1, 0, 1, 2 in local coordinate s.
            let six = T::lit(6.0);
            let two = T::lit(2.0);
            let p = |s: T| {
                let l_m = -s * (s - T::one()) * (s - two) / six;
                let l_0 = (s + T::one()) * (s - T::one()) * (s - two) / two;
                let l_1 = -(s + T::one()) * s * (s - two) / two;
                let l_2 = (s + T::one()) * s * (s - T::one()) / six;
                ym * l_m + y0 * l_0 + y1 * l_1 + y2 * l_2
            };
            let dp = |s: T| {
                let h = T::lit(1e-4);
                (p(s + h) - p(s - h)) / (two * h)
            };
            for _ in 0..8 {
                let d = dp(s);
                if d <= T::zero() {
                    s = lin;
                    break;
                }
                let next = s - p(s) / d;
                if (next - s).abs() < T::lit(1e-13) {
                    s = next;
                    break;
                }
                s = next;
            }
            if !(s >= T::zero() && s <= T::one()) {
                s = lin;
            }
        }
        out.push(T::from_count(i) + s);
    }
    out
}

/// Drop crossings that follow the previous one by less than half the median
/// spacing (noise-induced re-crossings).
fn deglitch<T: Real>(mut crossings: Vec<T>) -> Vec<T> {
    if crossings.len() < 3 {
        return crossings;
    }
    let mut gaps: Vec<T> = crossings.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(|a, b| a.partial_cmp(b).expect("finite gaps"));
    let min_gap = gaps[gaps.len() / 2] / T::lit(2.0);
    let mut kept = Vec::with_capacity(crossings.len());
    for c in crossings.drain(..) {
        match kept.last() {
            Some(&last) if c - last < min_gap => {}
            _ => kept.push(c),
        }
    }
    kept
}

/// Least-squares slope of `(index, time)` pairs: seconds per cycle.
fn cycle_period<T: Real>(cycles: &[T], times: &[T]) -> Option<T> {
    let n = cycles.len();
    if n < 3 {
        return None;
    }
    let nf = T::from_count(n);
    let mc = cycles.iter().fold(T::zero(), |s, v| s + *v) / nf;
    let mt = times.iter().fold(T::zero(), |s, v| s + *v) / nf;
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    for (c, t) in cycles.iter().zip(times) {
        sxy += (*c - mc) * (*t - mt);
        sxx += (*c - mc) * (*c - mc);
    }
    (sxx > T::zero()).then(|| sxy / sxx)
}

/// Mean frequency (Hz) of a whole record from its upward zero crossings.
pub fn zero_crossing_frequency<T: Real>(values: &[T], sample_rate: T) -> Option<T> {
    let crossings = deglitch(upward_crossings(values));
    let cycles: Vec<T> = (0..crossings.len()).map(T::from_count).collect();
    let times: Vec<T> = crossings.iter().map(|c| *c / sample_rate).collect();
    cycle_period(&cycles, &times).map(|p| T::one() / p)
}

/// Amplitude of the best-fit sinusoid at `freq` (plus offset) over a segment.
fn sinusoid_amplitude<T: Real>(segment: &[T], t0: T, sample_rate: T, freq: T) -> Option<T> {
    let w = T::TAU() * freq;
    let design: Vec<Vec<T>> = (0..segment.len())
        .map(|i| {
            let t = t0 + T::from_count(i) / sample_rate;
            vec![(w * t).cos(), (w * t).sin(), T::one()]
        })
        .collect();
    let ones = vec![T::one(); segment.len()];
    let (c, _) = weighted_least_squares(&design, segment, &ones)?;
    Some((c[0] * c[0] + c[1] * c[1]).sqrt())
}

/// Per-bin frequency by phase regression over upward zero crossings, and
/// amplitude of the best-fit sinusoid in the bin.
///
/// Bins with fewer than three crossings, or with an all-zero signal, are
/// skipped and listed in `skipped_bins`. The record's resolution bandwidth is
/// nominally `1 / bin_duration`.
pub fn track_zero_crossings<T: Real>(signal: &TimeSeries<T>, bin_duration: T) -> Result<RingdownRecord<T>> {
    if !(bin_duration > T::zero()) {
        return Err(invalid("bin_duration", "must be positive"));
    }
    let (per_bin, bins) = bin_layout(signal, bin_duration)?;
    let crossings = deglitch(upward_crossings(&signal.values));
    let rate = signal.sample_rate;
    let mut entries = Vec::with_capacity(bins);
    let mut skipped = Vec::new();
    let mut cursor = 0;
    for b in 0..bins {
        let lo = T::from_count(b * per_bin);
        let hi = T::from_count((b + 1) * per_bin);
        while cursor < crossings.len() && crossings[cursor] < lo {
            cursor += 1;
        }
        let first = cursor;
        let mut last = cursor;
        while last < crossings.len() && crossings[last] < hi {
            last += 1;
        }
        let segment = &signal.values[b * per_bin..(b + 1) * per_bin];
        if segment.iter().all(|v| *v == T::zero()) {
            skipped.push(b);
            continue;
        }
        let cycles: Vec<T> = (first..last).map(T::from_count).collect();
        let times: Vec<T> = crossings[first..last].iter().map(|c| *c / rate).collect();
        let Some(period) = cycle_period(&cycles, &times) else {
            skipped.push(b);
            continue;
        };
        let freq = T::one() / period;
        let t0 = signal.time(b * per_bin);
        let Some(amplitude) = sinusoid_amplitude(segment, t0, rate, freq) else {
            skipped.push(b);
            continue;
        };
        entries.push(RecordEntry {
            time: t0 + T::from_count(per_bin) / (T::lit(2.0) * rate),
            frequency: freq,
            amplitude,
        });
    }
    if entries.is_empty() {
        return Err(Error::InsufficientData("no bin contained enough zero crossings".into()));
    }
    let mut rec = RingdownRecord::new(entries, bin_duration, T::one() / bin_duration)?;
    rec.skipped_bins = skipped;
    Ok(rec)
}
