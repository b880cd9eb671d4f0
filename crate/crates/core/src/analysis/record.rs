use std::io::{Read, Write};

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// One time bin of a tracked ringdown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordEntry<T> {
    pub time: T,
    pub frequency: T,
    pub amplitude: T,
}

/// Per-bin frequency and amplitude of a decaying oscillation.
#[derive(Debug, Clone, PartialEq)]
pub struct RingdownRecord<T> {
    pub entries: Vec<RecordEntry<T>>,
    pub bin_duration: T,
    pub resolution_bandwidth: T,
    /// Bins that produced no usable estimate (for example all-zero input).
    pub skipped_bins: Vec<usize>,
}

impl<T: Real> RingdownRecord<T> {
    pub fn new(entries: Vec<RecordEntry<T>>, bin_duration: T, resolution_bandwidth: T) -> Result<Self> {
        for w in entries.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(invalid("entries", "times must be strictly increasing"));
            }
        }
        if let Some(e) = entries.iter().find(|e| !(e.amplitude >= T::zero())) {
            return Err(invalid("entries", format!("negative amplitude {} at t={}", e.amplitude, e.time)));
        }
        Ok(Self {
            entries,
            bin_duration,
            resolution_bandwidth,
            skipped_bins: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn times(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.time).collect()
    }

    pub fn frequencies(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.frequency).collect()
    }

    pub fn amplitudes(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.amplitude).collect()
    }

    pub fn max_amplitude(&self) -> T {
        self.entries.iter().fold(T::zero(), |m, e| m.max(e.amplitude))
    }

    /// Whether every entry carries a positive frequency estimate.
    pub fn has_frequencies(&self) -> bool {
        !self.entries.is_empty() && self.entries.iter().all(|e| e.frequency > T::zero())
    }

    /// Median tracked frequency, if any entry has one.
    pub fn reference_frequency(&self) -> Option<T> {
        let mut f: Vec<T> = self.entries.iter().map(|e| e.frequency).filter(|f| *f > T::zero()).collect();
        if f.is_empty() {
            return None;
        }
        f.sort_by(|a, b| a.partial_cmp(b).expect("finite frequencies"));
        Some(f[f.len() / 2])
    }

    /// Copy with every amplitude multiplied by `factor` (unit conversion).
    pub fn scaled_amplitudes(&self, factor: T) -> Self {
        let mut out = self.clone();
        for e in out.entries.iter_mut() {
            e.amplitude *= factor;
        }
        out
    }
}

impl RingdownRecord<f64> {
    /// `time,frequency,amplitude` rows preceded by a bin-settings row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        w.write_record(["bin_duration", "resolution_bandwidth"])?;
        w.write_record([format!("{:e}", self.bin_duration), format!("{:e}", self.resolution_bandwidth)])?;
        w.write_record(["time", "frequency", "amplitude"])?;
        for e in &self.entries {
            w.write_record([format!("{:e}", e.time), format!("{:e}", e.frequency), format!("{:e}", e.amplitude)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let rows: Vec<csv::StringRecord> = r.records().collect::<std::result::Result<_, _>>()?;
        let num = |s: &str, line: usize| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::Format {
                line,
                reason: format!("bad number `{s}`: {e}"),
            })
        };
        if rows.len() < 3 || rows[1].len() != 2 {
            return Err(Error::Format {
                line: rows.len().min(2) + 1,
                reason: "missing ringdown record header".into(),
            });
        }
        let bin = num(&rows[1][0], 2)?;
        let rbw = num(&rows[1][1], 2)?;
        let mut entries = Vec::with_capacity(rows.len() - 3);
        for (i, rec) in rows.iter().enumerate().skip(3) {
            let line = i + 1;
            if rec.len() != 3 {
                return Err(Error::Format {
                    line,
                    reason: format!("expected 3 fields, found {}", rec.len()),
                });
            }
            entries.push(RecordEntry {
                time: num(&rec[0], line)?,
                frequency: num(&rec[1], line)?,
                amplitude: num(&rec[2], line)?,
            });
        }
        Self::new(entries, bin, rbw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invariants_enforced() {
        let e = |t, a| RecordEntry { time: t, frequency: 1.0, amplitude: a };
        assert!(RingdownRecord::new(vec![e(0.0, 1.0), e(0.0, 1.0)], 0.2, 5.0).is_err());
        assert!(RingdownRecord::new(vec![e(0.0, -1.0)], 0.2, 5.0).is_err());
        assert!(RingdownRecord::new(vec![e(0.0, 1.0), e(0.2, 0.5)], 0.2, 5.0).is_ok());
    }

    #[test]
    fn csv_round_trip() {
        let rec = RingdownRecord::new(
            vec![
                RecordEntry { time: 0.1, frequency: 127_070.97, amplitude: 7.5e-11 },
                RecordEntry { time: 0.3, frequency: 127_070.96, amplitude: 7.4e-11 },
            ],
            0.2,
            5.0,
        )
        .unwrap();
        let mut buf = Vec::new();
        rec.write_csv(&mut buf).unwrap();
        assert_eq!(RingdownRecord::read_csv(buf.as_slice()).unwrap(), rec);
    }
}
