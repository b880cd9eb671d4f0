use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Physical quantity carried by a [`TimeSeries`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Displacement,
    Voltage,
    FractionalFrequency,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Displacement => "displacement",
            Channel::Voltage => "voltage",
            Channel::FractionalFrequency => "fractional_frequency",
        })
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "displacement" => Ok(Channel::Displacement),
            "voltage" => Ok(Channel::Voltage),
            "fractional_frequency" => Ok(Channel::FractionalFrequency),
            other => Err(invalid("channel", format!("unknown channel `{other}`"))),
        }
    }
}

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    pub channel: Channel,
    pub sample_rate: T,
    pub start_time: T,
    /// Seed of the stochastic process that produced the data, if any.
    pub seed: Option<u64>,
    pub values: Vec<T>,
}

impl<T: Real> TimeSeries<T> {
    pub fn new(channel: Channel, sample_rate: T, start_time: T, values: Vec<T>) -> Result<Self> {
        if !(sample_rate > T::zero() && sample_rate.is_finite()) {
            return Err(invalid("sample_rate", format!("must be positive, got {sample_rate}")));
        }
        if values.is_empty() {
            return Err(invalid("values", "a time series needs at least one sample"));
        }
        Ok(Self {
            channel,
            sample_rate,
            start_time,
            seed: None,
            values,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dt(&self) -> T {
        T::one() / self.sample_rate
    }

    pub fn time(&self, index: usize) -> T {
        self.start_time + T::from_count(index) / self.sample_rate
    }

    pub fn duration(&self) -> T {
        T::from_count(self.values.len()) / self.sample_rate
    }

    pub fn map(&self, channel: Channel, f: impl Fn(T) -> T) -> Self {
        Self {
            channel,
            sample_rate: self.sample_rate,
            start_time: self.start_time,
            seed: self.seed,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }
}

impl TimeSeries<f64> {
    /// CSV with a metadata header row, a `value` column header and one sample
    /// per row. Numbers are written in shortest round-trip form, so reading
    /// the file back reproduces every bit.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(writer);
        w.write_record(["channel", "sample_rate", "start_time", "seed"])?;
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_default();
        w.write_record([
            self.channel.to_string(),
            format!("{:e}", self.sample_rate),
            format!("{:e}", self.start_time),
            seed,
        ])?;
        w.write_record(["value"])?;
        for v in &self.values {
            w.write_record([format!("{v:e}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .from_reader(reader);
        let mut rows = r.records();
        let mut next = |line: usize| -> Result<csv::StringRecord> {
            match rows.next() {
                Some(rec) => Ok(rec?),
                None => Err(Error::Format {
                    line,
                    reason: "unexpected end of file".into(),
                }),
            }
        };
        let header = next(1)?;
        if header.iter().collect::<Vec<_>>() != ["channel", "sample_rate", "start_time", "seed"] {
            return Err(Error::Format {
                line: 1,
                reason: "expected `channel,sample_rate,start_time,seed`".into(),
            });
        }
        let meta = next(2)?;
        if meta.len() != 4 {
            return Err(Error::Format {
                line: 2,
                reason: format!("expected 4 metadata fields, found {}", meta.len()),
            });
        }
        let num = |s: &str, line: usize| -> Result<f64> {
            s.trim().parse::<f64>().map_err(|e| Error::Format {
                line,
                reason: format!("bad number `{s}`: {e}"),
            })
        };
        let channel: Channel = meta[0].parse().map_err(|e: Error| Error::Format {
            line: 2,
            reason: e.to_string(),
        })?;
        let sample_rate = num(&meta[1], 2)?;
        let start_time = num(&meta[2], 2)?;
        let seed = if meta[3].trim().is_empty() {
            None
        } else {
            Some(meta[3].trim().parse::<u64>().map_err(|e| Error::Format {
                line: 2,
                reason: format!("bad seed: {e}"),
            })?)
        };
        let col = next(3)?;
        if col.len() != 1 || &col[0] != "value" {
            return Err(Error::Format {
                line: 3,
                reason: "expected `value` column header".into(),
            });
        }
        let mut values = Vec::new();
        for (i, rec) in rows.enumerate() {
            let line = i + 4;
            let rec = rec?;
            if rec.len() != 1 {
                return Err(Error::Format {
                    line,
                    reason: format!("expected one field, found {}", rec.len()),
                });
            }
            values.push(num(&rec[0], line)?);
        }
        let mut ts = TimeSeries::new(channel, sample_rate, start_time, values).map_err(|e| Error::Format {
            line: 4,
            reason: e.to_string(),
        })?;
        ts.seed = seed;
        Ok(ts)
    }
}
