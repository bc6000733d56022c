//! Sampled input/output records: CSV ingest, rate estimation, affine
//! normalization, monotone segmentation and contiguous train/test splits.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}` in header")]
    MissingColumn(&'static str),
    #[error("non-numeric cell {value:?} at row {row}, column `{column}`")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("non-increasing timestamp at row {0}")]
    NonIncreasingTime(usize),
    #[error("series needs at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("channel length mismatch: t has {expected} samples, {channel} has {found}")]
    LengthMismatch { channel: &'static str, expected: usize, found: usize },
    #[error("split fraction {0} outside (0, 1)")]
    BadFraction(f64),
    #[error("split of {n} samples at {fraction} leaves a part with fewer than 2 samples")]
    SplitTooSmall { n: usize, fraction: f64 },
}

/// Sampled input `x(t)`, optional output `y(t)` and optional input rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesPair {
    t: Vec<f64>,
    x: Vec<f64>,
    y: Option<Vec<f64>>,
    xdot: Option<Vec<f64>>,
}

impl TimeSeriesPair {
    pub fn new(t: Vec<f64>, x: Vec<f64>, y: Option<Vec<f64>>) -> Result<Self, SignalError> {
        let series = TimeSeriesPair { t, x, y, xdot: None };
        series.validate()?;
        Ok(series)
    }

    /// Input-only series on a uniform grid starting at `t = 0`.
    pub fn from_input(dt: f64, x: Vec<f64>) -> Result<Self, SignalError> {
        let t = (0..x.len()).map(|i| i as f64 * dt).collect();
        Self::new(t, x, None)
    }

    fn validate(&self) -> Result<(), SignalError> {
        let n = self.t.len();
        if n < 2 {
            return Err(SignalError::TooShort(n));
        }
        let check = |channel: &'static str, len: usize| {
            if len == n {
                Ok(())
            } else {
                Err(SignalError::LengthMismatch { channel, expected: n, found: len })
            }
        };
        check("x", self.x.len())?;
        if let Some(y) = &self.y {
            check("y", y.len())?;
        }
        if let Some(xdot) = &self.xdot {
            check("xdot", xdot.len())?;
        }
        if let Some(i) = self.t.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(SignalError::NonIncreasingTime(i + 2));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> Option<&[f64]> {
        self.y.as_deref()
    }

    pub fn xdot(&self) -> Option<&[f64]> {
        self.xdot.as_deref()
    }

    /// Replaces the output channel.
    pub fn with_y(mut self, y: Vec<f64>) -> Result<Self, SignalError> {
        self.y = Some(y);
        self.validate()?;
        Ok(self)
    }

    /// Supplies a measured or externally computed rate channel.
    pub fn with_xdot(mut self, xdot: Vec<f64>) -> Result<Self, SignalError> {
        self.xdot = Some(xdot);
        self.validate()?;
        Ok(self)
    }

    pub fn without_y(mut self) -> Self {
        self.y = None;
        self
    }

    pub fn without_xdot(mut self) -> Self {
        self.xdot = None;
        self
    }

    /// Rate channel, estimating it by central differences if absent.
    pub fn rate_or_estimate(&self) -> Vec<f64> {
        match &self.xdot {
            Some(v) => v.clone(),
            None => central_differences(&self.t, &self.x),
        }
    }

    /// Samples `range` as a new series. Panics if the range is out of bounds.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<Self, SignalError> {
        let series = TimeSeriesPair {
            t: self.t[range.clone()].to_vec(),
            x: self.x[range.clone()].to_vec(),
            y: self.y.as_ref().map(|v| v[range.clone()].to_vec()),
            xdot: self.xdot.as_ref().map(|v| v[range].to_vec()),
        };
        series.validate()?;
        Ok(series)
    }

    /// Joins `other` after `self`; channels present on only one side are dropped.
    pub fn concat(&self, other: &TimeSeriesPair) -> Result<Self, SignalError> {
        let join = |a: &[f64], b: &[f64]| a.iter().chain(b).copied().collect::<Vec<_>>();
        let series = TimeSeriesPair {
            t: join(&self.t, &other.t),
            x: join(&self.x, &other.x),
            y: match (&self.y, &other.y) {
                (Some(a), Some(b)) => Some(join(a, b)),
                _ => None,
            },
            xdot: match (&self.xdot, &other.xdot) {
                (Some(a), Some(b)) => Some(join(a, b)),
                _ => None,
            },
        };
        series.validate()?;
        Ok(series)
    }
}

fn parse_cell(record: &csv::StringRecord, idx: usize, row: usize, column: &str) -> Result<f64, SignalError> {
    let raw = record.get(idx).unwrap_or("").trim();
    raw.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| SignalError::NonNumeric {
        row,
        column: column.to_string(),
        value: raw.to_string(),
    })
}

/// Reads a `t,x[,y[,xdot]]` CSV. Rows are numbered from 1, header excluded.
pub fn read_csv<R: Read>(reader: R) -> Result<TimeSeriesPair, SignalError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let ti = find("t").ok_or(SignalError::MissingColumn("t"))?;
    let xi = find("x").ok_or(SignalError::MissingColumn("x"))?;
    let yi = find("y");
    let di = find("xdot");

    let (mut t, mut x, mut y, mut xdot) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (k, record) in rdr.records().enumerate() {
        let record = record?;
        let row = k + 1;
        let tv = parse_cell(&record, ti, row, "t")?;
        if let Some(&prev) = t.last() {
            if !(tv > prev) {
                return Err(SignalError::NonIncreasingTime(row));
            }
        }
        t.push(tv);
        x.push(parse_cell(&record, xi, row, "x")?);
        if let Some(i) = yi {
            y.push(parse_cell(&record, i, row, "y")?);
        }
        if let Some(i) = di {
            xdot.push(parse_cell(&record, i, row, "xdot")?);
        }
    }
    let mut series = TimeSeriesPair::new(t, x, yi.map(|_| y))?;
    if di.is_some() {
        series = series.with_xdot(xdot)?;
    }
    Ok(series)
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<TimeSeriesPair, SignalError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| SignalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_csv(std::io::BufReader::new(file))
}

/// Writes `t,x[,y][,xdot]` using shortest round-trip float formatting.
pub fn write_csv<W: Write>(series: &TimeSeriesPair, writer: W) -> Result<(), SignalError> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["t", "x"];
    if series.y.is_some() {
        header.push("y");
    }
    if series.xdot.is_some() {
        header.push("xdot");
    }
    wtr.write_record(&header)?;
    for i in 0..series.len() {
        let mut row = vec![series.t[i].to_string(), series.x[i].to_string()];
        if let Some(y) = &series.y {
            row.push(y[i].to_string());
        }
        if let Some(d) = &series.xdot {
            row.push(d[i].to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush().map_err(|source| SignalError::Io { path: "<writer>".into(), source })?;
    Ok(())
}

pub fn save_csv(series: &TimeSeriesPair, path: impl AsRef<Path>) -> Result<(), SignalError> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|source| SignalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    write_csv(series, std::io::BufWriter::new(file))
}

fn central_differences(t: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let (lo, hi) = if i == 0 {
                (0, 1)
            } else if i == n - 1 {
                (n - 2, n - 1)
            } else {
                (i - 1, i + 1)
            };
            (x[hi] - x[lo]) / (t[hi] - t[lo])
        })
        .collect()
}

/// Fills the rate channel by central differences (one-sided at both ends).
/// An existing rate channel is overwritten.
pub fn estimate_rate(series: &TimeSeriesPair) -> TimeSeriesPair {
    let mut out = series.clone();
    out.xdot = Some(central_differences(&series.t, &series.x));
    out
}

/// Affine channel map `z = (v - offset) / gain`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleMap {
    pub offset: f64,
    pub gain: f64,
}

impl ScaleMap {
    pub const IDENTITY: ScaleMap = ScaleMap { offset: 0.0, gain: 1.0 };

    /// Map sending `[min, max]` of `values` onto `[-1, 1]`.
    pub fn fit(values: &[f64]) -> ScaleMap {
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if !(hi > lo) {
            return ScaleMap { offset: lo, gain: 1.0 };
        }
        ScaleMap { offset: 0.5 * (hi + lo), gain: 0.5 * (hi - lo) }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.offset) / self.gain
    }

    pub fn unapply(&self, z: f64) -> f64 {
        z * self.gain + self.offset
    }

    /// Covered raw interval `[offset - gain, offset + gain]`.
    pub fn range(&self) -> (f64, f64) {
        (self.offset - self.gain, self.offset + self.gain)
    }
}

/// Scale maps for the input and output channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelScales {
    pub x: ScaleMap,
    pub y: ScaleMap,
}

impl ChannelScales {
    pub const IDENTITY: ChannelScales = ChannelScales { x: ScaleMap::IDENTITY, y: ScaleMap::IDENTITY };

    /// Maps raw channels into normalized space. Time is untouched and the
    /// rate channel is divided by the input gain only.
    pub fn apply(&self, series: &TimeSeriesPair) -> TimeSeriesPair {
        TimeSeriesPair {
            t: series.t.clone(),
            x: series.x.iter().map(|&v| self.x.apply(v)).collect(),
            y: series.y.as_ref().map(|y| y.iter().map(|&v| self.y.apply(v)).collect()),
            xdot: series.xdot.as_ref().map(|d| d.iter().map(|&v| v / self.x.gain).collect()),
        }
    }

    pub fn unapply(&self, series: &TimeSeriesPair) -> TimeSeriesPair {
        TimeSeriesPair {
            t: series.t.clone(),
            x: series.x.iter().map(|&v| self.x.unapply(v)).collect(),
            y: series.y.as_ref().map(|y| y.iter().map(|&v| self.y.unapply(v)).collect()),
            xdot: series.xdot.as_ref().map(|d| d.iter().map(|&v| v * self.x.gain).collect()),
        }
    }
}

/// Normalizes `x` and `y` to `[-1, 1]` and returns the maps used.
pub fn normalize(series: &TimeSeriesPair) -> (TimeSeriesPair, ChannelScales) {
    let scales = ChannelScales {
        x: ScaleMap::fit(&series.x),
        y: series.y.as_deref().map(ScaleMap::fit).unwrap_or(ScaleMap::IDENTITY),
    };
    (scales.apply(series), scales)
}

pub fn denormalize(series: &TimeSeriesPair, scales: &ChannelScales) -> TimeSeriesPair {
    scales.unapply(series)
}

/// Sample indices bounding the monotone pieces of `x`, including both ends.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentIndex {
    pub breakpoints: Vec<usize>,
}

impl SegmentIndex {
    pub fn segments(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.breakpoints.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Breakpoints where the direction of `x` strictly reverses. A plateau
/// belongs to the segment before it, so the breakpoint sits at its end.
pub fn monotone_segments(series: &TimeSeriesPair) -> SegmentIndex {
    let x = &series.x;
    let n = x.len();
    let mut breakpoints = vec![0];
    let mut direction = 0.0_f64;
    for i in 0..n - 1 {
        let d = x[i + 1] - x[i];
        if d == 0.0 {
            continue;
        }
        let s = d.signum();
        if direction != 0.0 && s != direction {
            breakpoints.push(i);
        }
        direction = s;
    }
    if *breakpoints.last().unwrap() != n - 1 {
        breakpoints.push(n - 1);
    }
    SegmentIndex { breakpoints }
}

/// Contiguous prefix/suffix split at `round(fraction * N)`.
pub fn split(series: &TimeSeriesPair, fraction: f64) -> Result<(TimeSeriesPair, TimeSeriesPair), SignalError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SignalError::BadFraction(fraction));
    }
    let n = series.len();
    let cut = (fraction * n as f64).round() as usize;
    if cut < 2 || n - cut.min(n) < 2 {
        return Err(SignalError::SplitTooSmall { n, fraction });
    }
    Ok((series.slice(0..cut)?, series.slice(cut..n)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> TimeSeriesPair {
        let t: Vec<f64> = (0..n).map(|i| i as f64 * 0.1).collect();
        TimeSeriesPair::new(t.clone(), t, None).unwrap()
    }

    #[test]
    fn minimal_csv() {
        let s = read_csv("t,x,y\n0,0,0\n1,1,0.5\n".as_bytes()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.y().unwrap(), &[0.0, 0.5]);
    }

    #[test]
    fn csv_errors_name_the_location() {
        let err = read_csv("t,x\n0,0\n0,1\n1,2\n".as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "non-increasing timestamp at row 2");
        let err = read_csv("t,y\n0,0\n1,1\n".as_bytes()).unwrap_err();
        assert!(matches!(err, SignalError::MissingColumn("x")));
        let err = read_csv("t,x\n0,0\n1,abc\n".as_bytes()).unwrap_err();
        match err {
            SignalError::NonNumeric { row, column, .. } => {
                assert_eq!(row, 2);
                assert_eq!(column, "x");
            }
            other => panic!("unexpected {other}"),
        }
        assert!(matches!(read_csv("t,x\n0,0\n".as_bytes()), Err(SignalError::TooShort(1))));
        assert!(read_csv("t,x\n0,1e-3\n2.5E+1,-4\n".as_bytes()).is_ok());
    }

    #[test]
    fn rate_of_linear_and_constant_signals() {
        let s = estimate_rate(&ramp(20));
        assert!(s.xdot().unwrap().iter().all(|&d| (d - 1.0).abs() < 1e-12));
        let c = TimeSeriesPair::from_input(0.1, vec![3.0; 10]).unwrap();
        assert!(estimate_rate(&c).xdot().unwrap().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn rate_of_sine_obeys_taylor_bound() {
        let f = 2.0;
        let w = 2.0 * std::f64::consts::PI * f;
        let dt = 1e-3;
        // Grid spans whole half periods so sin'' vanishes at both ends.
        let n = (3.0 / (2.0 * f) / dt).round() as usize + 1;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let x = t.iter().map(|&t| (w * t).sin()).collect();
        let s = estimate_rate(&TimeSeriesPair::new(t.clone(), x, None).unwrap());
        let bound = w.powi(3) * dt * dt / 6.0 + 1e-9;
        let worst = s
            .xdot()
            .unwrap()
            .iter()
            .zip(&t)
            .map(|(d, &t)| (d - w * (w * t).cos()).abs())
            .fold(0.0, f64::max);
        assert!(worst <= bound, "{worst} > {bound}");
    }

    #[test]
    fn normalize_magnetostrictive_range() {
        let x: Vec<f64> = (0..=19).map(|i| -0.7 + 1.9 * i as f64 / 19.0).collect();
        let s = TimeSeriesPair::from_input(0.01, x).unwrap();
        let (n, scales) = normalize(&s);
        let lo = n.x().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = n.x().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!((lo + 1.0).abs() < 1e-15 && (hi - 1.0).abs() < 1e-15);
        let back = denormalize(&n, &scales);
        for (a, b) in back.x().iter().zip(s.x()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300) || (a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_channel_is_identity_and_constant_channel_is_shifted() {
        let x = vec![-1.0, 0.3, 1.0, 0.0];
        assert_eq!(ScaleMap::fit(&x), ScaleMap::IDENTITY);
        assert_eq!(ScaleMap::fit(&[2.5, 2.5]), ScaleMap { offset: 2.5, gain: 1.0 });
    }

    #[test]
    fn segments_of_ramp_and_triangle() {
        assert_eq!(monotone_segments(&ramp(7)).breakpoints, vec![0, 6]);
        let x = vec![0.0, 1.0, 2.0, 1.0, 0.0, 1.0, 2.0];
        let s = TimeSeriesPair::from_input(1.0, x).unwrap();
        assert_eq!(monotone_segments(&s).breakpoints, vec![0, 2, 4, 6]);
        let x = vec![0.0, 1.0, 1.0, 0.0];
        let s = TimeSeriesPair::from_input(1.0, x).unwrap();
        assert_eq!(monotone_segments(&s).breakpoints, vec![0, 2, 3]);
    }

    #[test]
    fn split_sizes_and_errors() {
        let s = ramp(10);
        let (a, b) = split(&s, 0.8).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!(a.concat(&b).unwrap(), s);
        assert!(matches!(split(&ramp(3), 0.9), Err(SignalError::SplitTooSmall { .. })));
        assert!(matches!(split(&s, 1.0), Err(SignalError::BadFraction(_))));
        assert!(matches!(split(&s, 0.0), Err(SignalError::BadFraction(_))));
    }
}
