//! Input-signal descriptors and their synthesis into sampled series.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signals::{load_csv, SignalError, TimeSeriesPair};

#[derive(Debug, Error)]
pub enum ExcitationError {
    #[error("invalid signal field `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error(transparent)]
    Signal(#[from] SignalError),
}

fn one() -> usize {
    1
}

/// Excitation waveform, tagged by `kind` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SignalDescriptor {
    /// Triangle wave starting at 0 and rising. With a non-empty `envelope`,
    /// cycle `k` peaks at `amplitude·envelope[k mod len]` and the slope stays
    /// at that of the full-amplitude wave (`4·amplitude·frequency`).
    Triangle {
        amplitude: f64,
        frequency: f64,
        duration: f64,
        sample_rate: f64,
        #[serde(default)]
        envelope: Vec<f64>,
    },
    Sine { amplitude: f64, frequency: f64, duration: f64, sample_rate: f64 },
    /// Back-to-back sine segments, `cycles` periods per frequency, each
    /// starting at phase 0. Sampling is either a fixed count per period or a
    /// fixed rate (rounded so every segment ends on a sample).
    Multisine {
        amplitude: f64,
        frequencies: Vec<f64>,
        #[serde(default = "one")]
        cycles: usize,
        #[serde(default)]
        samples_per_cycle: Option<usize>,
        #[serde(default)]
        sample_rate: Option<f64>,
    },
    /// Triangle wave under the envelope `exp(-decay·t)`.
    DampedTriangle { amplitude: f64, frequency: f64, duration: f64, sample_rate: f64, decay: f64 },
    /// `t` and `x` columns of an existing CSV; other columns are dropped.
    FromCsv { path: PathBuf },
}

fn positive(field: &'static str, v: f64) -> Result<f64, ExcitationError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ExcitationError::Invalid { field, reason: format!("must be positive and finite, got {v}") })
    }
}

fn grid(duration: f64, sample_rate: f64) -> Result<Vec<f64>, ExcitationError> {
    positive("duration", duration)?;
    positive("sample_rate", sample_rate)?;
    let n = (duration * sample_rate).round() as usize + 1;
    if n < 2 {
        return Err(ExcitationError::Invalid {
            field: "duration",
            reason: "covers fewer than 2 samples at this sample rate".into(),
        });
    }
    Ok((0..n).map(|k| k as f64 / sample_rate).collect())
}

fn triangle_phase(p: f64) -> f64 {
    let p = p - p.floor();
    if p < 0.25 {
        4.0 * p
    } else if p < 0.75 {
        2.0 - 4.0 * p
    } else {
        4.0 * p - 4.0
    }
}

/// Piecewise-linear path through `(time, level)` knots sampled at `t`.
fn envelope_triangle(amplitude: f64, frequency: f64, envelope: &[f64], t: &[f64]) -> Vec<f64> {
    let slope = 4.0 * amplitude * frequency;
    let end = *t.last().unwrap();
    let mut knots = vec![(0.0, 0.0)];
    let mut cycle = 0;
    while knots.last().unwrap().0 < end {
        let peak = amplitude * envelope[cycle % envelope.len()];
        for target in [peak, -peak] {
            let &(t0, level) = knots.last().unwrap();
            knots.push((t0 + (target - level).abs() / slope, target));
        }
        cycle += 1;
    }
    let mut seg = 0;
    t.iter()
        .map(|&ti| {
            while knots[seg + 1].0 < ti {
                seg += 1;
            }
            let ((ta, a), (tb, b)) = (knots[seg], knots[seg + 1]);
            if tb > ta {
                a + (b - a) * (ti - ta) / (tb - ta)
            } else {
                b
            }
        })
        .collect()
}

impl SignalDescriptor {
    /// Samples the waveform; `base_dir` resolves relative CSV paths.
    pub fn synthesize(&self, base_dir: Option<&Path>) -> Result<TimeSeriesPair, ExcitationError> {
        match self {
            SignalDescriptor::Triangle { amplitude, frequency, duration, sample_rate, envelope } => {
                let a = positive("amplitude", *amplitude)?;
                let f = positive("frequency", *frequency)?;
                let t = grid(*duration, *sample_rate)?;
                let x = if envelope.is_empty() {
                    t.iter().map(|&ti| a * triangle_phase(f * ti)).collect()
                } else {
                    for &e in envelope {
                        positive("envelope", e)?;
                    }
                    envelope_triangle(a, f, envelope, &t)
                };
                Ok(TimeSeriesPair::new(t, x, None)?)
            }
            SignalDescriptor::Sine { amplitude, frequency, duration, sample_rate } => {
                let a = positive("amplitude", *amplitude)?;
                let f = positive("frequency", *frequency)?;
                let t = grid(*duration, *sample_rate)?;
                let x = t.iter().map(|&ti| a * (2.0 * PI * f * ti).sin()).collect();
                Ok(TimeSeriesPair::new(t, x, None)?)
            }
            SignalDescriptor::DampedTriangle { amplitude, frequency, duration, sample_rate, decay } => {
                let a = positive("amplitude", *amplitude)?;
                let f = positive("frequency", *frequency)?;
                if !(*decay >= 0.0 && decay.is_finite()) {
                    return Err(ExcitationError::Invalid { field: "decay", reason: format!("must be >= 0, got {decay}") });
                }
                let t = grid(*duration, *sample_rate)?;
                let x = t.iter().map(|&ti| a * (-decay * ti).exp() * triangle_phase(f * ti)).collect();
                Ok(TimeSeriesPair::new(t, x, None)?)
            }
            SignalDescriptor::Multisine { amplitude, frequencies, cycles, samples_per_cycle, sample_rate } => {
                let a = positive("amplitude", *amplitude)?;
                if frequencies.is_empty() {
                    return Err(ExcitationError::Invalid { field: "frequencies", reason: "must not be empty".into() });
                }
                if *cycles == 0 {
                    return Err(ExcitationError::Invalid { field: "cycles", reason: "must be at least 1".into() });
                }
                let per_segment = |f: f64| -> Result<usize, ExcitationError> {
                    match (samples_per_cycle, sample_rate) {
                        (Some(n), None) if *n >= 2 => Ok(n * cycles),
                        (Some(_), None) => Err(ExcitationError::Invalid {
                            field: "samples_per_cycle",
                            reason: "must be at least 2".into(),
                        }),
                        (None, Some(rate)) => {
                            let rate = positive("sample_rate", *rate)?;
                            Ok(((rate * *cycles as f64 / f).round() as usize).max(2))
                        }
                        _ => Err(ExcitationError::Invalid {
                            field: "samples_per_cycle",
                            reason: "give exactly one of samples_per_cycle and sample_rate".into(),
                        }),
                    }
                };
                let mut t = vec![0.0];
                let mut x = vec![0.0];
                let mut start = 0.0;
                for &f in frequencies {
                    let f = positive("frequencies", f)?;
                    let n = per_segment(f)?;
                    let span = *cycles as f64 / f;
                    for k in 1..=n {
                        let frac = k as f64 / n as f64;
                        t.push(start + span * frac);
                        x.push(a * (2.0 * PI * *cycles as f64 * frac).sin());
                    }
                    start += span;
                }
                Ok(TimeSeriesPair::new(t, x, None)?)
            }
            SignalDescriptor::FromCsv { path } => {
                let full = match base_dir {
                    Some(dir) if path.is_relative() => dir.join(path),
                    _ => path.clone(),
                };
                let s = load_csv(full)?;
                Ok(s.without_y().without_xdot())
            }
        }
    }
}
