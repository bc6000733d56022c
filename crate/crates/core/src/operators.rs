//! Stateful sample-by-sample hysteresis kernels: stop, play, relay,
//! deteriorating stop (DS) and the unit-threshold NDS neuron.
//!
//! Every operator is advanced one input sample at a time. For the stop
//! family this is equivalent to the segment-wise induction over monotone
//! pieces because clamped increments compose on a monotone segment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("threshold must be positive and finite, got {0}")]
    BadThreshold(f64),
    #[error("deterioration parameter must be positive, got {0}")]
    BadBeta(f64),
    #[error("non-finite operator input {0}")]
    NonFinite(f64),
}

fn finite(x: f64) -> Result<f64, OperatorError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(OperatorError::NonFinite(x))
    }
}

#[inline]
fn clamp(v: f64, r: f64) -> f64 {
    v.max(-r).min(r)
}

/// Elastic-perfectly-plastic element with output bounded by `±r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StopState {
    r: f64,
    y: f64,
    play: f64,
    x_prev: f64,
}

impl StopState {
    pub fn new(r: f64, x0: f64) -> Result<Self, OperatorError> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(OperatorError::BadThreshold(r));
        }
        let x0 = finite(x0)?;
        let y = clamp(x0, r);
        Ok(StopState { r, y, play: x0 - y, x_prev: x0 })
    }

    pub fn threshold(&self) -> f64 {
        self.r
    }

    pub fn output(&self) -> f64 {
        self.y
    }

    pub fn last_input(&self) -> f64 {
        self.x_prev
    }

    /// Play output `x - stop` at the last sample.
    pub fn play(&self) -> f64 {
        self.play
    }

    pub fn step(&mut self, x_new: f64) -> Result<f64, OperatorError> {
        let x_new = finite(x_new)?;
        Ok(self.step_with_threshold(x_new, self.r))
    }

    /// Advances the stop and returns the complementary play output.
    pub fn step_play(&mut self, x_new: f64) -> Result<f64, OperatorError> {
        self.step(x_new)?;
        Ok(self.play())
    }

    /// Stop update with a threshold that may change from sample to sample.
    ///
    /// Equivalent to `y' = clamp(x' - x + y, ±r)`. The play memory is kept
    /// explicitly so it stays bit-for-bit constant while the stop is elastic.
    #[inline]
    pub(crate) fn step_with_threshold(&mut self, x_new: f64, r: f64) -> f64 {
        self.play = self.play.min(x_new + r).max(x_new - r);
        self.y = clamp(x_new - self.play, r);
        self.x_prev = x_new;
        self.y
    }
}

/// Two-state switch `R_{s-r, s+r}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayState {
    alpha: f64,
    beta_thr: f64,
    sign: f64,
}

impl RelayState {
    /// Seeds the relay at `-1` for `s > 0` and `+1` otherwise, then applies `x0`.
    pub fn new(s: f64, r: f64, x0: f64) -> Result<Self, OperatorError> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(OperatorError::BadThreshold(r));
        }
        let sign = if s > 0.0 { -1.0 } else { 1.0 };
        let mut relay = RelayState { alpha: s - r, beta_thr: s + r, sign };
        relay.step(x0)?;
        Ok(relay)
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn thresholds(&self) -> (f64, f64) {
        (self.alpha, self.beta_thr)
    }

    pub fn step(&mut self, x_new: f64) -> Result<f64, OperatorError> {
        let x_new = finite(x_new)?;
        if x_new >= self.beta_thr {
            self.sign = 1.0;
        } else if x_new <= self.alpha {
            self.sign = -1.0;
        }
        Ok(self.sign)
    }
}

/// Cumulative slip after one play increment.
pub fn slip_update(s_prev: f64, play_prev: f64, play_new: f64) -> f64 {
    s_prev + (play_new - play_prev).abs()
}

/// Bilinear soundness index. Zero once the slip reaches `r * beta`.
pub fn soundness(s: f64, r: f64, beta: f64) -> f64 {
    let capacity = r * beta;
    if s < capacity {
        1.0 - s / capacity
    } else {
        0.0
    }
}

/// Stop operator whose output is scaled by a soundness index driven by
/// the cumulative slip of the complementary play operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DsState {
    stop: StopState,
    slip: f64,
    beta: f64,
}

impl DsState {
    pub fn new(r: f64, beta: f64, x0: f64) -> Result<Self, OperatorError> {
        if !(beta > 0.0) || beta.is_nan() {
            return Err(OperatorError::BadBeta(beta));
        }
        Ok(DsState { stop: StopState::new(r, x0)?, slip: 0.0, beta })
    }

    pub fn stop(&self) -> &StopState {
        &self.stop
    }

    pub fn slip(&self) -> f64 {
        self.slip
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn soundness(&self) -> f64 {
        soundness(self.slip, self.stop.r, self.beta)
    }

    pub fn output(&self) -> f64 {
        self.stop.y * self.soundness()
    }

    pub fn step(&mut self, x_new: f64) -> Result<f64, OperatorError> {
        let play_prev = self.stop.play();
        let play_new = self.stop.step_play(x_new)?;
        self.slip = slip_update(self.slip, play_prev, play_new);
        Ok(self.output())
    }
}

/// DS operator with unit threshold fed by `w_x·x + w_xdot·ẋ + bias`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NdsState {
    pub w_x: f64,
    pub w_xdot: f64,
    pub bias: f64,
    ds: DsState,
}

impl NdsState {
    pub fn new(w_x: f64, w_xdot: f64, bias: f64, beta: f64, x0: f64, xdot0: f64) -> Result<Self, OperatorError> {
        let u0 = w_x * x0 + w_xdot * xdot0 + bias;
        Ok(NdsState { w_x, w_xdot, bias, ds: DsState::new(1.0, beta, u0)? })
    }

    pub fn ds(&self) -> &DsState {
        &self.ds
    }

    pub fn output(&self) -> f64 {
        self.ds.output()
    }

    pub fn step(&mut self, x_new: f64, xdot_new: f64) -> Result<f64, OperatorError> {
        self.ds.step(self.w_x * x_new + self.w_xdot * xdot_new + self.bias)
    }
}
