//! Synthetic hysteresis generators used as ground truth: Prandtl-Ishlinskii,
//! generalized Prandtl (deteriorating stops), discretized Preisach and a
//! rate-dependent Prandtl-Ishlinskii variant.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::{DsState, OperatorError, RelayState, StopState};
use crate::signals::TimeSeriesPair;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RefModelError {
    #[error("invalid model spec: {0}")]
    Spec(String),
    #[error("rate-dependent model needs an xdot channel")]
    MissingRate,
    #[error("virgin curve is not odd: g({x}) = {gx}, g({neg}) = {gneg}", neg = -x)]
    NotOdd { x: f64, gx: f64, gneg: f64 },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

fn spec_err(msg: impl Into<String>) -> RefModelError {
    RefModelError::Spec(msg.into())
}

/// Weighted sum of stop operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PiSpec {
    pub thresholds: Vec<f64>,
    pub weights: Vec<f64>,
}

impl PiSpec {
    pub fn validate(&self) -> Result<(), RefModelError> {
        if self.thresholds.len() != self.weights.len() {
            return Err(spec_err(format!(
                "{} thresholds but {} weights",
                self.thresholds.len(),
                self.weights.len()
            )));
        }
        if self.thresholds.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(spec_err("thresholds must be positive and finite"));
        }
        if self.thresholds.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(spec_err("thresholds must be strictly ascending"));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(spec_err("weights must be finite"));
        }
        Ok(())
    }

    /// Initial loading curve `g(x) = Σ w_j·clamp(x, ±r_j)` from a demagnetized state.
    pub fn virgin_curve(&self, x: f64) -> f64 {
        self.thresholds
            .iter()
            .zip(&self.weights)
            .map(|(&r, &w)| w * x.clamp(-r, r))
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpnnTerm {
    pub r: f64,
    pub beta: f64,
    pub w: f64,
}

/// Weighted sum of deteriorating stop operators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GpnnSpec {
    pub terms: Vec<GpnnTerm>,
}

impl GpnnSpec {
    pub fn validate(&self) -> Result<(), RefModelError> {
        for (j, t) in self.terms.iter().enumerate() {
            if !(t.r > 0.0 && t.r.is_finite()) {
                return Err(spec_err(format!("terms[{j}].r must be positive")));
            }
            if !(t.beta > 0.0) || t.beta.is_nan() {
                return Err(spec_err(format!("terms[{j}].beta must be positive")));
            }
            if !t.w.is_finite() {
                return Err(spec_err(format!("terms[{j}].w must be finite")));
            }
        }
        Ok(())
    }

    /// Five-term reference fixture with thresholds 0.2..1.0.
    pub fn fixture() -> GpnnSpec {
        let terms = [(0.2, 400.0, 1.0), (0.4, 150.0, 0.8), (0.6, 60.0, 0.6), (0.8, 1e3, 0.5), (1.0, 1e7, 0.4)]
            .into_iter()
            .map(|(r, beta, w)| GpnnTerm { r, beta, w })
            .collect();
        GpnnSpec { terms }
    }
}

/// One relay `R_{s-r, s+r}` with its integrated weight (density × cell area).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreisachCell {
    pub s: f64,
    pub r: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreisachSpec {
    pub cells: Vec<PreisachCell>,
}

/// Preisach density over the `(r, s)` half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Density {
    Uniform { height: f64 },
    Gaussian { height: f64, mean_s: f64, sigma_s: f64, mean_r: f64, sigma_r: f64 },
}

impl Density {
    pub fn eval(&self, r: f64, s: f64) -> f64 {
        match *self {
            Density::Uniform { height } => height,
            Density::Gaussian { height, mean_s, sigma_s, mean_r, sigma_r } => {
                let zs = (s - mean_s) / sigma_s;
                let zr = (r - mean_r) / sigma_r;
                height * (-0.5 * (zs * zs + zr * zr)).exp()
            }
        }
    }
}

/// Declarative Preisach grid: a density discretized on a uniform `(s, r)` grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreisachGrid {
    pub bounds: (f64, f64),
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    pub density: Density,
}

fn default_resolution() -> usize {
    64
}

impl PreisachSpec {
    pub fn validate(&self) -> Result<(), RefModelError> {
        for (i, c) in self.cells.iter().enumerate() {
            if !(c.r > 0.0 && c.r.is_finite()) {
                return Err(spec_err(format!("cells[{i}].r must be positive")));
            }
            if !(c.s.is_finite() && c.weight.is_finite()) {
                return Err(spec_err(format!("cells[{i}] must be finite")));
            }
        }
        Ok(())
    }

    /// Uniform rectangular grid over the triangle `lo ≤ s - r`, `s + r ≤ hi`.
    /// A cell is kept when its center lies inside the triangle.
    pub fn from_grid(grid: &PreisachGrid) -> Result<PreisachSpec, RefModelError> {
        let (lo, hi) = grid.bounds;
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(spec_err("grid bounds must satisfy lo < hi"));
        }
        if grid.resolution == 0 {
            return Err(spec_err("grid resolution must be positive"));
        }
        let n = grid.resolution;
        let ds = (hi - lo) / n as f64;
        let dr = 0.5 * (hi - lo) / n as f64;
        let mut cells = Vec::new();
        for k in 0..n {
            let r = (k as f64 + 0.5) * dr;
            for i in 0..n {
                let s = lo + (i as f64 + 0.5) * ds;
                if s - r >= lo && s + r <= hi {
                    cells.push(PreisachCell { s, r, weight: grid.density.eval(r, s) * ds * dr });
                }
            }
        }
        let spec = PreisachSpec { cells };
        spec.validate()?;
        Ok(spec)
    }
}

/// Prandtl-Ishlinskii model whose thresholds widen with input speed,
/// `r_j·(1 + c·|ẋ|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RdpiSpec {
    pub thresholds: Vec<f64>,
    pub weights: Vec<f64>,
    pub rate_coefficient: f64,
}

impl RdpiSpec {
    pub fn pi(&self) -> PiSpec {
        PiSpec { thresholds: self.thresholds.clone(), weights: self.weights.clone() }
    }

    pub fn validate(&self) -> Result<(), RefModelError> {
        self.pi().validate()?;
        if !(self.rate_coefficient >= 0.0 && self.rate_coefficient.is_finite()) {
            return Err(spec_err("rate_coefficient must be non-negative"));
        }
        Ok(())
    }
}

/// Any of the shipped generators, as stored in JSON spec files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ReferenceModelSpec {
    Pi(PiSpec),
    Gpnn(GpnnSpec),
    Preisach(PreisachSpec),
    PreisachGrid(PreisachGrid),
    Rdpi(RdpiSpec),
}

impl ReferenceModelSpec {
    pub fn validate(&self) -> Result<(), RefModelError> {
        match self {
            ReferenceModelSpec::Pi(s) => s.validate(),
            ReferenceModelSpec::Gpnn(s) => s.validate(),
            ReferenceModelSpec::Preisach(s) => s.validate(),
            ReferenceModelSpec::PreisachGrid(g) => PreisachSpec::from_grid(g).map(|_| ()),
            ReferenceModelSpec::Rdpi(s) => s.validate(),
        }
    }

    pub fn needs_rate(&self) -> bool {
        matches!(self, ReferenceModelSpec::Rdpi(_))
    }

    pub fn simulate(&self, series: &TimeSeriesPair) -> Result<Vec<f64>, RefModelError> {
        match self {
            ReferenceModelSpec::Pi(s) => pi_simulate(s, series),
            ReferenceModelSpec::Gpnn(s) => gpnn_simulate(s, series),
            ReferenceModelSpec::Preisach(s) => preisach_simulate(s, series),
            ReferenceModelSpec::PreisachGrid(g) => preisach_simulate(&PreisachSpec::from_grid(g)?, series),
            ReferenceModelSpec::Rdpi(s) => rdpi_simulate(s, series),
        }
    }
}

pub fn pi_simulate(spec: &PiSpec, series: &TimeSeriesPair) -> Result<Vec<f64>, RefModelError> {
    spec.validate()?;
    let x = series.x();
    let mut stops = spec
        .thresholds
        .iter()
        .map(|&r| StopState::new(r, x[0]))
        .collect::<Result<Vec<_>, _>>()?;
    let weighted = |stops: &[StopState]| -> f64 {
        stops.iter().zip(&spec.weights).map(|(s, w)| w * s.output()).sum()
    };
    let mut out = Vec::with_capacity(x.len());
    out.push(weighted(&stops));
    for &xi in &x[1..] {
        for s in stops.iter_mut() {
            s.step(xi)?;
        }
        out.push(weighted(&stops));
    }
    Ok(out)
}

pub fn gpnn_simulate(spec: &GpnnSpec, series: &TimeSeriesPair) -> Result<Vec<f64>, RefModelError> {
    spec.validate()?;
    let x = series.x();
    let mut ops = spec
        .terms
        .iter()
        .map(|t| DsState::new(t.r, t.beta, x[0]))
        .collect::<Result<Vec<_>, _>>()?;
    let weighted =
        |ops: &[DsState]| -> f64 { ops.iter().zip(&spec.terms).map(|(o, t)| t.w * o.output()).sum() };
    let mut out = Vec::with_capacity(x.len());
    out.push(weighted(&ops));
    for &xi in &x[1..] {
        for o in ops.iter_mut() {
            o.step(xi)?;
        }
        out.push(weighted(&ops));
    }
    Ok(out)
}

pub fn preisach_simulate(spec: &PreisachSpec, series: &TimeSeriesPair) -> Result<Vec<f64>, RefModelError> {
    spec.validate()?;
    let x = series.x();
    let mut relays = spec
        .cells
        .iter()
        .map(|c| RelayState::new(c.s, c.r, x[0]))
        .collect::<Result<Vec<_>, _>>()?;
    let weighted = |relays: &[RelayState]| -> f64 {
        relays.iter().zip(&spec.cells).map(|(rl, c)| c.weight * rl.sign()).sum()
    };
    let mut out = Vec::with_capacity(x.len());
    out.push(weighted(&relays));
    for &xi in &x[1..] {
        for rl in relays.iter_mut() {
            rl.step(xi)?;
        }
        out.push(weighted(&relays));
    }
    Ok(out)
}

/// Per-sample stop update with threshold `r_j·(1 + c·|ẋ(t)|)`; the clamp
/// uses the threshold of the current sample.
pub fn rdpi_simulate(spec: &RdpiSpec, series: &TimeSeriesPair) -> Result<Vec<f64>, RefModelError> {
    spec.validate()?;
    let xdot = series.xdot().ok_or(RefModelError::MissingRate)?;
    let x = series.x();
    if let Some(v) = x.iter().chain(xdot).find(|v| !v.is_finite()) {
        return Err(OperatorError::NonFinite(*v).into());
    }
    let c = spec.rate_coefficient;
    let widen = |i: usize| 1.0 + c * xdot[i].abs();
    let mut stops = spec
        .thresholds
        .iter()
        .map(|&r| StopState::new(r * widen(0), x[0]))
        .collect::<Result<Vec<_>, _>>()?;
    let weighted = |stops: &[StopState]| -> f64 {
        stops.iter().zip(&spec.weights).map(|(s, w)| w * s.output()).sum()
    };
    let mut out = Vec::with_capacity(x.len());
    out.push(weighted(&stops));
    for i in 1..x.len() {
        let k = widen(i);
        for (s, &r) in stops.iter_mut().zip(&spec.thresholds) {
            s.step_with_threshold(x[i], r * k);
        }
        out.push(weighted(&stops));
    }
    Ok(out)
}

/// Unloading/reloading branch `y* + 2·g((x - x*)/2)` through the reversal
/// point `(x*, y*)`. Oddness of `g` is checked at the points it is used.
pub fn masing_branch<G: Fn(f64) -> f64>(virgin: G, reversal: (f64, f64), x: f64) -> Result<f64, RefModelError> {
    let (xs, ys) = reversal;
    let arg = 0.5 * (x - xs);
    for v in [arg, xs, x, 0.5 * xs] {
        let (gx, gneg) = (virgin(v), virgin(-v));
        if (gx + gneg).abs() > 1e-12 * (1.0 + gx.abs()) {
            return Err(RefModelError::NotOdd { x: v, gx, gneg });
        }
    }
    Ok(ys + 2.0 * virgin(arg))
}
