//! Extended Preisach neural network.
//!
//! Layout: an input layer carrying `x` and (optionally) `ẋ`; a first hidden
//! layer of NDS neurons plus one linear neuron; a second hidden layer of
//! `tanh` neurons; and a linear output neuron whose weights are solved by
//! ridge least squares for any choice of the inner parameters.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::operators::{NdsState, OperatorError};
use crate::signals::{ChannelScales, TimeSeriesPair};

/// Ridge term added to the diagonal of the output-layer normal equations.
pub const RIDGE_LAMBDA: f64 = 1e-8;

/// Version of the JSON model file layout.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Inputs may exceed the training range by this fraction before a warning.
pub const EXTRAPOLATION_MARGIN: f64 = 0.2;

#[derive(Debug, Error)]
pub enum EpnnError {
    #[error("input is not normalized: max |x| = {0} exceeds 1")]
    NotNormalized(f64),
    #[error("architecture uses the rate input but the series has no xdot channel")]
    MissingRate,
    #[error("architecture needs n_stop >= 1 and n_tanh >= 1")]
    BadArchitecture,
    #[error("inner parameter vector has length {found}, architecture needs {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("least squares needs at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("normal equations are not positive definite")]
    Singular,
    #[error("output weight count {found} does not match n_tanh + 1 = {expected}")]
    OutputLength { expected: usize, found: usize },
    #[error("model format version {found} is not supported (expected {expected})")]
    Version { expected: u32, found: u32 },
    #[error("model file {path}: {message}")]
    ModelFile { path: String, message: String },
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub n_stop: usize,
    pub n_tanh: usize,
    pub rate_input: bool,
}

impl Architecture {
    pub fn new(n_stop: usize, n_tanh: usize, rate_input: bool) -> Result<Self, EpnnError> {
        let arch = Architecture { n_stop, n_tanh, rate_input };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<(), EpnnError> {
        if self.n_stop == 0 || self.n_tanh == 0 {
            return Err(EpnnError::BadArchitecture);
        }
        Ok(())
    }

    /// Length of the flat inner-parameter vector (output weights excluded):
    /// four values per NDS neuron, two for the linear neuron, the
    /// first-to-second layer matrix and the tanh biases.
    pub fn inner_len(&self) -> usize {
        4 * self.n_stop + 2 + (self.n_stop + 1) * self.n_tanh + self.n_tanh
    }

    /// Nominal parameter count for this network shape,
    /// `n_stop·n_tanh + 2·(n_stop + n_tanh + 1)`; it leaves out the β's and
    /// the first-layer biases that [`inner_len`](Self::inner_len) includes.
    pub fn nominal_count(&self) -> usize {
        self.n_stop * self.n_tanh + 2 * (self.n_stop + self.n_tanh + 1)
    }

    pub fn output_len(&self) -> usize {
        self.n_tanh + 1
    }

    /// Indices of the rate weights inside the flat inner vector.
    pub fn rate_weight_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n_stop).map(|j| 4 * j + 1).collect();
        idx.push(4 * self.n_stop + 1);
        idx
    }

    /// Indices of the `log β` entries inside the flat inner vector.
    pub fn log_beta_indices(&self) -> Vec<usize> {
        (0..self.n_stop).map(|j| 4 * j + 3).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NdsParams {
    pub w_x: f64,
    pub w_xdot: f64,
    pub bias: f64,
    /// Natural log of the deterioration parameter β.
    pub log_beta: f64,
}

impl NdsParams {
    pub fn beta(&self) -> f64 {
        self.log_beta.exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearNeuron {
    pub w_x: f64,
    pub w_xdot: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpnnParams {
    pub nds: Vec<NdsParams>,
    pub linear: LinearNeuron,
    /// Row `k` holds the weights into tanh neuron `k`: one per NDS neuron,
    /// then the linear neuron.
    pub hidden_weights: Vec<Vec<f64>>,
    pub hidden_bias: Vec<f64>,
    /// `c_1..c_m` followed by the constant term `c_0`.
    pub output: Vec<f64>,
}

impl EpnnParams {
    /// All-zero parameters with `β = 1` everywhere.
    pub fn zeros(arch: &Architecture) -> Self {
        EpnnParams {
            nds: vec![NdsParams { w_x: 0.0, w_xdot: 0.0, bias: 0.0, log_beta: 0.0 }; arch.n_stop],
            linear: LinearNeuron { w_x: 0.0, w_xdot: 0.0 },
            hidden_weights: vec![vec![0.0; arch.n_stop + 1]; arch.n_tanh],
            hidden_bias: vec![0.0; arch.n_tanh],
            output: vec![0.0; arch.output_len()],
        }
    }

    pub fn check_shape(&self, arch: &Architecture) -> Result<(), EpnnError> {
        arch.validate()?;
        let expected = arch.inner_len();
        let found = 4 * self.nds.len()
            + 2
            + self.hidden_weights.iter().map(Vec::len).sum::<usize>()
            + self.hidden_bias.len();
        if self.nds.len() != arch.n_stop
            || self.hidden_weights.len() != arch.n_tanh
            || self.hidden_weights.iter().any(|row| row.len() != arch.n_stop + 1)
            || self.hidden_bias.len() != arch.n_tanh
        {
            return Err(EpnnError::LengthMismatch { expected, found });
        }
        if self.output.len() != arch.output_len() {
            return Err(EpnnError::OutputLength { expected: arch.output_len(), found: self.output.len() });
        }
        Ok(())
    }

    /// Flat inner-parameter vector; β enters as `ln β`.
    pub fn pack(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(4 * self.nds.len() + 2 + self.hidden_bias.len() * (self.nds.len() + 2));
        for n in &self.nds {
            v.extend_from_slice(&[n.w_x, n.w_xdot, n.bias, n.log_beta]);
        }
        v.push(self.linear.w_x);
        v.push(self.linear.w_xdot);
        for row in &self.hidden_weights {
            v.extend_from_slice(row);
        }
        v.extend_from_slice(&self.hidden_bias);
        v
    }

    /// Inverse of [`pack`](Self::pack). Output weights are zeroed.
    pub fn unpack(v: &[f64], arch: &Architecture) -> Result<Self, EpnnError> {
        arch.validate()?;
        if v.len() != arch.inner_len() {
            return Err(EpnnError::LengthMismatch { expected: arch.inner_len(), found: v.len() });
        }
        let (n, m) = (arch.n_stop, arch.n_tanh);
        let nds = v[..4 * n]
            .chunks_exact(4)
            .map(|c| NdsParams { w_x: c[0], w_xdot: c[1], bias: c[2], log_beta: c[3] })
            .collect();
        let linear = LinearNeuron { w_x: v[4 * n], w_xdot: v[4 * n + 1] };
        let start = 4 * n + 2;
        let hidden_weights = v[start..start + (n + 1) * m].chunks_exact(n + 1).map(<[f64]>::to_vec).collect();
        let hidden_bias = v[start + (n + 1) * m..].to_vec();
        Ok(EpnnParams { nds, linear, hidden_weights, hidden_bias, output: vec![0.0; m + 1] })
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
}

/// Second-hidden-layer activations with a trailing column of ones, one row
/// per sample. Does not check the input range.
pub fn hidden_matrix(params: &EpnnParams, arch: &Architecture, x: &[f64], xdot: &[f64]) -> Result<DMatrix<f64>, EpnnError> {
    params.check_shape(arch)?;
    let n_samples = x.len();
    let m = arch.n_tanh;
    let rate = |w: f64| if arch.rate_input { w } else { 0.0 };
    let mut neurons = params
        .nds
        .iter()
        .map(|p| NdsState::new(p.w_x, rate(p.w_xdot), p.bias, p.beta(), x[0], xdot[0]))
        .collect::<Result<Vec<_>, _>>()?;
    let (lin_x, lin_xdot) = (params.linear.w_x, rate(params.linear.w_xdot));

    let weights: Vec<f64> = params.hidden_weights.concat();
    let width = arch.n_stop + 1;
    let mut h = DMatrix::<f64>::zeros(n_samples, m + 1);
    let cols = h.as_mut_slice();
    let mut first = vec![0.0; width];
    for i in 0..n_samples {
        for (out, neuron) in first.iter_mut().zip(neurons.iter_mut()) {
            *out = if i == 0 { neuron.output() } else { neuron.step(x[i], xdot[i])? };
        }
        first[arch.n_stop] = lin_x * x[i] + lin_xdot * xdot[i];
        for (k, (row, b)) in weights.chunks_exact(width).zip(&params.hidden_bias).enumerate() {
            let z = b + row.iter().zip(&first).map(|(w, o)| w * o).sum::<f64>();
            cols[k * n_samples + i] = z.tanh();
        }
        cols[m * n_samples + i] = 1.0;
    }
    Ok(h)
}

fn channels<'a>(arch: &Architecture, series: &'a TimeSeriesPair) -> Result<std::borrow::Cow<'a, [f64]>, EpnnError> {
    match series.xdot() {
        Some(d) => Ok(std::borrow::Cow::Borrowed(d)),
        None if arch.rate_input => Err(EpnnError::MissingRate),
        None => Ok(std::borrow::Cow::Owned(vec![0.0; series.len()])),
    }
}

/// Hidden activations for a normalized series.
pub fn hidden_for_series(params: &EpnnParams, arch: &Architecture, series: &TimeSeriesPair) -> Result<DMatrix<f64>, EpnnError> {
    let peak = max_abs(series.x());
    if peak > 1.0 + 1e-9 {
        return Err(EpnnError::NotNormalized(peak));
    }
    let xdot = channels(arch, series)?;
    hidden_matrix(params, arch, series.x(), &xdot)
}

fn apply_output(h: &DMatrix<f64>, output: &[f64]) -> Vec<f64> {
    (h * DVector::from_column_slice(output)).iter().copied().collect()
}

/// Network output on a normalized series.
pub fn forward(params: &EpnnParams, arch: &Architecture, series: &TimeSeriesPair) -> Result<Vec<f64>, EpnnError> {
    let h = hidden_for_series(params, arch, series)?;
    Ok(apply_output(&h, &params.output))
}

/// Ridge least squares `argmin ‖H·c − y‖² + λ‖c‖²` via Cholesky on the
/// normal equations, with two rounds of iterative refinement.
pub fn solve_output_weights(hidden: &DMatrix<f64>, targets: &[f64]) -> Result<Vec<f64>, EpnnError> {
    let cols = hidden.ncols();
    if hidden.nrows() < cols {
        return Err(EpnnError::TooFewSamples { needed: cols, found: hidden.nrows() });
    }
    let y = DVector::from_column_slice(targets);
    let mut gram = hidden.tr_mul(hidden);
    for d in 0..cols {
        gram[(d, d)] += RIDGE_LAMBDA;
    }
    let rhs = hidden.tr_mul(&y);
    let chol = gram.clone().cholesky().ok_or(EpnnError::Singular)?;
    let mut c = chol.solve(&rhs);
    for _ in 0..2 {
        let residual = &rhs - &gram * &c;
        c += chol.solve(&residual);
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(EpnnError::Singular);
    }
    Ok(c.iter().copied().collect())
}

/// `‖Hᵀ(H·c − y) + λ·c‖` for checking output-layer optimality.
pub fn normal_equation_residual(hidden: &DMatrix<f64>, targets: &[f64], weights: &[f64]) -> f64 {
    let y = DVector::from_column_slice(targets);
    let c = DVector::from_column_slice(weights);
    (hidden.tr_mul(&(hidden * &c - y)) + c * RIDGE_LAMBDA).norm()
}

/// Predictions in original units plus any extrapolation warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub y: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Normalizes a raw series with the training maps, runs the network and
/// maps the output back. Inputs beyond the training range by more than
/// [`EXTRAPOLATION_MARGIN`] produce a warning instead of an error.
pub fn simulate_denormalized(
    params: &EpnnParams,
    arch: &Architecture,
    raw: &TimeSeriesPair,
    scales: &ChannelScales,
) -> Result<Simulation, EpnnError> {
    let norm = scales.apply(raw);
    let peak = max_abs(norm.x());
    let mut warnings = Vec::new();
    if peak > 1.0 + EXTRAPOLATION_MARGIN {
        let (lo, hi) = scales.x.range();
        warnings.push(format!(
            "input leaves the training range [{lo}, {hi}] by {:.1}% (extrapolation)",
            (peak - 1.0) * 100.0
        ));
    }
    let xdot = channels(arch, &norm)?;
    let h = hidden_matrix(params, arch, norm.x(), &xdot)?;
    let y = apply_output(&h, &params.output).into_iter().map(|v| scales.y.unapply(v)).collect();
    Ok(Simulation { y, warnings })
}

/// Serialized trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub format_version: u32,
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    pub arch: Architecture,
    pub scales: ChannelScales,
    pub params: EpnnParams,
}

impl ModelFile {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EpnnError> {
        #[derive(Deserialize)]
        struct Probe {
            format_version: u32,
        }
        let probe: Probe = serde_json::from_str(text)
            .map_err(|e| EpnnError::ModelFile { path: "<text>".into(), message: e.to_string() })?;
        if probe.format_version != MODEL_FORMAT_VERSION {
            return Err(EpnnError::Version { expected: MODEL_FORMAT_VERSION, found: probe.format_version });
        }
        let de = &mut serde_json::Deserializer::from_str(text);
        let model: ModelFile = serde_path_to_error::deserialize(de)
            .map_err(|e| EpnnError::ModelFile { path: "<text>".into(), message: e.to_string() })?;
        model.params.check_shape(&model.arch)?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EpnnError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n")
            .map_err(|e| EpnnError::ModelFile { path: path.display().to_string(), message: e.to_string() })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EpnnError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| EpnnError::ModelFile { path: path.display().to_string(), message: e.to_string() })?;
        Self::from_json(&text).map_err(|e| match e {
            EpnnError::ModelFile { message, .. } => EpnnError::ModelFile { path: path.display().to_string(), message },
            other => other,
        })
    }
}
