//! Objective evaluation and the two-phase trainer: a real-coded genetic
//! algorithm followed by a subgradient method with space dilation.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::epnn::{hidden_for_series, solve_output_weights, Architecture, EpnnError, EpnnParams};
use crate::signals::{ChannelScales, TimeSeriesPair};

#[derive(Debug, Error)]
pub enum TrainingError {
    #[error("series has no target channel y")]
    MissingTargets,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("infeasible bounds at coordinate {index}: [{lo}, {hi}]")]
    Bounds { index: usize, lo: f64, hi: f64 },
    #[error("objective is not finite at the starting point")]
    NonFiniteStart,
    #[error("objective is not finite on either side of coordinate {0}")]
    FdFailed(usize),
    #[error(transparent)]
    Epnn(#[from] EpnnError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Mutation standard deviation as a fraction of each coordinate's bound width.
    pub mutation_sigma: f64,
    pub elitism: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig { population: 50, generations: 1000, crossover_rate: 0.9, mutation_sigma: 0.1, elitism: 2, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdConfig {
    pub max_iterations: usize,
    pub dilation: f64,
    pub initial_step: f64,
    pub step_decay: f64,
    /// Step multiplier applied when a line search needed more than three steps.
    pub step_growth: f64,
    pub max_line_steps: usize,
    pub fd_step: f64,
    /// Relative best-value improvement below which a window counts as stalled.
    pub stall_tolerance: f64,
    pub stall_window: usize,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            max_iterations: 1000,
            dilation: 2.0,
            initial_step: 0.1,
            step_decay: 0.7,
            step_growth: 1.5,
            max_line_steps: 20,
            fd_step: 1e-6,
            stall_tolerance: 1e-12,
            stall_window: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SwitchRule {
    pub window: usize,
    pub min_relative_improvement: f64,
}

impl Default for SwitchRule {
    fn default() -> Self {
        SwitchRule { window: 50, min_relative_improvement: 0.01 }
    }
}

/// Search box for the GA and the map between search and network coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub weight: f64,
    pub log_beta_min: f64,
    pub log_beta_max: f64,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        BoundsConfig { weight: 5.0, log_beta_min: 0.1_f64.ln(), log_beta_max: 1e8_f64.ln() }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub ga: GaConfig,
    pub sgd: SgdConfig,
    pub switch: SwitchRule,
    pub bounds: BoundsConfig,
}

impl TrainingConfig {
    pub fn from_json(text: &str) -> Result<Self, TrainingError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: TrainingConfig =
            serde_path_to_error::deserialize(de).map_err(|e| TrainingError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), TrainingError> {
        let bad = |msg: &str| Err(TrainingError::Config(msg.to_string()));
        if self.ga.population < 4 {
            return bad("ga.population must be at least 4");
        }
        if !(0.0..=1.0).contains(&self.ga.crossover_rate) {
            return bad("ga.crossover_rate must lie in [0, 1]");
        }
        if !(self.ga.mutation_sigma >= 0.0) {
            return bad("ga.mutation_sigma must be non-negative");
        }
        if self.ga.elitism >= self.ga.population {
            return bad("ga.elitism must be smaller than ga.population");
        }
        if !(self.sgd.dilation > 1.0) {
            return bad("sgd.dilation must exceed 1");
        }
        if !(self.sgd.initial_step > 0.0) {
            return bad("sgd.initial_step must be positive");
        }
        if !(self.sgd.step_decay > 0.0 && self.sgd.step_decay < 1.0) {
            return bad("sgd.step_decay must lie in (0, 1)");
        }
        if !(self.sgd.step_growth >= 1.0) {
            return bad("sgd.step_growth must be at least 1");
        }
        if self.sgd.max_line_steps == 0 {
            return bad("sgd.max_line_steps must be positive");
        }
        if !(self.sgd.fd_step > 0.0) {
            return bad("sgd.fd_step must be positive");
        }
        if !(self.sgd.stall_tolerance >= 0.0) {
            return bad("sgd.stall_tolerance must be non-negative");
        }
        if !(self.switch.min_relative_improvement >= 0.0) {
            return bad("switch.min_relative_improvement must be non-negative");
        }
        if !(self.bounds.weight > 0.0) || !(self.bounds.log_beta_min < self.bounds.log_beta_max) {
            return bad("bounds must be non-empty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "GA")]
    Ga,
    #[serde(rename = "SGD")]
    Sgd,
}

impl Phase {
    pub fn tag(&self) -> &'static str {
        match self {
            Phase::Ga => "GA",
            Phase::Sgd => "SGD",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub epoch: usize,
    pub phase: Phase,
    pub best_mse: f64,
    pub wall_clock: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingTrace {
    pub entries: Vec<TraceEntry>,
    /// How the subgradient phase ended, if it ran.
    pub sgd_status: Option<SgdStatus>,
}

impl TrainingTrace {
    fn extend(&mut self, phase: Phase, values: &[f64], start: Instant) {
        let elapsed = start.elapsed().as_secs_f64();
        for &v in values {
            let epoch = self.entries.len() + 1;
            self.entries.push(TraceEntry { epoch, phase, best_mse: v, wall_clock: elapsed });
        }
    }

    pub fn epochs_in(&self, phase: Phase) -> usize {
        self.entries.iter().filter(|e| e.phase == phase).count()
    }

    pub fn final_mse(&self) -> Option<f64> {
        self.entries.last().map(|e| e.best_mse)
    }
}

fn targets(series: &TimeSeriesPair) -> Result<&[f64], TrainingError> {
    series.y().ok_or(TrainingError::MissingTargets)
}

fn mean_squared(pred: &[f64], y: &[f64]) -> f64 {
    pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64
}

/// Solves the output layer on `series` and returns the completed parameters
/// with their training MSE.
pub fn fit_output_layer(
    params: &EpnnParams,
    arch: &Architecture,
    series: &TimeSeriesPair,
) -> Result<(EpnnParams, f64), TrainingError> {
    let y = targets(series)?;
    let h = hidden_for_series(params, arch, series)?;
    let c = solve_output_weights(&h, y)?;
    let pred: Vec<f64> = (&h * DVector::from_column_slice(&c)).iter().copied().collect();
    let mut out = params.clone();
    out.output = c;
    Ok((out, mean_squared(&pred, y)))
}

/// Training objective: MSE after least-squares output weights.
pub fn mse(params: &EpnnParams, arch: &Architecture, series: &TimeSeriesPair) -> Result<f64, TrainingError> {
    fit_output_layer(params, arch, series).map(|(_, e)| e)
}

/// MSE with the output weights stored in `params`.
pub fn mse_fixed_output(params: &EpnnParams, arch: &Architecture, series: &TimeSeriesPair) -> Result<f64, TrainingError> {
    let y = targets(series)?;
    let pred = crate::epnn::forward(params, arch, series)?;
    Ok(mean_squared(&pred, y))
}

/// Central-difference subgradient with per-coordinate step
/// `max(step, step·|θᵢ|)`. A coordinate whose probe is non-finite falls back
/// to a one-sided difference.
pub fn fd_subgradient<F>(objective: &F, point: &[f64], step: f64) -> Result<Vec<f64>, TrainingError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let f0 = objective(point);
    if !f0.is_finite() {
        return Err(TrainingError::NonFiniteStart);
    }
    (0..point.len())
        .into_par_iter()
        .map(|i| {
            let h = step.max(step * point[i].abs());
            let mut probe = point.to_vec();
            probe[i] = point[i] + h;
            let fp = objective(&probe);
            probe[i] = point[i] - h;
            let fm = objective(&probe);
            match (fp.is_finite(), fm.is_finite()) {
                (true, true) => Ok((fp - fm) / (2.0 * h)),
                (true, false) => Ok((fp - f0) / h),
                (false, true) => Ok((f0 - fm) / h),
                (false, false) => Err(TrainingError::FdFailed(i)),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaOutcome {
    pub best: Vec<f64>,
    pub best_value: f64,
    /// Best-ever objective after each generation.
    pub trace: Vec<f64>,
}

fn check_bounds(bounds: &[(f64, f64)]) -> Result<(), TrainingError> {
    for (index, &(lo, hi)) in bounds.iter().enumerate() {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(TrainingError::Bounds { index, lo, hi });
        }
    }
    Ok(())
}

fn sanitize(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

fn tournament<'a>(rng: &mut ChaCha8Rng, pop: &'a [(Vec<f64>, f64)]) -> &'a [f64] {
    let mut best = rng.gen_range(0..pop.len());
    for _ in 1..3 {
        let c = rng.gen_range(0..pop.len());
        if pop[c].1 < pop[best].1 {
            best = c;
        }
    }
    &pop[best].0
}

pub fn ga_optimize<F>(objective: &F, bounds: &[(f64, f64)], config: &GaConfig) -> Result<GaOutcome, TrainingError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    ga_optimize_until(objective, bounds, config, |_| false)
}

/// Genetic algorithm that also stops once `stop(history)` returns true;
/// `history` holds the best-ever value after each generation so far.
pub fn ga_optimize_until<F, S>(
    objective: &F,
    bounds: &[(f64, f64)],
    config: &GaConfig,
    mut stop: S,
) -> Result<GaOutcome, TrainingError>
where
    F: Fn(&[f64]) -> f64 + Sync,
    S: FnMut(&[f64]) -> bool,
{
    check_bounds(bounds)?;
    if config.population < 2 {
        return Err(TrainingError::Config("ga.population must be at least 2".into()));
    }
    if config.elitism >= config.population {
        return Err(TrainingError::Config("ga.elitism must be smaller than ga.population".into()));
    }
    let dim = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let evaluate = |batch: Vec<Vec<f64>>| -> Vec<(Vec<f64>, f64)> {
        batch
            .into_par_iter()
            .map(|v| {
                let f = sanitize(objective(&v));
                (v, f)
            })
            .collect()
    };

    let initial: Vec<Vec<f64>> = (0..config.population)
        .map(|_| bounds.iter().map(|&(lo, hi)| if hi > lo { rng.gen_range(lo..=hi) } else { lo }).collect())
        .collect();
    let mut pop = evaluate(initial);
    let mut trace = Vec::with_capacity(config.generations);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let record = |pop: &[(Vec<f64>, f64)], trace: &mut Vec<f64>, best: &mut Option<(Vec<f64>, f64)>| {
        let cand = pop.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("non-empty population");
        if best.as_ref().map_or(true, |b| cand.1 < b.1) {
            *best = Some(cand.clone());
        }
        trace.push(best.as_ref().map(|b| b.1).unwrap());
    };
    record(&pop, &mut trace, &mut best);

    let mutation_p = 1.0 / dim.max(1) as f64;
    while trace.len() < config.generations && !stop(&trace) && best.as_ref().unwrap().1 > 0.0 {
        pop.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut children = Vec::with_capacity(config.population - config.elitism);
        while children.len() < config.population - config.elitism {
            let a = tournament(&mut rng, &pop);
            let mut child: Vec<f64> = if rng.gen::<f64>() < config.crossover_rate {
                let b = tournament(&mut rng, &pop);
                a.iter()
                    .zip(b)
                    .map(|(&u, &v)| {
                        let (lo, hi) = (u.min(v), u.max(v));
                        let d = 0.5 * (hi - lo);
                        if d > 0.0 {
                            rng.gen_range(lo - d..=hi + d)
                        } else {
                            lo
                        }
                    })
                    .collect()
            } else {
                a.to_vec()
            };
            for (gene, &(lo, hi)) in child.iter_mut().zip(bounds) {
                if rng.gen::<f64>() < mutation_p {
                    *gene += config.mutation_sigma * (hi - lo) * unit.sample(&mut rng);
                }
                *gene = gene.clamp(lo, hi);
            }
            children.push(child);
        }
        let mut next: Vec<(Vec<f64>, f64)> = pop[..config.elitism].to_vec();
        next.extend(evaluate(children));
        pop = next;
        record(&pop, &mut trace, &mut best);
    }
    let (best, best_value) = best.unwrap();
    Ok(GaOutcome { best, best_value, trace })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SgdStatus {
    MaxIterations,
    SmallGradient,
    Stalled,
    NonFiniteStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdOutcome {
    pub best: Vec<f64>,
    pub best_value: f64,
    /// Best-ever objective after each iteration.
    pub trace: Vec<f64>,
    pub status: SgdStatus,
}

/// Shor's r-algorithm with finite-difference subgradients and an adaptive
/// forward line search. Returns the best point seen.
pub fn subgradient_optimize<F>(objective: &F, x0: &[f64], config: &SgdConfig) -> Result<SgdOutcome, TrainingError>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = objective(x0);
    if !fx.is_finite() {
        return Err(TrainingError::NonFiniteStart);
    }
    let mut best = (x0.to_vec(), fx);
    let mut trace = Vec::new();
    let mut b = DMatrix::<f64>::identity(n, n);
    let mut g = DVector::from_vec(fd_subgradient(objective, x0, config.fd_step)?);
    let mut h = config.initial_step;
    let shrink = 1.0 / config.dilation - 1.0;
    let mut status = SgdStatus::MaxIterations;

    for _ in 0..config.max_iterations {
        let gt = b.tr_mul(&g);
        let norm = gt.norm();
        if !(norm > 1e-12) {
            status = SgdStatus::SmallGradient;
            break;
        }
        let dir = &b * (gt / norm);
        let f_start = fx;

        let mut retries = 0;
        let (xn, fnew) = loop {
            let xn = &x - &dir * h;
            let fnew = objective(xn.as_slice());
            if fnew.is_finite() {
                break (xn, fnew);
            }
            h *= 0.5;
            retries += 1;
            if retries > 20 {
                status = SgdStatus::NonFiniteStep;
                break (x.clone(), f64::NAN);
            }
        };
        if status == SgdStatus::NonFiniteStep {
            break;
        }
        x = xn;
        fx = fnew;
        if fx < best.1 {
            best = (x.as_slice().to_vec(), fx);
        }
        let mut steps = 1;
        while steps < config.max_line_steps {
            let xn = &x - &dir * h;
            let fnew = objective(xn.as_slice());
            if !(fnew < fx) {
                break;
            }
            x = xn;
            fx = fnew;
            steps += 1;
            if fx < best.1 {
                best = (x.as_slice().to_vec(), fx);
            }
        }
        if steps == 1 && !(fx < f_start) {
            h *= config.step_decay;
        } else if steps > 3 {
            h *= config.step_growth;
        }

        let g_new = DVector::from_vec(fd_subgradient(objective, x.as_slice(), config.fd_step)?);
        let diff = b.tr_mul(&(&g_new - &g));
        let dn = diff.norm();
        if dn > 1e-14 * (g_new.norm() + g.norm()) {
            let eta = diff / dn;
            let b_eta = &b * &eta;
            b.ger(shrink, &b_eta, &eta, 1.0);
        }
        g = g_new;
        trace.push(best.1);

        let w = config.stall_window;
        if w > 0 && trace.len() > w {
            let old = trace[trace.len() - 1 - w];
            if old - best.1 <= config.stall_tolerance * old.abs() {
                status = SgdStatus::Stalled;
                break;
            }
        }
    }
    Ok(SgdOutcome { best: best.0, best_value: best.1, trace, status })
}

/// EPNN training objective over search coordinates `z`. Rate weights are
/// searched as `w_xdot·max|ẋ|` so that one bound fits every coordinate, and
/// `log β` is clamped into the configured box.
pub struct EpnnObjective<'a> {
    arch: Architecture,
    series: &'a TimeSeriesPair,
    scale: Vec<f64>,
    log_beta: Vec<usize>,
    beta_range: (f64, f64),
}

impl<'a> EpnnObjective<'a> {
    pub fn new(arch: Architecture, series: &'a TimeSeriesPair, bounds: &BoundsConfig) -> Result<Self, TrainingError> {
        arch.validate()?;
        targets(series)?;
        let mut scale = vec![1.0; arch.inner_len()];
        if arch.rate_input {
            let rate = series.xdot().ok_or(EpnnError::MissingRate)?;
            let peak = rate.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
            if peak > 0.0 {
                for i in arch.rate_weight_indices() {
                    scale[i] = 1.0 / peak;
                }
            }
        }
        Ok(EpnnObjective {
            arch,
            series,
            scale,
            log_beta: arch.log_beta_indices(),
            beta_range: (bounds.log_beta_min, bounds.log_beta_max),
        })
    }

    /// Box for the genetic algorithm in search coordinates.
    pub fn search_bounds(&self, bounds: &BoundsConfig) -> Vec<(f64, f64)> {
        let mut b = vec![(-bounds.weight, bounds.weight); self.arch.inner_len()];
        for &i in &self.log_beta {
            b[i] = (bounds.log_beta_min, bounds.log_beta_max);
        }
        b
    }

    /// Network parameters (output weights zero) for search point `z`.
    pub fn params(&self, z: &[f64]) -> Result<EpnnParams, TrainingError> {
        let mut theta: Vec<f64> = z.iter().zip(&self.scale).map(|(a, s)| a * s).collect();
        for &i in &self.log_beta {
            theta[i] = theta[i].clamp(self.beta_range.0, self.beta_range.1);
        }
        Ok(EpnnParams::unpack(&theta, &self.arch)?)
    }

    /// Search point for given parameters (inverse of [`params`](Self::params)).
    pub fn search_point(&self, params: &EpnnParams) -> Vec<f64> {
        params.pack().iter().zip(&self.scale).map(|(a, s)| a / s).collect()
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        self.params(z).and_then(|p| mse(&p, &self.arch, self.series)).unwrap_or(f64::INFINITY)
    }

    pub fn fit(&self, z: &[f64]) -> Result<(EpnnParams, f64), TrainingError> {
        fit_output_layer(&self.params(z)?, &self.arch, self.series)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Hybrid,
    GaOnly,
    SgdOnly,
}

/// Total epoch budget: GA generations plus subgradient iterations.
pub fn epoch_budget(config: &TrainingConfig) -> usize {
    config.ga.generations + config.sgd.max_iterations
}

/// GA until the windowed relative improvement falls below the switch
/// threshold, then the subgradient method from the GA best with the
/// remaining epochs.
pub fn hybrid_train(
    arch: &Architecture,
    train: &TimeSeriesPair,
    config: &TrainingConfig,
) -> Result<(EpnnParams, TrainingTrace), TrainingError> {
    train_with(arch, train, config, Strategy::Hybrid)
}

/// Runs one of the training strategies under the same epoch budget.
pub fn train_with(
    arch: &Architecture,
    train: &TimeSeriesPair,
    config: &TrainingConfig,
    strategy: Strategy,
) -> Result<(EpnnParams, TrainingTrace), TrainingError> {
    config.validate()?;
    let start = Instant::now();
    let objective = EpnnObjective::new(*arch, train, &config.bounds)?;
    let f = |z: &[f64]| objective.value(z);
    let bounds = objective.search_bounds(&config.bounds);
    let budget = epoch_budget(config);
    let mut trace = TrainingTrace::default();

    let best_z = match strategy {
        Strategy::GaOnly => {
            let ga = ga_optimize(&f, &bounds, &GaConfig { generations: budget, ..config.ga.clone() })?;
            trace.extend(Phase::Ga, &ga.trace, start);
            ga.best
        }
        Strategy::SgdOnly => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.ga.seed);
            let z0: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.gen_range(lo..=hi)).collect();
            let sgd = subgradient_optimize(&f, &z0, &SgdConfig { max_iterations: budget, ..config.sgd.clone() })?;
            trace.extend(Phase::Sgd, &sgd.trace, start);
            trace.sgd_status = Some(sgd.status);
            sgd.best
        }
        Strategy::Hybrid => {
            let rule = &config.switch;
            let ga = ga_optimize_until(&f, &bounds, &config.ga, |hist| {
                let g = hist.len();
                g > rule.window && {
                    let old = hist[g - 1 - rule.window];
                    let new = hist[g - 1];
                    old.is_finite() && (old - new) < rule.min_relative_improvement * old
                }
            })?;
            trace.extend(Phase::Ga, &ga.trace, start);
            let remaining = budget - ga.trace.len();
            if ga.best_value > 0.0 && remaining > 0 {
                let sgd = subgradient_optimize(&f, &ga.best, &SgdConfig { max_iterations: remaining, ..config.sgd.clone() })?;
                trace.extend(Phase::Sgd, &sgd.trace, start);
                trace.sgd_status = Some(sgd.status);
                sgd.best
            } else {
                ga.best
            }
        }
    };
    let (params, _) = objective.fit(&best_z)?;
    Ok((params, trace))
}

/// Error metrics in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mse: f64,
    pub max_relative_error: f64,
    /// Signed per-sample error `ŷ − y`.
    pub errors: Vec<f64>,
    /// Per-sample `|ŷ − y| / max|y|`.
    pub relative_errors: Vec<f64>,
}

/// Metrics for predictions against targets.
pub fn metrics(pred: &[f64], y: &[f64]) -> Metrics {
    let peak = y.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let errors: Vec<f64> = pred.iter().zip(y).map(|(p, t)| p - t).collect();
    let relative_errors: Vec<f64> = errors
        .iter()
        .map(|e| if e.abs() == 0.0 { 0.0 } else { e.abs() / peak })
        .collect();
    Metrics {
        mse: errors.iter().map(|e| e * e).sum::<f64>() / errors.len().max(1) as f64,
        max_relative_error: relative_errors.iter().fold(0.0, |a: f64, &b| a.max(b)),
        errors,
        relative_errors,
    }
}

/// Runs the model on a raw series and scores samples from `from` onwards;
/// earlier samples only warm up the operator memory.
pub fn evaluate_from(
    params: &EpnnParams,
    arch: &Architecture,
    series: &TimeSeriesPair,
    scales: &ChannelScales,
    from: usize,
) -> Result<Metrics, TrainingError> {
    let y = targets(series)?;
    let sim = crate::epnn::simulate_denormalized(params, arch, series, scales)?;
    Ok(metrics(&sim.y[from..], &y[from..]))
}

pub fn evaluate(
    params: &EpnnParams,
    arch: &Architecture,
    series: &TimeSeriesPair,
    scales: &ChannelScales,
) -> Result<Metrics, TrainingError> {
    evaluate_from(params, arch, series, scales, 0)
}

/// Normalized-unit MSE on `test`, with `train` run first so that operator
/// memory carries over into the test segment.
pub fn heldout_mse(
    params: &EpnnParams,
    arch: &Architecture,
    train: &TimeSeriesPair,
    test: &TimeSeriesPair,
) -> Result<f64, TrainingError> {
    let joined = train.concat(test).map_err(|e| TrainingError::Config(e.to_string()))?;
    let y = targets(&joined)?;
    let pred = crate::epnn::forward(params, arch, &joined)?;
    let k = train.len();
    Ok(mean_squared(&pred[k..], &y[k..]))
}
