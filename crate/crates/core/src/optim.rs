//! AdamW, L-BFGS with a strong-Wolfe line search, and the three-phase
//! training schedule (warm-up, AdamW, L-BFGS).

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pinnloss::{
    evaluate, evaluate_with_grad, ActiveWeights, CollocationBatch, LabeledBatch, LossBreakdown, LossInputs, Weighting,
};
use crate::tapenet::{forward_batch, init_params, NetParams};

fn check_input(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFiniteInput { index }),
        None => Ok(()),
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-4,
        }
    }
}

/// Adam moments with decoupled weight decay.
#[derive(Clone, Debug)]
pub struct AdamW {
    pub config: AdamWConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamW {
    pub fn new(n: usize, config: AdamWConfig) -> Self {
        Self {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                got: grad.len().min(params.len()),
            });
        }
        check_input(grad)?;
        check_input(params)?;
        let c = self.config;
        self.t += 1;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        let shrink = 1.0 - c.lr * c.weight_decay;
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = c.beta1 * self.m[i] + (1.0 - c.beta1) * g;
            self.v[i] = c.beta2 * self.v[i] + (1.0 - c.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] = params[i] * shrink - c.lr * m_hat / (v_hat.sqrt() + c.eps);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LbfgsConfig {
    pub memory: usize,
    pub c1: f64,
    pub c2: f64,
    pub max_trials: usize,
    /// Consecutive fallback failures after which the phase stops.
    pub max_failures: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            memory: 10,
            c1: 1e-4,
            c2: 0.9,
            max_trials: 20,
            max_failures: 2,
        }
    }
}

/// Result of one L-BFGS iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    /// Strong-Wolfe step accepted.
    Accepted,
    /// Line search failed; history cleared and a backtracking gradient step taken.
    Fallback,
    /// Neither the line search nor the fallback made progress.
    Failed,
    /// Gradient is exactly zero.
    Stationary,
}

/// Objective returning value and gradient. Non-finite values and
/// [`Error::NonFiniteGradient`] are treated as an infinite objective by the
/// line search.
pub trait Objective {
    fn eval(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
}

impl<F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>> Objective for F {
    fn eval(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self(x)
    }
}

struct Trial {
    alpha: f64,
    f: f64,
    dg: f64,
    g: Vec<f64>,
}

fn trial<O: Objective>(obj: &mut O, x: &[f64], d: &[f64], alpha: f64) -> Result<Trial> {
    let xt: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + alpha * b).collect();
    match obj.eval(&xt) {
        Ok((f, g)) if f.is_finite() && g.iter().all(|v| v.is_finite()) => {
            let dg = dot(&g, d);
            Ok(Trial { alpha, f, dg, g })
        }
        Ok(_) | Err(Error::NonFiniteGradient { .. }) => Ok(Trial {
            alpha,
            f: f64::INFINITY,
            dg: f64::NAN,
            g: Vec::new(),
        }),
        Err(e) => Err(e),
    }
}

/// Minimizer of the cubic through two points with slopes, or `None`.
fn cubic_min(a: f64, fa: f64, ga: f64, b: f64, fb: f64, gb: f64) -> Option<f64> {
    let d1 = ga + gb - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - ga * gb;
    if !(disc >= 0.0) {
        return None;
    }
    let d2 = (b - a).signum() * disc.sqrt();
    let t = b - (b - a) * (gb + d2 - d1) / (gb - ga + 2.0 * d2);
    t.is_finite().then_some(t)
}

/// Limited-memory BFGS with curvature-pair ring buffer.
#[derive(Clone, Debug)]
pub struct Lbfgs {
    pub config: LbfgsConfig,
    s: VecDeque<Vec<f64>>,
    y: VecDeque<Vec<f64>>,
    failures: usize,
}

impl Lbfgs {
    pub fn new(config: LbfgsConfig) -> Self {
        Self {
            config,
            s: VecDeque::new(),
            y: VecDeque::new(),
            failures: 0,
        }
    }

    pub fn history_len(&self) -> usize {
        self.s.len()
    }

    /// True once the fallback has failed `max_failures` times in a row.
    pub fn exhausted(&self) -> bool {
        self.failures >= self.config.max_failures
    }

    pub fn reset(&mut self) {
        self.s.clear();
        self.y.clear();
    }

    /// Two-loop recursion: `-H g`.
    pub fn direction(&self, g: &[f64]) -> Vec<f64> {
        let k = self.s.len();
        let mut q = g.to_vec();
        let mut a = vec![0.0; k];
        let rho: Vec<f64> = (0..k).map(|i| 1.0 / dot(&self.s[i], &self.y[i])).collect();
        for i in (0..k).rev() {
            a[i] = rho[i] * dot(&self.s[i], &q);
            for (qj, yj) in q.iter_mut().zip(&self.y[i]) {
                *qj -= a[i] * yj;
            }
        }
        if k > 0 {
            let gamma = dot(&self.s[k - 1], &self.y[k - 1]) / dot(&self.y[k - 1], &self.y[k - 1]);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for i in 0..k {
            let b = rho[i] * dot(&self.y[i], &q);
            for (qj, sj) in q.iter_mut().zip(&self.s[i]) {
                *qj += (a[i] - b) * sj;
            }
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }

    fn push_pair(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        if !(sy > 1e-10 * norm(&s) * norm(&y)) {
            return false;
        }
        if self.s.len() == self.config.memory {
            self.s.pop_front();
            self.y.pop_front();
        }
        self.s.push_back(s);
        self.y.push_back(y);
        true
    }

    /// Strong-Wolfe search along `d`; `None` when no acceptable point was
    /// found within the trial budget.
    fn line_search<O: Objective>(&self, obj: &mut O, x: &[f64], f0: f64, dg0: f64, d: &[f64], alpha0: f64) -> Result<Option<Trial>> {
        let (c1, c2) = (self.config.c1, self.config.c2);
        let armijo = |t: &Trial| t.f <= f0 + c1 * t.alpha * dg0;
        let curvature = |t: &Trial| t.dg.abs() <= -c2 * dg0;
        let mut evals = 0;
        let mut prev = Trial {
            alpha: 0.0,
            f: f0,
            dg: dg0,
            g: Vec::new(),
        };
        let mut alpha = alpha0;
        let (mut lo, mut hi);
        loop {
            if evals >= self.config.max_trials {
                return Ok(None);
            }
            let t = trial(obj, x, d, alpha)?;
            evals += 1;
            if !armijo(&t) || (evals > 1 && t.f >= prev.f) {
                lo = prev;
                hi = t;
                break;
            }
            if curvature(&t) {
                return Ok(Some(t));
            }
            if t.dg >= 0.0 {
                lo = t;
                hi = prev;
                break;
            }
            alpha = 2.0 * t.alpha;
            prev = t;
        }
        // zoom: lo satisfies Armijo with the lowest value seen so far
        while evals < self.config.max_trials {
            let (a, b) = (lo.alpha, hi.alpha);
            let width = (b - a).abs();
            if width <= f64::EPSILON * a.abs().max(b.abs()) {
                break;
            }
            let guess = if hi.f.is_finite() && hi.dg.is_finite() {
                cubic_min(a, lo.f, lo.dg, b, hi.f, hi.dg)
            } else {
                None
            };
            let (left, right) = (a.min(b), a.max(b));
            let margin = 0.1 * width;
            let alpha = match guess {
                Some(t) if t > left + margin && t < right - margin => t,
                _ => 0.5 * (a + b),
            };
            let t = trial(obj, x, d, alpha)?;
            evals += 1;
            if !armijo(&t) || t.f >= lo.f {
                hi = t;
            } else {
                if curvature(&t) {
                    return Ok(Some(t));
                }
                if t.dg * (hi.alpha - lo.alpha) >= 0.0 {
                    hi = lo;
                }
                lo = t;
            }
        }
        Ok(None)
    }

    /// Backtracking gradient-descent step from `x`.
    fn fallback<O: Objective>(&self, obj: &mut O, x: &[f64], f0: f64, g: &[f64]) -> Result<Option<Trial>> {
        let d: Vec<f64> = g.iter().map(|v| -v).collect();
        let gg = dot(g, g);
        let mut alpha = 1.0 / gg.sqrt();
        for _ in 0..60 {
            let t = trial(obj, x, &d, alpha)?;
            if t.f <= f0 - self.config.c1 * alpha * gg {
                return Ok(Some(t));
            }
            alpha *= 0.5;
        }
        Ok(None)
    }

    /// One iteration. `x`, `f`, `g` hold the current point and are updated
    /// in place on success.
    pub fn step<O: Objective>(&mut self, obj: &mut O, x: &mut Vec<f64>, f: &mut f64, g: &mut Vec<f64>) -> Result<StepOutcome> {
        check_input(x)?;
        check_input(g)?;
        if g.iter().all(|&v| v == 0.0) {
            return Ok(StepOutcome::Stationary);
        }
        let mut d = self.direction(g);
        let mut dg = dot(g, &d);
        if !(dg < 0.0) {
            self.reset();
            d = g.iter().map(|v| -v).collect();
            dg = -dot(g, g);
        }
        let alpha0 = if self.s.is_empty() { (1.0 / norm(g)).min(1.0) } else { 1.0 };
        let (accepted, outcome) = match self.line_search(obj, x, *f, dg, &d, alpha0)? {
            Some(t) => (Some(t), StepOutcome::Accepted),
            None => {
                self.reset();
                match self.fallback(obj, x, *f, g)? {
                    Some(t) => (Some(t), StepOutcome::Fallback),
                    None => (None, StepOutcome::Failed),
                }
            }
        };
        let Some(t) = accepted else {
            self.failures += 1;
            return Ok(StepOutcome::Failed);
        };
        let dir = if outcome == StepOutcome::Accepted {
            d
        } else {
            g.iter().map(|v| -v).collect()
        };
        let s: Vec<f64> = dir.iter().map(|v| t.alpha * v).collect();
        let y: Vec<f64> = t.g.iter().zip(g.iter()).map(|(a, b)| a - b).collect();
        for (xi, si) in x.iter_mut().zip(&s) {
            *xi += si;
        }
        *f = t.f;
        *g = t.g;
        self.push_pair(s, y);
        if outcome == StepOutcome::Accepted {
            self.failures = 0;
        } else {
            self.failures += 1;
        }
        Ok(outcome)
    }
}

/// Epoch counts and trace cadence.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Schedule {
    pub warmup_epochs: usize,
    pub adamw_epochs: usize,
    pub lbfgs_epochs: usize,
    pub batch_size: usize,
    pub record_stride: usize,
    /// AdamW settings for the warm-up phase.
    pub warmup: AdamWConfig,
    pub sigma_pde_init: SigmaPdeInit,
    pub adamw: AdamWConfig,
    pub lbfgs: LbfgsConfig,
}

impl Default for Schedule {
    fn default() -> Self {
        Self::standard()
    }
}

impl Schedule {
    pub fn standard() -> Self {
        Self {
            warmup_epochs: 50,
            adamw_epochs: 2000,
            lbfgs_epochs: 3000,
            batch_size: 500,
            record_stride: 60,
            warmup: AdamWConfig::default(),
            sigma_pde_init: SigmaPdeInit::default(),
            adamw: AdamWConfig::default(),
            lbfgs: LbfgsConfig::default(),
        }
    }

    pub fn parametric() -> Self {
        Self {
            warmup_epochs: 500,
            adamw_epochs: 20000,
            lbfgs_epochs: 160000,
            batch_size: 120,
            record_stride: 400,
            ..Self::standard()
        }
    }

    /// Mini-batch updates per AdamW epoch for `n` collocation points.
    pub fn batches_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size.max(1))
    }

    fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.record_stride == 0 {
            return Err(Error::Config("batch size and record stride must be positive".into()));
        }
        Ok(())
    }
}

/// Starting value of σ_PDE when the PDE term is switched on after warm-up.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaPdeInit {
    /// σ_PDE = 1, like the other two.
    #[default]
    One,
    /// σ_PDE² = L_PDE at the end of warm-up, the stationary point of the
    /// adaptive loss in σ_PDE.
    Balanced,
}

/// Everything a training run consumes.
#[derive(Clone, Debug)]
pub struct TrainingSet {
    pub collocation: CollocationBatch,
    pub train: LabeledBatch,
    pub bc: LabeledBatch,
    pub test: LabeledBatch,
    /// Extra labeled points used during warm-up only.
    pub warmup_extra: Option<LabeledBatch>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Warmup,
    Adamw,
    Lbfgs,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::Adamw => "adamw",
            Phase::Lbfgs => "lbfgs",
        }
    }
}

/// One trace record. σ entries are `None` for fixed weighting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub phase: Phase,
    pub l_pde: f64,
    pub l_bc: f64,
    pub l_d: f64,
    pub sigma: Option<[f64; 3]>,
    pub test_rmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    /// L-BFGS stopped early after repeated line-search failures.
    LineSearchStalled { iteration: usize },
    /// Gradient vanished exactly.
    Stationary { iteration: usize },
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub weighting: Weighting,
    pub trace: Vec<TraceRow>,
    pub final_loss: LossBreakdown,
    pub final_test_rmse: f64,
    pub params: NetParams,
    pub log_sigmas: Option<[f64; 3]>,
    pub termination: Termination,
    pub iterations: usize,
}

pub fn test_rmse(params: &NetParams, test: &LabeledBatch) -> Result<f64> {
    if test.is_empty() {
        return Ok(0.0);
    }
    let u = forward_batch(params, test.inputs.view())?;
    let sum: f64 = u.iter().zip(&test.labels).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((sum / test.len() as f64).sqrt())
}

fn warm_inputs_full(set: &TrainingSet) -> LossInputs<'_> {
    LossInputs {
        collocation: &set.collocation,
        data: &set.train,
        bc: &set.bc,
    }
}

fn active(weighting: Weighting, log_sigmas: [f64; 3]) -> ActiveWeights {
    match weighting {
        Weighting::Fixed { alpha } => ActiveWeights::Fixed { alpha },
        Weighting::LbPinn => ActiveWeights::LbPinn { log_sigmas },
    }
}

struct Recorder<'a> {
    set: &'a TrainingSet,
    stride: usize,
    trace: Vec<TraceRow>,
}

impl Recorder<'_> {
    fn record(&mut self, iter: usize, phase: Phase, params: &NetParams, weights: &ActiveWeights, force: bool) -> Result<()> {
        if !force && iter % self.stride != 0 {
            return Ok(());
        }
        if self.trace.last().is_some_and(|r| r.iter == iter) {
            return Ok(());
        }
        let inputs = LossInputs {
            collocation: &self.set.collocation,
            data: &self.set.train,
            bc: &self.set.bc,
        };
        let b = evaluate(params, &inputs, weights)?;
        self.trace.push(TraceRow {
            iter,
            phase,
            l_pde: b.l_pde,
            l_bc: b.l_bc,
            l_d: b.l_d,
            sigma: weights.sigmas().filter(|_| !matches!(weights, ActiveWeights::WarmUp)),
            test_rmse: test_rmse(params, &self.set.test)?,
        });
        Ok(())
    }
}

/// Runs warm-up, AdamW and L-BFGS. The network is initialized from `seed`;
/// mini-batch shuffles draw from a separate stream of the same seed.
pub fn run_schedule(set: &TrainingSet, layer_sizes: &[usize], schedule: &Schedule, seed: u64, weighting: Weighting) -> Result<RunRecord> {
    schedule.validate()?;
    if let Weighting::Fixed { alpha } = weighting {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidAlpha(alpha));
        }
    }
    if layer_sizes.first() != Some(&set.collocation.inputs.ncols()) {
        return Err(Error::InvalidDataset(format!(
            "network input width {:?} does not match dataset width {}",
            layer_sizes.first(),
            set.collocation.inputs.ncols()
        )));
    }
    let params = init_params(layer_sizes, seed)?;
    run_schedule_from(set, params, schedule, seed, weighting)
}

/// As [`run_schedule`] with explicit initial parameters.
pub fn run_schedule_from(set: &TrainingSet, mut params: NetParams, schedule: &Schedule, seed: u64, weighting: Weighting) -> Result<RunRecord> {
    schedule.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut rec = Recorder {
        set,
        stride: schedule.record_stride,
        trace: Vec::new(),
    };
    let n_net = params.len();
    let mut iter = 0usize;

    // warm-up: data and boundary only, σ frozen at 1
    let warm_data = match &set.warmup_extra {
        Some(extra) => set.train.concat(extra)?,
        None => set.train.clone(),
    };
    let warm_inputs = LossInputs {
        collocation: &set.collocation,
        data: &warm_data,
        bc: &set.bc,
    };
    let warm = ActiveWeights::WarmUp;
    let mut opt = AdamW::new(n_net, schedule.warmup);
    rec.record(iter, Phase::Warmup, &params, &warm, true)?;
    for _ in 0..schedule.warmup_epochs {
        let g = evaluate_with_grad(&params, &warm_inputs, &warm)?;
        opt.step(params.as_mut_slice(), &g.net)?;
        iter += 1;
        rec.record(iter, Phase::Warmup, &params, &warm, false)?;
    }

    // AdamW on the full weighted loss, collocation in mini-batches
    let mut log_sigmas = [0.0f64; 3];
    if schedule.sigma_pde_init == SigmaPdeInit::Balanced {
        let l = evaluate(&params, &warm_inputs_full(set), &ActiveWeights::WarmUp)?;
        log_sigmas[0] = 0.5 * l.l_pde.max(f64::MIN_POSITIVE).ln();
    }
    let n_sigma = if weighting.has_sigmas() { 3 } else { 0 };
    let mut theta: Vec<f64> = params.as_slice().to_vec();
    theta.extend_from_slice(&log_sigmas[..n_sigma]);
    let mut opt = AdamW::new(theta.len(), schedule.adamw);
    let mut order: Vec<usize> = (0..set.collocation.len()).collect();
    let mut grad = vec![0.0; theta.len()];
    rec.record(iter, Phase::Adamw, &params, &active(weighting, log_sigmas), true)?;
    for _ in 0..schedule.adamw_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(schedule.batch_size) {
            let batch = set.collocation.select(chunk);
            let inputs = LossInputs {
                collocation: &batch,
                data: &set.train,
                bc: &set.bc,
            };
            let g = evaluate_with_grad(&params, &inputs, &active(weighting, log_sigmas))?;
            grad[..n_net].copy_from_slice(&g.net);
            grad[n_net..].copy_from_slice(&g.log_sigma[..n_sigma]);
            opt.step(&mut theta, &grad)?;
            params.as_mut_slice().copy_from_slice(&theta[..n_net]);
            log_sigmas[..n_sigma].copy_from_slice(&theta[n_net..]);
            iter += 1;
            rec.record(iter, Phase::Adamw, &params, &active(weighting, log_sigmas), false)?;
        }
    }

    // L-BFGS, full batch, one iteration per epoch
    let full = LossInputs {
        collocation: &set.collocation,
        data: &set.train,
        bc: &set.bc,
    };
    let mut work = params.clone();
    let mut objective = |z: &[f64]| -> Result<(f64, Vec<f64>)> {
        work.as_mut_slice().copy_from_slice(&z[..n_net]);
        let mut s = [0.0; 3];
        s[..n_sigma].copy_from_slice(&z[n_net..]);
        let g = evaluate_with_grad(&work, &full, &active(weighting, s))?;
        let mut out = g.net;
        out.extend_from_slice(&g.log_sigma[..n_sigma]);
        Ok((g.breakdown.total, out))
    };
    let (mut f, mut g) = objective(&theta)?;
    let mut lbfgs = Lbfgs::new(schedule.lbfgs);
    let mut termination = Termination::Completed;
    rec.record(iter, Phase::Lbfgs, &params, &active(weighting, log_sigmas), true)?;
    for _ in 0..schedule.lbfgs_epochs {
        let outcome = lbfgs.step(&mut objective, &mut theta, &mut f, &mut g)?;
        if outcome == StepOutcome::Stationary {
            termination = Termination::Stationary { iteration: iter };
            break;
        }
        if outcome != StepOutcome::Failed {
            iter += 1;
            params.as_mut_slice().copy_from_slice(&theta[..n_net]);
            log_sigmas[..n_sigma].copy_from_slice(&theta[n_net..]);
            rec.record(iter, Phase::Lbfgs, &params, &active(weighting, log_sigmas), false)?;
        }
        if lbfgs.exhausted() {
            termination = Termination::LineSearchStalled { iteration: iter };
            break;
        }
    }
    let weights = active(weighting, log_sigmas);
    rec.record(iter, Phase::Lbfgs, &params, &weights, true)?;
    let final_loss = evaluate(&params, &full, &weights)?;
    Ok(RunRecord {
        weighting,
        trace: rec.trace,
        final_loss,
        final_test_rmse: test_rmse(&params, &set.test)?,
        params,
        log_sigmas: weighting.has_sigmas().then_some(log_sigmas),
        termination,
        iterations: iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((f, g))
    }

    #[test]
    fn lbfgs_solves_rosenbrock() {
        let mut obj = rosenbrock;
        let mut x = vec![-1.2, 1.0];
        let (mut f, mut g) = rosenbrock(&x).unwrap();
        let mut lb = Lbfgs::new(LbfgsConfig::default());
        let mut iters = 0;
        while ((x[0] - 1.0f64).powi(2) + (x[1] - 1.0f64).powi(2)).sqrt() > 1e-8 {
            assert!(iters < 100, "not converged: {x:?}");
            let before = f;
            let out = lb.step(&mut obj, &mut x, &mut f, &mut g).unwrap();
            if out == StepOutcome::Stationary {
                break;
            }
            assert!(f <= before);
            iters += 1;
        }
        assert!(iters <= 100);
    }

    #[test]
    fn lbfgs_solves_quadratic() {
        // condition number 10; unit-step L-BFGS loses finite termination, so
        // much stiffer spectra need more than 30 iterations
        let diag: Vec<f64> = (0..10).map(|i| 1.0 + i as f64).collect();
        let quad = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let g: Vec<f64> = x.iter().zip(&diag).map(|(v, d)| d * (v - 1.0)).collect();
            let f = x.iter().zip(&diag).map(|(v, d)| 0.5 * d * (v - 1.0) * (v - 1.0)).sum();
            Ok((f, g))
        };
        let mut obj = quad;
        let mut x = vec![0.0; 10];
        let (mut f, mut g) = obj(&x).unwrap();
        let mut lb = Lbfgs::new(LbfgsConfig::default());
        let mut iters = 0;
        while norm(&g) >= 1e-10 {
            assert!(iters < 30, "gradient {}", norm(&g));
            if lb.step(&mut obj, &mut x, &mut f, &mut g).unwrap() == StepOutcome::Stationary {
                break;
            }
            iters += 1;
        }
    }

    #[test]
    fn lbfgs_zero_gradient_does_nothing() {
        let mut obj = |_: &[f64]| -> Result<(f64, Vec<f64>)> { Ok((3.0, vec![0.0; 2])) };
        let mut x = vec![0.5, -0.5];
        let (mut f, mut g) = (3.0, vec![0.0, 0.0]);
        let mut lb = Lbfgs::new(LbfgsConfig::default());
        assert_eq!(lb.step(&mut obj, &mut x, &mut f, &mut g).unwrap(), StepOutcome::Stationary);
        assert_eq!(x, vec![0.5, -0.5]);
        assert_eq!(lb.history_len(), 0);
    }

    #[test]
    fn lbfgs_direction_descends() {
        let mut obj = rosenbrock;
        let mut x = vec![-1.2, 1.0];
        let (mut f, mut g) = rosenbrock(&x).unwrap();
        let mut lb = Lbfgs::new(LbfgsConfig::default());
        for _ in 0..15 {
            lb.step(&mut obj, &mut x, &mut f, &mut g).unwrap();
            if lb.history_len() > 0 && norm(&g) > 0.0 {
                assert!(dot(&g, &lb.direction(&g)) < 0.0);
            }
        }
    }

    #[test]
    fn lbfgs_survives_non_finite_region() {
        // objective blows up for x > 2; the minimizer sits at 1.5
        let mut obj = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            if x[0] > 2.0 {
                return Ok((f64::NAN, vec![f64::NAN]));
            }
            Ok(((x[0] - 1.5).powi(2), vec![2.0 * (x[0] - 1.5)]))
        };
        let mut x = vec![-30.0];
        let (mut f, mut g) = obj(&x).unwrap();
        let mut lb = Lbfgs::new(LbfgsConfig::default());
        for _ in 0..20 {
            if lb.step(&mut obj, &mut x, &mut f, &mut g).unwrap() == StepOutcome::Stationary {
                break;
            }
        }
        assert!((x[0] - 1.5).abs() < 1e-8);
    }

    #[test]
    fn adamw_scalar_quadratic() {
        let cfg = AdamWConfig {
            lr: 0.05,
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut opt = AdamW::new(1, cfg);
        let mut th = [1.0];
        for _ in 0..1000 {
            let g = [2.0 * th[0]];
            opt.step(&mut th, &g).unwrap();
        }
        assert!(th[0].abs() < 1e-4, "{}", th[0]);
    }

    #[test]
    fn adamw_zero_gradient() {
        let mut opt = AdamW::new(2, AdamWConfig {
            weight_decay: 0.0,
            ..Default::default()
        });
        let mut th = [0.3, -2.0];
        opt.step(&mut th, &[0.0, 0.0]).unwrap();
        assert_eq!(th, [0.3, -2.0]);

        let cfg = AdamWConfig {
            lr: 0.1,
            weight_decay: 0.5,
            ..Default::default()
        };
        let mut opt = AdamW::new(1, cfg);
        let mut th = [2.0];
        for k in 1..=5 {
            opt.step(&mut th, &[0.0]).unwrap();
            assert!((th[0] - 2.0 * 0.95f64.powi(k)).abs() < 1e-15);
        }
    }

    #[test]
    fn adamw_rejects_non_finite() {
        let mut opt = AdamW::new(2, AdamWConfig::default());
        let mut th = [0.0, 0.0];
        assert!(matches!(opt.step(&mut th, &[1.0, f64::NAN]), Err(Error::NonFiniteInput { index: 1 })));
    }

    #[test]
    fn batches_per_epoch_presets() {
        assert_eq!(Schedule::standard().batches_per_epoch(1000), 2);
        assert_eq!(Schedule::parametric().batches_per_epoch(1500), 13);
    }
}
