//! Loss assembly: PDE residual, data and boundary mismatch, the two
//! weighting schemes, and the clean/cross/bias split of the data loss.

use ndarray::{s, Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mms::{Manufactured, Viscosity};
use crate::tapenet::{forward_batch, JetTape, NetParams, OutputSeeds};

/// Collocation points with their viscosity and precomputed forcing.
#[derive(Clone, Debug, PartialEq)]
pub struct CollocationBatch {
    pub inputs: Array2<f64>,
    pub nu: Vec<f64>,
    pub source: Vec<f64>,
}

impl CollocationBatch {
    /// `inputs` rows are network inputs whose column 0 is `x`.
    pub fn new(inputs: Array2<f64>, nu: Vec<f64>, problem: &Manufactured) -> Result<Self> {
        if nu.len() != inputs.nrows() {
            return Err(Error::DimensionMismatch {
                expected: inputs.nrows(),
                got: nu.len(),
            });
        }
        let mut source = Vec::with_capacity(nu.len());
        for (row, &v) in inputs.outer_iter().zip(&nu) {
            source.push(problem.source(row[0], Viscosity::new(v)?));
        }
        Ok(Self { inputs, nu, source })
    }

    pub fn len(&self) -> usize {
        self.nu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nu.is_empty()
    }

    /// Rows picked by `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut inputs = Array2::zeros((indices.len(), self.inputs.ncols()));
        for (mut row, &i) in inputs.outer_iter_mut().zip(indices) {
            row.assign(&self.inputs.row(i));
        }
        Self {
            inputs,
            nu: indices.iter().map(|&i| self.nu[i]).collect(),
            source: indices.iter().map(|&i| self.source[i]).collect(),
        }
    }
}

/// Points with a target value (training data, test data or boundary values).
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledBatch {
    pub inputs: Array2<f64>,
    pub labels: Vec<f64>,
}

impl LabeledBatch {
    pub fn new(inputs: Array2<f64>, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != inputs.nrows() {
            return Err(Error::DimensionMismatch {
                expected: inputs.nrows(),
                got: labels.len(),
            });
        }
        Ok(Self { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Concatenation of two batches with the same input width.
    pub fn concat(&self, other: &LabeledBatch) -> Result<LabeledBatch> {
        if self.inputs.ncols() != other.inputs.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.inputs.ncols(),
                got: other.inputs.ncols(),
            });
        }
        let inputs = ndarray::concatenate(ndarray::Axis(0), &[self.inputs.view(), other.inputs.view()])
            .expect("matching widths");
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(LabeledBatch { inputs, labels })
    }
}

fn require_non_empty(n: usize, what: &str) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidDataset(format!("{what} set is empty")));
    }
    Ok(())
}

fn residuals(tape: &JetTape, batch: &CollocationBatch) -> Array1<f64> {
    let mut r = Array1::zeros(batch.len());
    for i in 0..batch.len() {
        let j = tape.jet(i);
        r[i] = j.u * j.u_x - batch.nu[i] * j.u_xx - batch.source[i];
    }
    r
}

fn mean_sq(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.map(|v| v * v).sum::<f64>() / n as f64
}

/// Mean squared steady residual over the collocation points.
pub fn loss_pde(params: &NetParams, batch: &CollocationBatch) -> Result<f64> {
    require_non_empty(batch.len(), "collocation")?;
    let tape = JetTape::record(params, batch.inputs.view())?;
    let r = residuals(&tape, batch);
    Ok(mean_sq(r.iter().copied(), batch.len()))
}

/// Mean squared mismatch `label − u_θ`.
pub fn loss_data(params: &NetParams, batch: &LabeledBatch) -> Result<f64> {
    require_non_empty(batch.len(), "labeled")?;
    let u = forward_batch(params, batch.inputs.view())?;
    Ok(mean_sq(batch.labels.iter().zip(&u).map(|(y, u)| y - u), batch.len()))
}

/// Same functional form as [`loss_data`]; boundary labels are exact.
pub fn loss_bc(params: &NetParams, batch: &LabeledBatch) -> Result<f64> {
    require_non_empty(batch.len(), "boundary")?;
    loss_data(params, batch)
}

pub fn total_fixed(alpha: f64, l_pde: f64, l_bc: f64, l_d: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(alpha * l_pde + (1.0 - alpha) * (l_d + l_bc))
}

/// `Σ l_i / (2σ_i²) + Σ log σ_i` with `σ_i = exp(log_sigmas[i])`, ordered
/// (PDE, BC, data).
pub fn total_lbpinn(log_sigmas: [f64; 3], l_pde: f64, l_bc: f64, l_d: f64) -> f64 {
    let l = [l_pde, l_bc, l_d];
    (0..3)
        .map(|i| 0.5 * (-2.0 * log_sigmas[i]).exp() * l[i] + log_sigmas[i])
        .sum()
}

/// How the three loss terms are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Weighting {
    Fixed { alpha: f64 },
    #[default]
    #[serde(rename = "lbpinn")]
    LbPinn,
}

impl Weighting {
    pub fn label(&self) -> String {
        match self {
            Weighting::Fixed { alpha } => format!("alpha{alpha}"),
            Weighting::LbPinn => "lbpinn".to_string(),
        }
    }

    pub fn has_sigmas(&self) -> bool {
        matches!(self, Weighting::LbPinn)
    }
}

/// Weighting in effect for a single evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ActiveWeights {
    Fixed { alpha: f64 },
    LbPinn { log_sigmas: [f64; 3] },
    /// PDE weight forced to zero, σ_BC = σ_D = 1, σ not trainable.
    WarmUp,
}

impl ActiveWeights {
    /// Multipliers on (l_pde, l_bc, l_d).
    pub fn term_weights(&self) -> [f64; 3] {
        match *self {
            ActiveWeights::Fixed { alpha } => [alpha, 1.0 - alpha, 1.0 - alpha],
            ActiveWeights::LbPinn { log_sigmas } => log_sigmas.map(|s| 0.5 * (-2.0 * s).exp()),
            ActiveWeights::WarmUp => [0.0, 0.5, 0.5],
        }
    }

    fn total(&self, l: [f64; 3]) -> Result<f64> {
        match *self {
            ActiveWeights::Fixed { alpha } => total_fixed(alpha, l[0], l[1], l[2]),
            ActiveWeights::LbPinn { log_sigmas } => Ok(total_lbpinn(log_sigmas, l[0], l[1], l[2])),
            ActiveWeights::WarmUp => Ok(0.5 * (l[1] + l[2])),
        }
    }

    pub fn sigmas(&self) -> Option<[f64; 3]> {
        match *self {
            ActiveWeights::LbPinn { log_sigmas } => Some(log_sigmas.map(f64::exp)),
            ActiveWeights::WarmUp => Some([f64::INFINITY, 1.0, 1.0]),
            ActiveWeights::Fixed { .. } => None,
        }
    }
}

/// Loss terms, their weighted total and σ when the adaptive scheme is on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_pde: f64,
    pub l_bc: f64,
    pub l_d: f64,
    pub total: f64,
    pub sigma: Option<[f64; 3]>,
}

/// Value and gradient of the weighted loss.
#[derive(Clone, Debug)]
pub struct LossGradient {
    pub breakdown: LossBreakdown,
    /// Network parameter gradient, [`NetParams`] order.
    pub net: Vec<f64>,
    /// d total / d log σ (zero unless the adaptive scheme is active).
    pub log_sigma: [f64; 3],
}

/// The three point sets a loss evaluation needs.
#[derive(Clone, Copy, Debug)]
pub struct LossInputs<'a> {
    pub collocation: &'a CollocationBatch,
    pub data: &'a LabeledBatch,
    pub bc: &'a LabeledBatch,
}

struct Stacked {
    tape: JetTape,
    n_col: usize,
    n_data: usize,
}

fn stack(params: &NetParams, inputs: &LossInputs<'_>) -> Result<Stacked> {
    require_non_empty(inputs.collocation.len(), "collocation")?;
    require_non_empty(inputs.data.len(), "data")?;
    require_non_empty(inputs.bc.len(), "boundary")?;
    let all = ndarray::concatenate(
        ndarray::Axis(0),
        &[
            inputs.collocation.inputs.view(),
            inputs.data.inputs.view(),
            inputs.bc.inputs.view(),
        ],
    )
    .map_err(|_| Error::DimensionMismatch {
        expected: params.input_dim(),
        got: inputs.data.inputs.ncols(),
    })?;
    Ok(Stacked {
        tape: JetTape::record(params, all.view())?,
        n_col: inputs.collocation.len(),
        n_data: inputs.data.len(),
    })
}

/// Per-term seeds: (PDE, BC, data), each the gradient of the plain mean
/// square with respect to the output jets.
fn term_seeds(st: &Stacked, inputs: &LossInputs<'_>) -> ([f64; 3], [OutputSeeds; 3]) {
    let n = st.tape.len();
    let (n_col, n_data) = (st.n_col, st.n_data);
    let u = st.tape.u();
    let mut seeds = [OutputSeeds::zeros(n), OutputSeeds::zeros(n), OutputSeeds::zeros(n)];

    let r = residuals(&st.tape, inputs.collocation);
    let l_pde = mean_sq(r.iter().copied(), n_col);
    let scale = 2.0 / n_col as f64;
    for i in 0..n_col {
        let j = st.tape.jet(i);
        seeds[0].d_u[i] = scale * r[i] * j.u_x;
        seeds[0].d_ux[i] = scale * r[i] * j.u;
        seeds[0].d_uxx[i] = -scale * r[i] * inputs.collocation.nu[i];
    }

    let mut l_d = 0.0;
    let scale = 2.0 / n_data as f64;
    for (k, &y) in inputs.data.labels.iter().enumerate() {
        let i = n_col + k;
        let e = u[i] - y;
        l_d += e * e;
        seeds[2].d_u[i] = scale * e;
    }
    l_d /= n_data as f64;

    let n_bc = inputs.bc.len();
    let mut l_bc = 0.0;
    let scale = 2.0 / n_bc as f64;
    for (k, &y) in inputs.bc.labels.iter().enumerate() {
        let i = n_col + n_data + k;
        let e = u[i] - y;
        l_bc += e * e;
        seeds[1].d_u[i] = scale * e;
    }
    l_bc /= n_bc as f64;

    ([l_pde, l_bc, l_d], seeds)
}

/// Loss terms without gradients.
pub fn evaluate(params: &NetParams, inputs: &LossInputs<'_>, weights: &ActiveWeights) -> Result<LossBreakdown> {
    let l_pde = loss_pde(params, inputs.collocation)?;
    let l_bc = loss_bc(params, inputs.bc)?;
    let l_d = loss_data(params, inputs.data)?;
    Ok(LossBreakdown {
        l_pde,
        l_bc,
        l_d,
        total: weights.total([l_pde, l_bc, l_d])?,
        sigma: weights.sigmas(),
    })
}

/// Weighted loss and its gradient from a single stacked jet pass.
pub fn evaluate_with_grad(params: &NetParams, inputs: &LossInputs<'_>, weights: &ActiveWeights) -> Result<LossGradient> {
    let st = stack(params, inputs)?;
    let (l, seeds) = term_seeds(&st, inputs);
    let w = weights.term_weights();
    let n = st.tape.len();
    let mut combined = OutputSeeds::zeros(n);
    for (k, s) in seeds.iter().enumerate() {
        if w[k] == 0.0 {
            continue;
        }
        combined.d_u.scaled_add(w[k], &s.d_u);
        combined.d_ux.scaled_add(w[k], &s.d_ux);
        combined.d_uxx.scaled_add(w[k], &s.d_uxx);
    }
    let net = st.tape.backward(params, &combined)?;
    let log_sigma = match *weights {
        ActiveWeights::LbPinn { log_sigmas } => [0, 1, 2].map(|i| 1.0 - l[i] * (-2.0 * log_sigmas[i]).exp()),
        _ => [0.0; 3],
    };
    Ok(LossGradient {
        breakdown: LossBreakdown {
            l_pde: l[0],
            l_bc: l[1],
            l_d: l[2],
            total: weights.total(l)?,
            sigma: weights.sigmas(),
        },
        net,
        log_sigma,
    })
}

/// Weighted per-term gradient contributions `w_i ∇l_i`, (PDE, BC, data).
pub fn gradient_decomposition(
    params: &NetParams,
    inputs: &LossInputs<'_>,
    weights: &ActiveWeights,
) -> Result<[Vec<f64>; 3]> {
    let st = stack(params, inputs)?;
    let (_, mut seeds) = term_seeds(&st, inputs);
    let w = weights.term_weights();
    let mut out: [Vec<f64>; 3] = Default::default();
    for k in 0..3 {
        seeds[k].d_u *= w[k];
        seeds[k].d_ux *= w[k];
        seeds[k].d_uxx *= w[k];
        out[k] = st.tape.backward(params, &seeds[k])?;
    }
    Ok(out)
}

/// Split of the data loss measured against noisy labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveLossParts {
    /// mean (u − u_θ)² with exact labels
    pub clean: f64,
    /// mean 2ε(u − u_θ)
    pub cross: f64,
    /// mean ε²
    pub bias: f64,
    /// mean (ũ − u_θ)² computed directly
    pub effective: f64,
}

pub fn effective_decomposition(
    params: &NetParams,
    inputs: &Array2<f64>,
    true_labels: &[f64],
    noisy_labels: &[f64],
) -> Result<EffectiveLossParts> {
    let n = inputs.nrows();
    for len in [true_labels.len(), noisy_labels.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    require_non_empty(n, "labeled")?;
    let pred = forward_batch(params, inputs.view())?;
    let (mut clean, mut cross, mut bias, mut effective) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let gap = true_labels[i] - pred[i];
        let eps = noisy_labels[i] - true_labels[i];
        clean += gap * gap;
        cross += 2.0 * eps * gap;
        bias += eps * eps;
        let d = noisy_labels[i] - pred[i];
        effective += d * d;
    }
    let n = n as f64;
    Ok(EffectiveLossParts {
        clean: clean / n,
        cross: cross / n,
        bias: bias / n,
        effective: effective / n,
    })
}

/// Row block `[start, end)` of an input matrix.
pub fn rows(inputs: &Array2<f64>, start: usize, end: usize) -> Array2<f64> {
    inputs.slice(s![start..end, ..]).to_owned()
}
