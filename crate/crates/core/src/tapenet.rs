//! Fully connected tanh network with second-order spatial jets.
//!
//! Every hidden activation carries `(a, ∂a/∂x, ∂²a/∂x²)` where `x` is input
//! column 0. Parameter gradients of any loss built from the output jet come
//! from a reverse sweep over the stored jets, so paths through `u_x` and
//! `u_xx` are differentiated exactly.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hidden-layer layout shortcuts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    /// 4 hidden layers of 64 units.
    #[default]
    Desk,
    /// 7 hidden layers of 200 units.
    Paper,
}

impl Architecture {
    pub fn layer_sizes(self, input_dim: usize) -> Vec<usize> {
        let (depth, width) = match self {
            Architecture::Desk => (4, 64),
            Architecture::Paper => (7, 200),
        };
        let mut sizes = vec![input_dim];
        sizes.extend(std::iter::repeat_n(width, depth));
        sizes.push(1);
        sizes
    }
}

/// Network weights and biases stored flat, layer by layer: row-major
/// `W (n_out × n_in)` followed by `b (n_out)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    layer_sizes: Vec<usize>,
    values: Vec<f64>,
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidLayout("need at least an input and an output layer".into()));
    }
    if layer_sizes.iter().any(|&n| n == 0) {
        return Err(Error::InvalidLayout("zero-width layer".into()));
    }
    if *layer_sizes.last().unwrap() != 1 {
        return Err(Error::InvalidLayout("output layer must have width 1".into()));
    }
    Ok(())
}

pub fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
}

/// Glorot-uniform weights, zero biases.
pub fn init_params(layer_sizes: &[usize], seed: u64) -> Result<NetParams> {
    validate_sizes(layer_sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(param_count(layer_sizes));
    for w in layer_sizes.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let bound = (6.0 / (n_in + n_out) as f64).sqrt();
        values.extend((0..n_in * n_out).map(|_| rng.random_range(-bound..bound)));
        values.extend(std::iter::repeat_n(0.0, n_out));
    }
    Ok(NetParams {
        layer_sizes: layer_sizes.to_vec(),
        values,
    })
}

impl NetParams {
    pub fn from_parts(layer_sizes: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        validate_sizes(&layer_sizes)?;
        let expected = param_count(&layer_sizes);
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { index });
        }
        Ok(Self { layer_sizes, values })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn layer_offsets(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.layer_sizes.windows(2).map(move |w| {
            let start = offset;
            offset += (w[0] + 1) * w[1];
            (start, w[0], w[1])
        })
    }

    fn layer(&self, start: usize, n_in: usize, n_out: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let w = ArrayView2::from_shape((n_out, n_in), &self.values[start..start + n_in * n_out]).expect("layer shape");
        let b = ArrayView1::from(&self.values[start + n_in * n_out..start + (n_in + 1) * n_out]);
        (w, b)
    }

    fn check_inputs(&self, inputs: &ArrayView2<f64>) -> Result<()> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: inputs.ncols(),
            });
        }
        Ok(())
    }
}

/// `a · b` into a fresh row-major matrix.
#[inline]
fn matmul(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Array2<f64> {
    let mut c = Array2::zeros((a.nrows(), b.ncols()));
    general_mat_mul(1.0, a, b, 0.0, &mut c);
    c
}

#[inline]
fn affine(a: &ArrayView2<f64>, w: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Array2<f64> {
    let mut z = matmul(a, &w.t());
    z += b;
    z
}

/// Output value and its first two derivatives along input column 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JetEval {
    pub u: f64,
    pub u_x: f64,
    pub u_xx: f64,
}

/// Plain forward pass over a batch (one row per point).
pub fn forward_batch(params: &NetParams, inputs: ArrayView2<f64>) -> Result<Array1<f64>> {
    params.check_inputs(&inputs)?;
    let n_layers = params.layer_sizes.len() - 1;
    let mut a = inputs.to_owned();
    for (l, (start, n_in, n_out)) in params.layer_offsets().enumerate() {
        let (w, b) = params.layer(start, n_in, n_out);
        let mut z = affine(&a.view(), &w, &b);
        if l + 1 < n_layers {
            z.mapv_inplace(f64::tanh);
        }
        a = z;
    }
    Ok(a.column(0).to_owned())
}

pub fn forward(params: &NetParams, inputs: &[f64]) -> Result<f64> {
    let view = ArrayView2::from_shape((1, inputs.len()), inputs).expect("row shape");
    Ok(forward_batch(params, view)?[0])
}

pub fn forward_jet(params: &NetParams, inputs: &[f64]) -> Result<JetEval> {
    let view = ArrayView2::from_shape((1, inputs.len()), inputs).expect("row shape");
    let tape = JetTape::record(params, view)?;
    Ok(tape.jet(0))
}

struct LayerRecord {
    a: Array2<f64>,
    a_x: Array2<f64>,
    a_xx: Array2<f64>,
    /// tanh(z) and the pre-activation jets; empty on the output layer.
    t: Array2<f64>,
    z_x: Array2<f64>,
    z_xx: Array2<f64>,
}

/// Forward jet pass over a batch with everything needed for the reverse sweep.
pub struct JetTape {
    layers: Vec<LayerRecord>,
    u: Array1<f64>,
    u_x: Array1<f64>,
    u_xx: Array1<f64>,
}

/// Sensitivities of a scalar loss to each point's output jet.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputSeeds {
    pub d_u: Array1<f64>,
    pub d_ux: Array1<f64>,
    pub d_uxx: Array1<f64>,
}

impl OutputSeeds {
    pub fn zeros(n: usize) -> Self {
        Self {
            d_u: Array1::zeros(n),
            d_ux: Array1::zeros(n),
            d_uxx: Array1::zeros(n),
        }
    }
}

impl JetTape {
    pub fn record(params: &NetParams, inputs: ArrayView2<f64>) -> Result<Self> {
        params.check_inputs(&inputs)?;
        let batch = inputs.nrows();
        let n_layers = params.layer_sizes.len() - 1;

        let mut a = inputs.to_owned();
        let mut a_x = Array2::zeros(inputs.raw_dim());
        a_x.column_mut(0).fill(1.0);
        let mut a_xx = Array2::zeros(inputs.raw_dim());

        let mut layers = Vec::with_capacity(n_layers);
        let mut out = None;
        for (l, (start, n_in, n_out)) in params.layer_offsets().enumerate() {
            let (w, b) = params.layer(start, n_in, n_out);
            let z = affine(&a.view(), &w, &b);
            let z_x = matmul(&a_x.view(), &w.t());
            let z_xx = matmul(&a_xx.view(), &w.t());
            if l + 1 == n_layers {
                out = Some((z, z_x, z_xx));
                layers.push(LayerRecord {
                    a,
                    a_x,
                    a_xx,
                    t: Array2::zeros((0, 0)),
                    z_x: Array2::zeros((0, 0)),
                    z_xx: Array2::zeros((0, 0)),
                });
                break;
            }
            let t = z.mapv(f64::tanh);
            let mut next_x = Array2::zeros((batch, n_out));
            let mut next_xx = Array2::zeros((batch, n_out));
            ndarray::Zip::from(&mut next_x)
                .and(&mut next_xx)
                .and(&t)
                .and(&z_x)
                .and(&z_xx)
                .for_each(|ax, axx, &t, &zx, &zxx| {
                    let s = 1.0 - t * t;
                    *ax = s * zx;
                    *axx = s * zxx - 2.0 * t * *ax * zx;
                });
            layers.push(LayerRecord {
                a,
                a_x,
                a_xx,
                t: t.clone(),
                z_x,
                z_xx,
            });
            a = t;
            a_x = next_x;
            a_xx = next_xx;
        }
        let (z, z_x, z_xx) = out.expect("at least one layer");
        Ok(Self {
            layers,
            u: z.column(0).to_owned(),
            u_x: z_x.column(0).to_owned(),
            u_xx: z_xx.column(0).to_owned(),
        })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn u(&self) -> &Array1<f64> {
        &self.u
    }

    pub fn u_x(&self) -> &Array1<f64> {
        &self.u_x
    }

    pub fn u_xx(&self) -> &Array1<f64> {
        &self.u_xx
    }

    pub fn jet(&self, i: usize) -> JetEval {
        JetEval {
            u: self.u[i],
            u_x: self.u_x[i],
            u_xx: self.u_xx[i],
        }
    }

    /// Reverse sweep: gradient of `Σ_i d_u[i]·u_i + d_ux[i]·u_x,i + d_uxx[i]·u_xx,i`
    /// with respect to every network parameter, in [`NetParams`] order.
    pub fn backward(&self, params: &NetParams, seeds: &OutputSeeds) -> Result<Vec<f64>> {
        let n = self.len();
        for len in [seeds.d_u.len(), seeds.d_ux.len(), seeds.d_uxx.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, got: len });
            }
        }
        let mut grad = vec![0.0; params.len()];
        let offsets: Vec<_> = params.layer_offsets().collect();

        let mut g_z = seeds.d_u.view().insert_axis(Axis(1)).to_owned();
        let mut g_zx = seeds.d_ux.view().insert_axis(Axis(1)).to_owned();
        let mut g_zxx = seeds.d_uxx.view().insert_axis(Axis(1)).to_owned();

        for l in (0..offsets.len()).rev() {
            let (start, n_in, n_out) = offsets[l];
            let rec = &self.layers[l];
            let (w, _) = params.layer(start, n_in, n_out);

            let mut g_w = matmul(&g_z.t(), &rec.a.view());
            general_mat_mul(1.0, &g_zx.t(), &rec.a_x, 1.0, &mut g_w);
            general_mat_mul(1.0, &g_zxx.t(), &rec.a_xx, 1.0, &mut g_w);
            let g_b = g_z.sum_axis(Axis(0));
            grad[start..start + n_in * n_out].copy_from_slice(g_w.as_slice().expect("standard layout"));
            grad[start + n_in * n_out..start + (n_in + 1) * n_out]
                .copy_from_slice(g_b.as_slice().expect("standard layout"));

            if l == 0 {
                break;
            }
            let g_a = matmul(&g_z.view(), &w);
            let g_ax = matmul(&g_zx.view(), &w);
            let g_axx = matmul(&g_zxx.view(), &w);

            // Pull back through tanh of the previous layer.
            let prev = &self.layers[l - 1];
            let mut nz = Array2::zeros(g_a.raw_dim());
            let mut nzx = Array2::zeros(g_a.raw_dim());
            let mut nzxx = Array2::zeros(g_a.raw_dim());
            {
                let (gz, gzx, gzxx) = (
                    nz.as_slice_mut().expect("standard layout"),
                    nzx.as_slice_mut().expect("standard layout"),
                    nzxx.as_slice_mut().expect("standard layout"),
                );
                let ga = g_a.as_slice().expect("standard layout");
                let gax = g_ax.as_slice().expect("standard layout");
                let gaxx = g_axx.as_slice().expect("standard layout");
                let t = prev.t.as_slice().expect("standard layout");
                let zx = prev.z_x.as_slice().expect("standard layout");
                let zxx = prev.z_xx.as_slice().expect("standard layout");
                for k in 0..ga.len() {
                    let (t, zx, zxx) = (t[k], zx[k], zxx[k]);
                    let s = 1.0 - t * t;
                    let ts = t * s;
                    gz[k] = ga[k] * s - 2.0 * ts * (gax[k] * zx + gaxx[k] * zxx)
                        - 2.0 * gaxx[k] * (s * s - 2.0 * t * ts) * zx * zx;
                    gzx[k] = gax[k] * s - 4.0 * gaxx[k] * ts * zx;
                    gzxx[k] = gaxx[k] * s;
                }
            }
            g_z = nz;
            g_zx = nzx;
            g_zxx = nzxx;
        }
        check_finite(&grad)?;
        Ok(grad)
    }
}

pub fn check_finite(grad: &[f64]) -> Result<()> {
    match grad.iter().position(|g| !g.is_finite()) {
        Some(index) => Err(Error::NonFiniteGradient { index }),
        None => Ok(()),
    }
}

/// Inputs laid out as a row-major `n × input_dim` matrix.
pub fn input_matrix(rows: &[Vec<f64>]) -> Array2<f64> {
    let dim = rows.first().map_or(0, Vec::len);
    let mut m = Array2::zeros((rows.len(), dim));
    for (mut row, r) in m.outer_iter_mut().zip(rows) {
        row.assign(&ArrayView1::from(r.as_slice()));
    }
    m
}

pub const CHECKPOINT_FORMAT: &str = "pinnlab-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Persisted network plus optional loss-weighting parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub layer_sizes: Vec<usize>,
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_sigmas: Option<[f64; 3]>,
}

impl Checkpoint {
    pub fn new(net: &NetParams, log_sigmas: Option<[f64; 3]>) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            layer_sizes: net.layer_sizes.clone(),
            params: net.values.clone(),
            log_sigmas,
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_slice(bytes)?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unknown format tag {:?}", ck.format)));
        }
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported version {}", ck.version)));
        }
        ck.net()?;
        if let Some(s) = ck.log_sigmas {
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::Checkpoint("non-finite log sigma".into()));
            }
        }
        Ok(ck)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn net(&self) -> Result<NetParams> {
        NetParams::from_parts(self.layer_sizes.clone(), self.params.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tanh_net() -> NetParams {
        NetParams::from_parts(vec![1, 1, 1], vec![1.0, 0.0, 1.0, 0.0]).unwrap()
    }

    #[test]
    fn zero_weights_give_output_bias() {
        let mut p = init_params(&[2, 5, 5, 1], 3).unwrap();
        let n = p.len();
        p.as_mut_slice().fill(0.0);
        p.as_mut_slice()[n - 1] = 0.7;
        assert_eq!(forward(&p, &[0.3, -0.2]).unwrap(), 0.7);
        assert_eq!(forward(&p, &[-1.0, 1.0]).unwrap(), 0.7);
    }

    #[test]
    fn single_unit_is_tanh() {
        let p = tanh_net();
        for &x in &[-1.0, -0.3, 0.0, 0.8] {
            assert_eq!(forward(&p, &[x]).unwrap(), f64::tanh(x));
        }
        let j = forward_jet(&p, &[0.0]).unwrap();
        assert_eq!(j, JetEval { u: 0.0, u_x: 1.0, u_xx: 0.0 });
        let x: f64 = 0.4;
        let j = forward_jet(&p, &[x]).unwrap();
        let t = x.tanh();
        assert!((j.u_x - (1.0 - t * t)).abs() < 1e-15);
        assert!((j.u_xx - (-2.0 * t * (1.0 - t * t))).abs() < 1e-15);
    }

    #[test]
    fn forward_is_repeatable() {
        let p = init_params(&[1, 16, 16, 1], 11).unwrap();
        let a = forward(&p, &[0.123]).unwrap();
        let b = forward(&p, &[0.123]).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let p = init_params(&[2, 4, 1], 0).unwrap();
        assert!(matches!(forward(&p, &[0.1]), Err(Error::DimensionMismatch { .. })));
        assert!(forward_jet(&p, &[0.1, 0.2, 0.3]).is_err());
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let sizes = [1, 20, 30, 1];
        let a = init_params(&sizes, 5).unwrap();
        let b = init_params(&sizes, 5).unwrap();
        let c = init_params(&sizes, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), param_count(&sizes));
        assert_eq!(a.len(), 2 * 20 + 21 * 30 + 31);
        for (start, n_in, n_out) in a.layer_offsets() {
            let bound = (6.0 / (n_in + n_out) as f64).sqrt();
            let (w, b) = a.layer(start, n_in, n_out);
            assert!(w.iter().all(|v| v.abs() <= bound));
            assert!(b.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn output_bias_gradient_of_squared_output() {
        let mut p = init_params(&[1, 8, 8, 1], 1).unwrap();
        let n = p.len();
        p.as_mut_slice().fill(0.0);
        let b = 0.9;
        p.as_mut_slice()[n - 1] = b;
        let x = ndarray::arr2(&[[0.25]]);
        let tape = JetTape::record(&p, x.view()).unwrap();
        let mut seeds = OutputSeeds::zeros(1);
        seeds.d_u[0] = 2.0 * tape.u()[0];
        let g = tape.backward(&p, &seeds).unwrap();
        assert_eq!(g[n - 1], 2.0 * b);
        assert!(g[..n - 1].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dead_unit_has_zero_gradient() {
        // second hidden unit feeds the output with weight 0 and has zero
        // incoming weights, so its outgoing weight only sees tanh(0) = 0.
        let p = NetParams::from_parts(vec![1, 2, 1], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.5, 0.0]).unwrap();
        let x = ndarray::arr2(&[[0.3], [-0.6]]);
        let tape = JetTape::record(&p, x.view()).unwrap();
        let seeds = OutputSeeds {
            d_u: ndarray::arr1(&[1.0, -2.0]),
            d_ux: ndarray::arr1(&[0.5, 0.1]),
            d_uxx: ndarray::arr1(&[0.2, 0.3]),
        };
        let g = tape.backward(&p, &seeds).unwrap();
        assert_eq!(g[5], 0.0);
    }

    #[test]
    fn checkpoint_rejects_wrong_tag_and_size() {
        let p = init_params(&[1, 3, 1], 0).unwrap();
        let mut ck = Checkpoint::new(&p, Some([0.0, 0.1, -0.1]));
        let json = ck.to_json().unwrap();
        assert_eq!(Checkpoint::from_json(json.as_bytes()).unwrap(), ck);
        ck.format = "other".into();
        assert!(Checkpoint::from_json(ck.to_json().unwrap().as_bytes()).is_err());
        let mut ck = Checkpoint::new(&p, None);
        ck.params.pop();
        assert!(Checkpoint::from_json(ck.to_json().unwrap().as_bytes()).is_err());
    }

    #[test]
    fn architecture_presets() {
        assert_eq!(Architecture::Desk.layer_sizes(1), vec![1, 64, 64, 64, 64, 1]);
        assert_eq!(Architecture::Paper.layer_sizes(2), vec![2, 200, 200, 200, 200, 200, 200, 200, 1]);
    }
}
