//! The permutation-invariant energy network and its gradients.
//!
//! A stack of relational graph convolutions over the bond channels, a sum
//! readout over node rows, and a linear map to a scalar energy. Gradients
//! with respect to inputs and parameters are reverse-mode by hand; there is
//! no autodiff here.

mod checkpoint;
mod spectral;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use spectral::{spectral_normalize, SpectralOutcome, SPECTRAL_EPS};

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Array3, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::graph::{AtomVocab, DenseGraphTensor, Dims};

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },
    #[error("vocabulary has {vocab} types but dims declare b = {b}")]
    VocabMismatch { vocab: usize, b: usize },
    #[error("model must have at least one layer and unit width")]
    InvalidArchitecture,
    #[error("models must share identical dims and width to combine")]
    DimsMismatch,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("not a model checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint format version {found} (expected {expected})")]
    FormatVersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint failed integrity check")]
    ChecksumMismatch,
    #[error("malformed checkpoint: {0}")]
    InvalidCheckpoint(String),
}

/// Logistic sigmoid.
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Swish activation `z * sigmoid(z)`.
pub fn swish(z: f64) -> f64 {
    z * sigmoid(z)
}

/// Derivative of [`swish`].
pub fn swish_prime(z: f64) -> f64 {
    let s = sigmoid(z);
    s + z * s * (1.0 - s)
}

/// One relational convolution: `swish(sum_k A_k H W_k)`.
///
/// `a_channels[k]` is the `n x n` adjacency slice for bond channel `k` and
/// `weights[k]` its `d_in x d_out` map; channel counts must agree.
pub fn rgcn_layer_forward(
    h: &Array2<f64>,
    a_channels: &[Array2<f64>],
    weights: &[Array2<f64>],
) -> Result<Array2<f64>, EnergyError> {
    let (n, d_in) = h.dim();
    if a_channels.is_empty() || a_channels.len() != weights.len() {
        return Err(EnergyError::ShapeMismatch {
            expected: format!("{} weight matrices", a_channels.len().max(1)),
            got: format!("{}", weights.len()),
        });
    }
    let d_out = weights[0].ncols();
    for (k, (a, w)) in a_channels.iter().zip(weights).enumerate() {
        if a.dim() != (n, n) || w.dim() != (d_in, d_out) {
            return Err(EnergyError::ShapeMismatch {
                expected: format!("channel {k}: a {n}x{n}, w {d_in}x{d_out}"),
                got: format!("a {:?}, w {:?}", a.dim(), w.dim()),
            });
        }
    }
    let mut z = Array2::zeros((n, d_out));
    for (a, w) in a_channels.iter().zip(weights) {
        z += &a.dot(&h.dot(w));
    }
    Ok(z.mapv(swish))
}

/// Gradients of a scalar energy with respect to one input tensor pair and
/// all parameters; shapes mirror their targets exactly.
#[derive(Debug, Clone)]
pub struct EnergyGradients {
    pub dx: Array2<f64>,
    pub da: Array3<f64>,
    pub dparams: ParamGradients,
}

/// Parameter-shaped container: per-layer per-channel matrices plus the
/// readout vector. Doubles as the moment store for the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGradients {
    pub weights: Vec<Vec<Array2<f64>>>,
    pub readout: Array1<f64>,
}

impl ParamGradients {
    pub fn zeros_like(model: &EnergyModel) -> Self {
        ParamGradients {
            weights: model
                .weights
                .iter()
                .map(|layer| layer.iter().map(|w| Array2::zeros(w.dim())).collect())
                .collect(),
            readout: Array1::zeros(model.readout.len()),
        }
    }

    /// `self += factor * other`.
    pub fn axpy(&mut self, factor: f64, other: &ParamGradients) {
        for (mine, theirs) in self.weights.iter_mut().flatten().zip(other.weights.iter().flatten())
        {
            mine.zip_mut_with(theirs, |m, t| *m += factor * t);
        }
        self.readout.zip_mut_with(&other.readout, |m, t| *m += factor * t);
    }

    pub fn scale(&mut self, factor: f64) {
        for w in self.weights.iter_mut().flatten() {
            w.mapv_inplace(|v| v * factor);
        }
        self.readout.mapv_inplace(|v| v * factor);
    }

    /// Flat views over every parameter block, in the fixed layer-major,
    /// channel-major order with the readout last.
    pub(crate) fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self
            .weights
            .iter_mut()
            .flatten()
            .map(|w| w.as_slice_mut().expect("standard layout"))
            .collect();
        out.push(self.readout.as_slice_mut().expect("standard layout"));
        out
    }

    /// Read-only counterpart of [`Self::slices_mut`], aligned with
    /// [`EnergyModel::param_slices_mut`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = self
            .weights
            .iter()
            .flatten()
            .map(|w| w.as_slice().expect("standard layout"))
            .collect();
        out.push(self.readout.as_slice().expect("standard layout"));
        out
    }
}

/// Anything that maps a graph tensor to a scalar energy and can expose the
/// input gradients the sampler needs.
pub trait EnergyFn: Sync {
    fn dims(&self) -> Dims;
    fn energy(&self, s: &DenseGraphTensor) -> Result<f64, EnergyError>;
    fn energy_with_input_grads(
        &self,
        s: &DenseGraphTensor,
    ) -> Result<(f64, Array2<f64>, Array3<f64>), EnergyError>;
}

/// Relational graph convolutional energy function.
///
/// Layer 0 maps `(b+1) -> d`; the remaining `layers - 1` convolutions are
/// `d -> d`. Every layer applies Swish, the readout sums node rows, and the
/// energy is the inner product with the output vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    dims: Dims,
    vocab: AtomVocab,
    layers: usize,
    width: usize,
    /// `weights[l][k]`: layer `l`, bond channel `k`.
    weights: Vec<Vec<Array2<f64>>>,
    readout: Array1<f64>,
    /// Left-singular estimates, one per weight matrix in layer-major
    /// channel-major order, the readout's last. Unit norm after updates.
    spectral_u: Vec<Array1<f64>>,
    metadata: BTreeMap<String, String>,
}

fn glorot(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

fn random_unit(rng: &mut ChaCha12Rng, len: usize) -> Array1<f64> {
    loop {
        let v = Array1::from_shape_fn(len, |_| rng.sample::<f64, _>(StandardNormal));
        let norm = v.dot(&v).sqrt();
        if norm > 1e-12 {
            return v / norm;
        }
    }
}

/// Intermediate state of one forward evaluation.
struct ForwardPass {
    /// Owned copies of the adjacency channel slices.
    a_k: Vec<Array2<f64>>,
    /// `H_0 .. H_L`.
    hs: Vec<Array2<f64>>,
    /// Pre-activations `Z_0 .. Z_{L-1}`.
    zs: Vec<Array2<f64>>,
    h_g: Array1<f64>,
    energy: f64,
}

impl EnergyModel {
    /// Fresh model with fan-scaled uniform weights and random unit spectral
    /// states; fully determined by `seed`.
    ///
    /// Draw order is fixed: weight matrices layer-major then channel-major,
    /// entries row-major; then the readout; then the spectral vectors in the
    /// same matrix order.
    pub fn init(
        dims: Dims,
        vocab: AtomVocab,
        layers: usize,
        width: usize,
        seed: u64,
    ) -> Result<Self, EnergyError> {
        if vocab.len() != dims.b {
            return Err(EnergyError::VocabMismatch { vocab: vocab.len(), b: dims.b });
        }
        if layers < 1 || width < 1 {
            return Err(EnergyError::InvalidArchitecture);
        }
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layers);
        for l in 0..layers {
            let rows = if l == 0 { dims.node_channels() } else { width };
            let per_channel =
                (0..dims.bond_channels()).map(|_| glorot(&mut rng, rows, width)).collect();
            weights.push(per_channel);
        }
        let bound = (6.0 / (width as f64 + 1.0)).sqrt();
        let readout = Array1::from_shape_fn(width, |_| rng.random_range(-bound..bound));
        let mut spectral_u = Vec::new();
        for l in 0..layers {
            let rows = if l == 0 { dims.node_channels() } else { width };
            for _ in 0..dims.bond_channels() {
                spectral_u.push(random_unit(&mut rng, rows));
            }
        }
        spectral_u.push(random_unit(&mut rng, width));
        Ok(EnergyModel {
            dims,
            vocab,
            layers,
            width,
            weights,
            readout,
            spectral_u,
            metadata: BTreeMap::new(),
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn vocab(&self) -> &AtomVocab {
        &self.vocab
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn set_metadata(&mut self, key: &str, value: &str) {
        self.metadata.insert(key.to_string(), value.to_string());
    }

    fn check_shapes(&self, s: &DenseGraphTensor) -> Result<(), EnergyError> {
        let want_x = (self.dims.n, self.dims.node_channels());
        let want_a = (self.dims.n, self.dims.n, self.dims.bond_channels());
        if s.x.dim() != want_x || s.a.dim() != want_a {
            return Err(EnergyError::ShapeMismatch {
                expected: format!("x {want_x:?}, a {want_a:?}"),
                got: format!("x {:?}, a {:?}", s.x.dim(), s.a.dim()),
            });
        }
        Ok(())
    }

    fn forward(&self, s: &DenseGraphTensor) -> Result<ForwardPass, EnergyError> {
        self.check_shapes(s)?;
        let a_k: Vec<Array2<f64>> = (0..self.dims.bond_channels())
            .map(|k| s.a.index_axis(Axis(2), k).to_owned())
            .collect();
        let mut hs = vec![s.x.clone()];
        let mut zs = Vec::with_capacity(self.layers);
        for layer in &self.weights {
            let h = hs.last().unwrap();
            let mut z = Array2::zeros((self.dims.n, self.width));
            for (a, w) in a_k.iter().zip(layer) {
                z += &a.dot(&h.dot(w));
            }
            hs.push(z.mapv(swish));
            zs.push(z);
        }
        let h_g = hs.last().unwrap().sum_axis(Axis(0));
        let energy = h_g.dot(&self.readout);
        Ok(ForwardPass { a_k, hs, zs, h_g, energy })
    }

    /// Reverse-mode sweep. `G` starts as the readout broadcast over rows;
    /// per layer, with `Gt = G * swish'(Z)` and `M_k = H W_k`:
    /// `dA_k += Gt M_k^T`, `dW_k = H^T (A_k^T Gt)`, and the next
    /// `G = sum_k (A_k^T Gt) W_k^T`.
    fn backward(
        &self,
        fp: &ForwardPass,
        want_params: bool,
    ) -> (Array2<f64>, Array3<f64>, Option<ParamGradients>) {
        let n = self.dims.n;
        let mut g = Array2::zeros((n, self.width));
        for mut row in g.rows_mut() {
            row.assign(&self.readout);
        }
        let mut da = Array3::zeros((n, n, self.dims.bond_channels()));
        let mut dparams = want_params.then(|| ParamGradients {
            weights: self
                .weights
                .iter()
                .map(|layer| layer.iter().map(|w| Array2::zeros(w.dim())).collect())
                .collect(),
            readout: fp.h_g.clone(),
        });
        for l in (0..self.layers).rev() {
            let mut gt = fp.zs[l].mapv(swish_prime);
            gt *= &g;
            let h = &fp.hs[l];
            let mut dh = Array2::zeros(h.dim());
            for (k, w) in self.weights[l].iter().enumerate() {
                let m = h.dot(w);
                let dak = gt.dot(&m.t());
                let mut slot = da.index_axis_mut(Axis(2), k);
                slot += &dak;
                let p = fp.a_k[k].t().dot(&gt);
                if let Some(dp) = dparams.as_mut() {
                    dp.weights[l][k] = h.t().dot(&p);
                }
                dh += &p.dot(&w.t());
            }
            g = dh;
        }
        (g, da, dparams)
    }

    /// Scalar energy of one graph tensor.
    pub fn energy(&self, s: &DenseGraphTensor) -> Result<f64, EnergyError> {
        Ok(self.forward(s)?.energy)
    }

    /// Energy plus exact gradients with respect to `x` and `a`.
    pub fn energy_with_input_grads(
        &self,
        s: &DenseGraphTensor,
    ) -> Result<(f64, Array2<f64>, Array3<f64>), EnergyError> {
        let fp = self.forward(s)?;
        let (dx, da, _) = self.backward(&fp, false);
        Ok((fp.energy, dx, da))
    }

    /// Energy plus exact gradients with respect to every parameter.
    pub fn energy_with_param_grads(
        &self,
        s: &DenseGraphTensor,
    ) -> Result<(f64, ParamGradients), EnergyError> {
        let fp = self.forward(s)?;
        let (_, _, dparams) = self.backward(&fp, true);
        Ok((fp.energy, dparams.unwrap()))
    }

    /// Energy plus the full gradient set.
    pub fn energy_gradients(
        &self,
        s: &DenseGraphTensor,
    ) -> Result<(f64, EnergyGradients), EnergyError> {
        let fp = self.forward(s)?;
        let (dx, da, dparams) = self.backward(&fp, true);
        Ok((fp.energy, EnergyGradients { dx, da, dparams: dparams.unwrap() }))
    }

    /// Project every weight matrix to unit spectral norm using one power
    /// iteration step per matrix, advancing the stored singular estimates.
    /// Degenerate (near-zero) matrices are left unchanged; returns how many
    /// were skipped.
    ///
    /// This is the only mutating step of training besides the optimizer;
    /// sampling never calls it, so a model is immutable while chains run.
    pub fn normalize_weights(&mut self) -> usize {
        let mut skipped = 0;
        let mut idx = 0;
        for l in 0..self.layers {
            for k in 0..self.dims.bond_channels() {
                let out = spectral_normalize(&self.weights[l][k], &self.spectral_u[idx]);
                if out.degenerate {
                    skipped += 1;
                } else {
                    self.weights[l][k] = out.normalized;
                    self.spectral_u[idx] = out.u_next;
                }
                idx += 1;
            }
        }
        let col = self
            .readout
            .view()
            .into_shape_with_order((self.width, 1))
            .expect("vector reshapes to column")
            .to_owned();
        let out = spectral_normalize(&col, &self.spectral_u[idx]);
        if out.degenerate {
            skipped += 1;
        } else {
            self.readout = out.normalized.index_axis(Axis(1), 0).to_owned();
            self.spectral_u[idx] = out.u_next;
        }
        skipped
    }

    /// FNV-1a digest of the weight bytes in fixed order; used to give
    /// composite members a stable, order-independent arrangement and to
    /// fingerprint checkpoints in run provenance.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: f64| {
            for b in x.to_le_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        for w in self.weights.iter().flatten() {
            for &v in w.iter() {
                eat(v);
            }
        }
        for &v in self.readout.iter() {
            eat(v);
        }
        h
    }

    /// Flat mutable views over every parameter block, matching the order of
    /// [`ParamGradients::slices`]: layer-major, channel-major, readout last.
    ///
    /// Intended for optimizers and finite-difference diagnostics that need to
    /// perturb individual entries; ordinary training goes through
    /// [`crate::training::fit`].
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self
            .weights
            .iter_mut()
            .flatten()
            .map(|w| w.as_slice_mut().expect("standard layout"))
            .collect();
        out.push(self.readout.as_slice_mut().expect("standard layout"));
        out
    }
}

impl EnergyFn for EnergyModel {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn energy(&self, s: &DenseGraphTensor) -> Result<f64, EnergyError> {
        EnergyModel::energy(self, s)
    }

    fn energy_with_input_grads(
        &self,
        s: &DenseGraphTensor,
    ) -> Result<(f64, Array2<f64>, Array3<f64>), EnergyError> {
        EnergyModel::energy_with_input_grads(self, s)
    }
}
