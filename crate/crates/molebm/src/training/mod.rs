//! Contrastive training of the energy model.
//!
//! Each batch pushes the energy of dequantized dataset molecules down and
//! the energy of freshly sampled chain outputs up, with a quadratic
//! regularizer keeping both in range. Chain outputs enter the loss as
//! constants; no gradient flows through the sampling procedure.

mod adam;

pub use adam::AdamState;

use std::time::Instant;

use ndarray::{Array3, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::energy::{EnergyError, EnergyModel, ParamGradients};
use crate::graph::{DenseGraphTensor, MolecularGraph};
use crate::langevin::{
    chain_rng, clamp_half_open, init_sample, run_chain_with_rng, LangevinConfig, LangevinError,
};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("dataset graph layout does not match the model")]
    DimsMismatch,
    #[error("batch lists differ or are empty: {positives} positives, {hallucinated} hallucinated")]
    LengthMismatch { positives: usize, hallucinated: usize },
    #[error("example {index} has no property value but training is goal-directed")]
    MissingProperty { index: usize },
    #[error("property statistics are degenerate (max must exceed min)")]
    DegenerateStats,
    #[error("loss became non-finite at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("gradient shapes do not match the model")]
    ShapeMismatch,
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Langevin(#[from] LangevinError),
}

/// RNG stream tags keeping shuffling, dequantization, and chains on
/// non-overlapping substreams of one seed.
const STREAM_SHUFFLE: u64 = 1 << 56;
const STREAM_DEQUANT: u64 = 2 << 56;
const STREAM_CHAIN: u64 = 3 << 56;

/// Training settings. `t` is the dequantization scale and also overrides
/// `langevin.t`, so positives and chain states share one value range.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub t: f64,
    pub alpha: f64,
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub langevin: LangevinConfig,
    pub goal_directed: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            t: 0.1,
            alpha: 1.0,
            lr: 1e-4,
            batch: 128,
            epochs: 20,
            langevin: LangevinConfig::default(),
            goal_directed: false,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// The sampler settings actually used for hallucinated chains.
    pub fn chain_config(&self) -> LangevinConfig {
        LangevinConfig { t: self.t, seed: self.seed, ..self.langevin }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(0.0..1.0).contains(&self.t) {
            return Err(TrainError::InvalidConfig("t must lie in [0, 1)".into()));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(TrainError::InvalidConfig("alpha must be finite and >= 0".into()));
        }
        if self.lr.is_nan() || self.lr <= 0.0 {
            return Err(TrainError::InvalidConfig("lr must be > 0".into()));
        }
        if self.batch < 1 || self.batch > 1 << 16 {
            return Err(TrainError::InvalidConfig("batch must lie in 1..=65536".into()));
        }
        if self.epochs < 1 {
            return Err(TrainError::InvalidConfig("epochs must be >= 1".into()));
        }
        self.chain_config().validate().map_err(|e| TrainError::InvalidConfig(e.to_string()))
    }
}

/// Raw property bounds over the training split, for min-max normalization.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PropertyStats {
    pub min: f64,
    pub max: f64,
}

impl PropertyStats {
    /// Bounds over the finite values; `None` when there are none.
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Option<PropertyStats> {
        let mut stats: Option<PropertyStats> = None;
        for v in values.into_iter().filter(|v| v.is_finite()) {
            let s = stats.get_or_insert(PropertyStats { min: v, max: v });
            s.min = s.min.min(v);
            s.max = s.max.max(v);
        }
        stats
    }

    /// True unless `max` strictly exceeds `min`; degenerate stats cannot
    /// normalize anything.
    pub fn degenerate(&self) -> bool {
        self.max.partial_cmp(&self.min) != Some(std::cmp::Ordering::Greater)
    }
}

/// Min-max normalization with clamping into `[0, 1]`.
pub fn normalize_property(raw: f64, stats: PropertyStats) -> Result<f64, TrainError> {
    if stats.degenerate() {
        return Err(TrainError::DegenerateStats);
    }
    Ok(((raw - stats.min) / (stats.max - stats.min)).clamp(0.0, 1.0))
}

/// Goal weight `f(y) = 1 + exp(y)`; strictly increasing in the property.
pub fn goal_weight(y: f64) -> f64 {
    1.0 + y.exp()
}

/// One dataset molecule with an optional raw property value.
#[derive(Debug, Clone)]
pub struct TrainExample {
    pub graph: MolecularGraph,
    pub property: Option<f64>,
}

impl From<MolecularGraph> for TrainExample {
    fn from(graph: MolecularGraph) -> Self {
        TrainExample { graph, property: None }
    }
}

/// Continuous positive sample: one-hot tensors plus `t * U[0,1)` noise per
/// entry (node tensor first, then adjacency, both row-major), with the
/// adjacency degree-normalized afterwards.
pub fn dequantize(g: &MolecularGraph, t: f64, rng: &mut ChaCha12Rng) -> DenseGraphTensor {
    let (mut x, mut a) = g.one_hot();
    for v in x.iter_mut() {
        *v += t * rng.random_range(0.0..1.0);
    }
    for v in a.iter_mut() {
        *v += t * rng.random_range(0.0..1.0);
    }
    DenseGraphTensor { x, a: degree_normalize(&a) }
}

/// Divide every entry of row `i` by that row's total mass
/// `D[i] = sum_{j,k} a[i,j,k]`. Rows with mass below 1e-8 divide by 1e-8
/// instead, so a zero tensor passes through unchanged. Results are clamped
/// into `[0, 1)`.
pub fn degree_normalize(a: &Array3<f64>) -> Array3<f64> {
    let (n, n2, _) = a.dim();
    assert_eq!(n, n2, "adjacency tensor must be square over the node axes");
    let mut out = a.clone();
    for i in 0..n {
        let d: f64 = a.index_axis(Axis(0), i).sum();
        let divisor = if d < 1e-8 { 1e-8 } else { d };
        for v in out.index_axis_mut(Axis(0), i).iter_mut() {
            *v = clamp_half_open(*v / divisor, 1.0);
        }
    }
    out
}

/// Loss of one positive/hallucinated pair:
/// `f * e_pos - e_neg + alpha * (e_pos^2 + e_neg^2)`.
pub fn pair_loss(e_pos: f64, e_neg: f64, f: f64, alpha: f64) -> f64 {
    (f * e_pos - e_neg) + alpha * (e_pos * e_pos + e_neg * e_neg)
}

/// Mean energies and loss components of one batch. `total` always equals
/// `loss_energy + alpha * loss_reg` exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchReport {
    pub mean_energy_pos: f64,
    pub mean_energy_neg: f64,
    pub loss_energy: f64,
    pub loss_reg: f64,
    pub total: f64,
}

/// Per-epoch means over all pairs plus wall time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub mean_energy_pos: f64,
    pub mean_energy_neg: f64,
    pub loss_energy: f64,
    pub loss_reg: f64,
    pub total: f64,
    pub wall_seconds: f64,
}

/// Mean contrastive loss over pairs and its parameter gradient.
///
/// Positives carry their normalized property when training goal-directed;
/// hallucinated tensors are constants, so the gradient of the pair loss is
/// `(f + 2 alpha e_pos) * d e_pos - (1 - 2 alpha e_neg) * d e_neg`, reduced
/// over pairs in index order.
pub fn batch_loss(
    model: &EnergyModel,
    positives: &[(DenseGraphTensor, Option<f64>)],
    hallucinated: &[DenseGraphTensor],
    cfg: &TrainConfig,
) -> Result<(BatchReport, ParamGradients), TrainError> {
    if positives.is_empty() || positives.len() != hallucinated.len() {
        return Err(TrainError::LengthMismatch {
            positives: positives.len(),
            hallucinated: hallucinated.len(),
        });
    }
    let b = positives.len() as f64;
    let mut grads = ParamGradients::zeros_like(model);
    let (mut sum_pos, mut sum_neg, mut sum_le, mut sum_lr) = (0.0, 0.0, 0.0, 0.0);
    for (i, ((s_pos, y), s_neg)) in positives.iter().zip(hallucinated).enumerate() {
        let f = if cfg.goal_directed {
            goal_weight(y.ok_or(TrainError::MissingProperty { index: i })?)
        } else {
            1.0
        };
        let (e_pos, g_pos) = model.energy_with_param_grads(s_pos)?;
        let (e_neg, g_neg) = model.energy_with_param_grads(s_neg)?;
        sum_pos += e_pos;
        sum_neg += e_neg;
        sum_le += f * e_pos - e_neg;
        sum_lr += e_pos * e_pos + e_neg * e_neg;
        grads.axpy((f + 2.0 * cfg.alpha * e_pos) / b, &g_pos);
        grads.axpy((-1.0 + 2.0 * cfg.alpha * e_neg) / b, &g_neg);
    }
    let loss_energy = sum_le / b;
    let loss_reg = sum_lr / b;
    let report = BatchReport {
        mean_energy_pos: sum_pos / b,
        mean_energy_neg: sum_neg / b,
        loss_energy,
        loss_reg,
        total: loss_energy + cfg.alpha * loss_reg,
    };
    Ok((report, grads))
}

/// Epoch summaries plus the property bounds used for goal weighting.
#[derive(Debug, Clone)]
pub struct FitReport {
    pub epochs: Vec<EpochReport>,
    pub property_stats: Option<PropertyStats>,
}

/// Train in place. Per batch: dequantize the positives, run one fresh
/// hallucinated chain per positive against the current model (parallel,
/// independent RNG streams), take the optimizer step, then project the
/// weights to unit spectral norm.
///
/// `on_batch` observes every batch report; `on_epoch` observes each epoch
/// summary together with the current model, and is the place to persist
/// checkpoints and metrics.
pub fn fit(
    model: &mut EnergyModel,
    dataset: &[TrainExample],
    cfg: &TrainConfig,
    mut on_batch: impl FnMut(usize, &BatchReport),
    mut on_epoch: impl FnMut(&EpochReport, &EnergyModel) -> Result<(), EnergyError>,
) -> Result<FitReport, TrainError> {
    cfg.validate()?;
    if dataset.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let dims = model.dims();
    for (index, ex) in dataset.iter().enumerate() {
        if ex.graph.dims() != dims {
            return Err(TrainError::DimsMismatch);
        }
        if cfg.goal_directed && ex.property.is_none() {
            return Err(TrainError::MissingProperty { index });
        }
    }
    let stats = if cfg.goal_directed {
        let stats = PropertyStats::from_values(dataset.iter().filter_map(|e| e.property))
            .ok_or(TrainError::DegenerateStats)?;
        if stats.degenerate() {
            return Err(TrainError::DegenerateStats);
        }
        Some(stats)
    } else {
        None
    };
    let chain_cfg = cfg.chain_config();
    let mut adam = AdamState::new(model);
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let num_batches = dataset.len().div_ceil(cfg.batch);
    let mut indices: Vec<usize> = (0..dataset.len()).collect();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let mut shuffle_rng = chain_rng(cfg.seed, STREAM_SHUFFLE | epoch as u64);
        indices.shuffle(&mut shuffle_rng);
        let (mut sum_pos, mut sum_neg, mut sum_le, mut sum_lr) = (0.0, 0.0, 0.0, 0.0);
        let mut pairs = 0usize;
        for (batch_idx, chunk) in indices.chunks(cfg.batch).enumerate() {
            let global_batch = ((epoch - 1) * num_batches + batch_idx) as u64;
            let mut dq_rng = chain_rng(cfg.seed, STREAM_DEQUANT | global_batch);
            let mut positives = Vec::with_capacity(chunk.len());
            for &idx in chunk {
                let ex = &dataset[idx];
                let s = dequantize(&ex.graph, cfg.t, &mut dq_rng);
                let y = match (stats, ex.property) {
                    (Some(st), Some(raw)) => Some(normalize_property(raw, st)?),
                    _ => None,
                };
                positives.push((s, y));
            }
            let model_ref: &EnergyModel = model;
            let hallucinated = (0..chunk.len())
                .into_par_iter()
                .map(|i| {
                    let mut rng =
                        chain_rng(cfg.seed, STREAM_CHAIN | (global_batch << 16) | i as u64);
                    let s0 = init_sample(dims, cfg.t, &mut rng);
                    run_chain_with_rng(model_ref, s0, &chain_cfg, &mut rng).map(|o| o.tensor)
                })
                .collect::<Result<Vec<_>, LangevinError>>()?;
            let (report, grads) = batch_loss(model, &positives, &hallucinated, cfg)?;
            if !report.total.is_finite() {
                return Err(TrainError::NonFiniteLoss { epoch, batch: batch_idx });
            }
            adam.apply(model, &grads, cfg.lr)?;
            model.normalize_weights();
            on_batch(global_batch as usize, &report);
            let w = chunk.len() as f64;
            sum_pos += report.mean_energy_pos * w;
            sum_neg += report.mean_energy_neg * w;
            sum_le += report.loss_energy * w;
            sum_lr += report.loss_reg * w;
            pairs += chunk.len();
        }
        let p = pairs as f64;
        let loss_energy = sum_le / p;
        let loss_reg = sum_lr / p;
        let report = EpochReport {
            epoch,
            mean_energy_pos: sum_pos / p,
            mean_energy_neg: sum_neg / p,
            loss_energy,
            loss_reg,
            total: loss_energy + cfg.alpha * loss_reg,
            wall_seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&report, model).map_err(TrainError::Energy)?;
        epochs.push(report);
    }
    Ok(FitReport { epochs, property_stats: stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{discretize, AtomVocab, Dims};
    use approx::assert_relative_eq;

    fn dims() -> Dims {
        Dims::new(4, 4, 3).unwrap()
    }

    fn sample_graph() -> MolecularGraph {
        MolecularGraph::encode(&[0, 1, 2], &[(0, 1, 1), (1, 2, 2)], dims()).unwrap()
    }

    fn small_model(seed: u64) -> EnergyModel {
        EnergyModel::init(dims(), AtomVocab::qm9(), 2, 6, seed).unwrap()
    }

    #[test]
    fn dequantize_zero_t_keeps_x_exact() {
        let g = sample_graph();
        let mut rng = chain_rng(1, 0);
        let s = dequantize(&g, 0.0, &mut rng);
        let (x, _) = g.one_hot();
        assert_eq!(s.x, x);
    }

    #[test]
    fn dequantize_round_trips_through_discretize() {
        let g = sample_graph();
        for (seed, t) in [(1u64, 0.0), (2, 0.3), (3, 0.9)] {
            let mut rng = chain_rng(seed, 0);
            let s = dequantize(&g, t, &mut rng);
            // t = 0 leaves one-hot entries at exactly 1.0.
            assert!(s.x.iter().all(|&v| (0.0..=1.0 + t).contains(&v)));
            assert!(s.a.iter().all(|&v| (0.0..1.0).contains(&v)));
            assert_eq!(discretize(&s), g, "t = {t}");
        }
    }

    #[test]
    fn dequantize_noise_mean_is_half_t() {
        // One million node entries: added noise averages t/2.
        let d = Dims::new(100, 4, 1).unwrap();
        let g = MolecularGraph::encode(&vec![0; 100], &[], d).unwrap();
        let (x0, _) = g.one_hot();
        let t = 0.6;
        let mut rng = chain_rng(4, 0);
        let mut sum = 0.0;
        let mut count = 0usize;
        for _ in 0..2000 {
            let s = dequantize(&g, t, &mut rng);
            sum += (&s.x - &x0).sum();
            count += s.x.len();
        }
        assert!(count >= 1_000_000);
        let mean = sum / count as f64;
        assert!((mean - t / 2.0).abs() < 0.001, "mean {mean}");
    }

    #[test]
    fn degree_normalize_one_hot_rows() {
        let d = Dims::new(9, 4, 3).unwrap();
        let g = MolecularGraph::encode(&[0, 1, 2, 3, 0, 1], &[(0, 1, 1), (2, 3, 2)], d).unwrap();
        let (_, a) = g.one_hot();
        let norm = degree_normalize(&a);
        for &v in norm.iter() {
            assert!(v == 0.0 || (v - 1.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn degree_normalize_hand_values() {
        let mut a = Array3::zeros((2, 2, 2));
        a[[0, 0, 0]] = 0.5;
        a[[0, 1, 1]] = 1.5;
        let norm = degree_normalize(&a);
        assert_relative_eq!(norm[[0, 0, 0]], 0.25, max_relative = 1e-15);
        assert_relative_eq!(norm[[0, 1, 1]], 0.75, max_relative = 1e-15);
        // Row 1 is all zero and guarded by the floor divisor.
        assert_eq!(norm[[1, 0, 0]], 0.0);
        assert_eq!(norm[[1, 1, 1]], 0.0);
    }

    #[test]
    fn degree_normalize_zero_tensor() {
        let a = Array3::zeros((3, 3, 4));
        assert_eq!(degree_normalize(&a), a);
    }

    #[test]
    fn degree_normalize_stays_half_open() {
        // A single-entry row would divide to exactly 1.0 without the clamp.
        let mut a = Array3::zeros((1, 1, 2));
        a[[0, 0, 1]] = 0.7;
        let norm = degree_normalize(&a);
        assert!(norm[[0, 0, 1]] < 1.0);
        assert!(norm[[0, 0, 1]] > 0.999999999);
    }

    #[test]
    fn property_normalization() {
        let stats = PropertyStats { min: -2.0, max: 6.0 };
        assert_eq!(normalize_property(-2.0, stats).unwrap(), 0.0);
        assert_eq!(normalize_property(6.0, stats).unwrap(), 1.0);
        assert_eq!(normalize_property(2.0, stats).unwrap(), 0.5);
        assert_eq!(normalize_property(100.0, stats).unwrap(), 1.0);
        assert_eq!(normalize_property(-100.0, stats).unwrap(), 0.0);
        let degenerate = PropertyStats { min: 1.0, max: 1.0 };
        assert!(matches!(
            normalize_property(1.0, degenerate),
            Err(TrainError::DegenerateStats)
        ));
    }

    #[test]
    fn property_stats_from_values() {
        let stats = PropertyStats::from_values([3.0, -1.0, f64::NAN, 2.0]).unwrap();
        assert_eq!(stats, PropertyStats { min: -1.0, max: 3.0 });
        assert!(PropertyStats::from_values([]).is_none());
    }

    #[test]
    fn goal_weight_values() {
        assert_eq!(goal_weight(0.0), 2.0);
        assert_relative_eq!(goal_weight(1.0), 1.0 + std::f64::consts::E, max_relative = 1e-15);
        assert_relative_eq!(goal_weight(0.5), 2.648721270700128, max_relative = 1e-15);
        assert!(goal_weight(0.8) > goal_weight(0.3));
    }

    #[test]
    fn pair_loss_arithmetic() {
        assert_eq!(pair_loss(0.0, 0.0, 1.0, 1.0), 0.0);
        assert_eq!(pair_loss(1.0, 2.0, 1.0, 1.0), 4.0);
        assert_eq!(pair_loss(1.0, 2.0, 1.0, 0.0), -1.0);
    }

    #[test]
    fn batch_report_identity_is_exact() {
        let model = small_model(3);
        let cfg = TrainConfig { alpha: 0.7, ..Default::default() };
        let positives: Vec<_> = (0..3)
            .map(|i| (crate::testutil::random_tensor(dims(), i), None))
            .collect();
        let hallucinated: Vec<_> =
            (10..13).map(|i| crate::testutil::random_tensor(dims(), i)).collect();
        let (report, _) = batch_loss(&model, &positives, &hallucinated, &cfg).unwrap();
        assert_eq!(report.total, report.loss_energy + cfg.alpha * report.loss_reg);
    }

    #[test]
    fn batch_loss_errors() {
        let model = small_model(3);
        let cfg = TrainConfig::default();
        let s = crate::testutil::random_tensor(dims(), 0);
        assert!(matches!(
            batch_loss(&model, &[], &[], &cfg),
            Err(TrainError::LengthMismatch { .. })
        ));
        assert!(matches!(
            batch_loss(&model, &[(s.clone(), None)], &[], &cfg),
            Err(TrainError::LengthMismatch { .. })
        ));
        let goal = TrainConfig { goal_directed: true, ..Default::default() };
        assert!(matches!(
            batch_loss(&model, &[(s.clone(), None)], std::slice::from_ref(&s), &goal),
            Err(TrainError::MissingProperty { index: 0 })
        ));
    }

    #[test]
    fn batch_gradient_matches_finite_differences() {
        let model = small_model(11);
        let cfg = TrainConfig { alpha: 0.5, ..Default::default() };
        let positives: Vec<_> = (0..2)
            .map(|i| (crate::testutil::random_tensor(dims(), i), None))
            .collect();
        let hallucinated: Vec<_> =
            (20..22).map(|i| crate::testutil::random_tensor(dims(), i)).collect();
        let (_, grads) = batch_loss(&model, &positives, &hallucinated, &cfg).unwrap();
        let eps = 1e-4;
        let total = |m: &EnergyModel| {
            batch_loss(m, &positives, &hallucinated, &cfg).unwrap().0.total
        };
        let mut pairs = Vec::new();
        for i in 0..model.width() {
            let mut mp = model.clone();
            mp.param_slices_mut().last_mut().unwrap()[i] += eps;
            let mut mm = model.clone();
            mm.param_slices_mut().last_mut().unwrap()[i] -= eps;
            let fd = (total(&mp) - total(&mm)) / (2.0 * eps);
            pairs.push((grads.readout[i], fd));
        }
        for flat in 0..12 {
            let mut mp = model.clone();
            mp.param_slices_mut()[2][flat] += eps;
            let mut mm = model.clone();
            mm.param_slices_mut()[2][flat] -= eps;
            let fd = (total(&mp) - total(&mm)) / (2.0 * eps);
            pairs.push((grads.slices()[2][flat], fd));
        }
        let diff: f64 = pairs.iter().map(|(a, f)| (a - f) * (a - f)).sum::<f64>().sqrt();
        let scale: f64 = pairs.iter().map(|(_, f)| f * f).sum::<f64>().sqrt();
        assert!(diff / scale.max(1e-12) <= 1e-4, "relative error {}", diff / scale);
    }

    #[test]
    fn goal_weight_scales_positive_gradient_exactly() {
        let model = small_model(19);
        let s_pos = crate::testutil::random_tensor(dims(), 1);
        let s_neg = crate::testutil::random_tensor(dims(), 2);
        let cfg = TrainConfig { alpha: 0.0, goal_directed: true, ..Default::default() };
        let run = |y: f64| {
            batch_loss(&model, &[(s_pos.clone(), Some(y))], std::slice::from_ref(&s_neg), &cfg)
                .unwrap()
                .1
        };
        let g1 = run(1.0);
        let g0 = run(0.0);
        let (_, g_neg) = model.energy_with_param_grads(&s_neg).unwrap();
        // Positive-term gradient is f(y) * dE+/dTheta; the y=1 : y=0 ratio
        // must be (1+e)/2 on every non-negligible entry.
        let ratio = (1.0 + std::f64::consts::E) / 2.0;
        let mut checked = 0;
        for ((a, b), n) in g1
            .slices()
            .iter()
            .flat_map(|s| s.iter())
            .zip(g0.slices().iter().flat_map(|s| s.iter()))
            .zip(g_neg.slices().iter().flat_map(|s| s.iter()))
        {
            let pos1 = a + n;
            let pos0 = b + n;
            if pos0.abs() > 1e-9 {
                assert_relative_eq!(pos1 / pos0, ratio, max_relative = 1e-12);
                checked += 1;
            }
        }
        assert!(checked > 10, "ratio must be exercised on real entries");
    }

    #[test]
    fn fit_smoke_and_determinism() {
        let dataset: Vec<TrainExample> = (0..6)
            .map(|i| {
                let atoms = [&[0usize][..], &[0, 1], &[0, 1, 2], &[2], &[0, 0], &[1, 2, 3]][i]
                    .to_vec();
                let bonds: Vec<(usize, usize, u8)> = match i {
                    1 => vec![(0, 1, 1)],
                    2 => vec![(0, 1, 1), (1, 2, 1)],
                    4 => vec![(0, 1, 3)],
                    5 => vec![(0, 1, 1)],
                    _ => vec![],
                };
                TrainExample::from(MolecularGraph::encode(&atoms, &bonds, dims()).unwrap())
            })
            .collect();
        let cfg = TrainConfig {
            batch: 3,
            epochs: 2,
            lr: 1e-3,
            langevin: LangevinConfig { steps: 2, step_size: 0.5, ..Default::default() },
            seed: 5,
            ..Default::default()
        };
        let run = || {
            let mut model = small_model(7);
            let mut batches = 0;
            let report = fit(&mut model, &dataset, &cfg, |_, _| batches += 1, |_, _| Ok(()))
                .unwrap();
            (model, batches, report)
        };
        let (m1, batches, r1) = run();
        let (m2, _, r2) = run();
        assert_eq!(batches, 4, "two epochs of two batches");
        assert_eq!(r1.epochs.len(), 2);
        assert!(r1.epochs.iter().all(|e| e.total.is_finite()));
        assert_eq!(m1, m2);
        let totals1: Vec<f64> = r1.epochs.iter().map(|e| e.total).collect();
        let totals2: Vec<f64> = r2.epochs.iter().map(|e| e.total).collect();
        assert_eq!(totals1, totals2);
    }

    #[test]
    fn fit_input_validation() {
        let mut model = small_model(1);
        let cfg = TrainConfig::default();
        assert!(matches!(fit(&mut model, &[], &cfg, |_, _| (), |_, _| Ok(())),
            Err(TrainError::EmptyDataset)));

        let other = MolecularGraph::encode(&[0], &[], Dims::new(5, 4, 3).unwrap()).unwrap();
        assert!(matches!(
            fit(&mut model, &[other.into()], &cfg, |_, _| (), |_, _| Ok(())),
            Err(TrainError::DimsMismatch)
        ));

        let goal = TrainConfig { goal_directed: true, ..Default::default() };
        let no_prop = TrainExample::from(sample_graph());
        assert!(matches!(
            fit(&mut model, &[no_prop], &goal, |_, _| (), |_, _| Ok(())),
            Err(TrainError::MissingProperty { index: 0 })
        ));

        let same = TrainExample { graph: sample_graph(), property: Some(1.0) };
        assert!(matches!(
            fit(&mut model, &[same.clone(), same], &goal, |_, _| (), |_, _| Ok(())),
            Err(TrainError::DegenerateStats)
        ));
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { t: 1.0, ..Default::default() },
            TrainConfig { alpha: -1.0, ..Default::default() },
            TrainConfig { lr: 0.0, ..Default::default() },
            TrainConfig { batch: 0, ..Default::default() },
            TrainConfig { epochs: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
