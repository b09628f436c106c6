//! Langevin-dynamics sampling over graph tensors.
//!
//! A chain starts from a uniform random tensor and repeatedly follows the
//! clipped negative energy gradient plus Gaussian noise, with every state
//! clamped back into the half-open tensor ranges `[0, 1+t)` for node types
//! and `[0, 1)` for adjacency entries.

use ndarray::{Array2, Array3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::energy::{EnergyError, EnergyFn, EnergyModel};
use crate::graph::{DenseGraphTensor, Dims};

#[derive(Debug, Error)]
pub enum LangevinError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("composite energy needs at least one member")]
    EmptyComposite,
    #[error("energy became non-finite at chain step {step}")]
    NonFiniteEnergy { step: usize },
    #[error(transparent)]
    Energy(#[from] EnergyError),
}

/// Sampler settings. `step_size` multiplies the clipped gradient, `t` fixes
/// the node-tensor ceiling at `1 + t`, and `seed` drives the noise stream.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LangevinConfig {
    pub steps: usize,
    pub step_size: f64,
    pub noise_std: f64,
    pub clip: f64,
    pub t: f64,
    pub seed: u64,
}

impl Default for LangevinConfig {
    fn default() -> Self {
        LangevinConfig {
            steps: 30,
            step_size: 10.0,
            noise_std: 0.005,
            clip: 0.01,
            t: 0.1,
            seed: 0,
        }
    }
}

impl LangevinConfig {
    pub fn validate(&self) -> Result<(), LangevinError> {
        if self.steps < 1 {
            return Err(LangevinError::InvalidConfig("steps must be >= 1".into()));
        }
        // Zero is allowed so a frozen chain can decode its own start state.
        if !self.step_size.is_finite() || self.step_size < 0.0 {
            return Err(LangevinError::InvalidConfig("step_size must be finite and >= 0".into()));
        }
        if self.noise_std.is_nan() || self.noise_std < 0.0 {
            return Err(LangevinError::InvalidConfig("noise_std must be >= 0".into()));
        }
        if self.clip.is_nan() || self.clip <= 0.0 {
            return Err(LangevinError::InvalidConfig("clip must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.t) {
            return Err(LangevinError::InvalidConfig("t must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Largest double strictly below positive `x`, used to keep clamped values
/// inside half-open ranges.
fn below(x: f64) -> f64 {
    debug_assert!(x > 0.0 && x.is_finite());
    f64::from_bits(x.to_bits() - 1)
}

pub(crate) fn clamp_half_open(v: f64, ceiling: f64) -> f64 {
    if v < 0.0 {
        0.0
    } else if v >= ceiling {
        below(ceiling)
    } else {
        v
    }
}

/// RNG stream for one chain; distinct `chain_index` values give independent
/// streams under the same seed.
pub fn chain_rng(seed: u64, chain_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(chain_index);
    rng
}

/// Uniform random starting tensor: node entries in `[0, 1+t)`, adjacency
/// entries in `[0, 1)`. Node entries are drawn row-major first, then
/// adjacency entries row-major.
pub fn init_sample(dims: Dims, t: f64, rng: &mut ChaCha12Rng) -> DenseGraphTensor {
    let ceiling = 1.0 + t;
    let mut s = DenseGraphTensor::zeros(dims);
    for v in s.x.iter_mut() {
        *v = rng.random_range(0.0..ceiling);
    }
    for v in s.a.iter_mut() {
        *v = rng.random_range(0.0..1.0);
    }
    s
}

/// One sampler update: clip the input gradients elementwise to
/// `[-clip, clip]`, move against them by `step_size`, add `N(0, noise_std^2)`
/// per entry, and clamp back into range. Noise is drawn for the node tensor
/// first, then the adjacency, both row-major.
pub fn langevin_step<E: EnergyFn + ?Sized>(
    energy: &E,
    s: &DenseGraphTensor,
    cfg: &LangevinConfig,
    rng: &mut ChaCha12Rng,
) -> Result<DenseGraphTensor, LangevinError> {
    let (_, dx, da) = energy.energy_with_input_grads(s)?;
    Ok(apply_update(s, &dx, &da, cfg, rng))
}

fn apply_update(
    s: &DenseGraphTensor,
    dx: &Array2<f64>,
    da: &Array3<f64>,
    cfg: &LangevinConfig,
    rng: &mut ChaCha12Rng,
) -> DenseGraphTensor {
    let x_ceiling = 1.0 + cfg.t;
    let mut x = s.x.clone();
    for (v, g) in x.iter_mut().zip(dx.iter()) {
        let noise: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.noise_std;
        let stepped = *v - cfg.step_size * g.clamp(-cfg.clip, cfg.clip) + noise;
        *v = clamp_half_open(stepped, x_ceiling);
    }
    let mut a = s.a.clone();
    for (v, g) in a.iter_mut().zip(da.iter()) {
        let noise: f64 = rng.sample::<f64, _>(StandardNormal) * cfg.noise_std;
        let stepped = *v - cfg.step_size * g.clamp(-cfg.clip, cfg.clip) + noise;
        *v = clamp_half_open(stepped, 1.0);
    }
    DenseGraphTensor { x, a }
}

/// Final state and per-step energy trace of one chain.
#[derive(Debug, Clone)]
pub struct ChainOutcome {
    pub tensor: DenseGraphTensor,
    /// Energy of the state each step started from; exactly `steps` entries.
    pub trace: Vec<f64>,
}

/// Run `cfg.steps` updates from `s0` using the RNG stream derived from
/// `cfg.seed`. Identical inputs give identical outputs.
pub fn run_chain<E: EnergyFn + ?Sized>(
    energy: &E,
    s0: DenseGraphTensor,
    cfg: &LangevinConfig,
) -> Result<ChainOutcome, LangevinError> {
    let mut rng = chain_rng(cfg.seed, 0);
    run_chain_with_rng(energy, s0, cfg, &mut rng)
}

/// Chain body with an externally supplied RNG, so callers can run many
/// chains on independent streams of one seed.
pub fn run_chain_with_rng<E: EnergyFn + ?Sized>(
    energy: &E,
    s0: DenseGraphTensor,
    cfg: &LangevinConfig,
    rng: &mut ChaCha12Rng,
) -> Result<ChainOutcome, LangevinError> {
    cfg.validate()?;
    let mut s = s0;
    let mut trace = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let (e, dx, da) = energy.energy_with_input_grads(&s)?;
        if !e.is_finite() {
            return Err(LangevinError::NonFiniteEnergy { step });
        }
        trace.push(e);
        s = apply_update(&s, &dx, &da, cfg, rng);
    }
    Ok(ChainOutcome { tensor: s, trace })
}

/// Sum of several trained models, usable anywhere a single model is.
///
/// Members are kept sorted by weight digest so the summation order, and
/// therefore every floating-point result, is independent of the order they
/// were supplied in.
#[derive(Debug, Clone)]
pub struct CompositeEnergy {
    members: Vec<EnergyModel>,
}

impl CompositeEnergy {
    pub fn new(mut members: Vec<EnergyModel>) -> Result<Self, LangevinError> {
        if members.is_empty() {
            return Err(LangevinError::EmptyComposite);
        }
        let dims = EnergyFn::dims(&members[0]);
        if members.iter().any(|m| EnergyFn::dims(m) != dims) {
            return Err(LangevinError::Energy(EnergyError::DimsMismatch));
        }
        members.sort_by_key(EnergyModel::digest);
        Ok(CompositeEnergy { members })
    }

    pub fn members(&self) -> &[EnergyModel] {
        &self.members
    }
}

impl EnergyFn for CompositeEnergy {
    fn dims(&self) -> Dims {
        EnergyFn::dims(&self.members[0])
    }

    fn energy(&self, s: &DenseGraphTensor) -> Result<f64, EnergyError> {
        let mut total = 0.0;
        for m in &self.members {
            total += m.energy(s)?;
        }
        Ok(total)
    }

    fn energy_with_input_grads(
        &self,
        s: &DenseGraphTensor,
    ) -> Result<(f64, Array2<f64>, Array3<f64>), EnergyError> {
        let mut iter = self.members.iter();
        let first = iter.next().expect("composite is nonempty");
        let (mut e, mut dx, mut da) = first.energy_with_input_grads(s)?;
        for m in iter {
            let (em, dxm, dam) = m.energy_with_input_grads(s)?;
            e += em;
            dx += &dxm;
            da += &dam;
        }
        Ok((e, dx, da))
    }
}
