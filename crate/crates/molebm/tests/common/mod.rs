//! Shared fixtures for the integration suites: random molecule generators,
//! tiny analytic energy functions, and a state-recording wrapper.

use std::sync::Mutex;

use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use molebm::energy::{EnergyError, EnergyFn};
use molebm::graph::check_valency;
use molebm::{AtomVocab, DenseGraphTensor, Dims, MolecularGraph};

pub fn rng(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// A tensor with entries in the sampler's ranges for `t = 0.1`.
pub fn random_tensor(dims: Dims, seed: u64) -> DenseGraphTensor {
    let mut rng = rng(seed);
    let x = Array2::from_shape_fn((dims.n, dims.node_channels()), |_| rng.random_range(0.0..1.1));
    let a =
        Array3::from_shape_fn((dims.n, dims.n, dims.bond_channels()), |_| {
            rng.random_range(0.0..1.0)
        });
    DenseGraphTensor::new(x, a)
}

/// A connected molecule that passes the valency check, built as a random
/// spanning tree plus random order raises, all within per-atom budgets.
pub fn random_valid_molecule(
    dims: Dims,
    vocab: &AtomVocab,
    rng: &mut ChaCha12Rng,
) -> MolecularGraph {
    let target = rng.random_range(1..=dims.n);
    let types: Vec<usize> = (0..target).map(|_| rng.random_range(0..vocab.len())).collect();
    let mut budget: Vec<u32> = types.iter().map(|&t| vocab.valence(t)).collect();
    let mut bonds: Vec<(usize, usize, u8)> = Vec::new();
    let mut kept = 1;
    for i in 1..target {
        let open: Vec<usize> = (0..kept).filter(|&j| budget[j] > 0).collect();
        if open.is_empty() {
            // No attachment point left; keep the connected prefix.
            break;
        }
        let j = open[rng.random_range(0..open.len())];
        bonds.push((j, i, 1));
        budget[j] -= 1;
        budget[i] -= 1;
        kept += 1;
    }
    let types = &types[..kept];
    for _ in 0..rng.random_range(0..=kept) {
        if kept < 2 {
            break;
        }
        let i = rng.random_range(0..kept);
        let j = rng.random_range(0..kept);
        if i == j {
            continue;
        }
        let (i, j) = (i.min(j), i.max(j));
        if budget[i] == 0 || budget[j] == 0 {
            continue;
        }
        if let Some(b) = bonds.iter_mut().find(|b| (b.0, b.1) == (i, j)) {
            if b.2 < 3 {
                b.2 += 1;
                budget[i] -= 1;
                budget[j] -= 1;
            }
        } else {
            bonds.push((i, j, 1));
            budget[i] -= 1;
            budget[j] -= 1;
        }
    }
    let g = MolecularGraph::encode(types, &bonds, dims).expect("construction stays in bounds");
    assert!(check_valency(&g, vocab).valid, "generator must emit valid molecules");
    g
}

pub fn random_dataset(count: usize, dims: Dims, vocab: &AtomVocab, seed: u64) -> Vec<MolecularGraph> {
    let mut r = rng(seed);
    (0..count).map(|_| random_valid_molecule(dims, vocab, &mut r)).collect()
}

/// All permutations of `0..m`, for brute-force isomorphism checks.
pub fn permutations(m: usize) -> Vec<Vec<usize>> {
    fn go(cur: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(cur.clone());
            return;
        }
        for k in 0..rest.len() {
            let v = rest.remove(k);
            cur.push(v);
            go(cur, rest, out);
            cur.pop();
            rest.insert(k, v);
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut (0..m).collect(), &mut out);
    out
}

/// Zero energy with zero gradients everywhere.
pub struct ConstantEnergy(pub Dims);

impl EnergyFn for ConstantEnergy {
    fn dims(&self) -> Dims {
        self.0
    }

    fn energy(&self, _s: &DenseGraphTensor) -> Result<f64, EnergyError> {
        Ok(0.0)
    }

    fn energy_with_input_grads(
        &self,
        s: &DenseGraphTensor,
    ) -> Result<(f64, Array2<f64>, Array3<f64>), EnergyError> {
        Ok((0.0, Array2::zeros(s.x.raw_dim()), Array3::zeros(s.a.raw_dim())))
    }
}

/// Linear energy whose constant gradients sit far beyond any clip threshold,
/// so every update moves by exactly `step_size * clip`.
pub struct SteepEnergy {
    pub dims: Dims,
    pub slope_x: f64,
    pub slope_a: f64,
}

impl EnergyFn for SteepEnergy {
    fn dims(&self) -> Dims {
        self.dims
    }

    fn energy(&self, s: &DenseGraphTensor) -> Result<f64, EnergyError> {
        Ok(self.slope_x * s.x.sum() + self.slope_a * s.a.sum())
    }

    fn energy_with_input_grads(
        &self,
        s: &DenseGraphTensor,
    ) -> Result<(f64, Array2<f64>, Array3<f64>), EnergyError> {
        let dx = Array2::from_elem(s.x.raw_dim(), self.slope_x);
        let da = Array3::from_elem(s.a.raw_dim(), self.slope_a);
        Ok((self.energy(s)?, dx, da))
    }
}

/// Records every state it is asked to differentiate, which is every chain
/// state except the final one.
pub struct Probe<'a, E: EnergyFn + ?Sized> {
    pub inner: &'a E,
    pub states: Mutex<Vec<DenseGraphTensor>>,
}

impl<'a, E: EnergyFn + ?Sized> Probe<'a, E> {
    pub fn new(inner: &'a E) -> Self {
        Probe { inner, states: Mutex::new(Vec::new()) }
    }
}

impl<E: EnergyFn + ?Sized> EnergyFn for Probe<'_, E> {
    fn dims(&self) -> Dims {
        self.inner.dims()
    }

    fn energy(&self, s: &DenseGraphTensor) -> Result<f64, EnergyError> {
        self.inner.energy(s)
    }

    fn energy_with_input_grads(
        &self,
        s: &DenseGraphTensor,
    ) -> Result<(f64, Array2<f64>, Array3<f64>), EnergyError> {
        self.states.lock().unwrap().push(s.clone());
        self.inner.energy_with_input_grads(s)
    }
}
