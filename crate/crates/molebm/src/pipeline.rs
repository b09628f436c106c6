//! End-to-end generation flows.
//!
//! A generation attempt is one Langevin chain followed by a fixed decode:
//! symmetrize and argmax the final tensor, repair valency violations, keep
//! the largest connected component, and compute the canonical key. Decodes
//! with no real atoms left are kept as invalid outputs rather than retried,
//! so sample counts (and therefore validity metrics) stay unbiased.

use rayon::prelude::*;
use thiserror::Error;

use crate::energy::{EnergyError, EnergyFn, EnergyModel};
use crate::graph::{
    canonical_key, correct_validity, discretize, fnv1a, largest_component, morgan_fingerprint,
    tanimoto, AtomVocab, CanonicalKey, DenseGraphTensor, GraphError, MolecularGraph,
    DEFAULT_FP_BITS, DEFAULT_FP_RADIUS,
};
use crate::langevin::{
    chain_rng, init_sample, run_chain_with_rng, CompositeEnergy, LangevinConfig, LangevinError,
};
use crate::training::dequantize;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("sample count must be at least 1")]
    InvalidCount,
    #[error("vocabulary has {vocab} atom types but the energy expects {b}")]
    VocabMismatch { vocab: usize, b: usize },
    #[error("composition requires at least two models, got {0}")]
    TooFewModels(usize),
    #[error("composed models must share one atom vocabulary")]
    ComposeVocabMismatch,
    #[error("seed molecule layout does not match the model")]
    SeedDimsMismatch,
    #[error("chain {chain_index} aborted: {source}")]
    Chain {
        chain_index: u64,
        #[source]
        source: LangevinError,
    },
    #[error(transparent)]
    Langevin(#[from] LangevinError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Where a generated molecule came from: which seed, which chain, and a
/// digest of the sampler settings that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub chain_index: u64,
    pub config_digest: u64,
}

/// One decoded chain output. `key` is `None` when every atom decoded to the
/// virtual type; such outputs count as invalid downstream.
#[derive(Debug, Clone)]
pub struct GeneratedMolecule {
    pub graph: MolecularGraph,
    pub key: Option<CanonicalKey>,
    /// Energy of the final chain state, before decoding.
    pub energy: f64,
    /// Energy of the state each step started from, one entry per step.
    pub trace: Vec<f64>,
    pub provenance: Provenance,
}

impl GeneratedMolecule {
    /// Whether the decode produced a nonempty molecule.
    pub fn is_nonempty(&self) -> bool {
        self.key.is_some()
    }
}

/// Stable fingerprint of sampler settings, recorded in provenance so output
/// files are traceable to the exact configuration.
pub fn config_digest(cfg: &LangevinConfig) -> u64 {
    let json = serde_json::to_string(cfg).expect("sampler config serializes to JSON");
    fnv1a(json.as_bytes())
}

/// One outcome per chain, in chain order. A chain that aborts with
/// non-finite energy yields an `Err` entry without affecting its siblings.
pub type ChainResult = Result<GeneratedMolecule, PipelineError>;

/// Sample `count` molecules from the energy function. Chain `i` draws from
/// an RNG stream derived from `(cfg.seed, i)`, so results are reproducible
/// and independent of scheduling.
pub fn generate<E: EnergyFn + ?Sized>(
    energy: &E,
    count: usize,
    cfg: &LangevinConfig,
    vocab: &AtomVocab,
) -> Result<Vec<ChainResult>, PipelineError> {
    cfg.validate()?;
    if count == 0 {
        return Err(PipelineError::InvalidCount);
    }
    let dims = energy.dims();
    if vocab.len() != dims.b {
        return Err(PipelineError::VocabMismatch { vocab: vocab.len(), b: dims.b });
    }
    Ok((0..count as u64)
        .into_par_iter()
        .map(|chain_index| run_and_decode(energy, cfg, vocab, chain_index, None))
        .collect())
}

/// Sum of independently trained models over one graph layout and vocabulary.
pub fn compose(models: Vec<EnergyModel>) -> Result<CompositeEnergy, PipelineError> {
    if models.len() < 2 {
        return Err(PipelineError::TooFewModels(models.len()));
    }
    if models[1..].iter().any(|m| m.vocab() != models[0].vocab()) {
        return Err(PipelineError::ComposeVocabMismatch);
    }
    Ok(CompositeEnergy::new(models)?)
}

/// A chain started from an existing molecule, plus its Tanimoto similarity
/// to that molecule. Empty decodes get similarity 0.
#[derive(Debug, Clone)]
pub struct OptimizedMolecule {
    pub candidate: GeneratedMolecule,
    pub similarity: f64,
}

/// Run one chain initialized from `seed_mol` instead of uniform noise. The
/// start state is built exactly like a training positive: dequantized with
/// `cfg.t` and degree-normalized.
pub fn optimize_from(
    model: &EnergyModel,
    seed_mol: &MolecularGraph,
    cfg: &LangevinConfig,
    vocab: &AtomVocab,
) -> Result<OptimizedMolecule, PipelineError> {
    optimize_from_indexed(model, seed_mol, cfg, vocab, 0)
}

/// As [`optimize_from`], with an explicit chain index so several chains can
/// start from the same molecule on distinct noise streams.
pub fn optimize_from_indexed(
    model: &EnergyModel,
    seed_mol: &MolecularGraph,
    cfg: &LangevinConfig,
    vocab: &AtomVocab,
    chain_index: u64,
) -> Result<OptimizedMolecule, PipelineError> {
    cfg.validate()?;
    let dims = model.dims();
    if vocab.len() != dims.b {
        return Err(PipelineError::VocabMismatch { vocab: vocab.len(), b: dims.b });
    }
    if seed_mol.dims() != dims {
        return Err(PipelineError::SeedDimsMismatch);
    }
    let seed_fp = morgan_fingerprint(seed_mol, DEFAULT_FP_RADIUS, DEFAULT_FP_BITS)?;
    let mut rng = chain_rng(cfg.seed, chain_index);
    let start = dequantize(seed_mol, cfg.t, &mut rng);
    let candidate = run_and_decode_with_rng(model, cfg, vocab, chain_index, start, &mut rng)?;
    let similarity = match candidate.key {
        Some(_) => {
            let fp = morgan_fingerprint(&candidate.graph, DEFAULT_FP_RADIUS, DEFAULT_FP_BITS)?;
            tanimoto(&seed_fp, &fp)?
        }
        None => 0.0,
    };
    Ok(OptimizedMolecule { candidate, similarity })
}

fn run_and_decode<E: EnergyFn + ?Sized>(
    energy: &E,
    cfg: &LangevinConfig,
    vocab: &AtomVocab,
    chain_index: u64,
    start: Option<DenseGraphTensor>,
) -> ChainResult {
    let mut rng = chain_rng(cfg.seed, chain_index);
    let s0 = match start {
        Some(s) => s,
        None => init_sample(energy.dims(), cfg.t, &mut rng),
    };
    run_and_decode_with_rng(energy, cfg, vocab, chain_index, s0, &mut rng)
}

fn run_and_decode_with_rng<E: EnergyFn + ?Sized>(
    energy: &E,
    cfg: &LangevinConfig,
    vocab: &AtomVocab,
    chain_index: u64,
    start: DenseGraphTensor,
    rng: &mut rand_chacha::ChaCha12Rng,
) -> ChainResult {
    let out = run_chain_with_rng(energy, start, cfg, rng)
        .map_err(|source| PipelineError::Chain { chain_index, source })?;
    let final_energy = energy.energy(&out.tensor)?;
    let corrected = correct_validity(&discretize(&out.tensor), vocab);
    let provenance = Provenance {
        seed: cfg.seed,
        chain_index,
        config_digest: config_digest(cfg),
    };
    match largest_component(&corrected) {
        Ok(graph) => {
            let key = canonical_key(&graph, vocab)?;
            Ok(GeneratedMolecule {
                graph,
                key: Some(key),
                energy: final_energy,
                trace: out.trace,
                provenance,
            })
        }
        Err(GraphError::EmptyGraph) => Ok(GeneratedMolecule {
            graph: corrected,
            key: None,
            energy: final_energy,
            trace: out.trace,
            provenance,
        }),
        Err(e) => Err(e.into()),
    }
}
