//! Energy-based generative modeling of molecular graphs.
//!
//! The crate trains a permutation-invariant scalar energy function over
//! fixed-size molecular graph tensors, draws new molecules from it with
//! Langevin dynamics, and evaluates generated sets with the usual
//! validity / uniqueness / novelty metrics.
//!
//! Main pieces:
//!
//! - [`graph`]: discrete and continuous graph representations, valency rules,
//!   canonical keys, and circular fingerprints
//! - [`energy`]: the relational graph convolutional energy network with
//!   hand-derived gradients, spectral normalization, and checkpointing
//! - [`langevin`]: gradient-plus-noise sampling chains over graph tensors
//! - [`training`]: contrastive training with optional goal-directed weighting
//! - [`pipeline`]: end-to-end generation, composition, and seeded optimization
//! - [`metrics`]: evaluation of generated sets and constrained-optimization runs
//! - [`io`]: dataset loading (JSONL and a kekulized SMILES subset), configs,
//!   and serialization of generated sets

pub mod energy;
pub mod graph;
pub mod io;
pub mod langevin;
pub mod metrics;
pub mod pipeline;
pub mod training;

#[cfg(test)]
pub(crate) mod testutil;

pub use energy::{EnergyFn, EnergyModel};
pub use graph::{AtomVocab, CanonicalKey, DenseGraphTensor, Dims, MolecularGraph};
pub use langevin::{CompositeEnergy, LangevinConfig};
pub use training::TrainConfig;
