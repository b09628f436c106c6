//! Built-in property scorers for goal-directed workflows.
//!
//! Optimization needs the same property on both the seed molecule and each
//! candidate, so properties cannot come from a dataset column alone. The
//! scorers here are simple structural functions of the graph; external
//! property models are out of scope.

use molebm::graph::{AtomVocab, MolecularGraph};

use crate::error::{usage, CliError};

/// A named structural property. Empty graphs score 0.
#[derive(Debug, Clone, PartialEq)]
pub enum Scorer {
    /// `atom-fraction:SYM`: fraction of real atoms with the given symbol.
    AtomFraction(String),
    /// `atom-count`: number of real atoms.
    AtomCount,
    /// `bond-density`: total bond order divided by the number of real atoms.
    BondDensity,
}

impl Scorer {
    pub fn parse(name: &str, vocab: &AtomVocab) -> Result<Self, CliError> {
        if let Some(sym) = name.strip_prefix("atom-fraction:") {
            if !vocab.symbols().any(|s| s == sym) {
                return Err(usage(format!(
                    "atom-fraction symbol {sym:?} is not in the vocabulary"
                )));
            }
            return Ok(Scorer::AtomFraction(sym.to_string()));
        }
        match name {
            "atom-count" => Ok(Scorer::AtomCount),
            "bond-density" => Ok(Scorer::BondDensity),
            other => Err(usage(format!(
                "unknown property {other:?} (expected atom-fraction:SYM, atom-count, or bond-density)"
            ))),
        }
    }

    pub fn score(&self, g: &MolecularGraph, vocab: &AtomVocab) -> f64 {
        let atoms = g.real_atom_count();
        if atoms == 0 {
            return 0.0;
        }
        match self {
            Scorer::AtomFraction(sym) => {
                let hits = g
                    .real_atoms()
                    .filter(|&i| vocab.symbol(g.atom_type(i)) == sym)
                    .count();
                hits as f64 / atoms as f64
            }
            Scorer::AtomCount => atoms as f64,
            Scorer::BondDensity => {
                let total: u32 = g.real_bonds().into_iter().map(|(_, _, o)| u32::from(o)).sum();
                f64::from(total) / atoms as f64
            }
        }
    }
}
