//! File formats and configuration.
//!
//! Formats are line-oriented and stable: JSONL for datasets and generated
//! sets, one canonical key per line for the novelty reference, flat
//! `key = value` configs, and small CSV tables for metrics. Writers are
//! deterministic so identical runs produce identical bytes.

pub mod config;
pub mod dataset;
pub mod smiles;

pub use config::RunConfig;
pub use dataset::{read_dataset, read_dataset_jsonl, read_dataset_smi, Dataset, DatasetRecord};
pub use smiles::{parse_smiles_lite, write_smiles_lite, SmilesError, SmilesWriteError};

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use thiserror::Error;

use crate::graph::{AtomVocab, CanonicalKey, Dims, GraphError};
use crate::metrics::{ConstrainedReport, GenerationMetrics, HistogramRow};
use crate::pipeline::{GeneratedMolecule, Provenance};
use crate::training::EpochReport;

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("no records found")]
    EmptySet,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: molecule has {count} atoms but the layout allows {max}")]
    TooManyAtoms { line: usize, count: usize, max: usize },
    #[error("line {line}: unknown atom symbol {symbol:?}")]
    UnknownAtomSymbol { line: usize, symbol: String },
    #[error("line {line}: {source}")]
    Smiles {
        line: usize,
        #[source]
        source: SmilesError,
    },
    #[error("line {line}: {source}")]
    Graph {
        line: usize,
        #[source]
        source: GraphError,
    },
}

/// On-disk shape of one generated molecule. Atom indices are compacted to
/// `0..atoms.len()` regardless of where the atoms sat in the padded layout.
#[derive(Debug, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratedRecord {
    atoms: Vec<String>,
    bonds: Vec<(usize, usize, u8)>,
    key: Option<String>,
    energy: f64,
    seed: u64,
    chain: u64,
    config: String,
}

/// Write one JSON object per generated molecule, in input order.
pub fn write_generated_jsonl<W: Write>(
    mut w: W,
    molecules: &[GeneratedMolecule],
    vocab: &AtomVocab,
) -> Result<(), IoError> {
    for m in molecules {
        let compact: Vec<usize> = m.graph.real_atoms().collect();
        let index_of = |orig: usize| compact.iter().position(|&o| o == orig).expect("real atom");
        let record = GeneratedRecord {
            atoms: compact.iter().map(|&i| vocab.symbol(m.graph.atom_type(i)).to_string()).collect(),
            bonds: m
                .graph
                .real_bonds()
                .into_iter()
                .map(|(i, j, o)| (index_of(i), index_of(j), o))
                .collect(),
            key: m.key.as_ref().map(|k| k.as_str().to_string()),
            energy: m.energy,
            seed: m.provenance.seed,
            chain: m.provenance.chain_index,
            config: format!("{:016x}", m.provenance.config_digest),
        };
        let line = serde_json::to_string(&record).expect("record serializes");
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Read a generated set back. Graphs are rebuilt in a layout just large
/// enough for each record; traces are not stored on disk and come back
/// empty.
pub fn read_generated_jsonl<R: Read>(
    reader: R,
    vocab: &AtomVocab,
) -> Result<Vec<GeneratedMolecule>, IoError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let record: GeneratedRecord = serde_json::from_str(&text)
            .map_err(|e| IoError::Parse { line: line_no, message: e.to_string() })?;
        let dims = Dims::new(record.atoms.len().max(1), vocab.len(), 3)
            .map_err(|source| IoError::Graph { line: line_no, source })?;
        // An empty decode serializes with no atoms; rebuild it as an
        // all-virtual single-slot graph.
        let graph = if record.atoms.is_empty() {
            crate::graph::MolecularGraph::encode(&[], &[], dims)
                .map_err(|source| IoError::Graph { line: line_no, source })?
        } else {
            DatasetRecord { atoms: record.atoms, bonds: record.bonds, y_raw: None }
                .encode_at_line(vocab, dims, line_no)?
        };
        let config_digest = u64::from_str_radix(&record.config, 16)
            .map_err(|_| IoError::Parse {
                line: line_no,
                message: format!("config digest {:?} is not hex", record.config),
            })?;
        out.push(GeneratedMolecule {
            graph,
            key: record.key.map(CanonicalKey::from),
            energy: record.energy,
            trace: Vec::new(),
            provenance: Provenance { seed: record.seed, chain_index: record.chain, config_digest },
        });
    }
    if out.is_empty() {
        return Err(IoError::EmptySet);
    }
    Ok(out)
}

/// One canonical key per line; used as the novelty reference set.
pub fn write_keys<'a, W: Write>(
    mut w: W,
    keys: impl IntoIterator<Item = &'a CanonicalKey>,
) -> Result<(), IoError> {
    for key in keys {
        writeln!(w, "{key}")?;
    }
    Ok(())
}

/// Read a canonical-key file. Blank lines are skipped; an empty set is fine
/// here (novelty against nothing is simply 1).
pub fn read_keys<R: Read>(reader: R) -> Result<BTreeSet<CanonicalKey>, IoError> {
    let mut keys = BTreeSet::new();
    for line in BufReader::new(reader).lines() {
        let text = line?;
        let trimmed = text.trim();
        if !trimmed.is_empty() {
            keys.insert(CanonicalKey::from(trimmed.to_string()));
        }
    }
    Ok(keys)
}

/// Pretty JSON summary object, newline-terminated.
pub fn metrics_json(m: &GenerationMetrics) -> String {
    let mut s = serde_json::to_string_pretty(m).expect("metrics serialize");
    s.push('\n');
    s
}

pub fn metrics_csv(m: &GenerationMetrics) -> String {
    let mut s = String::from("metric,value\n");
    let _ = writeln!(s, "sample_count,{}", m.sample_count);
    let _ = writeln!(s, "validity,{}", m.validity);
    let _ = writeln!(s, "uniqueness,{}", m.uniqueness);
    let _ = writeln!(s, "novelty,{}", m.novelty);
    let _ = writeln!(s, "degenerate,{}", m.degenerate);
    s
}

pub fn epoch_csv(reports: &[EpochReport]) -> String {
    let mut s =
        String::from("epoch,mean_energy_pos,mean_energy_neg,loss_energy,loss_reg,total,wall_seconds\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.epoch, r.mean_energy_pos, r.mean_energy_neg, r.loss_energy, r.loss_reg, r.total,
            r.wall_seconds
        );
    }
    s
}

/// Constrained sweep table. Improvement and similarity are means over
/// successes only; cells stay empty at thresholds where nothing succeeded.
pub fn constrained_csv(reports: &[ConstrainedReport]) -> String {
    let mut s = String::from(
        "# improvement and similarity average over successes only; empty cells mean no successes\n\
         delta,improvement,similarity,success_rate\n",
    );
    for r in reports {
        let fmt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{}",
            r.delta,
            fmt(r.improvement),
            fmt(r.similarity),
            r.success_rate
        );
    }
    s
}

pub fn histogram_csv(rows: &[HistogramRow]) -> String {
    let mut s = String::from("bin_low,bin_high,count\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{}", r.low, r.high, r.count);
    }
    s
}

/// Per-chain energy traces for step-by-step inspection.
pub fn traces_csv(molecules: &[GeneratedMolecule]) -> String {
    let mut s = String::from("chain,step,energy\n");
    for m in molecules {
        for (step, e) in m.trace.iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", m.provenance.chain_index, step, e);
        }
    }
    s
}
