//! Dataset ingestion. Two line formats share one record shape: JSONL with
//! explicit atom and bond lists, and SMILES-lite with an optional
//! tab-separated property column. Every failure names the line it came from.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::graph::{AtomVocab, Dims, MolecularGraph};
use crate::io::smiles::parse_smiles_lite;
use crate::io::IoError;
use crate::training::{PropertyStats, TrainExample};

/// One dataset molecule before encoding: symbols, explicit bonds, and an
/// optional raw property value (the `y` field in JSONL).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub atoms: Vec<String>,
    #[serde(default)]
    pub bonds: Vec<(usize, usize, u8)>,
    #[serde(rename = "y", default, skip_serializing_if = "Option::is_none")]
    pub y_raw: Option<f64>,
}

impl DatasetRecord {
    /// Encode into the fixed graph layout, resolving symbols through the
    /// vocabulary.
    pub fn encode(&self, vocab: &AtomVocab, dims: Dims) -> Result<MolecularGraph, IoError> {
        self.encode_at_line(vocab, dims, 0)
    }

    pub(crate) fn encode_at_line(
        &self,
        vocab: &AtomVocab,
        dims: Dims,
        line: usize,
    ) -> Result<MolecularGraph, IoError> {
        if self.atoms.is_empty() {
            return Err(IoError::Parse { line, message: "record has no atoms".into() });
        }
        if self.atoms.len() > dims.n {
            return Err(IoError::TooManyAtoms {
                line,
                count: self.atoms.len(),
                max: dims.n,
            });
        }
        let mut types = Vec::with_capacity(self.atoms.len());
        for symbol in &self.atoms {
            let idx = vocab.index_of(symbol).ok_or_else(|| IoError::UnknownAtomSymbol {
                line,
                symbol: symbol.clone(),
            })?;
            types.push(idx);
        }
        MolecularGraph::encode(&types, &self.bonds, dims)
            .map_err(|source| IoError::Graph { line, source })
    }
}

/// A loaded dataset: encoded examples plus property bounds when any record
/// carried a property value.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub examples: Vec<TrainExample>,
    pub stats: Option<PropertyStats>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// Load a dataset file, dispatching on extension: `.smi` parses SMILES-lite
/// lines, anything else JSONL.
pub fn read_dataset(path: &Path, vocab: &AtomVocab, dims: Dims) -> Result<Dataset, IoError> {
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e == "smi") {
        read_dataset_smi(file, vocab, dims)
    } else {
        read_dataset_jsonl(file, vocab, dims)
    }
}

/// One JSON object per line: `{"atoms": [...], "bonds": [[i,j,order],...],
/// "y": optional}`. Blank lines are skipped.
pub fn read_dataset_jsonl<R: Read>(
    reader: R,
    vocab: &AtomVocab,
    dims: Dims,
) -> Result<Dataset, IoError> {
    read_lines(reader, vocab, dims, |line, text| {
        serde_json::from_str::<DatasetRecord>(text)
            .map_err(|e| IoError::Parse { line, message: e.to_string() })
    })
}

/// One molecule per line: `SMILES` optionally followed by a tab and a
/// property value. Blank lines are skipped.
pub fn read_dataset_smi<R: Read>(
    reader: R,
    vocab: &AtomVocab,
    dims: Dims,
) -> Result<Dataset, IoError> {
    read_lines(reader, vocab, dims, |line, text| {
        let mut fields = text.split('\t');
        let smiles = fields.next().unwrap_or_default();
        let mut record = parse_smiles_lite(smiles.trim())
            .map_err(|source| IoError::Smiles { line, source })?;
        if let Some(raw) = fields.next() {
            let y: f64 = raw.trim().parse().map_err(|_| IoError::Parse {
                line,
                message: format!("property column {raw:?} is not a number"),
            })?;
            record.y_raw = Some(y);
        }
        if fields.next().is_some() {
            return Err(IoError::Parse {
                line,
                message: "expected SMILES with at most one property column".into(),
            });
        }
        Ok(record)
    })
}

fn read_lines<R: Read>(
    reader: R,
    vocab: &AtomVocab,
    dims: Dims,
    parse: impl Fn(usize, &str) -> Result<DatasetRecord, IoError>,
) -> Result<Dataset, IoError> {
    let mut examples = Vec::new();
    let mut values = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let record = parse(line_no, &text)?;
        let graph = record.encode_at_line(vocab, dims, line_no)?;
        if let Some(y) = record.y_raw {
            values.push(y);
        }
        examples.push(TrainExample { graph, property: record.y_raw });
    }
    if examples.is_empty() {
        return Err(IoError::EmptySet);
    }
    Ok(Dataset { examples, stats: PropertyStats::from_values(values) })
}
