//! Evaluation of generated sets and constrained-optimization runs.
//!
//! A sample counts as chemically valid when it decoded to at least one real
//! atom and every atom respects its maximum valence. Uniqueness and novelty
//! are fractions of the valid subset, keyed by canonical keys, so both are
//! invariant to sample order and to node relabelings.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::graph::{
    check_valency, morgan_fingerprint, tanimoto, AtomVocab, CanonicalKey, GraphError,
    MolecularGraph, DEFAULT_FP_BITS, DEFAULT_FP_RADIUS,
};
use crate::pipeline::GeneratedMolecule;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("metric input set is empty")]
    EmptySet,
    #[error("histogram needs at least one bin")]
    InvalidBins,
    #[error("value at index {0} is not finite")]
    NonFiniteValue(usize),
    #[error("similarity threshold must lie in [0, 1], got {0}")]
    InvalidDelta(f64),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Validity / uniqueness / novelty of a generated set. When nothing is
/// valid, uniqueness and novelty are reported as 0 with `degenerate` set.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GenerationMetrics {
    pub sample_count: usize,
    pub validity: f64,
    pub uniqueness: f64,
    pub novelty: f64,
    pub degenerate: bool,
}

/// Score a generated set against the training keys.
///
/// validity = valid / total; uniqueness = distinct keys among valid / valid;
/// novelty = valid with key outside `training_keys` / valid.
pub fn evaluate_set(
    generated: &[GeneratedMolecule],
    training_keys: &BTreeSet<CanonicalKey>,
    vocab: &AtomVocab,
) -> Result<GenerationMetrics, MetricsError> {
    if generated.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    let mut valid = 0usize;
    let mut novel = 0usize;
    let mut distinct = BTreeSet::new();
    for g in generated {
        let Some(key) = &g.key else { continue };
        if g.graph.real_atom_count() == 0 || !check_valency(&g.graph, vocab).valid {
            continue;
        }
        valid += 1;
        if !training_keys.contains(key) {
            novel += 1;
        }
        distinct.insert(key.clone());
    }
    let total = generated.len() as f64;
    if valid == 0 {
        return Ok(GenerationMetrics {
            sample_count: generated.len(),
            validity: 0.0,
            uniqueness: 0.0,
            novelty: 0.0,
            degenerate: true,
        });
    }
    Ok(GenerationMetrics {
        sample_count: generated.len(),
        validity: valid as f64 / total,
        uniqueness: distinct.len() as f64 / valid as f64,
        novelty: novel as f64 / valid as f64,
        degenerate: false,
    })
}

/// One equal-width histogram bin: `[low, high)`, last bin closed.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HistogramRow {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

/// Equal-width histogram over `[min, max]` of the values. A constant input
/// collapses to a single zero-width bin holding everything.
pub fn property_histogram(values: &[f64], bins: usize) -> Result<Vec<HistogramRow>, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    if bins < 1 {
        return Err(MetricsError::InvalidBins);
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(MetricsError::NonFiniteValue(i));
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let width = (max - min) / bins as f64;
    let mut rows: Vec<HistogramRow> = (0..bins)
        .map(|i| HistogramRow {
            low: min + width * i as f64,
            high: if i + 1 == bins { max } else { min + width * (i + 1) as f64 },
            count: 0,
        })
        .collect();
    for &v in values {
        let i = if width > 0.0 {
            (((v - min) / width) as usize).min(bins - 1)
        } else {
            0
        };
        rows[i].count += 1;
    }
    Ok(rows)
}

/// One seeded optimization attempt with its before/after property values.
#[derive(Debug, Clone)]
pub struct ConstrainedPair {
    pub seed: MolecularGraph,
    pub candidate: MolecularGraph,
    pub property_seed: f64,
    pub property_candidate: f64,
}

/// Outcome of a constrained sweep at one threshold. `improvement` and
/// `similarity` are means over successes and absent when nothing succeeded.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConstrainedReport {
    pub delta: f64,
    pub improvement: Option<f64>,
    pub similarity: Option<f64>,
    pub success_rate: f64,
}

/// Score optimization pairs at threshold `delta`. A pair succeeds when the
/// candidate stays within similarity `delta` of its seed and strictly
/// improves the property. Candidates that decoded to nothing never succeed.
pub fn constrained_eval(
    pairs: &[ConstrainedPair],
    delta: f64,
) -> Result<ConstrainedReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptySet);
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(MetricsError::InvalidDelta(delta));
    }
    let mut successes = 0usize;
    let (mut sum_imp, mut sum_sim) = (0.0, 0.0);
    for pair in pairs {
        let seed_fp = morgan_fingerprint(&pair.seed, DEFAULT_FP_RADIUS, DEFAULT_FP_BITS)?;
        let sim = match morgan_fingerprint(&pair.candidate, DEFAULT_FP_RADIUS, DEFAULT_FP_BITS) {
            Ok(fp) => tanimoto(&seed_fp, &fp)?,
            Err(GraphError::EmptyGraph) => continue,
            Err(e) => return Err(e.into()),
        };
        if sim >= delta && pair.property_candidate > pair.property_seed {
            successes += 1;
            sum_imp += pair.property_candidate - pair.property_seed;
            sum_sim += sim;
        }
    }
    let (improvement, similarity) = if successes > 0 {
        (Some(sum_imp / successes as f64), Some(sum_sim / successes as f64))
    } else {
        (None, None)
    };
    Ok(ConstrainedReport {
        delta,
        improvement,
        similarity,
        success_rate: successes as f64 / pairs.len() as f64,
    })
}
