//! Subcommand implementations sharing one resolved run context.

pub mod canonicalize;
pub mod eval_metrics;
pub mod generate;
pub mod optimize;
pub mod train;

use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use molebm::graph::{AtomVocab, CanonicalKey};
use molebm::io::{
    metrics_csv, metrics_json, read_keys, traces_csv, write_generated_jsonl, RunConfig,
};
use molebm::metrics::evaluate_set;
use molebm::pipeline::{self, GeneratedMolecule};
use molebm::EnergyFn;

use crate::error::{usage, CliError};

/// Resolved configuration plus the output location.
pub struct Ctx {
    pub cfg: RunConfig,
    out: Option<PathBuf>,
}

impl Ctx {
    pub fn new(
        seed: Option<u64>,
        config: Option<&Path>,
        out: Option<PathBuf>,
        set: &[String],
        base: RunConfig,
    ) -> Result<Self, CliError> {
        let mut cfg = base;
        if let Some(path) = config {
            cfg.apply_file(path).map_err(|e| match e {
                molebm::io::IoError::Io(io) => {
                    CliError::Data(format!("{}: {io}", path.display()))
                }
                other => usage(format!("{}: {other}", path.display())),
            })?;
        }
        for pair in set {
            let (key, value) = pair
                .split_once('=')
                .ok_or_else(|| usage(format!("--set {pair:?}: expected KEY=VALUE")))?;
            cfg.apply(key.trim(), value.trim())
                .map_err(|m| usage(format!("--set {key}: {m}")))?;
        }
        if let Some(seed) = seed {
            cfg.train.seed = seed;
        }
        Ok(Ctx { cfg, out })
    }

    /// Directory for file outputs, created on demand. Defaults to the
    /// working directory.
    pub fn out_dir(&self) -> Result<PathBuf, CliError> {
        let dir = self.out.clone().unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    /// The output directory only when the user asked for one, for commands
    /// whose primary output is stdout.
    pub fn explicit_out(&self) -> Option<&Path> {
        self.out.as_deref()
    }
}

pub fn load_training_keys(path: Option<&Path>) -> Result<BTreeSet<CanonicalKey>, CliError> {
    match path {
        Some(p) => Ok(read_keys(BufReader::new(File::open(p)?))?),
        None => Ok(BTreeSet::new()),
    }
}

/// Sample `count` chains, write generated.jsonl plus metrics, and report a
/// numerical abort if any chain failed. Successful chains are always
/// written, so a partial failure still leaves usable output behind.
pub fn sample_and_write<E: EnergyFn + ?Sized>(
    ctx: &Ctx,
    energy: &E,
    vocab: &AtomVocab,
    count: usize,
    training_keys: Option<&Path>,
    traces: bool,
) -> Result<(), CliError> {
    let chain_cfg = ctx.cfg.langevin();
    let results = pipeline::generate(energy, count, &chain_cfg, vocab)?;

    let mut molecules: Vec<GeneratedMolecule> = Vec::with_capacity(results.len());
    let mut failed = 0usize;
    let mut first_failure: Option<CliError> = None;
    for r in results {
        match r {
            Ok(m) => molecules.push(m),
            Err(e) => {
                failed += 1;
                first_failure.get_or_insert_with(|| e.into());
            }
        }
    }
    if molecules.is_empty() {
        return Err(first_failure.expect("count >= 1, so an empty set implies failures"));
    }

    let out = ctx.out_dir()?;
    let jsonl = out.join("generated.jsonl");
    write_generated_jsonl(File::create(&jsonl)?, &molecules, vocab)?;
    if traces {
        fs::write(out.join("traces.csv"), traces_csv(&molecules))?;
    }

    let keys = load_training_keys(training_keys)?;
    let metrics = evaluate_set(&molecules, &keys, vocab)?;
    fs::write(out.join("metrics.json"), metrics_json(&metrics))?;
    fs::write(out.join("metrics.csv"), metrics_csv(&metrics))?;

    println!("wrote {} molecules to {}", molecules.len(), jsonl.display());
    println!(
        "validity {:.4}  uniqueness {:.4}  novelty {:.4}",
        metrics.validity, metrics.uniqueness, metrics.novelty
    );
    if let Some(e) = first_failure {
        eprintln!("{failed} of {count} chains aborted; first failure: {e}");
        return Err(e);
    }
    Ok(())
}
