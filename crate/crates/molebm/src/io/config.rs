//! Flat `key = value` run configuration. One schema covers training,
//! sampling, and evaluation settings; unknown keys are errors so typos
//! surface instead of silently using defaults. Keys apply in file order,
//! and command-line overrides reuse the same `apply` path afterwards.

use std::fs;
use std::path::Path;

use crate::graph::{AtomVocab, Dims};
use crate::io::IoError;
use crate::training::TrainConfig;

/// Everything a run needs beyond file paths. `dims` and `vocab` come from a
/// preset (`qm9` or `zinc`), with `n` overridable for padding experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dims: Dims,
    pub vocab: AtomVocab,
    pub train: TrainConfig,
    /// Message-passing layers in the energy network.
    pub layers: usize,
    /// Hidden width of the energy network.
    pub width: usize,
    /// Generation sample count.
    pub count: usize,
    /// Chains started per seed molecule during optimization.
    pub chains_per_seed: usize,
    /// Similarity thresholds for constrained evaluation.
    pub deltas: Vec<f64>,
    /// Property scorer name, e.g. `atom-fraction:C`.
    pub property: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut cfg = RunConfig {
            dims: Dims::new(9, 4, 3).expect("qm9 layout is valid"),
            vocab: AtomVocab::qm9(),
            train: TrainConfig::default(),
            layers: 3,
            width: 64,
            count: 1000,
            chains_per_seed: 1,
            deltas: vec![0.0, 0.2, 0.4, 0.6],
            property: None,
        };
        cfg.train.langevin.t = cfg.train.t;
        cfg
    }
}

impl RunConfig {
    /// Load a config file: `key = value` lines, `#` comments, blank lines
    /// ignored.
    pub fn load(path: &Path) -> Result<Self, IoError> {
        let mut cfg = RunConfig::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), IoError> {
        let text = fs::read_to_string(path)?;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let stripped = raw.split('#').next().unwrap_or_default().trim();
            if stripped.is_empty() {
                continue;
            }
            let Some((key, value)) = stripped.split_once('=') else {
                return Err(IoError::Parse {
                    line,
                    message: format!("expected key = value, got {stripped:?}"),
                });
            };
            self.apply(key.trim(), value.trim()).map_err(|message| IoError::Parse {
                line,
                message,
            })?;
        }
        Ok(())
    }

    /// Set one key. Errors are plain strings so callers can attach their
    /// own location (config line or CLI flag name).
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "preset" => match value {
                "qm9" => {
                    self.dims = Dims::new(9, 4, 3).expect("qm9 layout is valid");
                    self.vocab = AtomVocab::qm9();
                }
                "zinc" => {
                    self.dims = Dims::new(38, 9, 3).expect("zinc layout is valid");
                    self.vocab = AtomVocab::zinc();
                }
                other => return Err(format!("unknown preset {other:?} (expected qm9 or zinc)")),
            },
            "n" => {
                let n = parse::<usize>(key, value)?;
                self.dims = Dims::new(n, self.dims.b, self.dims.c)
                    .map_err(|e| format!("invalid n: {e}"))?;
            }
            "t" => {
                self.train.t = parse(key, value)?;
                self.train.langevin.t = self.train.t;
            }
            "alpha" => self.train.alpha = parse(key, value)?,
            "lr" => self.train.lr = parse(key, value)?,
            "batch" => self.train.batch = parse(key, value)?,
            "epochs" => self.train.epochs = parse(key, value)?,
            "goal_directed" => self.train.goal_directed = parse(key, value)?,
            "seed" => self.train.seed = parse(key, value)?,
            "steps" => self.train.langevin.steps = parse(key, value)?,
            "step_size" => self.train.langevin.step_size = parse(key, value)?,
            "noise_std" => self.train.langevin.noise_std = parse(key, value)?,
            "clip" => self.train.langevin.clip = parse(key, value)?,
            "layers" => self.layers = parse_nonzero(key, value)?,
            "width" => self.width = parse_nonzero(key, value)?,
            "count" => self.count = parse(key, value)?,
            "chains_per_seed" => self.chains_per_seed = parse(key, value)?,
            "deltas" => {
                let mut deltas = Vec::new();
                for part in value.split(',') {
                    deltas.push(parse::<f64>(key, part.trim())?);
                }
                if deltas.is_empty() {
                    return Err("deltas needs at least one threshold".into());
                }
                self.deltas = deltas;
            }
            "property" => self.property = Some(value.to_string()),
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Sampler settings for generation, sharing the training seed and `t`.
    pub fn langevin(&self) -> crate::langevin::LangevinConfig {
        self.train.chain_config()
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("invalid value {value:?} for {key}"))
}

fn parse_nonzero(key: &str, value: &str) -> Result<usize, String> {
    match parse::<usize>(key, value)? {
        0 => Err(format!("{key} must be at least 1")),
        v => Ok(v),
    }
}
