use std::fs::File;
use std::io::{self, BufRead};

use molebm::graph::{canonical_key, AtomVocab, CanonicalKey, Dims};
use molebm::io::{parse_smiles_lite, write_keys};

use crate::commands::Ctx;
use crate::error::CliError;

pub fn run(ctx: &Ctx) -> Result<(), CliError> {
    let vocab = &ctx.cfg.vocab;
    let mut keys: Vec<CanonicalKey> = Vec::new();
    let mut failures = 0usize;
    for (i, line) in io::stdin().lock().lines().enumerate() {
        let text = line?;
        let text = text.trim();
        if text.is_empty() {
            continue;
        }
        match key_for(text, vocab) {
            Ok(key) => {
                println!("{}", key.as_str());
                keys.push(key);
            }
            Err(message) => {
                eprintln!("line {}: {message}", i + 1);
                failures += 1;
            }
        }
    }
    if ctx.explicit_out().is_some() {
        let out = ctx.out_dir()?;
        write_keys(File::create(out.join("keys.txt"))?, &keys)?;
    }
    if failures > 0 {
        return Err(CliError::Data(format!("{failures} line(s) failed to canonicalize")));
    }
    Ok(())
}

fn key_for(text: &str, vocab: &AtomVocab) -> Result<CanonicalKey, String> {
    let record = parse_smiles_lite(text).map_err(|e| e.to_string())?;
    // Size the layout to the molecule; keys ignore padding.
    let dims = Dims::new(record.atoms.len(), vocab.len(), 3).map_err(|e| e.to_string())?;
    let graph = record.encode(vocab, dims).map_err(|e| e.to_string())?;
    canonical_key(&graph, vocab).map_err(|e| e.to_string())
}
