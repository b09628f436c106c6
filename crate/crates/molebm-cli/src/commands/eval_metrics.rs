use std::fs::{self, File};
use std::io::BufReader;

use molebm::graph::canonical_key;
use molebm::io::{metrics_csv, metrics_json, read_generated_jsonl};
use molebm::metrics::evaluate_set;

use crate::commands::{load_training_keys, Ctx};
use crate::error::CliError;
use crate::EvalMetricsArgs;

pub fn run(ctx: &Ctx, args: &EvalMetricsArgs) -> Result<(), CliError> {
    let vocab = &ctx.cfg.vocab;
    let mut molecules =
        read_generated_jsonl(BufReader::new(File::open(&args.generated)?), vocab)?;
    // Keys are recomputed from the graphs rather than trusted from the
    // file, so hand-edited records cannot inflate uniqueness or novelty.
    for m in &mut molecules {
        m.key = if m.graph.real_atom_count() == 0 {
            None
        } else {
            Some(canonical_key(&m.graph, vocab)?)
        };
    }

    let keys = load_training_keys(args.training_keys.as_deref())?;
    let metrics = evaluate_set(&molecules, &keys, vocab)?;
    print!("{}", metrics_json(&metrics));
    if ctx.explicit_out().is_some() {
        let out = ctx.out_dir()?;
        fs::write(out.join("metrics.json"), metrics_json(&metrics))?;
        fs::write(out.join("metrics.csv"), metrics_csv(&metrics))?;
    }
    Ok(())
}
