use std::fs;

use molebm::energy::load_checkpoint;
use molebm::io::{constrained_csv, read_dataset};
use molebm::metrics::{constrained_eval, ConstrainedPair};
use molebm::pipeline::{optimize_from_indexed, OptimizedMolecule, PipelineError};
use rayon::prelude::*;

use crate::commands::Ctx;
use crate::error::{usage, CliError};
use crate::scorer::Scorer;
use crate::OptimizeArgs;

pub fn run(ctx: &Ctx, args: &OptimizeArgs) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let model = load_checkpoint(&args.checkpoint)?;
    let vocab = model.vocab().clone();
    let seeds = read_dataset(&args.seeds, &vocab, model.dims())?;

    let scorer_name = args
        .property
        .clone()
        .or_else(|| cfg.property.clone())
        .ok_or_else(|| usage("optimize needs --property (or `property` in the config)"))?;
    let scorer = Scorer::parse(&scorer_name, &vocab)?;

    let deltas = args.delta.clone().unwrap_or_else(|| cfg.deltas.clone());
    for &d in &deltas {
        if !(0.0..=1.0).contains(&d) {
            return Err(usage(format!("delta {d} is outside [0, 1]")));
        }
    }
    let chains = args.chains_per_seed.unwrap_or(cfg.chains_per_seed);
    if chains == 0 {
        return Err(usage("chains-per-seed must be at least 1"));
    }

    // One flat job list keeps chain indices stable however rayon schedules
    // the work: seed i, chain c maps to index i * chains + c.
    let chain_cfg = cfg.langevin();
    let jobs: Vec<(usize, u64)> = (0..seeds.len())
        .flat_map(|i| (0..chains).map(move |c| (i, (i * chains + c) as u64)))
        .collect();
    let outcomes: Vec<(usize, OptimizedMolecule)> = jobs
        .par_iter()
        .map(|&(i, chain)| {
            optimize_from_indexed(&model, &seeds.examples[i].graph, &chain_cfg, &vocab, chain)
                .map(|o| (i, o))
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;

    let seed_scores: Vec<f64> =
        seeds.examples.iter().map(|ex| scorer.score(&ex.graph, &vocab)).collect();
    let mut per_seed: Vec<Vec<(OptimizedMolecule, f64)>> = vec![Vec::new(); seeds.len()];
    for (i, o) in outcomes {
        let score = scorer.score(&o.candidate.graph, &vocab);
        per_seed[i].push((o, score));
    }

    let mut reports = Vec::with_capacity(deltas.len());
    for &delta in &deltas {
        let pairs: Vec<ConstrainedPair> = per_seed
            .iter()
            .enumerate()
            .map(|(i, candidates)| {
                let (chosen, score) = select(candidates, delta);
                ConstrainedPair {
                    seed: seeds.examples[i].graph.clone(),
                    candidate: chosen.candidate.graph.clone(),
                    property_seed: seed_scores[i],
                    property_candidate: *score,
                }
            })
            .collect();
        reports.push(constrained_eval(&pairs, delta)?);
    }

    let out = ctx.out_dir()?;
    let path = out.join("constrained.csv");
    fs::write(&path, constrained_csv(&reports))?;
    for r in &reports {
        println!("delta {:.2}: success rate {:.3}", r.delta, r.success_rate);
    }
    println!("wrote {}", path.display());
    Ok(())
}

/// Best property among candidates meeting the similarity bar; when none
/// qualifies, the most similar candidate (it counts as a failure either
/// way). Ties keep the lowest chain index.
fn select(candidates: &[(OptimizedMolecule, f64)], delta: f64) -> &(OptimizedMolecule, f64) {
    let mut best: Option<&(OptimizedMolecule, f64)> = None;
    for c in candidates.iter().filter(|(o, _)| o.similarity >= delta) {
        if best.is_none_or(|b| c.1 > b.1) {
            best = Some(c);
        }
    }
    if let Some(b) = best {
        return b;
    }
    let mut fallback = &candidates[0];
    for c in &candidates[1..] {
        if c.0.similarity > fallback.0.similarity {
            fallback = c;
        }
    }
    fallback
}
