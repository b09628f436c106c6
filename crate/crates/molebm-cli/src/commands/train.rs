use std::fs;
use std::path::Path;

use molebm::energy::save_checkpoint;
use molebm::io::{epoch_csv, read_dataset};
use molebm::training::fit;
use molebm::EnergyModel;

use crate::commands::Ctx;
use crate::error::CliError;

pub fn run(ctx: &Ctx, data: &Path, goal: bool) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let mut train_cfg = cfg.train;
    if goal {
        train_cfg.goal_directed = true;
    }

    let dataset = read_dataset(data, &cfg.vocab, cfg.dims)?;
    eprintln!("loaded {} molecules from {}", dataset.len(), data.display());

    let mut model =
        EnergyModel::init(cfg.dims, cfg.vocab.clone(), cfg.layers, cfg.width, train_cfg.seed)?;
    let total = train_cfg.epochs;
    let report = fit(
        &mut model,
        &dataset.examples,
        &train_cfg,
        |_, _| {},
        |ep, _| {
            eprintln!(
                "epoch {}/{}: E+ {:.4}  E- {:.4}  loss {:.4}  ({:.1}s)",
                ep.epoch, total, ep.mean_energy_pos, ep.mean_energy_neg, ep.total, ep.wall_seconds
            );
            Ok(())
        },
    )?;

    // Only deterministic values here; checkpoints must be reproducible.
    model.set_metadata("goal_directed", if train_cfg.goal_directed { "true" } else { "false" });
    model.set_metadata("train_seed", &train_cfg.seed.to_string());
    model.set_metadata("epochs", &report.epochs.len().to_string());
    if let Some(stats) = report.property_stats {
        model.set_metadata("property_min", &stats.min.to_string());
        model.set_metadata("property_max", &stats.max.to_string());
    }

    let out = ctx.out_dir()?;
    let ckpt = out.join("model.gebm");
    save_checkpoint(&model, &ckpt)?;
    fs::write(out.join("epochs.csv"), epoch_csv(&report.epochs))?;
    println!("wrote {} and {}", ckpt.display(), out.join("epochs.csv").display());
    Ok(())
}
