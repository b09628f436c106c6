use molebm::energy::load_checkpoint;
use molebm::pipeline::compose;

use crate::commands::{sample_and_write, Ctx};
use crate::error::{usage, CliError};
use crate::{ComposeGenerateArgs, GenerateArgs};

pub fn run(ctx: &Ctx, args: &GenerateArgs) -> Result<(), CliError> {
    let model = load_checkpoint(&args.checkpoint)?;
    let vocab = model.vocab().clone();
    let count = args.sample.count.unwrap_or(ctx.cfg.count);
    sample_and_write(
        ctx,
        &model,
        &vocab,
        count,
        args.sample.training_keys.as_deref(),
        args.sample.traces,
    )
}

pub fn run_compose(ctx: &Ctx, args: &ComposeGenerateArgs) -> Result<(), CliError> {
    if args.checkpoints.len() < 2 {
        return Err(usage(format!(
            "compose-generate needs at least two --checkpoint files, got {}",
            args.checkpoints.len()
        )));
    }
    let models = args
        .checkpoints
        .iter()
        .map(load_checkpoint)
        .collect::<Result<Vec<_>, _>>()?;
    let vocab = models[0].vocab().clone();
    let composite = compose(models)?;
    let count = args.sample.count.unwrap_or(ctx.cfg.count);
    sample_and_write(
        ctx,
        &composite,
        &vocab,
        count,
        args.sample.training_keys.as_deref(),
        args.sample.traces,
    )
}
