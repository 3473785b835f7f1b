"""
# Mgdt > CLI > Finetune

Fine-tune a pretrained model on held-out games, comparing it against a model
trained from scratch on the same data
"""
from typing import Optional
import click
from ..__context import get_context
from ..config import fingerprint, save_resolved
from ..dataset import Manifest, load_dataset
from ..errors import MgdtConfigError
from ..evaluation import EvalReport, run_finetune_protocol, write_reports
from ..runs import checkpoint_layout, claim_output, latest_model
from ..sequence import Layout


@click.command()
@click.option(
    "-g",
    "--game",
    "game_ids",
    multiple=True,
    help="Held-out game to fine-tune on. Defaults to every held-out game",
)
@click.option(
    "--run",
    default="dt",
    show_default=True,
    help="Pretraining run whose latest checkpoint is fine-tuned",
)
@click.option(
    "--name",
    default=None,
    help="Name of the output run. Defaults to 'finetune-<run>'",
)
def finetune(
    game_ids: tuple[str, ...] = (),
    run: str = "dt",
    name: Optional[str] = None,
):
    """
    Fine-tune a pretrained model on held-out games
    """
    ctx = get_context()
    config = ctx.config
    targets = list(game_ids) or config.games.held_out
    if not targets:
        raise MgdtConfigError("No held-out games to fine-tune on")
    model, ckpt = latest_model(ctx, run)
    if checkpoint_layout(ckpt) != Layout.DT:
        raise MgdtConfigError(
            f"Run '{run}' isn't a decision transformer, so it can't be "
            f"fine-tuned with return conditioning"
        )

    out = ctx.runs_dir / (name or f"finetune-{run}")
    claim_output(out, ctx.force)
    save_resolved(config, out)
    manifest = Manifest.load(ctx.data_dir)
    trained_on = ckpt.extra.get("games", config.games.train)
    reports: list[EvalReport] = []
    for game_id in targets:
        finetuned, scratch = run_finetune_protocol(
            model,
            game_id,
            load_dataset(ctx.data_dir, [game_id]),
            config.finetune_hyper(),
            config.finetune_settings(),
            config.sampler_config(),
            config.eval.trials,
            manifest=manifest,
            trained_on=trained_on,
            out_dir=out / game_id,
            progress=ctx.progress,
        )
        for report in (finetuned, scratch):
            report.fingerprint = fingerprint(config)
            reports.append(report)
            click.echo(report.to_table())
    write_reports(out, reports)
