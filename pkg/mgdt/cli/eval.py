"""
# Mgdt > CLI > Eval

Evaluate a trained model by playing the games with it
"""
import logging
from pathlib import Path
from typing import Optional
import click
from ..__context import get_context
from ..config import fingerprint, save_resolved
from ..dataset import load_dataset
from ..errors import MgdtConfigError, MgdtPrerequisiteError
from ..evaluation import best_demo_score, evaluate as run_evaluation
from ..inference import SamplerMode
from ..runs import checkpoint_layout, latest_model, load_model, run_dir


log = logging.getLogger(__name__)


@click.command("eval")
@click.option(
    "--mode",
    type=click.Choice([m.value for m in SamplerMode]),
    default=None,
    help="How actions are chosen. Defaults to the configured sampler mode",
)
@click.option(
    "--run",
    default=None,
    help="Run whose latest checkpoint is evaluated. Defaults to 'bc' in bc "
    "mode and 'dt' otherwise",
)
@click.option(
    "--checkpoint",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Checkpoint file to evaluate, instead of a run",
)
@click.option(
    "-g",
    "--game",
    "game_ids",
    multiple=True,
    help="Game to play. Defaults to every training game",
)
def evaluate(
    mode: Optional[str] = None,
    run: Optional[str] = None,
    checkpoint: Optional[Path] = None,
    game_ids: tuple[str, ...] = (),
):
    """
    Evaluate a trained model
    """
    ctx = get_context()
    config = ctx.config
    cfg = config.sampler_config(mode)
    if checkpoint is not None:
        model, ckpt = load_model(checkpoint)
        label = str(checkpoint)
        out = checkpoint.parent.parent / "eval"
    else:
        run = run or ("bc" if cfg.mode == SamplerMode.BC else "dt")
        model, ckpt = latest_model(ctx, run)
        label = f"{run}@{ckpt.step}"
        out = run_dir(ctx, run) / "eval"
    layout = checkpoint_layout(ckpt)
    if layout != cfg.layout:
        raise MgdtConfigError(
            f"A {layout.name} model can't be evaluated in "
            f"'{cfg.mode.value}' mode"
        )

    targets = list(game_ids) or config.games.train
    try:
        dataset = load_dataset(ctx.data_dir, targets)
        best_demo: Optional[dict[str, float]] = {
            g: best_demo_score(dataset, g) for g in targets}
    except MgdtPrerequisiteError as e:
        log.warning(f"Skipping comparison with the demonstrations: {e}")
        best_demo = None

    report = run_evaluation(
        model,
        targets,
        cfg,
        config.eval.trials,
        config.seed,
        config.model.window,
        label=label,
        fingerprint=fingerprint(config),
        best_demo=best_demo,
        progress=ctx.progress,
    )
    save_resolved(config, out)
    report.write(out)
    click.echo(report.to_table())
