"""
# Mgdt > Runs

Management of the training runs stored under `<data dir>/runs/<name>`, shared
by the commands and the experiments.

Each run directory holds its `resolved_config.yaml`, its `train_log.jsonl`
and a `checkpoints/` directory.
"""
import logging
import shutil
from pathlib import Path
from typing import Optional
from .__context import RunContext
from .checkpoint import Checkpoint, load_checkpoint
from .config import save_resolved
from .dataset import Dataset, Manifest, filter_expert, load_dataset
from .errors import MgdtConfigError, MgdtInputError, MgdtPrerequisiteError
from .evaluation import check_leakage
from .model import Model
from .sequence import Layout
from .training import TrainResult, latest_checkpoint, train


log = logging.getLogger(__name__)


def run_name(layout: Layout, expert: bool = False) -> str:
    """
    Name of the run of the given model kind trained on the configured games
    """
    return layout.name.lower() + ("-expert" if expert else "")


def run_dir(ctx: RunContext, name: str) -> Path:
    return ctx.runs_dir / name


def claim_output(path: Path, force: bool) -> None:
    """
    Make sure that an output directory can be written

    ## Raises

    * `MgdtInputError`: the directory already has contents and `force` isn't
      set
    """
    if path.exists() and any(path.iterdir()):
        if not force:
            raise MgdtInputError(
                f"'{path}' already exists. Use --force to overwrite it")
        log.warning(f"Overwriting '{path}'")
        shutil.rmtree(path)


def pretraining_data(ctx: RunContext, expert: bool = False) -> Dataset:
    """
    Episodes of the configured training games, checking that no held-out game
    leaked into them
    """
    config = ctx.config
    manifest = Manifest.load(ctx.data_dir)
    for game_id in config.games.held_out:
        check_leakage(game_id, manifest)
    dataset = load_dataset(ctx.data_dir, config.games.train)
    if expert:
        dataset = filter_expert(dataset, config.data.expert_fraction)
    return dataset


def load_model(path: 'Path | str') -> tuple[Model, Checkpoint]:
    ckpt = load_checkpoint(path)
    return Model(ckpt.config, ckpt.params), ckpt


def checkpoint_layout(ckpt: Checkpoint) -> Layout:
    try:
        return Layout[ckpt.extra.get("layout", Layout.DT.name)]
    except KeyError:
        raise MgdtConfigError(
            f"Checkpoint has unknown layout {ckpt.extra['layout']!r}"
        ) from None


def latest_model(ctx: RunContext, name: str) -> tuple[Model, Checkpoint]:
    """
    The most advanced checkpoint of a run

    ## Raises

    * `MgdtPrerequisiteError`: the run has no checkpoints
    """
    path = latest_checkpoint(run_dir(ctx, name))
    if path is None:
        raise MgdtPrerequisiteError([run_dir(ctx, name) / "checkpoints"])
    return load_model(path)


def train_run(
    ctx: RunContext,
    name: str,
    layout: Layout = Layout.DT,
    expert: bool = False,
    preset: Optional[str] = None,
    resume: bool = False,
) -> TrainResult:
    """
    Train a model on the configured games, writing the run to its directory
    """
    config = ctx.config
    out = run_dir(ctx, name)
    previous = latest_checkpoint(out) if resume else None
    if previous is None:
        claim_output(out, ctx.force)
    dataset = pretraining_data(ctx, expert)
    save_resolved(config, out)
    return train(
        dataset,
        config.model_config(preset),
        config.lamb_hyper(),
        config.train_settings(layout),
        out_dir=out,
        resume=load_checkpoint(previous) if previous is not None else None,
        extra={"games": list(config.games.train), "expert": expert},
        progress=ctx.progress,
    )


def ensure_run(
    ctx: RunContext,
    name: str,
    layout: Layout = Layout.DT,
    expert: bool = False,
    preset: Optional[str] = None,
) -> Model:
    """
    The fully trained model of a run, training (or finishing training) it
    first if needed
    """
    steps = ctx.config.train_settings(layout).steps
    path = latest_checkpoint(run_dir(ctx, name))
    if path is not None:
        model, ckpt = load_model(path)
        if ckpt.step >= steps:
            log.info(f"Reusing run '{name}' at step {ckpt.step}")
            return model
    log.info(f"Training run '{name}'")
    return train_run(ctx, name, layout, expert, preset, resume=True).model
