"""
# Mgdt > Training

The training loop: sample a batch, take the gradient of the next-token loss,
clip it and apply a LAMB step.

Training is resumable. A checkpoint holds the parameters, the optimizer
moments and the state of the batch sampler's random generator, so resuming
from step `k` and training to step `k + n` gives the same parameters as
training to `k + n` in one go.
"""
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence
import numpy as np
import torch
from tqdm import tqdm
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .dataset import BatchSampler, BatchSpec
from .errors import MgdtConfigError, MgdtNumericError
from .lamb import (
    LambHyper,
    OptimState,
    clip_global_norm,
    global_norm,
    lamb_step,
)
from .model import BatchTensors, Model, ModelConfig, backward, loss_by_kind
from .sequence import Layout, Trajectory, WindowBatch, collate
from .tokens import Codec


log = logging.getLogger(__name__)


LOG_NAME = "train_log.jsonl"
CHECKPOINT_DIR = "checkpoints"


@dataclass(frozen=True)
class TrainSettings:
    steps: int = 2000
    batch_size: int = 32
    window: int = 4
    augment: bool = True
    layout: Layout = Layout.DT
    inclusive_returns: bool = False
    weights: Optional[dict[str, float]] = None
    seed: int = 0
    log_every: int = 50
    checkpoint_every: int = 500

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise MgdtConfigError(
                f"Number of steps can't be negative, got {self.steps}")
        if self.log_every < 1 or self.checkpoint_every < 1:
            raise MgdtConfigError(
                "Logging and checkpoint intervals must be positive")

    def batch_spec(self) -> BatchSpec:
        return BatchSpec(
            batch_size=self.batch_size,
            window=self.window,
            augment=self.augment,
            seed=self.seed,
            weights=self.weights,
            layout=self.layout,
            inclusive_returns=self.inclusive_returns,
        )


@dataclass
class LogRow:
    step: int
    loss: float
    lr: float
    grad_norm: float
    per_kind: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class TrainResult:
    model: Model
    optim: OptimState
    rows: list[LogRow]
    checkpoints: list[Path]


def checkpoint_path(out_dir: Path, step: int) -> Path:
    return out_dir / CHECKPOINT_DIR / f"step_{step:08d}.ckpt"


def latest_checkpoint(out_dir: 'Path | str') -> Optional[Path]:
    """
    The most advanced checkpoint of a training run, if there is one
    """
    found = sorted((Path(out_dir) / CHECKPOINT_DIR).glob("step_*.ckpt"))
    return found[-1] if found else None


def dump_batch(out_dir: Path, step: int, batch: WindowBatch) -> Path:
    """
    Save a batch which made training fail, for inspection
    """
    path = out_dir / f"failed_batch_{step:08d}.npz"
    out_dir.mkdir(parents=True, exist_ok=True)
    np.savez(path, **{
        name: getattr(batch, name)
        for name in ("kinds", "patches", "patch_index", "token_ids",
                     "targets", "loss_weights", "timesteps", "masks")
    })
    return path


def _save(
    out_dir: Path,
    model: Model,
    optim: OptimState,
    rng: np.random.Generator,
    settings: TrainSettings,
    extra: dict[str, Any],
) -> Path:
    path = checkpoint_path(out_dir, optim.step)
    save_checkpoint(path, Checkpoint(
        config=model.config,
        params=model.params,
        optim=optim,
        step=optim.step,
        numpy_rng=rng.bit_generator.state,
        extra=extra | {"layout": settings.layout.name},
    ))
    return path


def train(
    dataset: Sequence[Trajectory],
    config: ModelConfig,
    hyper: LambHyper,
    settings: TrainSettings,
    out_dir: Optional['Path | str'] = None,
    init: Optional[Model] = None,
    resume: Optional[Checkpoint] = None,
    codec: Codec = Codec(),
    extra: Optional[dict[str, Any]] = None,
    progress: Optional[bool] = None,
) -> TrainResult:
    """
    Train a model for `settings.steps` optimizer steps in total.

    ## Args

    * `out_dir`: where to write the log and checkpoints. Nothing is written
      if it's `None`.
    * `init`: parameters to start from (for fine-tuning). Defaults to a
      fresh initialization seeded with `settings.seed`.
    * `resume`: continue an interrupted run from its checkpoint
    * `extra`: metadata stored in checkpoints, such as the games trained on

    ## Raises

    * `MgdtNumericError`: the loss or gradient became non-finite. The batch
      responsible is dumped to `out_dir`.
    """
    extra = extra or {}
    out = Path(out_dir) if out_dir is not None else None
    rng = np.random.default_rng(settings.seed)
    if resume is not None:
        if resume.config != config:
            raise MgdtConfigError(
                f"Checkpoint was trained with {resume.config}, which doesn't "
                f"match {config}"
            )
        model = Model(resume.config, resume.params)
        optim = resume.optim or OptimState.init(model.params, hyper)
        if resume.numpy_rng is not None:
            rng.bit_generator.state = resume.numpy_rng
        log.info(f"Resuming training from step {optim.step}")
    else:
        model = init if init is not None else Model.init(config, settings.seed)
        optim = OptimState.init(model.params, hyper)

    sampler = BatchSampler(dataset, settings.batch_spec(), codec)
    rows: list[LogRow] = []
    checkpoints: list[Path] = []
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    bar = tqdm(
        total=settings.steps,
        initial=optim.step,
        desc="train",
        disable=None if progress is None else not progress,
    )
    with bar:
        while optim.step < settings.steps:
            step = optim.step
            batch = collate(sampler.sample(rng))
            try:
                value, grads = backward(
                    model.params, batch, model.config.n_heads, batch_id=step)
                norm = global_norm(grads)
                grads = clip_global_norm(grads, optim.hyper.clip_norm)
            except MgdtNumericError:
                if out is not None:
                    path = dump_batch(out, step, batch)
                    log.exception(
                        f"Training diverged at step {step}, batch saved to "
                        f"'{path}'"
                    )
                raise
            row: Optional[LogRow] = None
            if step % settings.log_every == 0 or step + 1 == settings.steps:
                per_kind = _per_kind(model, batch, codec)
                row = LogRow(step, value, optim.lr, norm, per_kind)
            params, optim = lamb_step(model.params, grads, optim)
            model = Model(model.config, params)

            if row is not None:
                rows.append(row)
                log.debug(f"Training: {row.to_json()}")
                bar.set_postfix(loss=f"{value:.4f}")
                if out is not None:
                    with open(out / LOG_NAME, "a") as f:
                        f.write(row.to_json() + "\n")
            if out is not None and (
                optim.step % settings.checkpoint_every == 0
                or optim.step == settings.steps
            ):
                checkpoints.append(
                    _save(out, model, optim, rng, settings, extra))
            bar.update()

    return TrainResult(model, optim, rows, checkpoints)


def _per_kind(
    model: Model,
    batch: 'WindowBatch | BatchTensors',
    codec: Codec,
) -> dict[str, float]:
    with torch.no_grad():
        return loss_by_kind(model(batch), batch, codec)


def resume_or_none(out_dir: 'Path | str') -> Optional[Checkpoint]:
    """
    The latest checkpoint of a run, loaded, if the run has any
    """
    path = latest_checkpoint(out_dir)
    return load_checkpoint(path) if path is not None else None
