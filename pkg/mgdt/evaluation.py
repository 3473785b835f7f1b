"""
# Mgdt > Evaluation

Rolling out models in the games, normalizing and aggregating their scores,
and the fine-tuning protocol.

Scores are normalized between the mean score of a random policy (0) and that
of the hand-written optimal policy (1).
"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence
import numpy as np
import torch
from tqdm import tqdm
from . import games
from .dataset import Manifest, by_game, subsample_steps
from .errors import MgdtConfigError, MgdtInputError, MgdtProtocolError
from .inference import InferenceContext, SamplerConfig, choose_action
from .lamb import LambHyper
from .model import Model
from .sequence import Trajectory
from .tokens import Codec
from .training import TrainSettings, train


log = logging.getLogger(__name__)


DEFAULT_TRIALS = 16

REPORT_JSONL = "report.jsonl"
REPORT_TABLE = "report.txt"


def check_geometry(model: Model, game_id: str, codec: Codec) -> None:
    """
    Make sure that a model can play a game

    ## Raises

    * `MgdtConfigError`: the observations of the game don't match the model
    """
    spec = games.get_spec(game_id)
    grid = codec.grid
    config = model.config
    if spec.image_shape != grid.image_shape:
        raise MgdtConfigError(
            f"Game '{game_id}' has observations of shape {spec.image_shape}, "
            f"but the codec expects {grid.image_shape}"
        )
    if (config.patch_dim, config.num_patches) != (
            grid.patch_dim, grid.num_patches):
        raise MgdtConfigError(
            f"Model expects {config.num_patches} patches of "
            f"{config.patch_dim} values, but the codec gives "
            f"{grid.num_patches} patches of {grid.patch_dim} values"
        )
    if config.vocab_size != codec.vocab.size:
        raise MgdtConfigError(
            f"Model has a vocabulary of {config.vocab_size} tokens, the "
            f"codec uses {codec.vocab.size}"
        )


def rollout(
    model: Model,
    game_id: str,
    cfg: SamplerConfig = SamplerConfig(),
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    window: int = 4,
    codec: Codec = Codec(),
    progress: Optional[bool] = None,
) -> list[float]:
    """
    Play `n_trials` episodes of a game with a model

    ## Returns

    * the undiscounted sum of rewards of every episode
    """
    check_geometry(model, game_id, codec)
    if n_trials < 1:
        raise MgdtInputError(f"n_trials must be positive, got {n_trials}")
    children = np.random.SeedSequence([seed]).spawn(n_trials)
    scores = []
    for child in tqdm(
        children,
        desc=f"eval {game_id}",
        disable=None if progress is None else not progress,
        leave=False,
    ):
        episode_seed, torch_seed = (int(s) for s in child.generate_state(2))
        generator = torch.Generator().manual_seed(torch_seed)
        ctx = InferenceContext(window, codec, cfg.layout)
        state, obs = games.reset(game_id, episode_seed)
        score = 0.0
        done = False
        while not done:
            ctx.observe(obs)
            action, _ = choose_action(model, ctx, cfg, generator)
            state, obs, reward, done = games.step(state, action)
            ctx.reward(reward)
            score += reward
        scores.append(score)
    log.info(
        f"Rolled out {n_trials} episodes of '{game_id}': mean score "
        f"{np.mean(scores):.2f}"
    )
    return scores


def normalized_score(score: float, random: float, reference: float) -> float:
    """
    Affine normalization sending `random` to 0 and `reference` to 1
    """
    if reference == random:
        raise MgdtConfigError(
            f"Reference and random scores are both {reference}, so scores "
            f"can't be normalized"
        )
    return (score - random) / (reference - random)


def iqm(scores: Sequence[float]) -> float:
    """
    Inter-quartile mean: the mean of the middle half of the sorted values.

    When the number of values isn't a multiple of four, values straddling a
    quartile count in proportion to how much of them lies within the middle
    half.
    """
    n = len(scores)
    if n < 4:
        raise MgdtInputError(f"IQM needs at least 4 values, got {n}")
    values = np.sort(np.asarray(scores, dtype=np.float64))
    # Value i covers [i, i + 1); keep its overlap with [n/4, 3n/4)
    lower = np.arange(n)
    weights = np.clip(
        np.minimum(lower + 1, 3 * n / 4) - np.maximum(lower, n / 4), 0, 1)
    return float((weights * values).sum() / (n / 2))


def median(scores: Sequence[float]) -> float:
    if not len(scores):
        raise MgdtInputError("Can't take the median of no values")
    return float(np.median(scores))


def top3_improvement(
    rollout_scores: Sequence[float],
    best_demo_score: float,
) -> float:
    """
    Percentage by which the mean of the 3 best rollouts beats the best episode
    of the training data. Returns 0 when there's no improvement.
    """
    if len(rollout_scores) < 3:
        raise MgdtInputError(
            f"Need at least 3 rollouts, got {len(rollout_scores)}")
    top3 = float(np.mean(sorted(rollout_scores)[-3:]))
    if best_demo_score > 0:
        denominator = best_demo_score
    else:
        denominator = max(abs(best_demo_score), 1.0)
    return max(0.0, 100 * (top3 - best_demo_score) / denominator)


def best_demo_score(dataset: Sequence[Trajectory], game_id: str) -> float:
    """
    Best episodic return of a game within a dataset
    """
    returns = [t.episode_return for t in dataset if t.game_id == game_id]
    if not returns:
        raise MgdtInputError(f"The dataset has no episodes of '{game_id}'")
    return max(returns)


@dataclass
class GameResult:
    scores: list[float]
    mean: float
    std: float
    normalized: float
    random_score: float
    reference_score: float
    top3_improvement: Optional[float] = None


@dataclass
class EvalReport:
    label: str
    mode: str
    seed: int
    fingerprint: str
    """
    Hash of the resolved configuration the report was produced with
    """
    games: dict[str, GameResult] = field(default_factory=dict)
    iqm: float = math.nan
    """
    IQM of the normalized scores of every trial of every game
    """
    median: float = math.nan
    """
    Median of the normalized mean scores of the games
    """

    @classmethod
    def from_scores(
        cls,
        scores: dict[str, list[float]],
        label: str = "",
        mode: str = "",
        seed: int = 0,
        fingerprint: str = "",
        best_demo: Optional[dict[str, float]] = None,
    ) -> 'EvalReport':
        """
        Build a report from raw rollout scores, computing every aggregate
        """
        if not scores:
            raise MgdtInputError("A report needs the scores of a game")
        report = cls(label, mode, seed, fingerprint)
        pooled = []
        for game_id, raw in scores.items():
            spec = games.get_spec(game_id)
            random, reference = spec.random_score, spec.reference_score
            normalized = [normalized_score(s, random, reference) for s in raw]
            pooled.extend(normalized)
            top3 = None
            if best_demo is not None and game_id in best_demo \
                    and len(raw) >= 3:
                top3 = top3_improvement(raw, best_demo[game_id])
            report.games[game_id] = GameResult(
                scores=list(raw),
                mean=float(np.mean(raw)),
                std=float(np.std(raw)),
                normalized=normalized_score(
                    float(np.mean(raw)), random, reference),
                random_score=random,
                reference_score=reference,
                top3_improvement=top3,
            )
        report.median = median([g.normalized for g in report.games.values()])
        if len(pooled) >= 4:
            report.iqm = iqm(pooled)
        return report

    def to_jsonl(self) -> str:
        """
        One line per game, followed by a summary line
        """
        lines = [
            json.dumps({"label": self.label, "game": game_id} | asdict(r))
            for game_id, r in self.games.items()
        ]
        lines.append(json.dumps({
            "label": self.label,
            "summary": True,
            "mode": self.mode,
            "seed": self.seed,
            "fingerprint": self.fingerprint,
            "iqm": self.iqm,
            "median": self.median,
        }))
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        header = (
            f"{'game':<14}{'mean':>9}{'std':>9}{'normalized':>12}"
            f"{'top-3 %':>10}"
        )
        lines = [f"# {self.label} ({self.mode}, seed {self.seed})", header]
        for game_id, r in self.games.items():
            top3 = "-" if r.top3_improvement is None \
                else f"{r.top3_improvement:.1f}"
            lines.append(
                f"{game_id:<14}{r.mean:>9.2f}{r.std:>9.2f}"
                f"{r.normalized:>12.3f}{top3:>10}"
            )
        lines.append(f"IQM {self.iqm:.3f}, median {self.median:.3f}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: 'Path | str') -> None:
        """
        Write `report.jsonl` and `report.txt`, replacing earlier reports
        """
        write_reports(out_dir, [self])


def write_reports(
    out_dir: 'Path | str',
    reports: Sequence[EvalReport],
) -> None:
    """
    Write several reports to one `report.jsonl` and `report.txt`, replacing
    any reports already there
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / REPORT_JSONL).write_text("".join(r.to_jsonl() for r in reports))
    (out / REPORT_TABLE).write_text(
        "".join(r.to_table() + "\n" for r in reports))
    log.info(f"Wrote reports {[r.label for r in reports]} to '{out}'")


def evaluate(
    model: Model,
    game_ids: Sequence[str],
    cfg: SamplerConfig = SamplerConfig(),
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    window: int = 4,
    codec: Codec = Codec(),
    label: str = "",
    fingerprint: str = "",
    best_demo: Optional[dict[str, float]] = None,
    progress: Optional[bool] = None,
) -> EvalReport:
    """
    Roll out a model in every game and summarize the scores
    """
    scores = {
        game_id: rollout(
            model, game_id, cfg, n_trials, seed, window, codec, progress)
        for game_id in game_ids
    }
    return EvalReport.from_scores(
        scores, label, cfg.mode.value, seed, fingerprint, best_demo)


def train_speed_curve(
    runs: dict[str, list[tuple[int, Model]]],
    game_ids: Sequence[str],
    cfg: SamplerConfig = SamplerConfig(),
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    window: int = 4,
    codec: Codec = Codec(),
) -> list[tuple[str, int, float]]:
    """
    Score the checkpoints of several runs (typically one per model size)

    ## Returns

    * `(run, step, iqm)` rows
    """
    rows = []
    for name, checkpoints in runs.items():
        for step, model in checkpoints:
            report = evaluate(
                model, game_ids, cfg, n_trials, seed, window, codec)
            rows.append((name, step, report.iqm))
            log.info(f"{name} at step {step}: IQM {report.iqm:.3f}")
    return rows


def check_leakage(
    held_out: str,
    manifest: Optional[Manifest] = None,
    trained_on: Sequence[str] = (),
) -> None:
    """
    Make sure that a held-out game was never used for pretraining

    ## Raises

    * `MgdtProtocolError`: the game appears in the pretraining data
    """
    if manifest is not None and held_out in manifest.games:
        raise MgdtProtocolError(
            f"Held-out game '{held_out}' is part of the pretraining data "
            f"manifest"
        )
    if held_out in trained_on:
        raise MgdtProtocolError(
            f"Held-out game '{held_out}' was used to pretrain the model")


@dataclass(frozen=True)
class FinetuneSettings:
    data_fraction: float = 0.01
    steps: int = 1000
    batch_size: int = 32
    window: int = 4
    seed: int = 0
    chunk_len: int = 16


def run_finetune_protocol(
    pretrained: Model,
    held_out: str,
    dataset: Sequence[Trajectory],
    hyper: LambHyper,
    settings: FinetuneSettings = FinetuneSettings(),
    cfg: SamplerConfig = SamplerConfig(),
    n_trials: int = DEFAULT_TRIALS,
    manifest: Optional[Manifest] = None,
    trained_on: Sequence[str] = (),
    codec: Codec = Codec(),
    out_dir: Optional['Path | str'] = None,
    progress: Optional[bool] = None,
) -> tuple[EvalReport, EvalReport]:
    """
    Fine-tune a pretrained model on a small slice of a held-out game's data,
    and train a model of the same shape from scratch on the same data with
    the same budget.

    ## Returns

    * `(fine-tuned report, from-scratch report)`
    """
    check_leakage(held_out, manifest, trained_on)
    episodes = by_game(dataset).get(held_out)
    if not episodes:
        raise MgdtInputError(f"The dataset has no episodes of '{held_out}'")
    data = subsample_steps(
        episodes, settings.data_fraction, settings.seed, settings.chunk_len)
    train_settings = TrainSettings(
        steps=settings.steps,
        batch_size=settings.batch_size,
        window=settings.window,
        seed=settings.seed,
        checkpoint_every=max(settings.steps, 1),
    )
    extra = {"games": [held_out]}
    out = Path(out_dir) if out_dir is not None else None

    reports = []
    arms = [("finetuned", pretrained), ("scratch", None)]
    for label, init in arms:
        log.info(f"Fine-tuning protocol: training the {label} arm")
        result = train(
            data,
            pretrained.config,
            hyper,
            train_settings,
            out_dir=out / label if out is not None else None,
            init=init,
            codec=codec,
            extra=extra,
            progress=progress,
        )
        reports.append(evaluate(
            result.model,
            [held_out],
            cfg,
            n_trials,
            settings.seed,
            settings.window,
            codec,
            label=label,
            best_demo={held_out: best_demo_score(episodes, held_out)},
            progress=progress,
        ))
    return reports[0], reports[1]
