"""
# Mgdt > Dataset

Storage of episodes on disk, expert filtering, sub-sampling and the sampling
of training batches.

Episodes of each game are stored in `data/<game>/<run>.ep` files under the
data directory, next to a `manifest.json` summarizing them. The byte layout
of episode files is documented in Format.md.
"""
import json
import logging
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence
import numpy as np
from . import _consts as consts
from .__container import ByteReader, ByteWriter
from ._consts import RecordType
from .errors import MgdtInputError, MgdtPrerequisiteError
from .sequence import (
    AttentionMask,
    Layout,
    TokenSequence,
    Trajectory,
    augment_window,
    build_mask,
    build_window,
    compute_return_to_go,
)
from .tokens import Codec


log = logging.getLogger(__name__)


Dataset = list[Trajectory]

MANIFEST_NAME = "manifest.json"


def episode_path(root: 'Path | str', game_id: str, run: int) -> Path:
    """
    Location of the episode file of a run of a game
    """
    return Path(root) / "data" / game_id / f"{run}.ep"


###############################################################################
# Episode files

def _fixed_point(rewards: np.ndarray, game_id: str) -> np.ndarray:
    scaled = rewards * consts.REWARD_FIXED_POINT
    rounded = np.rint(scaled)
    if not np.all(np.isfinite(scaled)) or np.any(
            np.abs(scaled - rounded) > 1e-6):
        raise MgdtInputError(
            f"Rewards of '{game_id}' aren't multiples of "
            f"1/{consts.REWARD_FIXED_POINT}, so can't be stored exactly"
        )
    return rounded.astype("<i4")


def encode_episodes(
    trajectories: Sequence[Trajectory],
    game_id: Optional[str] = None,
) -> bytes:
    """
    Serialize the episodes of a single game
    """
    ids = {t.game_id for t in trajectories}
    if game_id is not None:
        ids.add(game_id)
    if len(ids) > 1:
        raise MgdtInputError(
            f"An episode file holds a single game, got {sorted(ids)}")
    name = ids.pop() if ids else ""
    shape = (
        trajectories[0].observations.shape[1:] if trajectories
        else (0, 0, 0)
    )
    if len(shape) != 3:
        raise MgdtInputError(
            f"Observations must have shape (N, H, W, C), got frames of "
            f"shape {shape}"
        )

    writer = (
        ByteWriter(consts.EPISODE_FILE_MAGIC)
        .text(name)
        .u16(shape[0]).u16(shape[1]).u16(shape[2])
        .u32(len(trajectories))
    )
    for i, traj in enumerate(trajectories):
        if traj.observations.shape[1:] != shape:
            raise MgdtInputError(
                f"Episode {i} has frames of shape "
                f"{traj.observations.shape[1:]}, expected {shape}"
            )
        if np.any((traj.actions < 0) | (traj.actions > 0xFF)):
            raise MgdtInputError(f"Episode {i} has out-of-range actions")
        (
            writer
            .u8(RecordType.EPISODE)
            .u32(len(traj))
            .f64(traj.skill)
            .raw(np.ascontiguousarray(traj.observations, np.uint8).tobytes())
            .raw(traj.actions.astype(np.uint8).tobytes())
            .raw(_fixed_point(traj.rewards, name).tobytes())
        )
    return writer.u8(RecordType.END).finish()


def decode_episodes(path: 'Path | str', data: bytes) -> Dataset:
    """
    Parse the contents of an episode file

    ## Raises

    * `MgdtFormatError`: the data is corrupt, truncated or of another version
    """
    reader = ByteReader(path, data, consts.EPISODE_FILE_MAGIC)
    game_id = reader.text()
    shape = (reader.u16(), reader.u16(), reader.u16())
    count = reader.u32()
    frame = math.prod(shape)

    trajectories: Dataset = []
    for i in range(count):
        reader.record = i
        kind = reader.u8()
        if kind != RecordType.EPISODE:
            reader.fail(
                f"expected an episode record, found type {kind:#04x} "
                f"({count} episodes declared)"
            )
        n = reader.u32()
        if n == 0:
            reader.fail("episode is empty")
        skill = reader.f64()
        obs = np.frombuffer(reader.take(n * frame), dtype=np.uint8)
        actions = np.frombuffer(reader.take(n), dtype=np.uint8)
        fixed = np.frombuffer(reader.take(4 * n), dtype="<i4")
        rewards = fixed.astype(np.float64) / consts.REWARD_FIXED_POINT
        trajectories.append(Trajectory(
            game_id=game_id,
            observations=obs.reshape((n, *shape)).copy(),
            actions=actions.astype(np.int64),
            rewards=rewards,
            returns_to_go=compute_return_to_go(rewards),
            skill=skill,
        ))

    reader.record = count
    end = reader.u8()
    if end != RecordType.END:
        reader.fail(
            f"expected the end marker after {count} episodes, found type "
            f"{end:#04x}"
        )
    reader.verify_checksum()
    return trajectories


def write_episodes(
    path: 'Path | str',
    trajectories: Sequence[Trajectory],
    game_id: Optional[str] = None,
) -> None:
    path = Path(path)
    data = encode_episodes(trajectories, game_id)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    log.info(f"Wrote {len(trajectories)} episodes to '{path}'")


def read_episodes(path: 'Path | str') -> Dataset:
    path = Path(path)
    if not path.exists():
        raise MgdtPrerequisiteError([path])
    trajectories = decode_episodes(path, path.read_bytes())
    log.debug(f"Read {len(trajectories)} episodes from '{path}'")
    return trajectories


###############################################################################
# Filtering

def by_game(dataset: Iterable[Trajectory]) -> dict[str, Dataset]:
    games: dict[str, Dataset] = defaultdict(list)
    for traj in dataset:
        games[traj.game_id].append(traj)
    return dict(games)


def filter_expert(
    dataset: Sequence[Trajectory],
    keep_fraction: float = 0.1,
) -> Dataset:
    """
    Keep only the best episodes of each game: those whose return is at least
    the `1 - keep_fraction` quantile of the game's returns. Episodes tied with
    the threshold are all kept.
    """
    if not 0 < keep_fraction <= 1:
        raise MgdtInputError(
            f"keep_fraction must be in (0, 1], got {keep_fraction}")
    if not dataset:
        raise MgdtInputError("Can't filter an empty dataset")
    thresholds = {
        game_id: float(np.quantile(
            [t.episode_return for t in episodes], 1 - keep_fraction))
        for game_id, episodes in by_game(dataset).items()
    }
    kept = [t for t in dataset if t.episode_return >= thresholds[t.game_id]]
    log.info(
        f"Expert filter kept {len(kept)} of {len(dataset)} episodes "
        f"(fraction {keep_fraction})"
    )
    return kept


def subsample_steps(
    dataset: Sequence[Trajectory],
    fraction: float = 0.01,
    seed: int = 0,
    chunk_len: int = 16,
) -> Dataset:
    """
    Keep a uniformly chosen `fraction` of all steps, regardless of episode
    quality.

    Steps are picked in runs of up to `chunk_len` consecutive steps starting at
    uniformly drawn positions, so that the result still contains windows to
    train on. The result is made of contiguous chunks of the original
    episodes, which keep their original returns-to-go.
    """
    if not 0 < fraction <= 1:
        raise MgdtInputError(f"fraction must be in (0, 1], got {fraction}")
    if chunk_len < 1:
        raise MgdtInputError(f"chunk_len must be positive, got {chunk_len}")
    if not dataset:
        raise MgdtInputError("Can't sub-sample an empty dataset")

    lengths = np.array([len(t) for t in dataset])
    offsets = np.concatenate([[0], np.cumsum(lengths)])
    total = int(offsets[-1])
    target = max(1, round(fraction * total))
    selected = np.zeros(total, dtype=bool)
    rng = np.random.default_rng(seed)
    count = 0
    while count < target:
        start = int(rng.integers(0, total))
        episode = int(np.searchsorted(offsets, start, side="right")) - 1
        stop = min(start + chunk_len, int(offsets[episode + 1]))
        stop = min(stop, start + target - count)
        count += int((~selected[start:stop]).sum())
        selected[start:stop] = True

    chunks: Dataset = []
    for i, traj in enumerate(dataset):
        steps = selected[offsets[i]:offsets[i + 1]]
        # Boundaries of the runs of selected steps
        edges = np.flatnonzero(np.diff(np.concatenate(
            [[False], steps, [False]]).astype(np.int8)))
        for begin, end in zip(edges[::2], edges[1::2]):
            chunks.append(traj.slice(int(begin), int(end)))
    log.info(
        f"Sub-sampled {count} of {total} steps into {len(chunks)} chunks")
    return chunks


###############################################################################
# Batches

@dataclass(frozen=True)
class BatchSpec:
    batch_size: int = 32
    window: int = 4
    """
    Number of timesteps `T` per window
    """
    augment: bool = True
    seed: int = 0
    weights: Optional[dict[str, float]] = None
    """
    Probability of drawing each game. By default games are weighted by their
    number of windows, so that windows are drawn uniformly.
    """
    layout: Layout = Layout.DT
    inclusive_returns: bool = False

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise MgdtInputError(
                f"batch_size must be positive, got {self.batch_size}")
        if self.window < 1:
            raise MgdtInputError(
                f"Window length must be positive, got {self.window}")
        if self.weights is not None:
            values = list(self.weights.values())
            if any(w < 0 for w in values) or not math.isclose(
                    sum(values), 1.0, abs_tol=1e-6):
                raise MgdtInputError(
                    f"Mixing weights must be non-negative and sum to 1, got "
                    f"{self.weights}"
                )


class BatchSampler:
    """
    Draws windows uniformly over `(episode, start)` within each game, with
    games drawn according to the mixing weights
    """

    def __init__(
        self,
        dataset: Sequence[Trajectory],
        spec: BatchSpec,
        codec: Codec,
    ) -> None:
        if not dataset:
            raise MgdtInputError("Can't sample batches from an empty dataset")
        self.spec = spec
        self.codec = codec
        self.games = by_game(dataset)
        self.game_ids = sorted(self.games)
        self.__starts = {
            game_id: np.array([
                len(t) - min(spec.window, len(t)) + 1 for t in episodes
            ])
            for game_id, episodes in self.games.items()
        }
        if spec.weights is None:
            windows = np.array(
                [self.__starts[g].sum() for g in self.game_ids], dtype=float)
            self.weights = windows / windows.sum()
        else:
            unknown = set(spec.weights) - set(self.game_ids)
            if unknown:
                raise MgdtInputError(
                    f"Mixing weights name games absent from the dataset: "
                    f"{sorted(unknown)}"
                )
            self.weights = np.array(
                [spec.weights.get(g, 0.0) for g in self.game_ids])
        self.__masks: dict[int, AttentionMask] = {}

    def mask(self, T: int) -> AttentionMask:
        if T not in self.__masks:
            self.__masks[T] = build_mask(
                T, self.codec.grid.num_patches, self.spec.layout)
        return self.__masks[T]

    def window(
        self,
        rng: np.random.Generator,
    ) -> tuple[TokenSequence, AttentionMask]:
        game = int(rng.choice(len(self.game_ids), p=self.weights))
        game_id = self.game_ids[game]
        starts = self.__starts[game_id]
        episode = int(rng.choice(len(starts), p=starts / starts.sum()))
        traj = self.games[game_id][episode]
        start = int(rng.integers(0, starts[episode]))
        T = min(self.spec.window, len(traj))
        observations = traj.observations[start:start + T]
        if self.spec.augment:
            observations = augment_window(observations, rng)
        seq = build_window(
            traj,
            start,
            T,
            self.codec,
            self.spec.layout,
            self.spec.inclusive_returns,
            observations,
        )
        return seq, self.mask(T)

    def sample(
        self,
        rng: np.random.Generator,
    ) -> list[tuple[TokenSequence, AttentionMask]]:
        return [self.window(rng) for _ in range(self.spec.batch_size)]


def sample_batch(
    dataset: Sequence[Trajectory],
    spec: BatchSpec,
    codec: Codec,
    rng: Optional[np.random.Generator] = None,
) -> list[tuple[TokenSequence, AttentionMask]]:
    """
    Draw a batch of windows. Without an explicit generator, the batch is
    determined by `spec.seed`.
    """
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    return BatchSampler(dataset, spec, codec).sample(rng)


###############################################################################
# Manifest

@dataclass
class GameSummary:
    episodes: int
    steps: int
    files: list[str]
    skills: list[float]
    return_edges: list[float]
    return_counts: list[int]
    random_score: Optional[float] = None
    reference_score: Optional[float] = None


def return_histogram(
    returns: Sequence[float],
) -> tuple[list[float], list[int]]:
    """
    Histogram of episodic returns with unit-width bins
    """
    low = math.floor(min(returns))
    high = math.floor(max(returns)) + 1
    counts, edges = np.histogram(returns, bins=np.arange(low, high + 1))
    return [float(e) for e in edges], [int(c) for c in counts]


@dataclass
class Manifest:
    """
    Summary of the episode files of a data directory.

    Held-out games are listed apart from the pretraining games, so that
    pretraining never picks them up.
    """
    seed: int
    games: dict[str, GameSummary] = field(default_factory=dict)
    """
    Games used for pretraining
    """
    held_out: dict[str, GameSummary] = field(default_factory=dict)

    @property
    def game_ids(self) -> list[str]:
        return sorted(self.games)

    def summary(self, game_id: str) -> Optional[GameSummary]:
        return self.games.get(game_id, self.held_out.get(game_id))

    def add(
        self,
        game_id: str,
        files: Sequence['Path | str'],
        trajectories: Sequence[Trajectory],
        root: 'Path | str',
        held_out: bool = False,
        random_score: Optional[float] = None,
        reference_score: Optional[float] = None,
    ) -> None:
        if not trajectories:
            raise MgdtInputError(f"No episodes of '{game_id}' to summarize")
        edges, counts = return_histogram(
            [t.episode_return for t in trajectories])
        section = self.held_out if held_out else self.games
        section[game_id] = GameSummary(
            episodes=len(trajectories),
            steps=sum(len(t) for t in trajectories),
            files=[Path(f).relative_to(root).as_posix() for f in files],
            skills=sorted({t.skill for t in trajectories}),
            return_edges=edges,
            return_counts=counts,
            random_score=random_score,
            reference_score=reference_score,
        )

    def save(self, root: 'Path | str') -> Path:
        path = Path(root) / MANIFEST_NAME
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True))
        log.info(
            f"Wrote manifest of {len(self.games)} pretraining and "
            f"{len(self.held_out)} held-out games to '{path}'"
        )
        return path

    @classmethod
    def load(cls, root: 'Path | str') -> 'Manifest':
        path = Path(root) / MANIFEST_NAME
        if not path.exists():
            raise MgdtPrerequisiteError([path])
        raw = json.loads(path.read_text())
        return cls(
            seed=raw["seed"],
            games={
                game_id: GameSummary(**summary)
                for game_id, summary in raw["games"].items()
            },
            held_out={
                game_id: GameSummary(**summary)
                for game_id, summary in raw.get("held_out", {}).items()
            },
        )


def load_dataset(
    root: 'Path | str',
    games: Optional[Sequence[str]] = None,
) -> Dataset:
    """
    Read the episodes of the given games (by default, every pretraining game)
    from a data directory

    ## Raises

    * `MgdtPrerequisiteError`: the manifest, a game, or an episode file is
      missing
    """
    root = Path(root)
    manifest = Manifest.load(root)
    wanted = list(games) if games is not None else manifest.game_ids
    summaries = {g: manifest.summary(g) for g in wanted}
    missing: list[Path] = [
        root / "data" / g for g, s in summaries.items() if s is None
    ]
    files = [
        root / f for s in summaries.values() if s is not None
        for f in s.files
    ]
    missing += [f for f in files if not f.exists()]
    if missing:
        raise MgdtPrerequisiteError(missing)
    dataset: Dataset = []
    for f in files:
        dataset.extend(read_episodes(f))
    log.info(f"Loaded {len(dataset)} episodes of {len(wanted)} games")
    return dataset
