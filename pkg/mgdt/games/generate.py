"""
# Mgdt > Games > Generate

Mixed-quality datasets, produced by rolling out the scripted policy at a range
of skill levels. Each skill level stands in for a checkpoint of an agent part
way through training, so the dataset spans beginner to expert play.
"""
import logging
from typing import Optional
import numpy as np
from tqdm import tqdm
from ..errors import MgdtInputError
from ..sequence import Trajectory
from .base import GameSpec, get_spec, play_episode, scripted_policy


log = logging.getLogger(__name__)


def checkpoint_skill(k: int, n_checkpoints: int) -> float:
    """
    Skill of the `k`-th of `n_checkpoints` checkpoints, evenly spaced from
    0 to 1
    """
    if n_checkpoints == 1:
        return 1.0
    return k / (n_checkpoints - 1)


def generate_dataset(
    spec: 'GameSpec | str',
    n_checkpoints: int = 50,
    episodes_per_checkpoint: int = 10,
    seed: int = 0,
    progress: Optional[bool] = None,
) -> list[Trajectory]:
    """
    Roll out `episodes_per_checkpoint` episodes at each of `n_checkpoints`
    skill levels.

    ## Args

    * `progress`: whether to show a progress bar. `None` shows it only on a
      terminal.
    """
    if isinstance(spec, str):
        spec = get_spec(spec)
    if n_checkpoints < 1 or episodes_per_checkpoint < 1:
        raise MgdtInputError(
            f"Counts must be positive, got n_checkpoints={n_checkpoints}, "
            f"episodes_per_checkpoint={episodes_per_checkpoint}"
        )
    root = np.random.SeedSequence(seed)
    children = root.spawn(n_checkpoints)

    dataset: list[Trajectory] = []
    bar = tqdm(
        total=n_checkpoints * episodes_per_checkpoint,
        desc=spec.game_id,
        disable=None if progress is None else not progress,
        leave=False,
    )
    with bar:
        for k, child in enumerate(children):
            skill = checkpoint_skill(k, n_checkpoints)
            rng = np.random.default_rng(child)
            seeds = rng.integers(0, 2**31, size=episodes_per_checkpoint)
            for episode_seed in seeds:
                obs, actions, rewards = play_episode(
                    spec,
                    int(episode_seed),
                    lambda state, _: scripted_policy(spec, skill, state, rng),
                )
                dataset.append(Trajectory.from_steps(
                    spec.game_id, obs, actions, rewards, skill))
                bar.update()
    returns = [t.episode_return for t in dataset]
    log.info(
        f"Generated {len(dataset)} episodes of '{spec.game_id}' "
        f"(mean return {np.mean(returns):.2f}, max {max(returns):.0f})"
    )
    return dataset
