"""
Shared fixtures
"""
import numpy as np
import pytest
from mgdt.games import generate_dataset
from mgdt.model import ModelConfig
from mgdt.sequence import Trajectory
from mgdt.tokens import Codec


@pytest.fixture
def codec() -> Codec:
    return Codec()


def make_trajectory(
    n: int = 6,
    game_id: str = "catch",
    seed: int = 0,
    rewards=None,
    skill: float = 1.0,
) -> Trajectory:
    """
    A trajectory of random frames and actions
    """
    rng = np.random.default_rng(seed)
    if rewards is None:
        rewards = rng.integers(-1, 2, size=n)
    return Trajectory.from_steps(
        game_id,
        rng.integers(0, 256, size=(len(rewards), 12, 12, 1), dtype=np.uint8),
        rng.integers(0, 6, size=len(rewards)),
        rewards,
        skill,
    )


@pytest.fixture
def trajectory() -> Trajectory:
    return make_trajectory()


@pytest.fixture(scope="session")
def catch_episodes() -> list[Trajectory]:
    return generate_dataset(
        "catch", n_checkpoints=4, episodes_per_checkpoint=2, seed=0,
        progress=False,
    )


@pytest.fixture
def tiny_config() -> ModelConfig:
    """
    The smallest model worth testing, in double precision
    """
    return ModelConfig(
        n_layers=2,
        d_model=16,
        n_heads=4,
        max_len=48,
        dtype="float64",
    )


@pytest.fixture
def make_traj():
    return make_trajectory
