"""
# Mgdt > Games > Base

The interface shared by every game in the suite.

Games are deterministic given their seed: all randomness (such as where a new
object appears) is drawn from a noise stream derived from the episode seed and
the step counter, so `step` is a pure function of its arguments.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Any, Callable, Generic, Optional, TypeVar
import numpy as np
from numpy.typing import NDArray
from .. import _consts as consts
from .._consts import Action
from ..errors import MgdtConfigError, MgdtGameOverError, MgdtInputError


log = logging.getLogger(__name__)


IMAGE_SHAPE = (12, 12, 1)
"""
Shape of the observations of every game in the suite
"""

AGENT = 255
OBJECT = 170
PELLET = 128
WALL = 85
"""
Pixel intensities used when rendering
"""

SCORE_EPISODES = 1000
"""
Number of episodes rolled out to measure a score that isn't fixed by a game
"""

SCORE_SEED = 20_220_515
"""
Seed used when measuring scores, so that measurements are reproducible
"""


@dataclass(frozen=True)
class GameSpec:
    """
    Static description of a game
    """
    game_id: str
    max_steps: int
    reward_structure: str
    """
    Human-readable description of how rewards are given
    """
    image_shape: tuple[int, int, int] = IMAGE_SHAPE
    num_actions: int = consts.NUM_ACTIONS
    held_out: bool = False
    """
    Whether the game is reserved for fine-tuning experiments
    """
    fixed_random_score: Optional[float] = None
    fixed_reference_score: Optional[float] = None

    @property
    def random_score(self) -> float:
        """
        Mean score of a uniformly random policy
        """
        if self.fixed_random_score is not None:
            return self.fixed_random_score
        return measure_score(self.game_id, 0.0)

    @property
    def reference_score(self) -> float:
        """
        Mean score of the hand-written optimal policy
        """
        if self.fixed_reference_score is not None:
            return self.fixed_reference_score
        return measure_score(self.game_id, 1.0)


S = TypeVar('S')


@dataclass(frozen=True)
class GameState(Generic[S]):
    game_id: str
    seed: int
    step: int
    done: bool
    data: S
    """
    Game-specific part of the state
    """


class Game(ABC, Generic[S]):
    """
    A game of the suite. Subclasses define the dynamics over their own state
    type `S`.
    """

    spec: GameSpec

    @abstractmethod
    def initial(self, rng: np.random.Generator) -> S:
        """
        Initial game-specific state
        """

    @abstractmethod
    def transition(
        self,
        data: S,
        action: Action,
        step: int,
        noise: Callable[[], np.random.Generator],
    ) -> tuple[S, float, bool]:
        """
        Advance the game by a step.

        ## Args

        * `step`: index of the step being taken
        * `noise`: gives the random stream for this step. Only call it when
          randomness is needed.

        ## Returns

        * `(data, reward, terminal)`
        """

    @abstractmethod
    def render(self, data: S) -> NDArray[np.uint8]:
        """
        Observation of the state, shape `IMAGE_SHAPE`
        """

    @abstractmethod
    def optimal_action(self, data: S) -> Action:
        """
        Action chosen by the hand-written optimal policy
        """

    def blank(self) -> NDArray[np.uint8]:
        return np.zeros(self.spec.image_shape, dtype=np.uint8)


REGISTRY: dict[str, Game[Any]] = {}
"""
Every game of the suite, by id
"""


def register(game: Game[Any]) -> Game[Any]:
    REGISTRY[game.spec.game_id] = game
    return game


def get_game(game_id: str) -> Game[Any]:
    try:
        return REGISTRY[game_id]
    except KeyError:
        raise MgdtConfigError(
            f"Unknown game '{game_id}'. Available games are: "
            f"{', '.join(sorted(REGISTRY))}"
        ) from None


def get_spec(game_id: str) -> GameSpec:
    return get_game(game_id).spec


def reset(
    spec: 'GameSpec | str',
    seed: int,
) -> tuple[GameState[Any], NDArray[np.uint8]]:
    """
    Start a new episode
    """
    game = get_game(spec if isinstance(spec, str) else spec.game_id)
    data = game.initial(np.random.default_rng([seed, 0]))
    state = GameState(game.spec.game_id, seed, 0, False, data)
    return state, game.render(data)


def step(
    state: GameState[Any],
    action: int,
) -> tuple[GameState[Any], NDArray[np.uint8], float, bool]:
    """
    Take an action

    ## Returns

    * `(state, observation, reward, done)`

    ## Raises

    * `MgdtInputError`: the action isn't part of the shared action set
    * `MgdtGameOverError`: the episode has already finished
    """
    game = get_game(state.game_id)
    try:
        act = Action(int(action))
    except ValueError:
        raise MgdtInputError(
            f"Action {action} is not in the shared action set "
            f"[0, {consts.NUM_ACTIONS})"
        ) from None
    if state.done:
        raise MgdtGameOverError(state.game_id)

    index = state.step + 1

    def noise() -> np.random.Generator:
        return np.random.default_rng([state.seed, index])

    data, reward, terminal = game.transition(state.data, act, index, noise)
    done = terminal or index >= game.spec.max_steps
    new_state = replace(state, step=index, done=done, data=data)
    return new_state, game.render(data), float(reward), done


def scripted_policy(
    spec: 'GameSpec | str',
    skill: float,
    state: GameState[Any],
    rng: np.random.Generator,
) -> Action:
    """
    With probability `skill` follow the game's optimal policy, otherwise act
    uniformly at random
    """
    if not 0.0 <= skill <= 1.0:
        raise MgdtInputError(f"Skill must be in [0, 1], got {skill}")
    game = get_game(spec if isinstance(spec, str) else spec.game_id)
    if rng.random() < skill:
        return game.optimal_action(state.data)
    return Action(int(rng.integers(0, consts.NUM_ACTIONS)))


def play_episode(
    spec: 'GameSpec | str',
    seed: int,
    policy: Callable[[GameState[Any], NDArray[np.uint8]], int],
) -> tuple[list[NDArray[np.uint8]], list[int], list[float]]:
    """
    Roll out a full episode

    ## Returns

    * `(observations, actions, rewards)`, where `observations[t]` is the
      observation the action `actions[t]` was chosen from
    """
    state, obs = reset(spec, seed)
    observations, actions, rewards = [], [], []
    done = False
    while not done:
        action = int(policy(state, obs))
        observations.append(obs)
        actions.append(action)
        state, obs, reward, done = step(state, action)
        rewards.append(reward)
    return observations, actions, rewards


@lru_cache(maxsize=None)
def measure_score(game_id: str, skill: float) -> float:
    """
    Mean score of the scripted policy of the given skill, over a fixed set of
    episodes
    """
    spec = get_spec(game_id)
    rng = np.random.default_rng(SCORE_SEED)
    seeds = rng.integers(0, 2**31, size=SCORE_EPISODES)
    total = 0.0
    for seed in seeds:
        _, _, rewards = play_episode(
            spec,
            int(seed),
            lambda state, _: scripted_policy(spec, skill, state, rng),
        )
        total += sum(rewards)
    score = total / SCORE_EPISODES
    log.info(f"Measured score of '{game_id}' at skill {skill}: {score:.3f}")
    return score
