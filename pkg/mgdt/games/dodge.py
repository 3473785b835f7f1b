"""
# Mgdt > Games > Dodge

The player on the bottom row dodges wide rocks falling from the sky.

* `LEFT` and `RIGHT` move the player by one cell.
* Rocks are three cells wide and fall by one row per step. A new rock appears
  every third step until the supply runs out.
* A rock reaching the bottom row gives -1 if it covers the player, and +1
  otherwise.
* The episode ends once every rock has landed.
"""
from dataclasses import dataclass
from typing import Callable
import numpy as np
from numpy.typing import NDArray
from .._consts import Action
from .base import AGENT, OBJECT, Game, GameSpec


ROCKS = 20
SPAWN_EVERY = 3
BOTTOM = 11


@dataclass(frozen=True)
class DodgeState:
    player: int
    rocks: tuple[tuple[int, int], ...]
    """
    `(row, centre column)` of every falling rock, lowest first
    """
    spawned: int


def _covers(rock_col: int, col: int) -> bool:
    return abs(rock_col - col) <= 1


class Dodge(Game[DodgeState]):
    def __init__(self, spec: GameSpec) -> None:
        self.spec = spec

    def __width(self) -> int:
        return self.spec.image_shape[1]

    def initial(self, rng: np.random.Generator) -> DodgeState:
        width = self.__width()
        return DodgeState(
            player=int(rng.integers(0, width)),
            rocks=((0, int(rng.integers(0, width))),),
            spawned=1,
        )

    def transition(
        self,
        data: DodgeState,
        action: Action,
        step: int,
        noise: Callable[[], np.random.Generator],
    ) -> tuple[DodgeState, float, bool]:
        move = {Action.LEFT: -1, Action.RIGHT: 1}.get(action, 0)
        player = min(max(data.player + move, 0), self.__width() - 1)

        reward = 0.0
        rocks = []
        for row, col in data.rocks:
            if row + 1 == BOTTOM:
                reward += -1.0 if _covers(col, player) else 1.0
            else:
                rocks.append((row + 1, col))

        spawned = data.spawned
        if step % SPAWN_EVERY == 0 and spawned < ROCKS:
            rocks.append((0, int(noise().integers(0, self.__width()))))
            spawned += 1

        done = spawned == ROCKS and not rocks
        return DodgeState(player, tuple(rocks), spawned), reward, done

    def render(self, data: DodgeState) -> NDArray[np.uint8]:
        obs = self.blank()
        for row, col in data.rocks:
            obs[row, max(col - 1, 0):col + 2] = OBJECT
        obs[BOTTOM, data.player] = AGENT
        return obs

    def optimal_action(self, data: DodgeState) -> Action:
        if not data.rocks:
            return Action.NOOP
        _, col = data.rocks[0]
        if not _covers(col, data.player):
            return Action.NOOP
        # Step out of the rock's shadow, towards the nearest free side
        escapes = [c for c in (col - 2, col + 2) if 0 <= c < self.__width()]
        target = min(escapes, key=lambda c: (abs(c - data.player), c))
        return Action.LEFT if target < data.player else Action.RIGHT


DODGE = GameSpec(
    game_id="dodge",
    max_steps=(ROCKS - 1) * SPAWN_EVERY + BOTTOM + 1,
    reward_structure="+1 per rock dodged, -1 per rock hit",
    fixed_reference_score=float(ROCKS),
)
