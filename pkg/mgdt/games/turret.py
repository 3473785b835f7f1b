"""
# Mgdt > Games > Turret

A turret on the bottom row shoots down enemies as they descend.

* `LEFT` and `RIGHT` move the turret by one cell. `FIRE` instantly destroys
  the lowest enemy in the turret's column, for +1.
* Enemies descend by one row every `DESCEND_EVERY` steps. A new enemy appears
  every `SPAWN_EVERY` steps until the supply runs out.
* An enemy reaching the bottom row gives -1.
* The episode ends once every enemy is destroyed or has landed.
"""
from dataclasses import dataclass
from typing import Callable
import numpy as np
from numpy.typing import NDArray
from .._consts import Action
from .base import AGENT, OBJECT, Game, GameSpec


ENEMIES = 12
SPAWN_EVERY = 6
DESCEND_EVERY = 3
BOTTOM = 11


@dataclass(frozen=True)
class TurretState:
    turret: int
    enemies: tuple[tuple[int, int], ...]
    """
    `(row, column)` of every live enemy, oldest first
    """
    spawned: int


class Turret(Game[TurretState]):
    def __init__(self, spec: GameSpec) -> None:
        self.spec = spec

    def __width(self) -> int:
        return self.spec.image_shape[1]

    def initial(self, rng: np.random.Generator) -> TurretState:
        width = self.__width()
        return TurretState(
            turret=int(rng.integers(0, width)),
            enemies=((0, int(rng.integers(0, width))),),
            spawned=1,
        )

    def transition(
        self,
        data: TurretState,
        action: Action,
        step: int,
        noise: Callable[[], np.random.Generator],
    ) -> tuple[TurretState, float, bool]:
        move = {Action.LEFT: -1, Action.RIGHT: 1}.get(action, 0)
        turret = min(max(data.turret + move, 0), self.__width() - 1)
        enemies = list(data.enemies)
        reward = 0.0

        if action == Action.FIRE:
            in_column = [e for e in enemies if e[1] == turret]
            if in_column:
                enemies.remove(max(in_column))
                reward += 1.0

        if step % DESCEND_EVERY == 0:
            descended = []
            for row, col in enemies:
                if row + 1 == BOTTOM:
                    reward -= 1.0
                else:
                    descended.append((row + 1, col))
            enemies = descended

        spawned = data.spawned
        if step % SPAWN_EVERY == 0 and spawned < ENEMIES:
            enemies.append((0, int(noise().integers(0, self.__width()))))
            spawned += 1

        done = spawned == ENEMIES and not enemies
        return TurretState(turret, tuple(enemies), spawned), reward, done

    def render(self, data: TurretState) -> NDArray[np.uint8]:
        obs = self.blank()
        for row, col in data.enemies:
            obs[row, col] = OBJECT
        obs[BOTTOM, data.turret] = AGENT
        return obs

    def optimal_action(self, data: TurretState) -> Action:
        if not data.enemies:
            return Action.NOOP
        # Lowest enemy first, nearest one among those level with it
        _, col = max(
            data.enemies, key=lambda e: (e[0], -abs(e[1] - data.turret)))
        if col == data.turret:
            return Action.FIRE
        return Action.LEFT if col < data.turret else Action.RIGHT


TURRET = GameSpec(
    game_id="turret",
    max_steps=(ENEMIES - 1) * SPAWN_EVERY + DESCEND_EVERY * BOTTOM + 1,
    reward_structure="+1 per enemy destroyed, -1 per enemy reaching the "
                     "ground",
)
