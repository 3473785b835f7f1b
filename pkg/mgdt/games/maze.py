"""
# Mgdt > Games > Pellet maze

The player walks a fixed maze collecting pellets.

* `UP`, `DOWN`, `LEFT` and `RIGHT` move the player by one cell unless a wall
  is in the way.
* Each pellet gives +1 when eaten.
* The episode ends when every pellet is eaten, or after `MAX_STEPS` steps.

The player and pellets start in random free cells.
"""
from collections import deque
from dataclasses import dataclass
from typing import Callable, Optional
import numpy as np
from numpy.typing import NDArray
from .._consts import Action
from .base import AGENT, PELLET, WALL, Game, GameSpec


LAYOUT = (
    "############",
    "#....#.....#",
    "#.##.#.###.#",
    "#..........#",
    "#.###.##.#.#",
    "#.....#..#.#",
    "###.#.#.##.#",
    "#...#......#",
    "#.#.####.#.#",
    "#.#......#.#",
    "#...##.....#",
    "############",
)

PELLETS = 6
MAX_STEPS = 80

Cell = tuple[int, int]

MOVES: dict[Action, Cell] = {
    Action.UP: (-1, 0),
    Action.DOWN: (1, 0),
    Action.LEFT: (0, -1),
    Action.RIGHT: (0, 1),
}

WALLS = np.array([[c == "#" for c in row] for row in LAYOUT])
FREE: list[Cell] = [
    (r, c) for r, row in enumerate(LAYOUT) for c, ch in enumerate(row)
    if ch == "."
]


@dataclass(frozen=True)
class MazeState:
    player: Cell
    pellets: frozenset[Cell]


def _moved(cell: Cell, action: Action) -> Cell:
    dr, dc = MOVES.get(action, (0, 0))
    target = (cell[0] + dr, cell[1] + dc)
    return cell if WALLS[target] else target


def _first_step_to_pellet(state: MazeState) -> Optional[Action]:
    """
    First move of a shortest path to the nearest pellet. Ties are broken by
    the order of `MOVES`.
    """
    first: dict[Cell, Optional[Action]] = {state.player: None}
    queue = deque([state.player])
    while queue:
        cell = queue.popleft()
        if cell in state.pellets:
            return first[cell]
        for action in MOVES:
            nxt = _moved(cell, action)
            if nxt not in first:
                first[nxt] = first[cell] if first[cell] is not None else action
                queue.append(nxt)
    return None


class PelletMaze(Game[MazeState]):
    def __init__(self, spec: GameSpec) -> None:
        self.spec = spec

    def initial(self, rng: np.random.Generator) -> MazeState:
        picks = rng.choice(len(FREE), size=PELLETS + 1, replace=False)
        cells = [FREE[i] for i in picks]
        return MazeState(player=cells[0], pellets=frozenset(cells[1:]))

    def transition(
        self,
        data: MazeState,
        action: Action,
        step: int,
        noise: Callable[[], np.random.Generator],
    ) -> tuple[MazeState, float, bool]:
        player = _moved(data.player, action)
        if player in data.pellets:
            pellets = data.pellets - {player}
            return MazeState(player, pellets), 1.0, not pellets
        return MazeState(player, data.pellets), 0.0, False

    def render(self, data: MazeState) -> NDArray[np.uint8]:
        obs = self.blank()
        obs[WALLS] = WALL
        for cell in data.pellets:
            obs[cell] = PELLET
        obs[data.player] = AGENT
        return obs

    def optimal_action(self, data: MazeState) -> Action:
        action = _first_step_to_pellet(data)
        return Action.NOOP if action is None else action


PELLET_MAZE = GameSpec(
    game_id="pellet-maze",
    max_steps=MAX_STEPS,
    reward_structure="+1 per pellet eaten",
)
