"""
# Mgdt > Games > Catch

A paddle on the bottom row catches balls falling one at a time.

* The paddle is three cells wide. `LEFT` and `RIGHT` move it by one cell,
  every other action leaves it in place.
* After the paddle moves, the ball falls by one row. A ball reaching the
  bottom row gives +1 if the paddle covers its column and -1 otherwise, and a
  new ball appears at a random column of the top row.
* The episode ends once every ball has landed.

`mirror-catch` is the same game with `LEFT` and `RIGHT` swapped. It is held
out of pretraining.
"""
from dataclasses import dataclass, replace
from typing import Callable
import numpy as np
from numpy.typing import NDArray
from .._consts import Action
from .base import AGENT, OBJECT, Game, GameSpec


BALLS = 8
BOTTOM = 11


@dataclass(frozen=True)
class CatchState:
    paddle: int
    """
    Column of the centre of the paddle
    """
    ball_row: int
    ball_col: int
    balls_left: int
    """
    Number of balls yet to land, including the one currently falling
    """


class Catch(Game[CatchState]):
    mirrored = False

    def __init__(self, spec: GameSpec, balls: int = BALLS) -> None:
        self.spec = spec
        self.balls = balls

    def __width(self) -> int:
        return self.spec.image_shape[1]

    def initial(self, rng: np.random.Generator) -> CatchState:
        width = self.__width()
        return CatchState(
            paddle=int(rng.integers(1, width - 1)),
            ball_row=0,
            ball_col=int(rng.integers(0, width)),
            balls_left=self.balls,
        )

    def transition(
        self,
        data: CatchState,
        action: Action,
        step: int,
        noise: Callable[[], np.random.Generator],
    ) -> tuple[CatchState, float, bool]:
        move = {Action.LEFT: -1, Action.RIGHT: 1}.get(action, 0)
        if self.mirrored:
            move = -move
        paddle = min(max(data.paddle + move, 1), self.__width() - 2)
        row = data.ball_row + 1
        if row < BOTTOM:
            return replace(data, paddle=paddle, ball_row=row), 0.0, False

        reward = 1.0 if abs(data.ball_col - paddle) <= 1 else -1.0
        balls_left = data.balls_left - 1
        if balls_left == 0:
            return (
                replace(data, paddle=paddle, ball_row=row, balls_left=0),
                reward,
                True,
            )
        col = int(noise().integers(0, self.__width()))
        return CatchState(paddle, 0, col, balls_left), reward, False

    def render(self, data: CatchState) -> NDArray[np.uint8]:
        obs = self.blank()
        obs[BOTTOM, data.paddle - 1:data.paddle + 2] = AGENT
        if data.ball_row < BOTTOM:
            obs[data.ball_row, data.ball_col] = OBJECT
        return obs

    def optimal_action(self, data: CatchState) -> Action:
        target = min(max(data.ball_col, 1), self.__width() - 2)
        if target == data.paddle:
            return Action.NOOP
        towards_right = target > data.paddle
        if self.mirrored:
            towards_right = not towards_right
        return Action.RIGHT if towards_right else Action.LEFT


class MirrorCatch(Catch):
    mirrored = True


CATCH = GameSpec(
    game_id="catch",
    max_steps=BALLS * BOTTOM,
    reward_structure="+1 per ball caught, -1 per ball missed",
    fixed_reference_score=float(BALLS),
)
"""
Catching a ball doesn't end the episode: all `BALLS` balls are played, so
returns are even numbers from `-BALLS` to `BALLS`
"""

MIRROR_CATCH = replace(CATCH, game_id="mirror-catch", held_out=True)
