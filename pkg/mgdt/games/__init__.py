"""
# Mgdt > Games

A suite of tiny deterministic games sharing a 12x12 grayscale observation and
a common set of six actions. Every game accepts every action, treating the
ones it has no use for as `NOOP`.

| Game           | Dynamics                    | Held out |
|----------------|-----------------------------|----------|
| `catch`        | catch falling balls         | no       |
| `dodge`        | avoid falling rocks         | no       |
| `pellet-maze`  | collect pellets in a maze   | no       |
| `turret`       | shoot descending enemies    | no       |
| `mirror-catch` | catch, with mirrored moves  | yes      |
"""
from .base import (
    REGISTRY,
    GameSpec,
    GameState,
    Game,
    get_game,
    get_spec,
    reset,
    step,
    scripted_policy,
    play_episode,
    measure_score,
    register,
)
from .catch import CATCH, MIRROR_CATCH, Catch, MirrorCatch
from .dodge import DODGE, Dodge
from .maze import PELLET_MAZE, PelletMaze
from .turret import TURRET, Turret
from .generate import checkpoint_skill, generate_dataset


register(Catch(CATCH))
register(Dodge(DODGE))
register(PelletMaze(PELLET_MAZE))
register(Turret(TURRET))
register(MirrorCatch(MIRROR_CATCH))


TRAINING_GAMES = tuple(
    game_id for game_id, game in REGISTRY.items() if not game.spec.held_out
)
HELD_OUT_GAMES = tuple(
    game_id for game_id, game in REGISTRY.items() if game.spec.held_out
)


__all__ = [
    'GameSpec',
    'GameState',
    'Game',
    'get_game',
    'get_spec',
    'reset',
    'step',
    'scripted_policy',
    'play_episode',
    'measure_score',
    'checkpoint_skill',
    'generate_dataset',
    'TRAINING_GAMES',
    'HELD_OUT_GAMES',
]
