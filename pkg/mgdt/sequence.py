"""
# Mgdt > Sequence

Assembly of token windows from trajectories, the attention mask used with
them, and the per-window image augmentation.

A window of `T` timesteps is laid out as

```
o(0,1) ... o(0,M)  R(0)  a(0)  r(0)  o(1,1) ... o(1,M)  R(1)  a(1)  r(1) ...
```

and the behavioural-cloning layout simply drops the `R` positions.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Union
import numpy as np
from numpy.typing import NDArray
from . import _consts as consts
from ._consts import NO_TARGET, TokenKind
from .errors import MgdtInputError
from .tokens import Codec, patchify


AttentionMask = NDArray[np.bool_]
"""
`L x L` boolean matrix where entry `(i, j)` is set iff position `i` may attend
to position `j`
"""

SeedLike = Union[int, np.random.Generator]


class Layout(Enum):
    """
    Which discrete tokens follow the observation patches of each timestep
    """
    DT = (TokenKind.RETURN, TokenKind.ACTION, TokenKind.REWARD)
    BC = (TokenKind.ACTION, TokenKind.REWARD)

    @property
    def kinds(self) -> tuple[TokenKind, ...]:
        return self.value

    def step_length(self, num_patches: int) -> int:
        """
        Number of positions used by a single timestep
        """
        return num_patches + len(self.value)

    def offset(self, kind: TokenKind, num_patches: int) -> int:
        """
        Offset of the position holding a discrete token within its timestep
        """
        return num_patches + self.value.index(kind)


def compute_return_to_go(
    rewards: Sequence[float],
    inclusive: bool = False,
) -> NDArray[np.float64]:
    """
    Sum of future rewards at every timestep.

    By default only strictly later rewards are counted, so the last entry is
    always zero. With `inclusive`, the reward of the timestep itself is
    included too.
    """
    rewards_arr = np.asarray(rewards, dtype=np.float64)
    if rewards_arr.ndim != 1 or len(rewards_arr) == 0:
        raise MgdtInputError("Can't compute returns of an empty reward list")
    suffix = np.cumsum(rewards_arr[::-1])[::-1]
    if inclusive:
        return suffix
    return suffix - rewards_arr


@dataclass
class Trajectory:
    """
    A single episode of a game
    """
    game_id: str

    observations: NDArray[np.uint8]
    """
    Array of shape `(N, H, W, C)`
    """

    actions: NDArray[np.int64]
    rewards: NDArray[np.float64]

    returns_to_go: NDArray[np.float64]
    """
    Strictly-future return at every timestep
    """

    skill: float
    """
    Skill level of the scripted policy which produced the episode
    """

    def __post_init__(self) -> None:
        n = len(self.actions)
        if n < 1:
            raise MgdtInputError(f"Episode of '{self.game_id}' is empty")
        if not (len(self.observations) == len(self.rewards)
                == len(self.returns_to_go) == n):
            raise MgdtInputError(
                f"Episode of '{self.game_id}' has mismatched lengths: "
                f"{len(self.observations)} observations, {n} actions, "
                f"{len(self.rewards)} rewards, {len(self.returns_to_go)} "
                f"returns"
            )

    @classmethod
    def from_steps(
        cls,
        game_id: str,
        observations: Sequence[NDArray] | NDArray,
        actions: Sequence[int] | NDArray,
        rewards: Sequence[float] | NDArray,
        skill: float,
    ) -> 'Trajectory':
        rewards_arr = np.asarray(rewards, dtype=np.float64)
        return cls(
            game_id=game_id,
            observations=np.asarray(observations, dtype=np.uint8),
            actions=np.asarray(actions, dtype=np.int64),
            rewards=rewards_arr,
            returns_to_go=compute_return_to_go(rewards_arr),
            skill=float(skill),
        )

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def episode_return(self) -> float:
        return float(self.rewards.sum())

    def slice(self, start: int, stop: int) -> 'Trajectory':
        """
        A contiguous chunk of the episode. Returns-to-go are kept as computed
        over the full episode.
        """
        return Trajectory(
            game_id=self.game_id,
            observations=self.observations[start:stop],
            actions=self.actions[start:stop],
            rewards=self.rewards[start:stop],
            returns_to_go=self.returns_to_go[start:stop],
            skill=self.skill,
        )


@dataclass
class TokenSequence:
    """
    A flattened window of tokens, with per-position targets and loss weights.

    `targets[i]` holds the id of the discrete token at position `i` (or
    `NO_TARGET`); it is predicted from the model output at position `i - 1`.
    """
    kinds: NDArray[np.int64]
    patches: NDArray[np.float32]
    """
    Patch vectors, shape `(L, patch_dim)`. Zero at non-patch positions.
    """
    patch_index: NDArray[np.int64]
    """
    Index of the patch within its image, zero at non-patch positions
    """
    token_ids: NDArray[np.int64]
    """
    Discrete token ids, `NO_TARGET` at patch positions
    """
    targets: NDArray[np.int64]
    loss_weights: NDArray[np.float32]
    timesteps: NDArray[np.int64]
    layout: Layout

    def __len__(self) -> int:
        return len(self.kinds)

    @property
    def num_timesteps(self) -> int:
        return int(self.timesteps.max()) + 1 if len(self) else 0


def layout_skeleton(
    T: int,
    M: int,
    layout: Layout,
) -> tuple[NDArray[np.int64], NDArray[np.int64], NDArray[np.int64]]:
    """
    Kinds, timesteps and patch indices of every position of a window
    """
    step_kinds = [TokenKind.PATCH] * M + list(layout.kinds)
    kinds = np.tile(np.asarray(step_kinds, dtype=np.int64), T)
    timesteps = np.repeat(np.arange(T, dtype=np.int64), M + len(layout.kinds))
    step_patches = list(range(M)) + [0] * len(layout.kinds)
    patch_index = np.tile(np.asarray(step_patches, dtype=np.int64), T)
    return kinds, timesteps, patch_index


def build_window(
    traj: Trajectory,
    start: int,
    T: int,
    codec: Codec,
    layout: Layout = Layout.DT,
    inclusive_returns: bool = False,
    observations: Optional[NDArray] = None,
) -> TokenSequence:
    """
    Build the token window covering timesteps `[start, start + T)` of an
    episode.

    ## Args

    * `observations`: replacement observations for the window (for instance
      after augmentation). Defaults to the episode's own observations.
    * `inclusive_returns`: use returns that include the reward of the
      timestep itself
    """
    if T < 1:
        raise MgdtInputError(f"Window length must be at least 1, got {T}")
    if start < 0 or start + T > len(traj):
        raise MgdtInputError(
            f"Window [{start}, {start + T}) exceeds the episode of length "
            f"{len(traj)}"
        )
    if observations is None:
        observations = traj.observations[start:start + T]
    if len(observations) != T:
        raise MgdtInputError(
            f"Expected {T} observations for the window, got "
            f"{len(observations)}"
        )

    grid = codec.grid
    M = grid.num_patches
    kinds, timesteps, patch_index = layout_skeleton(T, M, layout)
    L = len(kinds)
    step_len = layout.step_length(M)

    patches = np.zeros((L, grid.patch_dim), dtype=np.float32)
    token_ids = np.full(L, NO_TARGET, dtype=np.int64)

    for t in range(T):
        base = t * step_len
        k = start + t
        patches[base:base + M] = patchify(observations[t], grid)
        discrete = {
            TokenKind.ACTION: codec.action_id(int(traj.actions[k])),
            TokenKind.REWARD: codec.reward_id(float(traj.rewards[k])),
        }
        if TokenKind.RETURN in layout.kinds:
            rtg = float(traj.returns_to_go[k])
            if inclusive_returns:
                rtg += float(traj.rewards[k])
            discrete[TokenKind.RETURN] = codec.return_id(rtg)
        for kind in layout.kinds:
            token_ids[base + layout.offset(kind, M)] = discrete[kind]

    is_discrete = kinds != TokenKind.PATCH
    return TokenSequence(
        kinds=kinds,
        patches=patches,
        patch_index=patch_index,
        token_ids=token_ids,
        targets=np.where(is_discrete, token_ids, NO_TARGET),
        loss_weights=is_discrete.astype(np.float32),
        timesteps=timesteps,
        layout=layout,
    )


def mask_for(
    kinds: NDArray[np.int64],
    timesteps: NDArray[np.int64],
) -> AttentionMask:
    """
    Attention mask for positions with the given kinds and timesteps.

    Causal, except that observation patches of the same timestep can all see
    each other. Padding positions see only themselves.
    """
    L = len(kinds)
    pos = np.arange(L)
    causal = pos[None, :] <= pos[:, None]
    is_patch = kinds == TokenKind.PATCH
    same_step = timesteps[:, None] == timesteps[None, :]
    mask = causal | (same_step & is_patch[:, None] & is_patch[None, :])
    is_pad = kinds == TokenKind.PAD
    mask[is_pad, :] = False
    mask[:, is_pad] = False
    mask[pos[is_pad], pos[is_pad]] = True
    return mask


def build_mask(T: int, M: int, layout: Layout = Layout.DT) -> AttentionMask:
    """
    Attention mask for a window of `T` timesteps with `M` patches each
    """
    if T < 1 or M < 1:
        raise MgdtInputError(
            f"A window needs at least one timestep and patch, got T={T}, "
            f"M={M}"
        )
    kinds, timesteps, _ = layout_skeleton(T, M, layout)
    return mask_for(kinds, timesteps)


@dataclass(frozen=True)
class Augmentation:
    """
    Parameters of the transform applied to every frame of a window
    """
    offset: tuple[int, int] = (consts.CROP_PAD, consts.CROP_PAD)
    """
    Top-left corner of the crop within the zero-padded image
    """
    rotation: int = 0
    """
    Number of counter-clockwise quarter turns
    """


def draw_augmentation(
    rng: np.random.Generator,
    image_shape: tuple[int, ...],
) -> Augmentation:
    """
    Draw a random crop offset and rotation. Non-square images are only
    rotated by half turns so that their shape is kept.
    """
    span = 2 * consts.CROP_PAD + 1
    dy, dx = (int(v) for v in rng.integers(0, span, size=2))
    square = image_shape[0] == image_shape[1]
    rotation = int(rng.integers(0, 4)) if square else 2 * int(
        rng.integers(0, 2))
    return Augmentation((dy, dx), rotation)


def apply_augmentation(
    observations: NDArray,
    aug: Augmentation,
) -> NDArray:
    """
    Pad every frame with zeros, crop it back to its size at `aug.offset`, then
    rotate it. Frames have shape `(H, W)` or `(H, W, C)`.
    """
    obs = np.asarray(observations)
    pad = consts.CROP_PAD
    H, W = obs.shape[1], obs.shape[2]
    widths = [(0, 0), (pad, pad), (pad, pad)] + [(0, 0)] * (obs.ndim - 3)
    padded = np.pad(obs, widths)
    dy, dx = aug.offset
    cropped = padded[:, dy:dy + H, dx:dx + W]
    return np.ascontiguousarray(np.rot90(cropped, aug.rotation, axes=(1, 2)))


def augment_window(observations: NDArray, seed: SeedLike) -> NDArray:
    """
    Apply one random crop and rotation, drawn once, to all frames of a window
    """
    obs = np.asarray(observations)
    if obs.ndim < 3:
        raise MgdtInputError(
            f"Expected a stack of frames, got an array of shape {obs.shape}")
    rng = np.random.default_rng(seed)
    return apply_augmentation(obs, draw_augmentation(rng, obs.shape[1:]))


@dataclass
class WindowBatch:
    """
    Windows padded to a common length and stacked along a leading batch axis
    """
    kinds: NDArray[np.int64]
    patches: NDArray[np.float32]
    patch_index: NDArray[np.int64]
    token_ids: NDArray[np.int64]
    targets: NDArray[np.int64]
    loss_weights: NDArray[np.float32]
    timesteps: NDArray[np.int64]
    masks: NDArray[np.bool_]

    def __len__(self) -> int:
        return len(self.kinds)

    @property
    def length(self) -> int:
        return self.kinds.shape[1]


def collate(
    windows: Sequence[tuple[TokenSequence, AttentionMask]],
) -> WindowBatch:
    """
    Stack windows into a batch, padding shorter ones at the end
    """
    if not windows:
        raise MgdtInputError("Can't collate an empty list of windows")
    L = max(len(seq) for seq, _ in windows)
    B = len(windows)
    P = windows[0][0].patches.shape[1]

    kinds = np.full((B, L), TokenKind.PAD, dtype=np.int64)
    patches = np.zeros((B, L, P), dtype=np.float32)
    patch_index = np.zeros((B, L), dtype=np.int64)
    token_ids = np.full((B, L), NO_TARGET, dtype=np.int64)
    targets = np.full((B, L), NO_TARGET, dtype=np.int64)
    weights = np.zeros((B, L), dtype=np.float32)
    timesteps = np.zeros((B, L), dtype=np.int64)
    masks = np.zeros((B, L, L), dtype=bool)

    for b, (seq, mask) in enumerate(windows):
        n = len(seq)
        if mask.shape != (n, n):
            raise MgdtInputError(
                f"Mask of shape {mask.shape} doesn't match window {b} of "
                f"length {n}"
            )
        kinds[b, :n] = seq.kinds
        patches[b, :n] = seq.patches
        patch_index[b, :n] = seq.patch_index
        token_ids[b, :n] = seq.token_ids
        targets[b, :n] = seq.targets
        weights[b, :n] = seq.loss_weights
        timesteps[b, :n] = seq.timesteps
        # Padding sits after every real position and gets its own timestep
        timesteps[b, n:] = seq.num_timesteps + np.arange(L - n)
        masks[b, :n, :n] = mask
        masks[b, np.arange(n, L), np.arange(n, L)] = True

    return WindowBatch(
        kinds=kinds,
        patches=patches,
        patch_index=patch_index,
        token_ids=token_ids,
        targets=targets,
        loss_weights=weights,
        timesteps=timesteps,
        masks=masks,
    )
