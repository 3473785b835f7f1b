"""
# Mgdt > Tokens

Conversion of observations, returns, actions and rewards to and from the
token representations consumed by the model.

* Returns are uniformly quantized into `n_bins` buckets.
* Rewards are reduced to their sign, giving a ternary alphabet.
* Observations are split into a grid of non-overlapping patches, each of which
  becomes a single (continuous) input token.
* Returns, actions and rewards share one vocabulary of discrete ids, with a
  contiguous id range per kind.
"""
import math
from dataclasses import dataclass
import numpy as np
from numpy.typing import NDArray
from . import _consts as consts
from ._consts import TokenKind
from .errors import MgdtConfigError, MgdtInputError


def _require_finite(value: float, what: str) -> None:
    if not math.isfinite(value):
        raise MgdtInputError(f"Expected a finite {what}, got {value}")


@dataclass(frozen=True)
class ReturnQuantizer:
    """
    Uniform quantizer for returns-to-go
    """
    r_low: int = consts.RETURN_LOW
    r_high: int = consts.RETURN_HIGH
    bin_size: float = consts.RETURN_BIN_SIZE

    def __post_init__(self) -> None:
        if not self.r_low < self.r_high:
            raise MgdtConfigError(
                f"Return range is empty: r_low={self.r_low}, "
                f"r_high={self.r_high}"
            )
        if not self.bin_size > 0:
            raise MgdtConfigError(
                f"Return bin size must be positive, got {self.bin_size}")

    @property
    def n_bins(self) -> int:
        """
        Number of return buckets (121 for the default range)
        """
        return int(math.floor((self.r_high - self.r_low) / self.bin_size)) + 1

    def quantize(self, r: float) -> int:
        """
        Map a return to the index of its bucket. Returns outside the range are
        clamped to the first or last bucket.
        """
        _require_finite(r, "return")
        index = math.floor((r - self.r_low) / self.bin_size)
        return min(max(index, 0), self.n_bins - 1)

    def dequantize(self, index: int) -> float:
        """
        Map a bucket index back to the lower edge of its bucket
        """
        if not 0 <= index < self.n_bins:
            raise MgdtInputError(
                f"Return bucket {index} is outside [0, {self.n_bins})")
        return self.r_low + index * self.bin_size

    def bin_values(self) -> NDArray[np.float64]:
        """
        The return value represented by every bucket, in bucket order
        """
        return self.r_low + np.arange(self.n_bins) * self.bin_size


def quantize_return(r: float, quantizer: ReturnQuantizer) -> int:
    return quantizer.quantize(r)


def dequantize_return(index: int, quantizer: ReturnQuantizer) -> float:
    return quantizer.dequantize(index)


def ternarize_reward(r: float) -> int:
    """
    Reduce a scalar reward to -1, 0 or +1
    """
    _require_finite(r, "reward")
    if r > 0:
        return 1
    if r < 0:
        return -1
    return 0


@dataclass(frozen=True)
class PatchGrid:
    """
    Geometry of the split of an observation image into patches
    """
    image_h: int = 12
    image_w: int = 12
    patch_h: int = 4
    patch_w: int = 4
    channels: int = 1

    def __post_init__(self) -> None:
        if min(self.image_h, self.image_w, self.patch_h, self.patch_w,
               self.channels) < 1:
            raise MgdtConfigError(f"Invalid patch grid {self}")
        if self.image_h % self.patch_h or self.image_w % self.patch_w:
            raise MgdtConfigError(
                f"Patches of {self.patch_h}x{self.patch_w} don't tile an "
                f"image of {self.image_h}x{self.image_w}"
            )

    @property
    def rows(self) -> int:
        return self.image_h // self.patch_h

    @property
    def cols(self) -> int:
        return self.image_w // self.patch_w

    @property
    def num_patches(self) -> int:
        """
        The number of patches, `M`
        """
        return self.rows * self.cols

    @property
    def patch_dim(self) -> int:
        """
        Number of entries in a flattened patch vector
        """
        return self.patch_h * self.patch_w * self.channels

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return (self.image_h, self.image_w, self.channels)


def _as_hwc(image: NDArray, grid: PatchGrid) -> NDArray:
    if image.ndim == 2:
        image = image[:, :, None]
    if image.shape != grid.image_shape:
        raise MgdtInputError(
            f"Image of shape {image.shape} doesn't match the patch grid "
            f"geometry {grid.image_shape}"
        )
    return image


def patchify(image: NDArray, grid: PatchGrid) -> NDArray[np.float32]:
    """
    Split an image into `M` flattened patches in row-major patch order.

    Integer images are scaled from `[0, 255]` into `[0, 1]`; floating point
    images are assumed to already be scaled.

    ## Returns

    * `NDArray`: array of shape `(M, patch_h * patch_w * channels)`
    """
    image = _as_hwc(np.asarray(image), grid)
    if np.issubdtype(image.dtype, np.integer):
        scaled = image.astype(np.float32) / consts.PIXEL_MAX
    else:
        scaled = image.astype(np.float32)
    return np.ascontiguousarray(
        scaled
        .reshape(grid.rows, grid.patch_h, grid.cols, grid.patch_w,
                 grid.channels)
        .transpose(0, 2, 1, 3, 4)
        .reshape(grid.num_patches, grid.patch_dim)
    )


def unpatchify(
    patches: NDArray,
    grid: PatchGrid,
    raw: bool = False,
) -> NDArray:
    """
    Reassemble an image from its patches.

    ## Args

    * `patches`: array of shape `(M, patch_dim)` as given by `patchify`
    * `raw`: when set, rescale to `[0, 255]` and return a `uint8` image
    """
    patches = np.asarray(patches)
    if patches.shape != (grid.num_patches, grid.patch_dim):
        raise MgdtInputError(
            f"Expected patches of shape {(grid.num_patches, grid.patch_dim)}, "
            f"got {patches.shape}"
        )
    image = (
        patches
        .reshape(grid.rows, grid.cols, grid.patch_h, grid.patch_w,
                 grid.channels)
        .transpose(0, 2, 1, 3, 4)
        .reshape(grid.image_shape)
    )
    if raw:
        return np.rint(image * consts.PIXEL_MAX).astype(np.uint8)
    return image


@dataclass(frozen=True)
class TokenVocabulary:
    """
    Shared vocabulary of discrete token ids.

    Ids are laid out as `[returns | actions | rewards]`.
    """
    n_returns: int = ReturnQuantizer().n_bins
    n_actions: int = consts.NUM_ACTIONS
    reward_values: tuple[int, ...] = consts.REWARD_VALUES

    @property
    def size(self) -> int:
        return self.n_returns + self.n_actions + len(self.reward_values)

    def id_range(self, kind: TokenKind) -> range:
        """
        The ids used by tokens of the given kind
        """
        if kind == TokenKind.RETURN:
            return range(0, self.n_returns)
        if kind == TokenKind.ACTION:
            return range(self.n_returns, self.n_returns + self.n_actions)
        if kind == TokenKind.REWARD:
            start = self.n_returns + self.n_actions
            return range(start, start + len(self.reward_values))
        raise MgdtInputError(f"Tokens of kind {kind.name} have no ids")

    def encode(self, kind: TokenKind, value: int) -> int:
        """
        Give the id of a token. `value` is a return bucket index, an action
        id, or a ternary reward.
        """
        ids = self.id_range(kind)
        if kind == TokenKind.REWARD:
            if value not in self.reward_values:
                raise MgdtInputError(f"{value} is not a ternary reward")
            return ids.start + self.reward_values.index(value)
        if not 0 <= value < len(ids):
            raise MgdtInputError(
                f"{kind.name.lower()} value {value} is outside "
                f"[0, {len(ids)})"
            )
        return ids.start + value

    def decode(self, token_id: int) -> tuple[TokenKind, int]:
        """
        Give the `(kind, value)` pair of a token id
        """
        for kind in (TokenKind.RETURN, TokenKind.ACTION, TokenKind.REWARD):
            ids = self.id_range(kind)
            if token_id in ids:
                offset = token_id - ids.start
                if kind == TokenKind.REWARD:
                    return kind, self.reward_values[offset]
                return kind, offset
        raise MgdtInputError(
            f"Token id {token_id} is outside the vocabulary [0, {self.size})")


@dataclass(frozen=True)
class Codec:
    """
    Everything needed to turn trajectories into tokens
    """
    grid: PatchGrid = PatchGrid()
    quantizer: ReturnQuantizer = ReturnQuantizer()
    vocab: TokenVocabulary = TokenVocabulary()

    def __post_init__(self) -> None:
        if self.vocab.n_returns != self.quantizer.n_bins:
            raise MgdtConfigError(
                f"Vocabulary has {self.vocab.n_returns} return ids but the "
                f"quantizer has {self.quantizer.n_bins} buckets"
            )

    def return_id(self, r: float) -> int:
        return self.vocab.encode(TokenKind.RETURN, self.quantizer.quantize(r))

    def action_id(self, action: int) -> int:
        return self.vocab.encode(TokenKind.ACTION, int(action))

    def reward_id(self, r: float) -> int:
        return self.vocab.encode(TokenKind.REWARD, ternarize_reward(r))
