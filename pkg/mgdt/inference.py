"""
# Mgdt > Inference

Choosing actions with a trained model.

At every timestep the model first predicts a distribution over the return
still to come. In the default `expert-bias` mode, that distribution is tilted
towards high returns, a return is sampled from it, and the action is then
sampled conditioned on that return:

```
log P(R | ...) + kappa * (R - r_low) / (r_high - r_low)
```

The `top-n` mode instead draws `n` returns from the untilted distribution and
conditions on the best of them, and the `bc` mode samples actions directly
from a model trained without return tokens.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Protocol
import numpy as np
import torch
from numpy.typing import NDArray
from . import _consts as consts
from ._consts import NO_TARGET, TokenKind
from .errors import MgdtInputError, MgdtInternalError
from .sequence import (
    AttentionMask,
    Layout,
    TokenSequence,
    build_mask,
    layout_skeleton,
)
from .tokens import Codec, ReturnQuantizer, patchify


log = logging.getLogger(__name__)


class SamplerMode(Enum):
    EXPERT_BIAS = "expert-bias"
    TOP_N = "top-n"
    BC = "bc"


class Regeneration(Enum):
    LATEST = "latest-only"
    """
    Sample only the current return, keeping those sampled at earlier steps
    """
    FULL = "full"
    """
    Resample every return of the window, left to right, at each step
    """


TOP_N_INVERSE_TEMPERATURE = 0.75
TOP_N_ACTION_PERCENTILE = 50.0


@dataclass(frozen=True)
class SamplerConfig:
    kappa: float = consts.KAPPA
    temperature: float = 1.0
    percentile: float = 85.0
    """
    Only tokens whose logit is at least this percentile of all the logits
    (with linear interpolation between values) can be sampled
    """
    mode: SamplerMode = SamplerMode.EXPERT_BIAS
    n_samples: int = 128
    """
    Number of returns drawn in `top-n` mode
    """
    regeneration: Regeneration = Regeneration.LATEST

    return_temperature: Optional[float] = None
    return_percentile: Optional[float] = None
    action_percentile: Optional[float] = None
    """
    Per-token overrides. When unset, `top-n` mode samples returns at inverse
    temperature 0.75 with no cutoff and actions from the top half of the
    logits, and the other modes use `temperature` and `percentile`.
    """

    def __post_init__(self) -> None:
        if self.kappa < 0:
            raise MgdtInputError(
                f"kappa must be non-negative, got {self.kappa}")
        for t in (self.temperature, self.return_temperature):
            if t is not None and not t > 0:
                raise MgdtInputError(f"Temperature must be positive, got {t}")
        for p in (self.percentile, self.return_percentile,
                  self.action_percentile):
            if p is not None and not 0 <= p < 100:
                raise MgdtInputError(
                    f"Percentile must be in [0, 100), got {p}")
        if self.n_samples < 1:
            raise MgdtInputError(
                f"n_samples must be at least 1, got {self.n_samples}")

    @property
    def layout(self) -> Layout:
        return Layout.BC if self.mode == SamplerMode.BC else Layout.DT

    @property
    def return_sampling(self) -> tuple[float, float]:
        """
        `(temperature, percentile)` used for returns
        """
        top_n = self.mode == SamplerMode.TOP_N
        temperature = self.return_temperature or (
            1 / TOP_N_INVERSE_TEMPERATURE if top_n else self.temperature)
        percentile = self.return_percentile
        if percentile is None:
            percentile = 0.0 if top_n else self.percentile
        return temperature, percentile

    @property
    def action_sampling(self) -> tuple[float, float]:
        """
        `(temperature, percentile)` used for actions
        """
        percentile = self.action_percentile
        if percentile is None:
            percentile = (
                TOP_N_ACTION_PERCENTILE if self.mode == SamplerMode.TOP_N
                else self.percentile
            )
        return self.temperature, percentile


class SequenceModel(Protocol):
    """
    Anything giving next-token logits for a single window
    """

    @property
    def max_len(self) -> int:
        ...

    def logits(self, seq: TokenSequence, mask: AttentionMask) -> torch.Tensor:
        """
        Logits at every position, shape `(L, V)`
        """
        ...


def expert_bias(
    return_logits: torch.Tensor,
    kappa: float,
    r_low: float = consts.RETURN_LOW,
    r_high: float = consts.RETURN_HIGH,
    quantizer: ReturnQuantizer = ReturnQuantizer(),
) -> torch.Tensor:
    """
    Add a bias growing linearly from 0 at `r_low` to `kappa` at `r_high` to
    the logit of every return bucket
    """
    if return_logits.shape[-1] != quantizer.n_bins:
        raise MgdtInputError(
            f"Expected {quantizer.n_bins} return logits, got "
            f"{return_logits.shape[-1]}"
        )
    values = torch.as_tensor(
        quantizer.bin_values(), dtype=return_logits.dtype)
    return return_logits + kappa * (values - r_low) / (r_high - r_low)


def _cutoff_probs(
    logits: torch.Tensor,
    temperature: float,
    percentile: float,
) -> torch.Tensor:
    if not torch.isfinite(logits).all():
        raise MgdtInputError("Can't sample from non-finite logits")
    logits = logits.double()
    cutoff = torch.quantile(logits, percentile / 100, interpolation="linear")
    keep = logits >= cutoff
    if not keep.any():
        raise MgdtInternalError(
            f"Percentile cutoff {percentile} excluded every token")
    scaled = (logits / temperature).masked_fill(~keep, float("-inf"))
    return torch.softmax(scaled, dim=-1)


def sample_token(
    logits: torch.Tensor,
    temperature: float = 1.0,
    percentile: float = 0.0,
    generator: Optional[torch.Generator] = None,
) -> int:
    """
    Sample an index from a vector of logits.

    Indices whose logit is below the `percentile`-th percentile of the vector
    are excluded, and the remaining logits are divided by `temperature`
    before the softmax.
    """
    probs = _cutoff_probs(logits, temperature, percentile)
    return int(torch.multinomial(probs, 1, generator=generator))


def sample_tokens(
    logits: torch.Tensor,
    n: int,
    temperature: float = 1.0,
    percentile: float = 0.0,
    generator: Optional[torch.Generator] = None,
) -> torch.Tensor:
    """
    Draw `n` independent samples as `sample_token` would
    """
    probs = _cutoff_probs(logits, temperature, percentile)
    return torch.multinomial(probs, n, replacement=True, generator=generator)


@dataclass
class _Step:
    patches: NDArray[np.float32]
    return_id: Optional[int] = None
    action_id: Optional[int] = None
    reward_id: Optional[int] = None


@dataclass
class InferenceContext:
    """
    The window of recent timesteps the model acts from. Only the last
    `window` timesteps are kept, the last of which is the current one.
    """
    window: int
    codec: Codec = Codec()
    layout: Layout = Layout.DT
    steps: list[_Step] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.window < 1:
            raise MgdtInputError(
                f"Context window must be positive, got {self.window}")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def current(self) -> _Step:
        if not self.steps:
            raise MgdtInputError("The context has no observation yet")
        return self.steps[-1]

    def observe(self, observation: NDArray) -> None:
        """
        Start a new timestep from an observation. Accepts either an image or
        its patches.
        """
        if self.steps and self.current.action_id is None:
            raise MgdtInputError(
                "Can't observe a new timestep before acting on the last one")
        obs = np.asarray(observation)
        grid = self.codec.grid
        if obs.shape == (grid.num_patches, grid.patch_dim):
            patches = obs.astype(np.float32)
        else:
            patches = patchify(obs, grid)
        self.steps.append(_Step(patches))
        del self.steps[:-self.window]

    def record(self, return_id: Optional[int], action: int) -> None:
        """
        Store the return conditioned on, and the action taken, at the current
        timestep
        """
        step = self.current
        if self.layout == Layout.DT and return_id is None:
            raise MgdtInputError("A return is needed with the DT layout")
        step.return_id = return_id
        step.action_id = self.codec.action_id(action)

    def reward(self, r: float) -> None:
        self.current.reward_id = self.codec.reward_id(r)

    def position(self, t: int, kind: TokenKind) -> int:
        """
        Position in the window of the token of kind `kind` at timestep `t`
        """
        M = self.codec.grid.num_patches
        return t * self.layout.step_length(M) + self.layout.offset(kind, M)

    def sequence(self) -> tuple[TokenSequence, AttentionMask]:
        """
        The window as model input. Tokens not chosen yet are filled with a
        placeholder, which causal attention hides from earlier positions.
        """
        T = len(self.steps)
        M = self.codec.grid.num_patches
        kinds, timesteps, patch_index = layout_skeleton(T, M, self.layout)
        L = len(kinds)
        patches = np.zeros((L, self.codec.grid.patch_dim), dtype=np.float32)
        token_ids = np.zeros(L, dtype=np.int64)
        step_len = self.layout.step_length(M)
        for t, step in enumerate(self.steps):
            base = t * step_len
            patches[base:base + M] = step.patches
            ids = {
                TokenKind.RETURN: step.return_id,
                TokenKind.ACTION: step.action_id,
                TokenKind.REWARD: step.reward_id,
            }
            for kind in self.layout.kinds:
                value = ids[kind]
                token_ids[base + self.layout.offset(kind, M)] = (
                    0 if value is None else value)
        seq = TokenSequence(
            kinds=kinds,
            patches=patches,
            patch_index=patch_index,
            token_ids=token_ids,
            targets=np.full(L, NO_TARGET, dtype=np.int64),
            loss_weights=np.zeros(L, dtype=np.float32),
            timesteps=timesteps,
            layout=self.layout,
        )
        return seq, build_mask(T, M, self.layout)


def _predicted(
    model: SequenceModel,
    ctx: InferenceContext,
    t: int,
    kind: TokenKind,
) -> torch.Tensor:
    """
    Logits over the ids of `kind` for its token at timestep `t`
    """
    seq, mask = ctx.sequence()
    if len(seq) > model.max_len:
        raise MgdtInputError(
            f"Context of {len(seq)} positions is longer than the model "
            f"maximum {model.max_len}"
        )
    logits = model.logits(seq, mask)
    ids = ctx.codec.vocab.id_range(kind)
    return logits[ctx.position(t, kind) - 1, ids.start:ids.stop]


def _require_layout(ctx: InferenceContext, layout: Layout) -> None:
    if ctx.layout != layout:
        raise MgdtInputError(
            f"Expected a context with the {layout.name} layout, got "
            f"{ctx.layout.name}"
        )


def _sample_return(
    model: SequenceModel,
    ctx: InferenceContext,
    t: int,
    cfg: SamplerConfig,
    generator: Optional[torch.Generator],
) -> int:
    q = ctx.codec.quantizer
    logits = expert_bias(
        _predicted(model, ctx, t, TokenKind.RETURN),
        cfg.kappa,
        q.r_low,
        q.r_high,
        q,
    )
    temperature, percentile = cfg.return_sampling
    index = sample_token(logits, temperature, percentile, generator)
    return ctx.codec.vocab.encode(TokenKind.RETURN, index)


def _sample_action(
    model: SequenceModel,
    ctx: InferenceContext,
    cfg: SamplerConfig,
    generator: Optional[torch.Generator],
) -> int:
    logits = _predicted(model, ctx, len(ctx) - 1, TokenKind.ACTION)
    temperature, percentile = cfg.action_sampling
    return sample_token(logits, temperature, percentile, generator)


def act(
    model: SequenceModel,
    ctx: InferenceContext,
    cfg: SamplerConfig = SamplerConfig(),
    generator: Optional[torch.Generator] = None,
) -> tuple[int, float]:
    """
    Sample an expert-biased return for the current timestep, then an action
    conditioned on it. The context is updated with both.

    ## Returns

    * `(action, return)`
    """
    _require_layout(ctx, Layout.DT)
    current = len(ctx) - 1
    if cfg.regeneration == Regeneration.FULL:
        for t in range(current):
            ctx.steps[t].return_id = _sample_return(
                model, ctx, t, cfg, generator)
    return_id = _sample_return(model, ctx, current, cfg, generator)
    # The action is predicted conditioned on the sampled return
    ctx.current.return_id = return_id
    action = _sample_action(model, ctx, cfg, generator)
    ctx.record(return_id, action)
    sampled = ctx.codec.quantizer.dequantize(return_id)
    log.debug(f"Sampled return {sampled} and action {action}")
    return action, sampled


def act_top_n(
    model: SequenceModel,
    ctx: InferenceContext,
    cfg: SamplerConfig = SamplerConfig(mode=SamplerMode.TOP_N),
    generator: Optional[torch.Generator] = None,
) -> tuple[int, float]:
    """
    Draw `cfg.n_samples` returns from the model's (untilted) return
    distribution, and condition the action on the highest of them.

    ## Returns

    * `(action, return)`
    """
    _require_layout(ctx, Layout.DT)
    current = len(ctx) - 1
    logits = _predicted(model, ctx, current, TokenKind.RETURN)
    temperature, percentile = cfg.return_sampling
    draws = sample_tokens(
        logits, cfg.n_samples, temperature, percentile, generator)
    return_id = ctx.codec.vocab.encode(TokenKind.RETURN, int(draws.max()))
    ctx.current.return_id = return_id
    action = _sample_action(model, ctx, cfg, generator)
    ctx.record(return_id, action)
    return action, ctx.codec.quantizer.dequantize(return_id)


def act_bc(
    model: SequenceModel,
    ctx: InferenceContext,
    cfg: SamplerConfig = SamplerConfig(mode=SamplerMode.BC),
    generator: Optional[torch.Generator] = None,
) -> int:
    """
    Sample an action straight from a model trained without return tokens
    """
    _require_layout(ctx, Layout.BC)
    action = _sample_action(model, ctx, cfg, generator)
    ctx.record(None, action)
    return action


def choose_action(
    model: SequenceModel,
    ctx: InferenceContext,
    cfg: SamplerConfig,
    generator: Optional[torch.Generator] = None,
) -> tuple[int, Optional[float]]:
    """
    Pick an action with the sampler selected by `cfg.mode`

    ## Returns

    * `(action, return)`, where the return is `None` in `bc` mode
    """
    if cfg.mode == SamplerMode.EXPERT_BIAS:
        return act(model, ctx, cfg, generator)
    if cfg.mode == SamplerMode.TOP_N:
        return act_top_n(model, ctx, cfg, generator)
    return act_bc(model, ctx, cfg, generator), None
