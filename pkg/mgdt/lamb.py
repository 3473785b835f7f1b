"""
# Mgdt > LAMB

Layer-wise adaptive moments optimizer, with linear learning-rate warm-up and
global gradient-norm clipping.

All operations are functional over parameter registries: `lamb_step` returns
new parameters and a new state instead of updating them in place.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable
import torch
from .errors import MgdtConfigError, MgdtInputError, MgdtNumericError
from .model import Gradients, ModelParams, is_norm_or_bias


log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LambHyper:
    """
    Hyperparameters of the optimizer
    """
    peak_lr: float = 3e-4
    warmup_steps: int = 4000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-6
    weight_decay: float = 0.0
    clip_norm: float = 1.0

    def __post_init__(self) -> None:
        if self.warmup_steps <= 0:
            raise MgdtConfigError(
                f"warmup_steps must be positive, got {self.warmup_steps}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise MgdtConfigError(
                f"Invalid betas ({self.beta1}, {self.beta2})")
        if self.peak_lr < 0 or self.eps < 0 or self.weight_decay < 0:
            raise MgdtConfigError(f"Invalid optimizer settings {self}")


PRETRAIN = LambHyper()
"""
Settings used to train models on the full multi-game dataset. Run
configurations take their defaults from here, with a warm-up shortened to
suit their smaller step budgets.
"""

FINETUNE = LambHyper(peak_lr=1e-4, weight_decay=1e-2)
"""
Settings used to fine-tune a pretrained model on a held-out game
"""


def lr_schedule(step: int, peak_lr: float, warmup_steps: int) -> float:
    """
    Learning rate at a step: linear warm-up to `peak_lr`, then constant
    """
    if warmup_steps <= 0:
        raise MgdtConfigError(
            f"warmup_steps must be positive, got {warmup_steps}")
    if step < 0:
        raise MgdtInputError(f"Step must be non-negative, got {step}")
    return peak_lr * min(1.0, (step + 1) / warmup_steps)


def global_norm(grads: Gradients) -> float:
    """
    L2 norm of all gradient tensors taken together
    """
    total = sum(
        float(g.double().pow(2).sum()) for g in grads.values()
    )
    return math.sqrt(total)


def clip_global_norm(grads: Gradients, max_norm: float = 1.0) -> Gradients:
    """
    Scale all gradients down together so that their global norm is at most
    `max_norm`
    """
    norm = global_norm(grads)
    if not math.isfinite(norm):
        raise MgdtNumericError("gradient norm")
    if norm <= max_norm:
        return grads
    scale = max_norm / norm
    return {name: g * scale for name, g in grads.items()}


def default_decay_mask(name: str) -> bool:
    """
    Weight decay applies to weights and embeddings, but not to biases or
    layer-norm parameters
    """
    return not is_norm_or_bias(name)


@dataclass
class OptimState:
    """
    Moments and step counter of the optimizer
    """
    hyper: LambHyper
    m: dict[str, torch.Tensor] = field(default_factory=dict)
    v: dict[str, torch.Tensor] = field(default_factory=dict)
    step: int = 0

    @classmethod
    def init(cls, params: ModelParams, hyper: LambHyper) -> 'OptimState':
        return cls(
            hyper=hyper,
            m={name: torch.zeros_like(p) for name, p in params.items()},
            v={name: torch.zeros_like(p) for name, p in params.items()},
            step=0,
        )

    @property
    def lr(self) -> float:
        """
        Learning rate that the next step will use
        """
        return lr_schedule(
            self.step, self.hyper.peak_lr, self.hyper.warmup_steps)


def _trust_ratio(w: torch.Tensor, u: torch.Tensor) -> torch.Tensor:
    w_norm = w.norm()
    u_norm = u.norm()
    if w_norm > 0 and u_norm > 0:
        return w_norm / u_norm
    return torch.ones((), dtype=w.dtype)


def lamb_step(
    params: ModelParams,
    grads: Gradients,
    state: OptimState,
    decay_mask: Callable[[str], bool] = default_decay_mask,
) -> tuple[ModelParams, OptimState]:
    """
    Apply a single optimizer step.

    For every tensor `w` with gradient `g`:

    ```
    m = b1 m + (1 - b1) g
    v = b2 v + (1 - b2) g^2
    u = m_hat / (sqrt(v_hat) + eps) + wd w
    w = w - lr * (|w| / |u|) * u
    ```

    where the trust ratio `|w| / |u|` falls back to 1 if either norm is zero.

    Gradients are expected to already be clipped.
    """
    if params.keys() != grads.keys():
        missing = params.keys() ^ grads.keys()
        raise MgdtInputError(
            f"Parameters and gradients don't match: {sorted(missing)}")
    hyper = state.hyper
    lr = state.lr
    t = state.step + 1
    correction1 = 1 - hyper.beta1 ** t
    correction2 = 1 - hyper.beta2 ** t

    new_params: ModelParams = {}
    new_m: dict[str, torch.Tensor] = {}
    new_v: dict[str, torch.Tensor] = {}
    for name, w in params.items():
        g = grads[name]
        if g.shape != w.shape or state.m[name].shape != w.shape:
            raise MgdtInputError(
                f"Shape mismatch for '{name}': parameter {tuple(w.shape)}, "
                f"gradient {tuple(g.shape)}, moment "
                f"{tuple(state.m[name].shape)}"
            )
        m = hyper.beta1 * state.m[name] + (1 - hyper.beta1) * g
        v = hyper.beta2 * state.v[name] + (1 - hyper.beta2) * g * g
        update = (m / correction1) / ((v / correction2).sqrt() + hyper.eps)
        if hyper.weight_decay and decay_mask(name):
            update = update + hyper.weight_decay * w
        new_params[name] = w - lr * _trust_ratio(w, update) * update
        new_m[name] = m
        new_v[name] = v

    return new_params, replace(state, m=new_m, v=new_v, step=t)
