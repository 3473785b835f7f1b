"""
# Mgdt > Model

Decoder-only transformer over token windows.

The model is written functionally: its learned tensors live in a
`ModelParams` registry (a plain `dict` from name to tensor), and `forward`
takes that registry along with a batch of windows. This keeps gradient
checking, checkpointing and the optimizer simple, since they all just iterate
over the registry.

* Observation patches get a learned per-patch position embedding added before
  a shared linear projection.
* Returns, actions and rewards share a single embedding table (and a single
  output head) over the discrete vocabulary.
* Every position gets a learned sequence-position embedding.
* Blocks are pre-layer-norm with GELU MLPs and no dropout.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional
import torch
import torch.nn.functional as F
from ._consts import NO_TARGET, TokenKind
from .errors import MgdtConfigError, MgdtInputError, MgdtNumericError
from .sequence import AttentionMask, TokenSequence, WindowBatch, collate
from .tokens import Codec


log = logging.getLogger(__name__)


ModelParams = dict[str, torch.Tensor]
"""
Named registry of every learned tensor of the model
"""

Gradients = dict[str, torch.Tensor]


INIT_STD = 0.02
"""
Standard deviation of the (truncated at 2 std) normal initialization
"""


@dataclass(frozen=True)
class ModelConfig:
    """
    Shape of a model
    """
    n_layers: int = 2
    d_model: int = 64
    n_heads: int = 4
    d_ff: Optional[int] = None
    """
    Hidden width of the MLPs. Defaults to `4 * d_model`.
    """
    vocab_size: int = Codec().vocab.size
    max_len: int = 48
    """
    Longest window the model accepts (4 timesteps of 9 patches and 3 tokens)
    """
    patch_dim: int = Codec().grid.patch_dim
    num_patches: int = Codec().grid.num_patches
    dtype: str = "float32"

    def __post_init__(self) -> None:
        if min(self.n_layers, self.d_model, self.n_heads, self.vocab_size,
               self.max_len, self.patch_dim, self.num_patches) < 1:
            raise MgdtConfigError(f"Invalid model configuration {self}")
        if self.d_model % self.n_heads:
            raise MgdtConfigError(
                f"d_model={self.d_model} is not divisible by "
                f"n_heads={self.n_heads}"
            )
        if self.dtype not in ("float32", "float64"):
            raise MgdtConfigError(f"Unsupported dtype '{self.dtype}'")

    @property
    def ff_width(self) -> int:
        return self.d_ff if self.d_ff is not None else 4 * self.d_model

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @property
    def torch_dtype(self) -> torch.dtype:
        return getattr(torch, self.dtype)


PRESETS: dict[str, ModelConfig] = {
    "DT-tiny": ModelConfig(n_layers=2, d_model=64, n_heads=4),
    "DT-small": ModelConfig(n_layers=4, d_model=64, n_heads=8),
    "DT-medium": ModelConfig(n_layers=6, d_model=96, n_heads=12),
    "DT-large": ModelConfig(n_layers=10, d_model=160, n_heads=20),
}
"""
Model sizes keeping the layer/width/head ratios of the large-scale variants,
scaled down for desk use
"""


def preset(name: str, **overrides) -> ModelConfig:
    """
    Look up a model preset, optionally overriding some of its fields
    """
    try:
        base = PRESETS[name]
    except KeyError:
        raise MgdtConfigError(
            f"Unknown model preset '{name}'. Expected one of "
            f"{', '.join(PRESETS)}"
        ) from None
    return replace(base, **overrides)


def param_shapes(config: ModelConfig) -> dict[str, tuple[int, ...]]:
    """
    Name and shape of every tensor of a model, in registry order
    """
    d, V, P = config.d_model, config.vocab_size, config.patch_dim
    shapes: dict[str, tuple[int, ...]] = {
        "patch.pos": (config.num_patches, P),
        "patch.proj.weight": (d, P),
        "patch.proj.bias": (d,),
        "token.embed": (V, d),
        "seq.pos": (config.max_len, d),
    }
    for i in range(config.n_layers):
        shapes |= {
            f"layer{i}.ln1.weight": (d,),
            f"layer{i}.ln1.bias": (d,),
            f"layer{i}.attn.qkv.weight": (3 * d, d),
            f"layer{i}.attn.qkv.bias": (3 * d,),
            f"layer{i}.attn.out.weight": (d, d),
            f"layer{i}.attn.out.bias": (d,),
            f"layer{i}.ln2.weight": (d,),
            f"layer{i}.ln2.bias": (d,),
            f"layer{i}.mlp.in.weight": (config.ff_width, d),
            f"layer{i}.mlp.in.bias": (config.ff_width,),
            f"layer{i}.mlp.out.weight": (d, config.ff_width),
            f"layer{i}.mlp.out.bias": (d,),
        }
    shapes |= {
        "final_ln.weight": (d,),
        "final_ln.bias": (d,),
        "head.weight": (V, d),
        "head.bias": (V,),
    }
    return shapes


def parameter_count(config: ModelConfig) -> int:
    return sum(math.prod(shape) for shape in param_shapes(config).values())


def is_norm_or_bias(name: str) -> bool:
    """
    Whether a tensor is a layer-norm parameter or a bias
    """
    return name.endswith(".bias") or "ln" in name.split(".")[-2]


def _truncated_normal(
    shape: tuple[int, ...],
    generator: torch.Generator,
    dtype: torch.dtype,
) -> torch.Tensor:
    values = torch.randn(shape, generator=generator, dtype=torch.float64)
    while (outside := values.abs() > 2.0).any():
        values[outside] = torch.randn(
            int(outside.sum()), generator=generator, dtype=torch.float64)
    return (values * INIT_STD).to(dtype)


def init_params(config: ModelConfig, seed: int) -> ModelParams:
    """
    Create a freshly initialized parameter registry.

    Weights and embeddings are drawn from a truncated normal distribution,
    biases are zero and layer-norm scales are one.
    """
    generator = torch.Generator().manual_seed(seed)
    dtype = config.torch_dtype
    params: ModelParams = {}
    for name, shape in param_shapes(config).items():
        if name.endswith(".bias"):
            params[name] = torch.zeros(shape, dtype=dtype)
        elif name.split(".")[-2].startswith(("ln", "final_ln")):
            params[name] = torch.ones(shape, dtype=dtype)
        else:
            params[name] = _truncated_normal(shape, generator, dtype)
    log.debug(
        f"Initialized {len(params)} tensors "
        f"({parameter_count(config)} parameters) with seed {seed}"
    )
    return params


@dataclass
class BatchTensors:
    """
    A `WindowBatch` moved into torch
    """
    kinds: torch.Tensor
    patches: torch.Tensor
    patch_index: torch.Tensor
    token_ids: torch.Tensor
    targets: torch.Tensor
    loss_weights: torch.Tensor
    masks: torch.Tensor

    @classmethod
    def from_batch(
        cls,
        batch: WindowBatch,
        dtype: torch.dtype = torch.float32,
    ) -> 'BatchTensors':
        return cls(
            kinds=torch.from_numpy(batch.kinds),
            patches=torch.from_numpy(batch.patches).to(dtype),
            patch_index=torch.from_numpy(batch.patch_index),
            token_ids=torch.from_numpy(batch.token_ids),
            targets=torch.from_numpy(batch.targets),
            loss_weights=torch.from_numpy(batch.loss_weights).to(dtype),
            masks=torch.from_numpy(batch.masks),
        )


def as_batch(
    seq: 'TokenSequence | WindowBatch | BatchTensors',
    mask: Optional[AttentionMask] = None,
    dtype: torch.dtype = torch.float32,
) -> BatchTensors:
    """
    Accept a single window (with its mask), a collated batch, or tensors
    """
    if isinstance(seq, BatchTensors):
        return seq
    if isinstance(seq, TokenSequence):
        if mask is None:
            raise MgdtInputError("A single window needs its attention mask")
        seq = collate([(seq, mask)])
    return BatchTensors.from_batch(seq, dtype)


@dataclass
class ForwardOutput:
    logits: torch.Tensor
    """
    Logits over the discrete vocabulary, shape `(B, L, V)`
    """
    attentions: list[torch.Tensor] = field(default_factory=list)
    """
    Per layer, attention weights of shape `(B, heads, L, L)`, if requested
    """
    hidden: list[torch.Tensor] = field(default_factory=list)
    """
    Per layer, the residual stream entering the layer, followed by the final
    residual stream, if requested
    """


def embed(params: ModelParams, batch: BatchTensors) -> torch.Tensor:
    """
    Input embeddings of every position, shape `(B, L, d_model)`
    """
    L = batch.kinds.shape[1]
    max_len = params["seq.pos"].shape[0]
    if L > max_len:
        raise MgdtInputError(
            f"Window of length {L} is longer than the model maximum "
            f"{max_len}"
        )
    if batch.patches.shape[-1] != params["patch.pos"].shape[1]:
        raise MgdtInputError(
            f"Patch vectors have {batch.patches.shape[-1]} entries but the "
            f"model expects {params['patch.pos'].shape[1]}"
        )
    patch_in = batch.patches + params["patch.pos"][batch.patch_index]
    patch_emb = F.linear(
        patch_in, params["patch.proj.weight"], params["patch.proj.bias"])
    token_emb = params["token.embed"][batch.token_ids.clamp(min=0)]

    is_patch = (batch.kinds == TokenKind.PATCH).unsqueeze(-1)
    is_token = (
        (batch.kinds != TokenKind.PATCH) & (batch.kinds != TokenKind.PAD)
    ).unsqueeze(-1)
    x = torch.where(is_patch, patch_emb, torch.zeros_like(patch_emb))
    x = torch.where(is_token, token_emb, x)
    return x + params["seq.pos"][:L]


def _split_heads(x: torch.Tensor, n_heads: int) -> torch.Tensor:
    B, L, d = x.shape
    return x.view(B, L, n_heads, d // n_heads).transpose(1, 2)


def attention_weights(
    params: ModelParams,
    layer: int,
    x: torch.Tensor,
    masks: torch.Tensor,
    n_heads: int,
) -> torch.Tensor:
    """
    Attention weights of one layer given its input residual stream
    """
    p = f"layer{layer}"
    d = x.shape[-1]
    h = F.layer_norm(
        x, (d,), params[f"{p}.ln1.weight"], params[f"{p}.ln1.bias"])
    qkv = F.linear(
        h, params[f"{p}.attn.qkv.weight"], params[f"{p}.attn.qkv.bias"])
    q, k, _ = qkv.split(d, dim=-1)
    q, k = _split_heads(q, n_heads), _split_heads(k, n_heads)
    scores = q @ k.transpose(-1, -2) / math.sqrt(d // n_heads)
    scores = scores.masked_fill(~masks.unsqueeze(1), float("-inf"))
    return torch.softmax(scores, dim=-1)


def replay_block(
    params: ModelParams,
    layer: int,
    x: torch.Tensor,
    attn: torch.Tensor,
) -> torch.Tensor:
    """
    Output of one transformer block, given its input and attention weights
    """
    p = f"layer{layer}"
    d = x.shape[-1]
    n_heads = attn.shape[1]
    B, L, _ = x.shape
    h = F.layer_norm(
        x, (d,), params[f"{p}.ln1.weight"], params[f"{p}.ln1.bias"])
    qkv = F.linear(
        h, params[f"{p}.attn.qkv.weight"], params[f"{p}.attn.qkv.bias"])
    v = _split_heads(qkv[..., 2 * d:], n_heads)
    mixed = (attn @ v).transpose(1, 2).reshape(B, L, d)
    x = x + F.linear(
        mixed, params[f"{p}.attn.out.weight"], params[f"{p}.attn.out.bias"])

    h = F.layer_norm(
        x, (d,), params[f"{p}.ln2.weight"], params[f"{p}.ln2.bias"])
    h = F.gelu(F.linear(
        h, params[f"{p}.mlp.in.weight"], params[f"{p}.mlp.in.bias"]))
    return x + F.linear(
        h, params[f"{p}.mlp.out.weight"], params[f"{p}.mlp.out.bias"])


def num_layers(params: ModelParams) -> int:
    return sum(1 for name in params if name.endswith(".ln1.weight"))


def forward(
    params: ModelParams,
    seq: 'TokenSequence | WindowBatch | BatchTensors',
    mask: Optional[AttentionMask] = None,
    n_heads: Optional[int] = None,
    keep_attention: bool = False,
    keep_hidden: bool = False,
) -> ForwardOutput:
    """
    Run the model over a window or a batch of windows.

    ## Args

    * `params`: the parameter registry
    * `seq`: a single `TokenSequence` (with `mask`), or a collated batch
    * `n_heads`: number of attention heads. Required since it can't be
      recovered from tensor shapes.
    * `keep_attention`, `keep_hidden`: also return intermediate values
    """
    if n_heads is None:
        raise MgdtInputError("forward() needs the number of attention heads")
    dtype = params["token.embed"].dtype
    batch = as_batch(seq, mask, dtype)
    L = batch.kinds.shape[1]
    if batch.masks.shape[-2:] != (L, L):
        raise MgdtInputError(
            f"Attention mask of shape {tuple(batch.masks.shape[-2:])} "
            f"doesn't match window length {L}"
        )

    x = embed(params, batch)
    out = ForwardOutput(logits=x)
    for layer in range(num_layers(params)):
        attn = attention_weights(params, layer, x, batch.masks, n_heads)
        if keep_hidden:
            out.hidden.append(x)
        if keep_attention:
            out.attentions.append(attn)
        x = replay_block(params, layer, x, attn)
    if keep_hidden:
        out.hidden.append(x)

    d = x.shape[-1]
    x = F.layer_norm(
        x, (d,), params["final_ln.weight"], params["final_ln.bias"])
    out.logits = F.linear(x, params["head.weight"], params["head.bias"])
    return out


@dataclass
class Model:
    """
    A parameter registry together with the configuration it was built from
    """
    config: ModelConfig
    params: ModelParams

    @classmethod
    def init(cls, config: ModelConfig, seed: int) -> 'Model':
        return cls(config, init_params(config, seed))

    @property
    def max_len(self) -> int:
        return self.config.max_len

    def __call__(
        self,
        seq: 'TokenSequence | WindowBatch | BatchTensors',
        mask: Optional[AttentionMask] = None,
        keep_attention: bool = False,
        keep_hidden: bool = False,
    ) -> ForwardOutput:
        return forward(
            self.params,
            seq,
            mask,
            n_heads=self.config.n_heads,
            keep_attention=keep_attention,
            keep_hidden=keep_hidden,
        )

    def logits(self, seq: TokenSequence, mask: AttentionMask) -> torch.Tensor:
        """
        Logits of a single window, shape `(L, V)`, without tracking gradients
        """
        with torch.no_grad():
            return self(seq, mask).logits[0]


def _shifted(
    logits: torch.Tensor,
    batch: BatchTensors,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """
    Align the output at each position with the target of the next position
    """
    logits = logits[:, :-1]
    targets = batch.targets[:, 1:]
    weights = batch.loss_weights[:, 1:] * (targets != NO_TARGET)
    return logits, targets, weights


def token_nll(
    output: ForwardOutput,
    batch: BatchTensors,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """
    Negative log-likelihood of each target, with its weight and target id
    """
    logits, targets, weights = _shifted(output.logits, batch)
    log_probs = torch.log_softmax(logits, dim=-1)
    nll = -log_probs.gather(-1, targets.clamp(min=0).unsqueeze(-1))
    return nll.squeeze(-1), weights.to(logits.dtype), targets


def loss(
    output: ForwardOutput,
    seq: 'TokenSequence | WindowBatch | BatchTensors',
    mask: Optional[AttentionMask] = None,
) -> torch.Tensor:
    """
    Mean cross-entropy over all weighted target positions
    """
    batch = as_batch(seq, mask, output.logits.dtype)
    nll, weights, _ = token_nll(output, batch)
    total = weights.sum()
    if total <= 0:
        raise MgdtInputError("The batch has no weighted target positions")
    return (nll * weights).sum() / total


def loss_by_kind(
    output: ForwardOutput,
    seq: 'WindowBatch | BatchTensors',
    codec: Codec,
) -> dict[str, float]:
    """
    Mean cross-entropy per kind of target token, for logging
    """
    batch = as_batch(seq, dtype=output.logits.dtype)
    with torch.no_grad():
        nll, weights, targets = token_nll(output, batch)
        result = {}
        for kind in (TokenKind.RETURN, TokenKind.ACTION, TokenKind.REWARD):
            ids = codec.vocab.id_range(kind)
            w = weights * (targets >= ids.start) * (targets < ids.stop)
            if w.sum() > 0:
                result[kind.name.lower()] = float((nll * w).sum() / w.sum())
    return result


def backward(
    params: ModelParams,
    batch: 'WindowBatch | BatchTensors',
    n_heads: int,
    batch_id: Optional[int] = None,
) -> tuple[float, Gradients]:
    """
    Loss and gradient of every parameter tensor on a batch.

    A batch without any weighted target has zero loss and zero gradients.

    ## Raises

    * `MgdtNumericError`: the loss is not finite
    """
    dtype = params["token.embed"].dtype
    tensors = as_batch(batch, dtype=dtype)
    if float(tensors.loss_weights[:, 1:].sum()) <= 0:
        return 0.0, {name: torch.zeros_like(t) for name, t in params.items()}

    leaves = {
        name: t.detach().requires_grad_(True) for name, t in params.items()
    }
    output = forward(leaves, tensors, n_heads=n_heads)
    value = loss(output, tensors)
    if not torch.isfinite(value):
        raise MgdtNumericError("loss", batch_id)
    names = list(leaves)
    grads = torch.autograd.grad(
        value, [leaves[n] for n in names], allow_unused=True)
    return float(value), {
        name: (g if g is not None else torch.zeros_like(leaves[name]))
        for name, g in zip(names, grads)
    }


def attention_dump(
    params: ModelParams,
    seq: 'TokenSequence | WindowBatch | BatchTensors',
    mask: Optional[AttentionMask] = None,
    n_heads: Optional[int] = None,
) -> list[torch.Tensor]:
    """
    Attention weights of every layer and head, each of shape
    `(B, heads, L, L)`. Masked entries are exactly zero.
    """
    with torch.no_grad():
        return forward(
            params, seq, mask, n_heads=n_heads, keep_attention=True,
        ).attentions
