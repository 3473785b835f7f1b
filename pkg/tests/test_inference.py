"""
Tests for return sampling and action selection
"""
from typing import Callable
import numpy as np
import pytest
import torch
from mgdt._consts import TokenKind
from mgdt.errors import MgdtConfigError, MgdtInputError
from mgdt.inference import (
    InferenceContext,
    Regeneration,
    SamplerConfig,
    SamplerMode,
    act,
    act_bc,
    act_top_n,
    choose_action,
    expert_bias,
    sample_token,
    sample_tokens,
)
from mgdt.config import load_config
from mgdt.sequence import Layout
from mgdt.tokens import Codec


class RiggedModel:
    """
    Gives fixed return logits, and puts all action probability on a function
    of the token just before the action
    """
    max_len = 48

    def __init__(
        self,
        return_logits: torch.Tensor,
        action_of: Callable[[int], int] = lambda _: 0,
    ) -> None:
        self.return_logits = return_logits
        self.action_of = action_of
        self.vocab = Codec().vocab

    def logits(self, seq, mask) -> torch.Tensor:
        out = torch.zeros((len(seq), self.vocab.size), dtype=torch.float64)
        returns = self.vocab.id_range(TokenKind.RETURN)
        actions = self.vocab.id_range(TokenKind.ACTION)
        for p in range(1, len(seq)):
            if seq.kinds[p] == TokenKind.RETURN:
                out[p - 1, returns.start:returns.stop] = self.return_logits
            elif seq.kinds[p] == TokenKind.ACTION:
                action = self.action_of(int(seq.token_ids[p - 1]))
                out[p - 1, actions.start + action] = 100.0
        return out


def _observed(layout: Layout = Layout.DT, window: int = 4):
    ctx = InferenceContext(window, Codec(), layout)
    ctx.observe(np.zeros((12, 12, 1), dtype=np.uint8))
    return ctx


@pytest.mark.parametrize(("index", "bias"), [(0, 0.0), (120, 10.0), (60, 5.0)])
def test_expert_bias_values(index: int, bias: float):
    biased = expert_bias(torch.zeros(121, dtype=torch.float64), 10.0)
    assert float(biased[index]) == pytest.approx(bias)


def test_zero_kappa_is_unbiased():
    logits = torch.randn(121, generator=torch.Generator().manual_seed(0))
    assert torch.equal(expert_bias(logits, 0.0), logits)


def test_expert_bias_needs_every_bin():
    with pytest.raises(MgdtInputError):
        expert_bias(torch.zeros(10), 10.0)


@pytest.mark.parametrize("kappa", [0.1, 1.0, 10.0])
def test_expert_bias_tilts_towards_high_returns(kappa: float):
    gen = torch.Generator().manual_seed(8)
    values = torch.arange(-20, 101, dtype=torch.float64)
    for _ in range(200):
        logits = 3 * torch.randn(121, generator=gen, dtype=torch.float64)
        biased = expert_bias(logits, kappa)
        assert biased.argmax() >= logits.argmax()
        mean = (logits.softmax(-1) * values).sum()
        assert (biased.softmax(-1) * values).sum() >= mean


def test_dominant_logit_always_wins():
    logits = torch.tensor([0.0, 1000.0, 0.0])
    draws = sample_tokens(logits, 1000)
    assert (draws == 1).all()


def test_uniform_sampling():
    draws = sample_tokens(
        torch.zeros(10), 100_000,
        generator=torch.Generator().manual_seed(0))
    freq = torch.bincount(draws, minlength=10).double() / 100_000
    assert (freq - 0.1).abs().max() < 0.01


def test_percentile_cutoff_keeps_top():
    logits = torch.tensor([0.0, 1.0, 2.0, 3.0])
    for seed in range(50):
        gen = torch.Generator().manual_seed(seed)
        assert sample_token(logits, percentile=85, generator=gen) == 3


def test_biased_uniform_prior_matches_softmax():
    biased = expert_bias(torch.zeros(121, dtype=torch.float64), 10.0)
    draws = sample_tokens(
        biased, 200_000, generator=torch.Generator().manual_seed(0))
    freq = torch.bincount(draws, minlength=121).double() / 200_000
    expected = torch.softmax(biased, dim=-1)
    assert float((freq - expected).abs().sum() / 2) < 0.01


def test_sampler_config_validation():
    with pytest.raises(MgdtInputError):
        SamplerConfig(percentile=100)
    with pytest.raises(MgdtInputError):
        SamplerConfig(temperature=0)
    with pytest.raises(MgdtInputError):
        SamplerConfig(kappa=-1)


def test_top_n_defaults():
    cfg = SamplerConfig(mode=SamplerMode.TOP_N)
    assert cfg.return_sampling == (pytest.approx(1 / 0.75), 0.0)
    assert cfg.action_sampling[1] == 50.0
    assert cfg.layout == Layout.DT
    assert SamplerConfig(mode=SamplerMode.BC).layout == Layout.BC


def test_action_follows_biased_returns():
    model = RiggedModel(
        torch.zeros(121, dtype=torch.float64), action_of=lambda r: r % 6)
    cfg = SamplerConfig(kappa=10.0, percentile=0.0)
    gen = torch.Generator().manual_seed(0)
    n = 10_000
    counts = np.zeros(6)
    for _ in range(n):
        action, _ = act(model, _observed(), cfg, gen)
        counts[action] += 1

    probs = torch.softmax(
        expert_bias(torch.zeros(121, dtype=torch.float64), 10.0), -1)
    expected = np.zeros(6)
    for index, p in enumerate(probs.tolist()):
        expected[index % 6] += p
    assert np.abs(counts / n - expected).sum() / 2 < 0.03


def test_act_records_return_and_action():
    logits = torch.full((121,), -1000.0, dtype=torch.float64)
    logits[30] = 0.0
    model = RiggedModel(logits, action_of=lambda _: 2)
    ctx = _observed()
    action, sampled = act(model, ctx, SamplerConfig(kappa=0.0))
    assert (action, sampled) == (2, 10.0)
    assert ctx.current.return_id == 30
    assert ctx.current.action_id == Codec().action_id(2)


def test_full_regeneration_resamples_past_returns():
    logits = torch.full((121,), -1000.0, dtype=torch.float64)
    logits[50] = 0.0
    model = RiggedModel(logits)
    ctx = _observed()
    ctx.record(0, 0)
    ctx.reward(0)
    ctx.observe(np.zeros((12, 12, 1), dtype=np.uint8))
    cfg = SamplerConfig(kappa=0.0, regeneration=Regeneration.FULL)
    act(model, ctx, cfg)
    assert [s.return_id for s in ctx.steps] == [50, 50]


def test_top_n_one_hot_prior_is_constant():
    logits = torch.full((121,), -1000.0, dtype=torch.float64)
    logits[42] = 0.0
    model = RiggedModel(logits)
    for n in (1, 16, 512):
        cfg = SamplerConfig(mode=SamplerMode.TOP_N, n_samples=n)
        _, sampled = act_top_n(model, _observed(), cfg)
        assert sampled == 22.0


def test_top_n_picks_the_best_draw():
    model = RiggedModel(torch.zeros(121, dtype=torch.float64))
    cfg = SamplerConfig(mode=SamplerMode.TOP_N, n_samples=10_000)
    gen = torch.Generator().manual_seed(0)
    _, sampled = act_top_n(model, _observed(), cfg, gen)
    assert sampled == 100.0


def test_bc_action():
    model = RiggedModel(torch.zeros(121), action_of=lambda _: 4)
    ctx = _observed(Layout.BC)
    assert act_bc(model, ctx) == 4
    assert len(ctx.sequence()[0]) == 11


def test_layout_mismatch():
    model = RiggedModel(torch.zeros(121))
    with pytest.raises(MgdtInputError):
        act_bc(model, _observed(Layout.DT))
    with pytest.raises(MgdtInputError):
        act(model, _observed(Layout.BC))


def test_same_seed_same_trace():
    model = RiggedModel(
        torch.zeros(121, dtype=torch.float64), action_of=lambda r: r % 6)

    def trace(seed: int) -> list[int]:
        gen = torch.Generator().manual_seed(seed)
        ctx = InferenceContext(4)
        actions = []
        for _ in range(10):
            ctx.observe(np.zeros((12, 12, 1), dtype=np.uint8))
            action, _ = choose_action(model, ctx, SamplerConfig(), gen)
            ctx.reward(0)
            actions.append(action)
        return actions

    assert trace(3) == trace(3)


def test_context_keeps_last_steps():
    ctx = InferenceContext(2)
    for a in range(5):
        ctx.observe(np.zeros((12, 12), dtype=np.uint8))
        ctx.record(0, a)
    assert len(ctx) == 2
    assert ctx.steps[-1].action_id == Codec().action_id(4)


def test_observe_before_acting():
    ctx = _observed()
    with pytest.raises(MgdtInputError):
        ctx.observe(np.zeros((12, 12), dtype=np.uint8))


def test_configured_sampler_mode():
    config = load_config(overrides={"sampler": {"mode": "top-n"}})
    assert config.sampler_config().mode == SamplerMode.TOP_N
    with pytest.raises(MgdtConfigError):
        load_config(overrides={"sampler": {"mode": "greedy"}})
