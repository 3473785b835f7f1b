"""
Tests for the training loop
"""
import json
import math
import pytest
import torch
from mgdt.checkpoint import load_checkpoint
from mgdt.errors import MgdtConfigError, MgdtNumericError
from mgdt.lamb import LambHyper
from mgdt.model import Model, ModelConfig, preset
from mgdt.sequence import Layout
from mgdt.training import (
    LOG_NAME,
    TrainSettings,
    latest_checkpoint,
    resume_or_none,
    train,
)


HYPER = LambHyper(peak_lr=1e-3, warmup_steps=2)


def settings(**kwargs) -> TrainSettings:
    return TrainSettings(**{
        "steps": 4,
        "batch_size": 2,
        "log_every": 1,
        "checkpoint_every": 2,
        "seed": 7,
    } | kwargs)


def assert_same_params(a: Model, b: Model):
    assert a.params.keys() == b.params.keys()
    for name in a.params:
        torch.testing.assert_close(
            a.params[name], b.params[name], rtol=0, atol=0)


def test_train_writes_log_and_checkpoints(catch_episodes, tiny_config,
                                          tmp_path):
    result = train(
        catch_episodes, tiny_config, HYPER, settings(), tmp_path,
        extra={"games": ["catch"]}, progress=False,
    )
    assert result.optim.step == 4
    assert [p.name for p in result.checkpoints] \
        == ["step_00000002.ckpt", "step_00000004.ckpt"]
    assert latest_checkpoint(tmp_path) == result.checkpoints[-1]

    rows = [
        json.loads(line)
        for line in (tmp_path / LOG_NAME).read_text().splitlines()
    ]
    assert [r["step"] for r in rows] == [0, 1, 2, 3]
    for row in rows:
        assert math.isfinite(row["loss"])
        assert row["grad_norm"] >= 0
        assert set(row["per_kind"]) == {"return", "action", "reward"}

    ckpt = load_checkpoint(result.checkpoints[-1])
    assert ckpt.step == 4
    assert ckpt.extra == {"games": ["catch"], "layout": "DT"}


def test_train_is_deterministic(catch_episodes, tiny_config):
    a = train(catch_episodes, tiny_config, HYPER, settings(), progress=False)
    b = train(catch_episodes, tiny_config, HYPER, settings(), progress=False)
    assert_same_params(a.model, b.model)
    assert [r.loss for r in a.rows] == [r.loss for r in b.rows]


def test_train_changes_params(catch_episodes, tiny_config):
    result = train(
        catch_episodes, tiny_config, HYPER, settings(), progress=False)
    start = Model.init(tiny_config, 7)
    assert any(
        not torch.equal(start.params[n], result.model.params[n])
        for n in start.params
    )


def test_resume_matches_uninterrupted(catch_episodes, tiny_config,
                                      tmp_path):
    full = train(
        catch_episodes, tiny_config, HYPER, settings(), tmp_path,
        progress=False,
    )
    halfway = load_checkpoint(full.checkpoints[0])
    assert halfway.step == 2
    resumed = train(
        catch_episodes, tiny_config, HYPER, settings(), resume=halfway,
        progress=False,
    )
    assert resumed.optim.step == 4
    assert_same_params(full.model, resumed.model)


def test_resume_or_none(tmp_path, catch_episodes, tiny_config):
    assert resume_or_none(tmp_path) is None
    train(
        catch_episodes, tiny_config, HYPER, settings(steps=2), tmp_path,
        progress=False,
    )
    assert resume_or_none(tmp_path).step == 2


def test_resume_with_other_config(catch_episodes, tiny_config, tmp_path):
    result = train(
        catch_episodes, tiny_config, HYPER, settings(steps=2), tmp_path,
        progress=False,
    )
    other = ModelConfig(
        n_layers=1, d_model=16, n_heads=4, max_len=48, dtype="float64")
    with pytest.raises(MgdtConfigError):
        train(
            catch_episodes, other, HYPER, settings(),
            resume=load_checkpoint(result.checkpoints[-1]), progress=False,
        )


def test_bc_layout(catch_episodes, tiny_config):
    result = train(
        catch_episodes, tiny_config, HYPER,
        settings(steps=2, layout=Layout.BC), progress=False,
    )
    assert set(result.rows[0].per_kind) == {"action", "reward"}


def test_divergence_dumps_batch(catch_episodes, tiny_config, tmp_path):
    model = Model.init(tiny_config, 0)
    params = dict(model.params)
    params["token.embed"] = torch.full_like(params["token.embed"], math.nan)
    with pytest.raises(MgdtNumericError):
        train(
            catch_episodes, tiny_config, HYPER, settings(), tmp_path,
            init=Model(tiny_config, params), progress=False,
        )
    assert (tmp_path / "failed_batch_00000000.npz").exists()


def test_bad_settings():
    with pytest.raises(MgdtConfigError):
        TrainSettings(steps=-1)
    with pytest.raises(MgdtConfigError):
        TrainSettings(log_every=0)


@pytest.mark.slow
def test_memorizes_fixed_windows(make_traj):
    # Whole 4-step episodes fill a window, so every batch shows the same 8
    data = [make_traj(n=4, seed=i) for i in range(8)]
    result = train(
        data,
        preset("DT-tiny", max_len=48),
        LambHyper(warmup_steps=200),
        TrainSettings(
            steps=5000, batch_size=8, augment=False, log_every=100),
        progress=False,
    )
    assert result.rows[0].loss > 1.0
    assert result.rows[-1].loss < 0.05
