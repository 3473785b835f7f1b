"""
Tests for loading and resolving run configurations
"""
import pytest
from mgdt.config import (
    FINETUNE_BATCH_RATIO,
    FINETUNE_STEP_RATIO,
    RESOLVED_NAME,
    fingerprint,
    load_config,
    save_resolved,
)
from mgdt.errors import MgdtConfigError
from mgdt.inference import SamplerMode
from mgdt.lamb import FINETUNE, PRETRAIN
from mgdt.sequence import Layout


def test_defaults():
    config = load_config()
    assert config.games.train == ["catch", "dodge", "pellet-maze", "turret"]
    assert config.games.held_out == ["mirror-catch"]
    model = config.model_config()
    assert model.max_len == 4 * 12
    assert config.sampler_config().mode == SamplerMode.EXPERT_BIAS


def test_overrides(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("seed: 3\nmodel:\n  preset: DT-small\n")
    config = load_config(path, {"seed": 9})
    assert config.seed == 9
    assert config.model_config().n_layers == 4


def test_budget_scale():
    config = load_config(overrides={"budget_scale": 0.01})
    settings = config.train_settings(Layout.BC)
    assert settings.steps == 50
    assert settings.layout == Layout.BC
    assert config.scaled(10) == 1


def test_finetune_budget_follows_pretraining():
    config = load_config()
    pretrain = config.train_settings()
    finetune = config.finetune_settings()
    assert finetune.steps == round(pretrain.steps * FINETUNE_STEP_RATIO)
    assert finetune.batch_size \
        == round(pretrain.batch_size * FINETUNE_BATCH_RATIO)
    assert config.lamb_hyper().peak_lr == PRETRAIN.peak_lr
    hyper = config.finetune_hyper()
    assert hyper.peak_lr == FINETUNE.peak_lr
    assert hyper.weight_decay == FINETUNE.weight_decay

    config = load_config(overrides={"train": {"steps": 20000}})
    assert config.finetune_settings().steps == 200


def test_finetune_budget_override():
    config = load_config(overrides={
        "finetune": {"steps": 7, "batch_size": 3},
        "budget_scale": 2,
    })
    settings = config.finetune_settings()
    assert settings.steps == 14
    assert settings.batch_size == 6


def test_resolved_config_repeats_run(tmp_path):
    config = load_config(overrides={"seed": 4, "eval": {"trials": 3}})
    path = save_resolved(config, tmp_path)
    assert path.name == RESOLVED_NAME
    again = load_config(path)
    assert again == config
    assert fingerprint(again) == fingerprint(config)
    assert fingerprint(load_config()) != fingerprint(config)


@pytest.mark.parametrize("overrides", [
    {"model": {"layers": 2}},
    {"seed": "many"},
    {"games": {"train": ["pong"]}},
    {"games": {"train": ["catch"], "held_out": ["catch"]}},
    {"budget_scale": 0},
    {"sampler": {"mode": "greedy"}},
    {"model": {"preset": "DT-huge"}},
])
def test_invalid(overrides):
    with pytest.raises(MgdtConfigError):
        load_config(overrides=overrides)


def test_missing_file(tmp_path):
    with pytest.raises(MgdtConfigError):
        load_config(tmp_path / "nope.yaml")
