"""
Directional comparisons between models, on the default configuration.

Each of these trains several models, so they only run with `pytest -m slow`.
"""
import json
from pathlib import Path
import numpy as np
import pytest
from click.testing import CliRunner
from mgdt.__main__ import cli
from mgdt.config import load_config
from mgdt.evaluation import best_demo_score, evaluate
from mgdt.games import generate_dataset
from mgdt.training import train


pytestmark = pytest.mark.slow

SEEDS = [0, 1, 2]


def run(data_dir: Path, seed: int, *args: str) -> None:
    result = CliRunner().invoke(
        cli, ["-d", str(data_dir), "--seed", str(seed), *args])
    assert result.exit_code == 0, result.output


def reports(path: Path) -> dict[str, list[dict]]:
    """
    Lines of a report file, grouped by label
    """
    grouped: dict[str, list[dict]] = {}
    for line in path.read_text().splitlines():
        entry = json.loads(line)
        grouped.setdefault(entry["label"], []).append(entry)
    return grouped


def summary(lines: list[dict]) -> dict:
    [found] = [line for line in lines if line.get("summary")]
    return found


@pytest.fixture
def data_dir(tmp_path: Path) -> Path:
    return tmp_path / "mgdt"


@pytest.mark.parametrize("seed", SEEDS)
def test_dt_beats_bc(data_dir: Path, seed: int):
    run(data_dir, seed, "gen-data")
    run(data_dir, seed, "experiment", "dt-vs-bc")
    found = reports(data_dir / "experiments" / "dt-vs-bc" / "report.jsonl")
    dt = summary(found["dt"])["iqm"]
    bc = summary(found["bc"])["iqm"]
    assert dt >= bc + 0.1
    assert dt >= 0.8


@pytest.mark.parametrize("seed", SEEDS)
def test_expert_data(data_dir: Path, seed: int):
    run(data_dir, seed, "gen-data")
    run(data_dir, seed, "experiment", "expert-filter")
    found = reports(
        data_dir / "experiments" / "expert-filter" / "report.jsonl")
    iqm = {label: summary(lines)["iqm"] for label, lines in found.items()}
    # Filtering helps the model that can't tell good episodes from bad ones
    assert iqm["bc-expert"] > iqm["bc"]
    assert iqm["dt"] >= iqm["dt-expert"] - 0.05


@pytest.mark.parametrize("seed", SEEDS)
def test_finetuning_beats_scratch(data_dir: Path, seed: int):
    run(data_dir, seed, "gen-data")
    run(data_dir, seed, "experiment", "finetune")
    found = reports(data_dir / "experiments" / "finetune" / "report.jsonl")
    [tuned] = [line for line in found["finetuned"] if "game" in line]
    [scratch] = [line for line in found["scratch"] if "game" in line]
    assert tuned["normalized"] >= scratch["normalized"] + 0.1


@pytest.mark.parametrize("seed", SEEDS)
def test_beats_best_demo(seed: int):
    config = load_config(overrides={"seed": seed})
    scores = {}
    for game_id in ("catch", "dodge"):
        episodes = generate_dataset(game_id, seed=seed, progress=False)
        # Without the best players' episodes there's room to do better
        cutoff = float(np.median([t.episode_return for t in episodes]))
        data = [t for t in episodes if t.episode_return <= cutoff]
        result = train(
            data,
            config.model_config(),
            config.lamb_hyper(),
            config.train_settings(),
            progress=False,
        )
        report = evaluate(
            result.model,
            [game_id],
            config.sampler_config(),
            n_trials=16,
            seed=seed,
            window=config.model.window,
            best_demo={game_id: best_demo_score(data, game_id)},
            progress=False,
        )
        scores[game_id] = report.games[game_id].top3_improvement
    assert max(scores.values()) > 0
