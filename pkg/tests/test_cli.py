"""
Tests for the command-line interface, on a tiny configuration
"""
import json
from pathlib import Path
import pytest
from click.testing import CliRunner, Result
from mgdt.__main__ import cli
from mgdt.config import RESOLVED_NAME
from mgdt.dataset import MANIFEST_NAME, Manifest


TINY = """\
games:
  train: [catch]
  held_out: [mirror-catch]
data:
  runs: 1
  n_checkpoints: 2
  episodes_per_checkpoint: 2
model:
  n_layers: 1
  d_model: 16
  n_heads: 2
optim:
  warmup_steps: 1
train:
  steps: 2
  batch_size: 2
  log_every: 1
  checkpoint_every: 2
finetune:
  warmup_steps: 1
  steps: 2
  batch_size: 2
  data_fraction: 0.5
  chunk_len: 8
eval:
  trials: 4
"""


@pytest.fixture
def tiny(tmp_path: Path) -> Path:
    path = tmp_path / "tiny.yaml"
    path.write_text(TINY)
    return path


def invoke(data_dir: Path, config: Path, *args: str) -> Result:
    return CliRunner().invoke(
        cli, ["-d", str(data_dir), "-c", str(config), *args])


@pytest.fixture
def generated(tmp_path: Path, tiny: Path) -> Path:
    data_dir = tmp_path / "mgdt"
    result = invoke(data_dir, tiny, "gen-data")
    assert result.exit_code == 0, result.output
    return data_dir


def test_gen_data(generated: Path):
    manifest = Manifest.load(generated)
    assert list(manifest.games) == ["catch"]
    assert list(manifest.held_out) == ["mirror-catch"]
    assert manifest.games["catch"].episodes == 4
    assert manifest.games["catch"].random_score is not None
    assert manifest.games["catch"].reference_score == 8.0
    assert (generated / "data" / "catch" / "0.ep").exists()
    assert (generated / RESOLVED_NAME).exists()

    lines = (generated / "return_histograms.txt").read_text().splitlines()
    assert lines[0] == "# game low high count"
    counts = [int(line.split()[3]) for line in lines[1:]
              if line.split()[0] == "catch"]
    assert sum(counts) == 4


def test_gen_data_refuses_to_overwrite(generated: Path, tiny: Path):
    result = invoke(generated, tiny, "gen-data")
    assert result.exit_code == 1
    assert "--force" in result.output


def test_gen_data_is_reproducible(generated: Path, tiny: Path):
    episodes = (generated / "data" / "catch" / "0.ep").read_bytes()
    manifest = (generated / MANIFEST_NAME).read_text()
    result = invoke(generated, tiny, "--force", "gen-data")
    assert result.exit_code == 0, result.output
    assert (generated / "data" / "catch" / "0.ep").read_bytes() == episodes
    assert (generated / MANIFEST_NAME).read_text() == manifest


def test_gen_data_seed_changes_episodes(generated: Path, tiny: Path):
    episodes = (generated / "data" / "catch" / "0.ep").read_bytes()
    result = invoke(generated, tiny, "--force", "--seed", "1", "gen-data")
    assert result.exit_code == 0, result.output
    assert (generated / "data" / "catch" / "0.ep").read_bytes() != episodes


def test_train_and_eval(generated: Path, tiny: Path):
    result = invoke(generated, tiny, "train")
    assert result.exit_code == 0, result.output
    run = generated / "runs" / "dt"
    assert (run / "checkpoints" / "step_00000002.ckpt").exists()
    assert (run / RESOLVED_NAME).exists()
    assert len((run / "train_log.jsonl").read_text().splitlines()) == 2

    result = invoke(generated, tiny, "eval")
    assert result.exit_code == 0, result.output
    assert "IQM" in result.output
    summary = json.loads(
        (run / "eval" / "report.jsonl").read_text().splitlines()[-1])
    assert summary["label"] == "dt@2"
    assert summary["mode"] == "expert-bias"

    # Evaluating again replaces the report
    assert invoke(generated, tiny, "eval").exit_code == 0
    lines = (run / "eval" / "report.jsonl").read_text().splitlines()
    assert len(lines) == 2


def test_train_twice_needs_force(generated: Path, tiny: Path):
    assert invoke(generated, tiny, "train").exit_code == 0
    assert invoke(generated, tiny, "train").exit_code == 1
    assert invoke(generated, tiny, "--force", "train").exit_code == 0


def test_bc_eval(generated: Path, tiny: Path):
    assert invoke(generated, tiny, "train", "--bc").exit_code == 0
    result = invoke(generated, tiny, "eval", "--mode", "bc")
    assert result.exit_code == 0, result.output
    # A BC model can't be conditioned on returns
    result = invoke(generated, tiny, "eval", "--run", "bc")
    assert result.exit_code == 1
    assert "Error:" in result.output


def test_train_without_data(tmp_path: Path, tiny: Path):
    result = invoke(tmp_path / "empty", tiny, "train")
    assert result.exit_code == 1
    assert "Error:" in result.output


def test_eval_without_run(generated: Path, tiny: Path):
    assert invoke(generated, tiny, "eval").exit_code == 1


def test_finetune(generated: Path, tiny: Path):
    assert invoke(generated, tiny, "train").exit_code == 0
    result = invoke(generated, tiny, "finetune")
    assert result.exit_code == 0, result.output
    lines = (
        generated / "runs" / "finetune-dt" / "report.jsonl"
    ).read_text().splitlines()
    labels = {json.loads(line)["label"] for line in lines}
    assert labels == {"finetuned", "scratch"}
    assert len(lines) == 4


def test_experiment_attention_dump(generated: Path, tiny: Path):
    result = invoke(generated, tiny, "experiment", "attention-dump")
    assert result.exit_code == 0, result.output
    out = generated / "experiments" / "attention-dump"
    assert (out / "attention_catch.npy").exists()
    assert (out / RESOLVED_NAME).exists()
    assert "patch" in result.output


def test_unknown_experiment(generated: Path, tiny: Path):
    result = invoke(generated, tiny, "experiment", "nope")
    assert result.exit_code == 1
    assert "nope" in result.output


def test_bad_option_value(generated: Path, tiny: Path):
    result = invoke(generated, tiny, "eval", "--mode", "greedy")
    assert result.exit_code == 1


def test_unknown_option(tmp_path: Path, tiny: Path):
    result = invoke(tmp_path, tiny, "--nope", "gen-data")
    assert result.exit_code == 1
    result = invoke(tmp_path, tiny, "gen-data", "--nope")
    assert result.exit_code == 1


def test_unknown_config_key(tmp_path: Path):
    path = tmp_path / "bad.yaml"
    path.write_text("model:\n  layers: 3\n")
    result = invoke(tmp_path, path, "gen-data")
    assert result.exit_code == 1
    assert "Error:" in result.output


def test_overlapping_games(tmp_path: Path):
    path = tmp_path / "bad.yaml"
    path.write_text("games:\n  train: [catch]\n  held_out: [catch]\n")
    result = invoke(tmp_path, path, "gen-data")
    assert result.exit_code == 1


@pytest.mark.slow
def test_deterministic_runs_match(tmp_path: Path):
    config = tmp_path / "longer.yaml"
    config.write_text(TINY.replace(
        "train:\n  steps: 2\n",
        "train:\n  steps: 1000\n",
    ).replace("checkpoint_every: 2", "checkpoint_every: 1000"))
    outputs = []
    for name in ("first", "second"):
        data_dir = tmp_path / name
        for command in ("gen-data", "train", "eval"):
            result = invoke(
                data_dir, config, "--deterministic", "--seed", "3", command)
            assert result.exit_code == 0, result.output
        eval_dir = data_dir / "runs" / "dt" / "eval"
        outputs.append((
            (eval_dir / "report.jsonl").read_bytes(),
            (eval_dir / "report.txt").read_bytes(),
        ))
    assert outputs[0] == outputs[1]
