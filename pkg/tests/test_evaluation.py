"""
Tests for score normalization, aggregation, rollouts and the fine-tuning
protocol
"""
import json
import math
import numpy as np
import pytest
from mgdt import evaluation, games
from mgdt.dataset import Manifest
from mgdt.errors import (
    MgdtConfigError,
    MgdtInputError,
    MgdtProtocolError,
)
from mgdt.evaluation import (
    REPORT_JSONL,
    REPORT_TABLE,
    EvalReport,
    FinetuneSettings,
    check_geometry,
    check_leakage,
    evaluate,
    iqm,
    median,
    normalized_score,
    rollout,
    run_finetune_protocol,
    top3_improvement,
    write_reports,
)
from mgdt.inference import SamplerConfig, SamplerMode
from mgdt.lamb import LambHyper
from mgdt.model import Model
from mgdt.tokens import Codec, PatchGrid


def test_normalized_score():
    assert normalized_score(10, 2, 10) == 1
    assert normalized_score(2, 2, 10) == 0
    assert normalized_score(6, 2, 10) == 0.5
    assert normalized_score(-6, 2, 10) == -1


def test_normalized_score_degenerate():
    with pytest.raises(MgdtConfigError):
        normalized_score(3, 4, 4)


@pytest.mark.parametrize(("a", "b"), [(2.0, 0.0), (0.5, -3.0), (100.0, 7.0)])
def test_normalized_score_ignores_units(a: float, b: float):
    for score in [-4.0, 0.0, 3.0, 11.0]:
        assert normalized_score(a * score + b, a * 1 + b, a * 9 + b) \
            == pytest.approx(normalized_score(score, 1, 9))


def test_iqm():
    assert iqm([0, 1, 2, 3]) == 1.5
    assert iqm(list(range(8))) == 3.5
    assert iqm([7, 7, 7, 7, 7]) == 7


def test_iqm_ignores_outliers():
    assert iqm([1, 2, 3, 4, 5, 6, 7, 1e9]) == 4.5


def test_iqm_partial_quartiles():
    # n = 5: the middle half is [1.25, 3.75)
    expected = (0.75 * 1 + 2 + 0.75 * 3) / 2.5
    assert iqm([0, 1, 2, 3, 4]) == pytest.approx(expected)


def test_iqm_ignores_order():
    rng = np.random.default_rng(2)
    scores = rng.normal(size=13).tolist()
    for _ in range(5):
        shuffled = rng.permutation(scores).tolist()
        assert iqm(shuffled) == pytest.approx(iqm(scores), abs=1e-12)


def test_iqm_rises_with_any_score():
    rng = np.random.default_rng(3)
    scores = rng.normal(size=10).tolist()
    for i in range(len(scores)):
        raised = list(scores)
        raised[i] += 0.5
        assert iqm(raised) >= iqm(scores) - 1e-12


def test_iqm_too_few():
    with pytest.raises(MgdtInputError):
        iqm([1, 2, 3])


def test_median():
    assert median([3, 1, 2]) == 2
    assert median([4, 1, 2, 3]) == 2.5
    with pytest.raises(MgdtInputError):
        median([])


def test_top3_improvement():
    assert top3_improvement([1, 2, 10, 10, 10], 10) == 0
    assert top3_improvement([15, 15, 15, 0], 10) == pytest.approx(50)
    # Worse than the data counts as no improvement
    assert top3_improvement([1, 1, 1], 10) == 0


def test_top3_improvement_nonpositive_best():
    assert top3_improvement([1, 1, 1], -2) == pytest.approx(150)
    assert top3_improvement([0.5, 0.5, 0.5], 0) == pytest.approx(50)


def test_top3_improvement_too_few():
    with pytest.raises(MgdtInputError):
        top3_improvement([1, 2], 1)


def test_report_from_scores():
    spec = games.get_spec("dodge")
    random = spec.random_score
    reference = spec.reference_score
    report = EvalReport.from_scores(
        {"dodge": [reference] * 4},
        label="dt",
        mode="expert-bias",
        best_demo={"dodge": reference / 2},
    )
    result = report.games["dodge"]
    assert result.mean == reference
    assert result.std == 0
    assert result.normalized == pytest.approx(1)
    assert result.random_score == random
    assert result.top3_improvement == pytest.approx(100)
    assert report.iqm == pytest.approx(1)
    assert report.median == pytest.approx(1)


def test_report_without_enough_trials():
    report = EvalReport.from_scores({"catch": [8.0, 8.0]})
    assert math.isnan(report.iqm)
    assert report.games["catch"].top3_improvement is None


def test_report_needs_scores():
    with pytest.raises(MgdtInputError):
        EvalReport.from_scores({})


def test_report_outputs(tmp_path):
    report = EvalReport.from_scores(
        {"catch": [8.0] * 4, "dodge": [20.0] * 4},
        label="dt",
        mode="expert-bias",
        seed=5,
        fingerprint="abc",
    )
    lines = report.to_jsonl().splitlines()
    assert [json.loads(line).get("game") for line in lines[:2]] \
        == ["catch", "dodge"]
    summary = json.loads(lines[-1])
    assert summary["summary"]
    assert summary["seed"] == 5
    assert summary["fingerprint"] == "abc"
    assert summary["iqm"] == pytest.approx(1)

    table = report.to_table()
    assert "IQM 1.000, median 1.000" in table

    report.write(tmp_path)
    report.write(tmp_path)
    assert len((tmp_path / REPORT_JSONL).read_text().splitlines()) == 3
    assert (tmp_path / REPORT_TABLE).read_text().count("# dt") == 1


def test_write_several_reports(tmp_path):
    reports = [
        EvalReport.from_scores({"catch": [8.0] * 4}, label=label)
        for label in ("dt", "bc")
    ]
    reports[0].write(tmp_path)
    write_reports(tmp_path, reports)
    lines = (tmp_path / REPORT_JSONL).read_text().splitlines()
    assert [json.loads(line)["label"] for line in lines] \
        == ["dt", "dt", "bc", "bc"]
    table = (tmp_path / REPORT_TABLE).read_text()
    assert table.count("# dt") == 1 and table.count("# bc") == 1


@pytest.fixture
def untrained(tiny_config) -> Model:
    return Model.init(tiny_config, seed=0)


def test_rollout(untrained):
    scores = rollout(untrained, "catch", n_trials=3, seed=1, progress=False)
    assert len(scores) == 3
    # Catch rewards are +1 or -1 for each of its balls
    for score in scores:
        assert -8 <= score <= 8
        assert score % 2 == 0


def test_rollout_reproducible(untrained):
    a = rollout(untrained, "dodge", n_trials=2, seed=4, progress=False)
    b = rollout(untrained, "dodge", n_trials=2, seed=4, progress=False)
    assert a == b


def test_rollout_bc(untrained):
    cfg = SamplerConfig(mode=SamplerMode.BC)
    scores = rollout(untrained, "catch", cfg, n_trials=1, progress=False)
    assert len(scores) == 1


def test_rollout_trials(untrained):
    with pytest.raises(MgdtInputError):
        rollout(untrained, "catch", n_trials=0)


def test_evaluate(untrained):
    report = evaluate(
        untrained, ["catch", "dodge"], n_trials=2, label="untrained",
        progress=False,
    )
    assert set(report.games) == {"catch", "dodge"}
    assert report.mode == "expert-bias"
    assert not math.isnan(report.iqm)


def test_geometry_mismatch(untrained):
    codec = Codec(grid=PatchGrid(patch_h=6, patch_w=6))
    with pytest.raises(MgdtConfigError):
        check_geometry(untrained, "catch", codec)
    check_geometry(untrained, "catch", Codec())


def test_leakage_from_training_games():
    with pytest.raises(MgdtProtocolError):
        check_leakage("mirror-catch", trained_on=["catch", "mirror-catch"])
    check_leakage("mirror-catch", trained_on=["catch"])


def test_leakage_from_manifest(tmp_path, make_traj):
    manifest = Manifest(seed=0)
    manifest.add("mirror-catch", [], [make_traj()], tmp_path)
    with pytest.raises(MgdtProtocolError):
        check_leakage("mirror-catch", manifest)


def test_finetune_protocol(untrained, tmp_path):
    data = games.generate_dataset(
        "mirror-catch", 2, 2, seed=0, progress=False)
    settings = FinetuneSettings(
        data_fraction=0.5, steps=2, batch_size=2, chunk_len=8)
    finetuned, scratch = run_finetune_protocol(
        untrained,
        "mirror-catch",
        data,
        LambHyper(warmup_steps=1),
        settings,
        n_trials=3,
        trained_on=["catch"],
        out_dir=tmp_path,
        progress=False,
    )
    assert finetuned.label == "finetuned"
    assert scratch.label == "scratch"
    assert list(finetuned.games) == ["mirror-catch"]
    assert finetuned.games["mirror-catch"].top3_improvement is not None
    assert list((tmp_path / "finetuned" / "checkpoints").iterdir())
    assert list((tmp_path / "scratch" / "checkpoints").iterdir())


def test_finetune_protocol_rejects_leak(untrained):
    with pytest.raises(MgdtProtocolError):
        run_finetune_protocol(
            untrained, "catch", [], LambHyper(), trained_on=["catch"])


def test_finetune_protocol_needs_data(untrained):
    with pytest.raises(MgdtInputError):
        run_finetune_protocol(untrained, "mirror-catch", [], LambHyper())


def test_finetune_protocol_best_demo_uses_whole_episodes(
    untrained, monkeypatch,
):
    data = games.generate_dataset(
        "mirror-catch", 2, 2, seed=0, progress=False)
    seen = []

    def recording_evaluate(*args, best_demo=None, **kwargs):
        seen.append(best_demo)
        return evaluate(*args, best_demo=best_demo, **kwargs)

    monkeypatch.setattr(evaluation, "evaluate", recording_evaluate)
    run_finetune_protocol(
        untrained,
        "mirror-catch",
        data,
        LambHyper(warmup_steps=1),
        FinetuneSettings(
            data_fraction=0.05, steps=1, batch_size=2, chunk_len=4),
        n_trials=3,
        progress=False,
    )
    # Chunks of 4 steps can't hold the return of a whole episode
    best = max(t.episode_return for t in data)
    assert seen == [{"mirror-catch": best}] * 2
