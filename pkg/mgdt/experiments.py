"""
# Mgdt > Experiments

Comparative experiments. Each one trains whatever models it needs (reusing
finished runs), evaluates them, and writes plain columnar data files plus a
summary table to `<data dir>/experiments/<name>/`.

| Experiment       | Compares                                            |
|------------------|-----------------------------------------------------|
| `dt-vs-bc`       | per-game scores of DT and BC models                 |
| `expert-filter`  | DT and BC trained on all data or the best 10%       |
| `finetune`       | fine-tuning a pretrained model vs training anew     |
| `scaling`        | score against model size, and during training       |
| `attention-dump` | attention weights of a trained DT model             |
"""
import logging
from pathlib import Path
from typing import Callable
import numpy as np
import torch
from .__context import RunContext
from .__util import write_columns
from ._consts import TokenKind
from .dataset import Dataset, Manifest, load_dataset
from .config import fingerprint
from .errors import MgdtConfigError, MgdtInputError
from .evaluation import (
    EvalReport,
    best_demo_score,
    evaluate,
    run_finetune_protocol,
    train_speed_curve,
    write_reports,
)
from .model import Model, attention_dump, parameter_count
from .runs import (
    claim_output,
    ensure_run,
    load_model,
    pretraining_data,
    run_dir,
    run_name,
)
from .sequence import Layout, build_mask, build_window
from .tokens import Codec


log = logging.getLogger(__name__)


SUMMARY_NAME = "summary.txt"


def _output(ctx: RunContext, name: str) -> Path:
    out = ctx.experiments_dir / name
    claim_output(out, ctx.force)
    out.mkdir(parents=True)
    return out


def _evaluate(
    ctx: RunContext,
    model: Model,
    layout: Layout,
    label: str,
    best_demo: dict[str, float],
) -> EvalReport:
    config = ctx.config
    mode = "bc" if layout == Layout.BC else None
    return evaluate(
        model,
        config.games.train,
        config.sampler_config(mode),
        config.eval.trials,
        config.seed,
        config.model.window,
        label=label,
        fingerprint=fingerprint(config),
        best_demo=best_demo,
        progress=ctx.progress,
    )


def _best_demo(dataset: Dataset, game_ids: list[str]) -> dict[str, float]:
    return {g: best_demo_score(dataset, g) for g in game_ids}


def _summarize(out: Path, reports: list[EvalReport]) -> Path:
    path = out / SUMMARY_NAME
    path.write_text("\n".join(r.to_table() for r in reports))
    write_reports(out, reports)
    return path


def dt_vs_bc(ctx: RunContext) -> Path:
    """
    Per-game mean and standard deviation of the scores of DT and BC models
    """
    out = _output(ctx, "dt-vs-bc")
    dataset = pretraining_data(ctx)
    best = _best_demo(dataset, ctx.config.games.train)
    reports = {}
    for layout in (Layout.DT, Layout.BC):
        name = run_name(layout)
        model = ensure_run(ctx, name, layout)
        reports[layout] = _evaluate(ctx, model, layout, name, best)
    dt, bc = reports[Layout.DT], reports[Layout.BC]
    write_columns(
        out / "per_game.txt",
        ["game", "dt_mean", "dt_std", "bc_mean", "bc_std"],
        [
            [g, dt.games[g].mean, dt.games[g].std,
             bc.games[g].mean, bc.games[g].std]
            for g in ctx.config.games.train
        ],
    )
    return _summarize(out, [dt, bc])


def expert_filter(ctx: RunContext) -> Path:
    """
    IQM of DT and BC models, each trained on the full data and on the best
    episodes only
    """
    out = _output(ctx, "expert-filter")
    best = _best_demo(pretraining_data(ctx), ctx.config.games.train)
    reports = []
    rows = []
    for layout in (Layout.DT, Layout.BC):
        for expert in (False, True):
            name = run_name(layout, expert)
            model = ensure_run(ctx, name, layout, expert)
            report = _evaluate(ctx, model, layout, name, best)
            reports.append(report)
            rows.append([
                layout.name.lower(),
                "expert" if expert else "full",
                report.iqm,
                report.median,
            ])
    write_columns(out / "bars.txt", ["model", "data", "iqm", "median"], rows)
    return _summarize(out, reports)


def finetune(ctx: RunContext) -> Path:
    """
    Fine-tuning a pretrained DT model on each held-out game, against a model
    trained from scratch on the same data
    """
    config = ctx.config
    if not config.games.held_out:
        raise MgdtConfigError("No held-out games are configured")
    out = _output(ctx, "finetune")
    pretrained = ensure_run(ctx, run_name(Layout.DT), Layout.DT)
    manifest = Manifest.load(ctx.data_dir)
    reports = []
    rows = []
    for game_id in config.games.held_out:
        data = load_dataset(ctx.data_dir, [game_id])
        pair = run_finetune_protocol(
            pretrained,
            game_id,
            data,
            config.finetune_hyper(),
            config.finetune_settings(),
            config.sampler_config(),
            config.eval.trials,
            manifest=manifest,
            trained_on=config.games.train,
            out_dir=out / game_id,
            progress=ctx.progress,
        )
        for report in pair:
            result = report.games[game_id]
            rows.append([
                report.label, game_id, result.mean, result.std,
                result.normalized,
            ])
            reports.append(report)
    write_columns(
        out / "arms.txt",
        ["arm", "game", "mean", "std", "normalized"],
        rows,
    )
    return _summarize(out, reports)


def scaling(ctx: RunContext) -> Path:
    """
    Score of models of increasing size, at the end of and during training
    """
    config = ctx.config
    if len(config.eval.scaling_presets) < 3:
        raise MgdtConfigError(
            f"The scaling experiment needs at least 3 model sizes, got "
            f"{config.eval.scaling_presets}"
        )
    out = _output(ctx, "scaling")
    best = _best_demo(pretraining_data(ctx), config.games.train)
    reports = []
    size_rows = []
    runs: dict[str, list[tuple[int, Model]]] = {}
    for preset in config.eval.scaling_presets:
        name = f"scale-{preset}"
        model = ensure_run(ctx, name, Layout.DT, preset=preset)
        report = _evaluate(ctx, model, Layout.DT, name, best)
        reports.append(report)
        size_rows.append(
            [preset, parameter_count(model.config), report.iqm])
        checkpoints = sorted(
            (run_dir(ctx, name) / "checkpoints").glob("step_*.ckpt"))
        runs[preset] = [
            (ckpt.step, m) for m, ckpt in map(load_model, checkpoints)
        ]
    write_columns(out / "size.txt", ["preset", "params", "iqm"], size_rows)
    write_columns(
        out / "train_speed.txt",
        ["preset", "step", "iqm"],
        train_speed_curve(
            runs,
            config.games.train,
            config.sampler_config(),
            config.eval.trials,
            config.seed,
            config.model.window,
        ),
    )
    return _summarize(out, reports)


def attention_dump_experiment(ctx: RunContext) -> Path:
    """
    Attention weights of every layer and head on a window of each training
    game, along with the share of attention that return, action and reward
    positions give to observation patches
    """
    config = ctx.config
    out = _output(ctx, "attention-dump")
    model = ensure_run(ctx, run_name(Layout.DT), Layout.DT)
    dataset = pretraining_data(ctx)
    codec = Codec()
    T = config.model.window
    rows = []
    for game_id in config.games.train:
        candidates = [
            t for t in dataset if t.game_id == game_id and len(t) >= T]
        if not candidates:
            raise MgdtInputError(
                f"No episode of '{game_id}' spans {T} timesteps")
        traj = max(candidates, key=lambda t: t.episode_return)
        seq = build_window(traj, 0, T, codec)
        mask = build_mask(T, codec.grid.num_patches)
        layers = attention_dump(model.params, seq, mask, model.config.n_heads)
        weights = torch.stack([a[0] for a in layers]).numpy()
        np.save(out / f"attention_{game_id}.npy", weights)

        is_patch = seq.kinds == TokenKind.PATCH
        queries = ~is_patch
        for layer, per_head in enumerate(weights):
            for head, matrix in enumerate(per_head):
                share = matrix[queries][:, is_patch].sum(axis=1).mean()
                rows.append([game_id, layer, head, float(share)])
    write_columns(
        out / "patch_share.txt",
        ["game", "layer", "head", "patch_share"],
        rows,
    )
    summary = out / SUMMARY_NAME
    mean_share = float(np.mean([r[3] for r in rows]))
    summary.write_text(
        f"Mean share of attention on observation patches: {mean_share:.3f}\n"
        f"Games: {', '.join(config.games.train)}\n"
    )
    return summary


EXPERIMENTS: dict[str, Callable[[RunContext], Path]] = {
    "dt-vs-bc": dt_vs_bc,
    "expert-filter": expert_filter,
    "finetune": finetune,
    "scaling": scaling,
    "attention-dump": attention_dump_experiment,
}


def run_experiment(ctx: RunContext, name: str) -> Path:
    try:
        experiment = EXPERIMENTS[name]
    except KeyError:
        raise MgdtConfigError(
            f"Unknown experiment '{name}'. Expected one of "
            f"{', '.join(EXPERIMENTS)}"
        ) from None
    log.info(f"Running experiment '{name}'")
    return experiment(ctx)
