"""
# Mgdt > CLI > Gen data

Roll out the scripted policies of every configured game and write the
episodes to the data directory
"""
import zlib
import click
import numpy as np
from .. import games
from ..__context import get_context
from ..__util import write_columns
from ..config import save_resolved
from ..dataset import Manifest, episode_path, write_episodes
from ..games import generate_dataset
from ..runs import claim_output


HISTOGRAM_NAME = "return_histograms.txt"


def run_seed(seed: int, run: int, game_id: str) -> int:
    """
    Seed of one generation run of a game. Stable across game rosters, so
    adding a game doesn't change the episodes of the others.
    """
    entropy = [seed, run, zlib.crc32(game_id.encode())]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


@click.command("gen-data")
def gen_data():
    """
    Generate the episode datasets
    """
    ctx = get_context()
    config = ctx.config
    root = ctx.data_dir
    claim_output(root / "data", ctx.force)

    manifest = Manifest(seed=config.seed)
    histograms = []
    roster = [(g, False) for g in config.games.train] \
        + [(g, True) for g in config.games.held_out]
    for game_id, held_out in roster:
        spec = games.get_spec(game_id)
        files = []
        episodes = []
        for run in range(config.data.runs):
            trajectories = generate_dataset(
                spec,
                config.data.n_checkpoints,
                config.data.episodes_per_checkpoint,
                seed=run_seed(config.seed, run, game_id),
                progress=ctx.progress,
            )
            path = episode_path(root, game_id, run)
            write_episodes(path, trajectories, game_id)
            files.append(path)
            episodes.extend(trajectories)
        manifest.add(
            game_id,
            files,
            episodes,
            root,
            held_out=held_out,
            random_score=spec.random_score,
            reference_score=spec.reference_score,
        )
        summary = manifest.summary(game_id)
        assert summary is not None
        edges = summary.return_edges
        for i, count in enumerate(summary.return_counts):
            histograms.append([game_id, edges[i], edges[i + 1], count])
        click.echo(
            f"{game_id}: {summary.episodes} episodes, {summary.steps} steps"
            + (" (held out)" if held_out else "")
        )

    manifest.save(root)
    write_columns(
        root / HISTOGRAM_NAME, ["game", "low", "high", "count"], histograms)
    save_resolved(config, root)
    click.echo(f"Wrote datasets to '{root}'")
