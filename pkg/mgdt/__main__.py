"""
# Mgdt > Main

Command-line entry point for generating data, training, fine-tuning,
evaluating and running experiments
"""
from pathlib import Path
from typing import Any, Optional
import click
from .__context import RunContext, pop_context, set_context
from ._consts import DATA_DIR_ENV, VERSION
from .cli import evaluate, experiment, finetune, gen_data, train
from .cli.consts import default_data_dir
from .cli.util import MgdtGroup, handle_verbose, show_progress
from .config import load_config


@click.group(cls=MgdtGroup)
@click.version_option(".".join(str(n) for n in VERSION))
@click.option(
    "-c",
    "--config",
    "config_path",
    type=click.Path(path_type=Path),
    default=None,
    help="YAML run configuration. Any resolved_config.yaml works",
)
@click.option("--seed", type=int, default=None, help="Override the seed")
@click.option(
    "--deterministic",
    is_flag=True,
    help="Use deterministic single-threaded kernels",
)
@click.option(
    "--force",
    is_flag=True,
    help="Overwrite existing outputs",
)
@click.option(
    "-d",
    "--data-dir",
    type=click.Path(file_okay=False, path_type=Path),
    envvar=DATA_DIR_ENV,
    default=None,
    help="Root directory of datasets, runs and reports",
)
@click.option("-v", "--verbose", count=True, help="Show more logging")
@click.pass_context
def cli(
    ctx: click.Context,
    config_path: Optional[Path] = None,
    seed: Optional[int] = None,
    deterministic: bool = False,
    force: bool = False,
    data_dir: Optional[Path] = None,
    verbose: int = 0,
):
    handle_verbose(verbose)
    overrides: dict[str, Any] = {}
    if seed is not None:
        overrides["seed"] = seed
    if deterministic:
        overrides["deterministic"] = True
    set_context(RunContext(
        config=load_config(config_path, overrides),
        data_dir=data_dir or default_data_dir(),
        force=force,
        progress=show_progress(verbose),
    ))
    ctx.call_on_close(pop_context)


cli.add_command(gen_data)
cli.add_command(train)
cli.add_command(finetune)
cli.add_command(evaluate)
cli.add_command(experiment)


if __name__ == '__main__':
    cli()
