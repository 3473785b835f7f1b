"""
# Mgdt > CLI > Train

Pretrain a model on the configured training games
"""
from typing import Optional
import click
from ..__context import get_context
from ..runs import run_dir, run_name, train_run
from ..sequence import Layout


@click.command()
@click.option(
    "--bc",
    is_flag=True,
    help="Train a behavioral cloning model, without return tokens",
)
@click.option(
    "--expert",
    is_flag=True,
    help="Train only on the best episodes of each game",
)
@click.option(
    "--resume",
    is_flag=True,
    help="Continue from the latest checkpoint of the run, if there is one",
)
@click.option(
    "--name",
    default=None,
    help="Name of the run. Defaults to the model kind, such as 'dt-expert'",
)
def train(
    bc: bool = False,
    expert: bool = False,
    resume: bool = False,
    name: Optional[str] = None,
):
    """
    Train a model on the training games
    """
    ctx = get_context()
    layout = Layout.BC if bc else Layout.DT
    name = name or run_name(layout, expert)
    result = train_run(ctx, name, layout, expert, resume=resume)
    if result.rows:
        last = result.rows[-1]
        click.echo(f"Step {last.step}: loss {last.loss:.4f}")
    click.echo(f"Trained run '{name}' in '{run_dir(ctx, name)}'")
