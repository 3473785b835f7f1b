"""
# Mgdt > CLI > Experiment

Run one of the comparative experiments
"""
import click
from ..__context import get_context
from ..config import save_resolved
from ..experiments import EXPERIMENTS, run_experiment


@click.command()
@click.argument("name", type=click.Choice(list(EXPERIMENTS)))
def experiment(name: str):
    """
    Run the experiment NAME, training any models it needs first
    """
    ctx = get_context()
    summary = run_experiment(ctx, name)
    save_resolved(ctx.config, summary.parent)
    click.echo(summary.read_text())
    click.echo(f"Wrote the data of '{name}' to '{summary.parent}'")
