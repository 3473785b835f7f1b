"""
# Mgdt > Context

Keeps track of the settings shared by every command of a CLI invocation.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional
import torch
from .config import RunConfig
from .errors import MgdtInternalError


log = logging.getLogger(__name__)


@dataclass
class RunContext:
    config: RunConfig
    """
    The resolved configuration, with command-line overrides applied
    """

    data_dir: Path
    """
    Root of the datasets, runs and reports
    """

    force: bool = False
    """
    Whether existing outputs may be overwritten
    """

    progress: Optional[bool] = None
    """
    Whether to show progress bars. `None` shows them only on a terminal.
    """

    @property
    def runs_dir(self) -> Path:
        return self.data_dir / "runs"

    @property
    def experiments_dir(self) -> Path:
        return self.data_dir / "experiments"


context: Optional[RunContext] = None
"""
The current context
"""


def apply_determinism(config: RunConfig) -> None:
    """
    Seed torch's global generator, and in deterministic mode restrict torch to
    deterministic single-threaded kernels
    """
    torch.manual_seed(config.seed)
    if config.deterministic:
        torch.use_deterministic_algorithms(True)
        torch.set_num_threads(1)
        log.info("Deterministic mode enabled")


def set_context(new_context: RunContext) -> None:
    """
    Set the context, applying its determinism settings
    """
    global context
    apply_determinism(new_context.config)
    context = new_context


def get_context() -> RunContext:
    """
    Get a reference to the context
    """
    if context is None:
        raise MgdtInternalError("No run context has been set")
    return context


def pop_context() -> RunContext:
    """
    Clear the context, returning its value
    """
    global context
    if context is None:
        raise MgdtInternalError("No run context has been set")
    ret = context
    context = None
    return ret
