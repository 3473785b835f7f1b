"""
# Mgdt > CLI > Util

Helper functions for CLI
"""
import logging
from typing import Any, Optional
import click
from ..errors import MgdtError, MgdtInternalError, MgdtNumericError
from . import consts


log = logging.getLogger(__name__)


def handle_verbose(verbose: int):
    if verbose == 0:
        return
    elif verbose == 1:
        logging.basicConfig(level="INFO")
    else:
        logging.basicConfig(level="DEBUG")


def show_progress(verbose: int) -> Optional[bool]:
    """
    Progress bars get in the way of debug output, so hide them at `-vv`
    """
    return False if verbose >= 2 else None


def exit_code(error: MgdtError) -> int:
    if isinstance(error, MgdtNumericError):
        return consts.EXIT_NUMERIC_ERROR
    return consts.EXIT_USER_ERROR


class MgdtGroup(click.Group):
    """
    Command group that reports Mgdt errors as a message and an exit code
    rather than a traceback
    """

    def make_context(
        self,
        info_name: Optional[str],
        args: list[str],
        parent: Optional[click.Context] = None,
        **extra: Any,
    ) -> click.Context:
        try:
            return super().make_context(info_name, args, parent, **extra)
        except click.UsageError as e:
            e.exit_code = consts.EXIT_USER_ERROR
            raise

    def invoke(self, ctx: click.Context) -> Any:
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            # Bad arguments are user errors like any other
            e.exit_code = consts.EXIT_USER_ERROR
            raise
        except MgdtInternalError:
            log.exception("Internal error")
            raise
        except MgdtError as e:
            click.echo(f"Error: {e}", err=True)
            ctx.exit(exit_code(e))
