"""
# Mgdt / Util

Helper functions
"""
import logging
from pathlib import Path
from typing import Any, Sequence
from .errors import MgdtInternalError


log = logging.getLogger(__name__)


def format_value(value: Any) -> str:
    """
    Helper to give a compact representation of a table cell
    """
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def format_columns(
    header: Sequence[str],
    rows: Sequence[Sequence[Any]],
) -> str:
    """
    Whitespace-separated columns with a commented header line, as read by
    most plotting tools
    """
    lines = ["# " + " ".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise MgdtInternalError(
                f"Row {row!r} doesn't match the header {list(header)}")
        lines.append(" ".join(format_value(v) for v in row))
    return "\n".join(lines) + "\n"


def write_columns(
    path: Path,
    header: Sequence[str],
    rows: Sequence[Sequence[Any]],
) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_columns(header, rows))
    log.info(f"Wrote {len(rows)} rows to '{path}'")
    return path
