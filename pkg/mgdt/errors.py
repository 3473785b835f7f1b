"""
# Mgdt > Errors

Error classes used within Mgdt
"""
from pathlib import Path
from typing import Optional, Sequence


class MgdtError(Exception):
    """
    Base class of all errors raised by Mgdt
    """


class MgdtInputError(MgdtError, ValueError):
    """
    An operation was given arguments it cannot work with, such as a non-finite
    return or an image whose size doesn't match the patch grid.
    """


class MgdtConfigError(MgdtError, ValueError):
    """
    A configuration (model preset, optimizer settings, game roster, run config
    file) is invalid or incompatible with the data it is used with.
    """


class MgdtNumericError(MgdtError, ArithmeticError):
    """
    A loss or gradient norm became non-finite during training
    """

    def __init__(self, what: str, batch_id: Optional[int] = None) -> None:
        self.batch_id = batch_id
        where = "" if batch_id is None else f" (batch {batch_id})"
        super().__init__(
            f"Encountered a non-finite {what}{where}. Try lowering the "
            f"learning rate, or check the batch dump written next to the "
            f"training log."
        )


class MgdtFormatError(MgdtError, IOError):
    """
    An episode or checkpoint file could not be read because it is corrupt,
    truncated, or was written by an incompatible version of Mgdt.
    """

    def __init__(
        self,
        path: 'Path | str',
        reason: str,
        record: Optional[int] = None,
        offset: Optional[int] = None,
    ) -> None:
        self.path = Path(path)
        self.record = record
        self.offset = offset
        location = []
        if record is not None:
            location.append(f"record {record}")
        if offset is not None:
            location.append(f"byte offset {offset}")
        at = f" at {', '.join(location)}" if location else ""
        super().__init__(f"Could not read '{self.path}'{at}: {reason}")


class MgdtGameOverError(MgdtError, RuntimeError):
    """
    A game was stepped after its episode had already finished
    """

    def __init__(self, game_id: str) -> None:
        super().__init__(
            f"The episode of '{game_id}' has finished. Call `reset()` to "
            f"start a new episode."
        )


class MgdtProtocolError(MgdtError, RuntimeError):
    """
    An experiment protocol was violated, for example when a held-out game is
    present in the data a model was pretrained on.
    """


class MgdtPrerequisiteError(MgdtError, FileNotFoundError):
    """
    Files a command depends on (datasets, checkpoints) don't exist yet
    """

    def __init__(self, missing: Sequence['Path | str']) -> None:
        self.missing = [Path(p) for p in missing]
        listing = ", ".join(f"'{p}'" for p in self.missing)
        super().__init__(
            f"Missing prerequisite files: {listing}. Run `mgdt gen-data` "
            f"and `mgdt train` first, or point `MGDT_DATA_DIR` at an existing "
            f"data directory."
        )


class MgdtInternalError(MgdtError, AssertionError):
    """
    Mgdt reached a state that should be impossible. Please open a bug report.
    """
