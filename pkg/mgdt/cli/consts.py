"""
# Mgdt > CLI > Consts

Constants used by the Mgdt CLI
"""
import os
from pathlib import Path
from .._consts import DATA_DIR_ENV, DEFAULT_DATA_DIR


def default_data_dir() -> Path:
    """
    The data root given by `MGDT_DATA_DIR`, or `./mgdt-data` when unset
    """
    return Path(os.environ.get(DATA_DIR_ENV, DEFAULT_DATA_DIR))


EXIT_USER_ERROR = 1
"""
Exit code for invalid input, configuration, files or missing prerequisites
"""

EXIT_NUMERIC_ERROR = 2
"""
Exit code for training that diverged to a non-finite loss
"""
