"""
# Mgdt > Consts

Constants used by Mgdt
"""
from enum import IntEnum

VERSION = (0, 3, 0)
"""
The version of Mgdt in the format (major, minor, revision)
"""


RETURN_LOW = -20
"""
Lowest return represented by a return token
"""

RETURN_HIGH = 100
"""
Highest return represented by a return token
"""

RETURN_BIN_SIZE = 1.0
"""
Width of each return bucket
"""

REWARD_VALUES = (-1, 0, 1)
"""
The ternary reward alphabet
"""

KAPPA = 10.0
"""
Inverse temperature of the expert classifier used when sampling target returns
"""

CROP_PAD = 4
"""
Number of zero pixels added to each side of an image before random cropping
"""

PIXEL_MAX = 255
"""
Largest raw pixel intensity. Observations are stored as `uint8`.
"""


class Action(IntEnum):
    """
    The action set shared by every game in the suite
    """
    NOOP = 0
    LEFT = 1
    RIGHT = 2
    UP = 3
    DOWN = 4
    FIRE = 5


NUM_ACTIONS = len(Action)


class TokenKind(IntEnum):
    """
    Kind of the token at a position of a token sequence
    """

    PATCH = 0
    """
    An observation patch, fed to the model as a continuous vector
    """

    RETURN = 1
    """
    A quantized return-to-go
    """

    ACTION = 2
    """
    A discrete action
    """

    REWARD = 3
    """
    A ternary reward
    """

    PAD = 4
    """
    Padding added when collating windows of different lengths. Never attended
    to by real positions and never a target.
    """


NO_TARGET = -1
"""
Target id used for positions that carry no prediction target
"""


EPISODE_FILE_MAGIC = bytes([
    0x4D,  # 'M'
    0x47,  # 'G'
    0x44,  # 'D'
    0x54,  # 'T'
    0x45,  # 'E'
    0x50,  # 'P'
])
"""
Header at the start of every episode file
"""

CHECKPOINT_MAGIC = bytes([
    0x4D,  # 'M'
    0x47,  # 'G'
    0x44,  # 'D'
    0x54,  # 'T'
    0x43,  # 'C'
    0x4B,  # 'K'
])
"""
Header at the start of every checkpoint file
"""

FORMAT_VERSION = 1
"""
Version of the episode and checkpoint containers. Files with any other version
are rejected.
"""

REWARD_FIXED_POINT = 10_000
"""
Rewards are stored on disk as integers in units of 1/REWARD_FIXED_POINT
"""


class RecordType(IntEnum):
    """
    Type of a record within an episode file
    """

    EPISODE = 0x01
    """
    A single trajectory
    """

    END = 0x7F
    """
    Marks the end of the file. Followed only by the file checksum.
    """


DATA_DIR_ENV = "MGDT_DATA_DIR"
"""
Environment variable giving the root directory for data, checkpoints and
reports
"""

DEFAULT_DATA_DIR = "mgdt-data"
"""
Data root used when `MGDT_DATA_DIR` is not set
"""
