"""
# Mgdt > Container

Helpers shared by the binary episode and checkpoint formats.

For the byte layout of each format, see Format.md in the project root
directory.
"""
import struct
import zlib
from pathlib import Path
from typing import NoReturn, Optional
from typing_extensions import Self
from . import _consts as consts
from .errors import MgdtFormatError


def checksum(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


class ByteWriter:
    """
    Accumulates little-endian values
    """

    def __init__(self, magic: bytes) -> None:
        self.__parts: list[bytes] = [
            magic,
            struct.pack("<H", consts.FORMAT_VERSION),
        ]

    def u8(self, value: int) -> Self:
        self.__parts.append(struct.pack("<B", value))
        return self

    def u16(self, value: int) -> Self:
        self.__parts.append(struct.pack("<H", value))
        return self

    def u32(self, value: int) -> Self:
        self.__parts.append(struct.pack("<I", value))
        return self

    def u64(self, value: int) -> Self:
        self.__parts.append(struct.pack("<Q", value))
        return self

    def f64(self, value: float) -> Self:
        self.__parts.append(struct.pack("<d", value))
        return self

    def text(self, value: str) -> Self:
        encoded = value.encode()
        return self.u32(len(encoded)).raw(encoded)

    def raw(self, data: bytes) -> Self:
        self.__parts.append(data)
        return self

    def finish(self) -> bytes:
        """
        All written bytes, followed by their checksum
        """
        body = b"".join(self.__parts)
        return body + struct.pack("<I", checksum(body))


class ByteReader:
    """
    Reads little-endian values, reporting failures with their position.

    `record` can be set by the caller so that errors name the record being
    read.
    """

    def __init__(self, path: 'Path | str', data: bytes, magic: bytes) -> None:
        self.path = Path(path)
        self.data = data
        self.offset = 0
        self.record: Optional[int] = None
        if len(data) < len(magic) + 2 + 4:
            self.fail("file is too short to be valid")
        if data[:len(magic)] != magic:
            self.fail(
                f"unrecognised file header {data[:len(magic)]!r}, expected "
                f"{magic!r}"
            )
        self.offset = len(magic)
        version = self.u16()
        if version != consts.FORMAT_VERSION:
            self.fail(
                f"format version {version} is not supported (expected "
                f"{consts.FORMAT_VERSION})"
            )

    def fail(self, reason: str) -> NoReturn:
        raise MgdtFormatError(self.path, reason, self.record, self.offset)

    def take(self, n: int) -> bytes:
        # The trailing 4 bytes are always the checksum
        if self.offset + n > len(self.data) - 4:
            self.fail(
                f"file is truncated (needed {n} more bytes, "
                f"{max(len(self.data) - 4 - self.offset, 0)} remain)"
            )
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def u8(self) -> int:
        return struct.unpack("<B", self.take(1))[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self.take(8))[0]

    def text(self) -> str:
        length = self.u32()
        try:
            return self.take(length).decode()
        except UnicodeDecodeError:
            self.fail("text field is not valid UTF-8")

    def verify_checksum(self) -> None:
        """
        Check that only the checksum remains, and that it matches
        """
        self.record = None
        if self.offset != len(self.data) - 4:
            self.fail(
                f"{len(self.data) - 4 - self.offset} unexpected bytes before "
                f"the checksum"
            )
        expected = struct.unpack("<I", self.data[-4:])[0]
        actual = checksum(self.data[:-4])
        if expected != actual:
            self.fail(
                f"checksum mismatch (stored {expected:#010x}, computed "
                f"{actual:#010x})"
            )
