"""
Binary blob encoding shared by every serialisable structure
Little-endian, 8-byte length prefixes, tagged and versioned sections
"""
import struct
from typing import Iterable, List, Sequence

import numpy as np
from bitarray import bitarray

from src.exceptions import CorruptContainerError


class BlobWriter:
    """Append-only little-endian encoder"""

    def __init__(self):
        self._buf = bytearray()

    def tag(self, name: bytes, version: int = 1) -> None:
        """Write a 4-byte structure tag followed by a one-byte version"""
        if len(name) != 4:
            raise ValueError(f"tag must be 4 bytes, got {name!r}")
        self._buf += name
        self._buf.append(version)

    def u64(self, value: int) -> None:
        self._buf += struct.pack("<Q", value)

    def i64(self, value: int) -> None:
        self._buf += struct.pack("<q", value)

    def f64(self, value: float) -> None:
        self._buf += struct.pack("<d", value)

    def varint(self, value: int) -> None:
        """Unsigned LEB128"""
        if value < 0:
            raise ValueError(f"varint needs a nonnegative value, got {value}")
        while True:
            byte = value & 0x7F
            value >>= 7
            if value:
                self._buf.append(byte | 0x80)
            else:
                self._buf.append(byte)
                return

    def varints(self, values: Iterable[int]) -> None:
        values = list(values)
        self.varint(len(values))
        for value in values:
            self.varint(value)

    def array(self, values: Sequence[int]) -> None:
        """An int64 array: 8-byte element count, then the raw elements"""
        data = np.asarray(values, dtype="<i8")
        self.u64(len(data))
        self._buf += data.tobytes()

    def bits(self, bits: bitarray) -> None:
        """A bitarray: 8-byte bit length, 8-byte byte length, little-endian bit order bytes"""
        packed = bitarray(bits, endian="little")
        raw = packed.tobytes()
        self.u64(len(packed))
        self.u64(len(raw))
        self._buf += raw

    def raw(self, data: bytes) -> None:
        self.u64(len(data))
        self._buf += data

    def text(self, value: str) -> None:
        self.raw(value.encode("utf-8"))

    def append(self, data: bytes) -> None:
        """Raw bytes, no length prefix"""
        self._buf += data

    def __len__(self) -> int:
        return len(self._buf)

    def getvalue(self) -> bytes:
        return bytes(self._buf)


class BlobReader:
    """Decoder mirroring BlobWriter; raises CorruptContainerError on malformed input"""

    def __init__(self, data: bytes):
        self._data = memoryview(data)
        self._pos = 0

    def _take(self, size: int) -> memoryview:
        if size < 0 or self._pos + size > len(self._data):
            raise CorruptContainerError(
                f"Truncated blob: need {size} bytes at offset {self._pos}, have {len(self._data) - self._pos}"
            )
        chunk = self._data[self._pos:self._pos + size]
        self._pos += size
        return chunk

    def expect_tag(self, name: bytes, version: int = 1) -> None:
        found = bytes(self._take(4))
        found_version = self._take(1)[0]
        if found != name:
            raise CorruptContainerError(f"Expected structure {name!r}, found {found!r}")
        if found_version != version:
            raise CorruptContainerError(f"Unsupported {name!r} version {found_version}")

    def u64(self) -> int:
        return struct.unpack("<Q", self._take(8))[0]

    def i64(self) -> int:
        return struct.unpack("<q", self._take(8))[0]

    def f64(self) -> float:
        return struct.unpack("<d", self._take(8))[0]

    def varint(self) -> int:
        result = 0
        shift = 0
        while True:
            byte = self._take(1)[0]
            result |= (byte & 0x7F) << shift
            if not byte & 0x80:
                return result
            shift += 7
            if shift > 70:
                raise CorruptContainerError("varint too long")

    def varints(self) -> List[int]:
        count = self.varint()
        return [self.varint() for _ in range(count)]

    def array(self) -> np.ndarray:
        count = self.u64()
        return np.frombuffer(bytes(self._take(8 * count)), dtype="<i8").astype(np.int64)

    def bits(self) -> bitarray:
        length = self.u64()
        nbytes = self.u64()
        if nbytes != (length + 7) // 8:
            raise CorruptContainerError(f"Bit section of {length} bits cannot hold {nbytes} bytes")
        packed = bitarray(endian="little")
        packed.frombytes(bytes(self._take(nbytes)))
        del packed[length:]
        return bitarray(packed, endian="big")

    def raw(self) -> bytes:
        return bytes(self._take(self.u64()))

    def text(self) -> str:
        return self.raw().decode("utf-8")

    def read(self, size: int) -> bytes:
        """Raw bytes, no length prefix"""
        return bytes(self._take(size))

    @property
    def exhausted(self) -> bool:
        return self._pos == len(self._data)
