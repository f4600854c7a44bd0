"""Binary snapshot format shared by every sketch type.

Layout (all little-endian)::

    offset  size  field
    0       4     magic  b"FSK1"
    4       1     kind   (see Kind)
    5       1     w      register width in bits, 0 for bitmaps
    6       2     reserved, zero
    8       8     size   number of bits/registers (m or M)
    16      8     vsize  virtual sketch size m for CSE/vHLL, else 0
    24      8     seed
    32      ...   payload

Bitmaps are packed LSB-first (bit i lives in byte i // 8 at position i % 8).
Registers are packed as a contiguous stream of w-bit little-endian fields
using the same bit order, so register i occupies stream bits
[i*w, (i+1)*w).
"""

from __future__ import annotations

import enum
import struct
from typing import NamedTuple

import numpy as np

from .errors import InvalidArgument

MAGIC = b"FSK1"
_HEADER = struct.Struct("<4sBBHQQQ")
HEADER_SIZE = _HEADER.size


class Kind(enum.IntEnum):
    LPC = 1
    HLL = 2
    CSE = 3
    VHLL = 4
    FREEBS = 5
    FREERS = 6


class Header(NamedTuple):
    kind: Kind
    w: int
    size: int
    vsize: int
    seed: int


def pack_bits(bits: np.ndarray) -> bytes:
    """Pack a 0/1 array LSB-first."""
    return np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little").tobytes()


def unpack_bits(payload: bytes, size: int) -> np.ndarray:
    need = (size + 7) // 8
    if len(payload) != need:
        raise InvalidArgument(f"bit payload is {len(payload)} bytes, expected {need}")
    return np.unpackbits(np.frombuffer(payload, dtype=np.uint8), count=size, bitorder="little")


def pack_registers(regs: np.ndarray, w: int) -> bytes:
    regs = np.asarray(regs, dtype=np.uint8)
    if regs.size and int(regs.max()) >= (1 << w):
        raise InvalidArgument(f"register value does not fit in {w} bits")
    fields = np.unpackbits(regs[:, None], axis=1, bitorder="little")[:, :w]
    return np.packbits(fields.ravel(), bitorder="little").tobytes()


def unpack_registers(payload: bytes, size: int, w: int) -> np.ndarray:
    need = (size * w + 7) // 8
    if len(payload) != need:
        raise InvalidArgument(f"register payload is {len(payload)} bytes, expected {need}")
    stream = np.unpackbits(np.frombuffer(payload, dtype=np.uint8), count=size * w, bitorder="little")
    fields = np.zeros((size, 8), dtype=np.uint8)
    fields[:, :w] = stream.reshape(size, w)
    return np.packbits(fields, axis=1, bitorder="little").ravel()


def encode(kind: Kind, size: int, seed: int, payload: bytes, *, w: int = 0, vsize: int = 0) -> bytes:
    return _HEADER.pack(MAGIC, int(kind), w, 0, size, vsize, seed & ((1 << 64) - 1)) + payload


def decode(blob: bytes, expect: Kind | None = None) -> tuple[Header, bytes]:
    if len(blob) < HEADER_SIZE:
        raise InvalidArgument("snapshot shorter than its header")
    magic, kind, w, _, size, vsize, seed = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise InvalidArgument(f"bad snapshot magic {magic!r}")
    try:
        kind = Kind(kind)
    except ValueError:
        raise InvalidArgument(f"unknown snapshot kind {kind}") from None
    if expect is not None and kind != expect:
        raise InvalidArgument(f"snapshot holds {kind.name}, expected {expect.name}")
    return Header(kind, w, size, vsize, seed), blob[HEADER_SIZE:]


def load(blob: bytes):
    """Restore any sketch from its snapshot, dispatching on the kind tag."""
    from .base import HllSketch, LpcSketch
    from .free import FreeBS, FreeRS
    from .shared import CseArray, VhllArray

    header, _ = decode(blob)
    cls = {
        Kind.LPC: LpcSketch,
        Kind.HLL: HllSketch,
        Kind.CSE: CseArray,
        Kind.VHLL: VhllArray,
        Kind.FREEBS: FreeBS,
        Kind.FREERS: FreeRS,
    }[header.kind]
    return cls.from_bytes(blob)
