"""Single-user LPC and HyperLogLog sketches."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from . import snapshot
from .analysis import alpha_constant
from .errors import InvalidArgument, SaturationError, UnsupportedSize
from .hashing import Key, _u64, hash64, key_digest, split_parts

DEFAULT_REGISTER_WIDTH = 5


@njit(cache=True)
def _lpc_insert_many(bits, m, seed, digests):
    zeros_cleared = 0
    for t in range(digests.shape[0]):
        j, _ = split_parts(hash64(digests[t], seed), m)
        if bits[j] == 0:
            bits[j] = 1
            zeros_cleared += 1
    return zeros_cleared


@njit(cache=True)
def _hll_insert_many(regs, m, cap, seed, digests):
    for t in range(digests.shape[0]):
        j, r = split_parts(hash64(digests[t], seed), m)
        if r > cap:
            r = cap
        if r > regs[j]:
            regs[j] = r


@njit(cache=True, inline="always")
def hll_value(harmonic_sum, zeros, m, alpha):
    """HLL estimate from ``sum(2**-R)`` and the zero-register count.

    Small-range rule: below ``2.5 m`` the registers are read as an LPC
    bitmap, unless none is zero, in which case the raw estimate stands.
    """
    raw = alpha * m * m / harmonic_sum
    if raw < 2.5 * m and zeros > 0:
        return m * math.log(m / zeros)
    return raw


def lpc_value(m: int, zeros: int) -> float:
    if zeros <= 0:
        raise SaturationError(f"LPC sketch of {m} bits is saturated", bound=m * math.log(m))
    return -m * math.log(zeros / m)


class LpcSketch:
    """Linear probabilistic counting over an ``m``-bit bitmap."""

    def __init__(self, m: int, seed: int = 0):
        if m < 1:
            raise InvalidArgument("m must be >= 1")
        self.m = m
        self.seed = seed
        self.bits = np.zeros(m, dtype=np.uint8)
        self.zero_count = m

    def insert(self, item: Key) -> "LpcSketch":
        j, _ = split_parts(_u64(hash64(_u64(key_digest(item)), _u64(self.seed))), self.m)
        if self.bits[j] == 0:
            self.bits[j] = 1
            self.zero_count -= 1
        return self

    def insert_many(self, digests: np.ndarray) -> "LpcSketch":
        """Insert pre-digested items (see ``hashing.digest_many``)."""
        cleared = _lpc_insert_many(self.bits, self.m, _u64(self.seed), np.asarray(digests, dtype=np.uint64))
        self.zero_count -= cleared
        return self

    def estimate(self) -> float:
        return lpc_value(self.m, self.zero_count)

    def to_bytes(self) -> bytes:
        return snapshot.encode(snapshot.Kind.LPC, self.m, self.seed, snapshot.pack_bits(self.bits))

    @classmethod
    def from_bytes(cls, blob: bytes) -> "LpcSketch":
        header, payload = snapshot.decode(blob, snapshot.Kind.LPC)
        sk = cls(header.size, header.seed)
        sk.bits = snapshot.unpack_bits(payload, header.size).astype(np.uint8)
        sk.zero_count = int(sk.m - sk.bits.sum())
        return sk

    def __eq__(self, other):
        return (isinstance(other, LpcSketch) and self.m == other.m and self.seed == other.seed
                and np.array_equal(self.bits, other.bits))


class HllSketch:
    """HyperLogLog with ``m`` registers of ``w`` bits."""

    def __init__(self, m: int, w: int = DEFAULT_REGISTER_WIDTH, seed: int = 0):
        if m < 16:
            raise UnsupportedSize(f"HLL needs m >= 16, got {m}")
        if not 1 <= w <= 8:
            raise InvalidArgument("register width must be in 1..8")
        self.alpha = alpha_constant(m)
        self.m = m
        self.w = w
        self.seed = seed
        self.registers = np.zeros(m, dtype=np.uint8)

    @property
    def cap(self) -> int:
        return (1 << self.w) - 1

    def insert(self, item: Key) -> "HllSketch":
        j, r = split_parts(_u64(hash64(_u64(key_digest(item)), _u64(self.seed))), self.m)
        r = min(r, self.cap)
        if r > self.registers[j]:
            self.registers[j] = r
        return self

    def insert_many(self, digests: np.ndarray) -> "HllSketch":
        _hll_insert_many(self.registers, self.m, self.cap, _u64(self.seed), np.asarray(digests, dtype=np.uint64))
        return self

    def raw_estimate(self) -> float:
        return self.alpha * self.m**2 / float(np.exp2(-self.registers.astype(float)).sum())

    def estimate(self) -> float:
        harmonic = float(np.exp2(-self.registers.astype(float)).sum())
        zeros = int(np.count_nonzero(self.registers == 0))
        return float(hll_value(harmonic, zeros, self.m, self.alpha))

    def to_bytes(self) -> bytes:
        payload = snapshot.pack_registers(self.registers, self.w)
        return snapshot.encode(snapshot.Kind.HLL, self.m, self.seed, payload, w=self.w)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "HllSketch":
        header, payload = snapshot.decode(blob, snapshot.Kind.HLL)
        sk = cls(header.size, header.w, header.seed)
        sk.registers = snapshot.unpack_registers(payload, header.size, header.w)
        return sk

    def __eq__(self, other):
        return (isinstance(other, HllSketch) and (self.m, self.w, self.seed) == (other.m, other.w, other.seed)
                and np.array_equal(self.registers, other.registers))
