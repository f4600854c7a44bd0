"""Seedable 64-bit hashing shared by every sketch.

All random mappings (bucket choice, geometric rank, per-user virtual
positions) are derived from one primitive, ``hash64(x, seed)``: a
two-round splitmix64 finalizer keyed by the seed. Keys are first reduced
to a 64-bit digest (BLAKE2b for byte strings, identity for integers) so
the compiled kernels only ever see ``uint64`` values.

The compiled functions below are usable from Python and from other
``@njit`` code; the sketches' batch kernels call them directly, which
keeps the scalar and batch paths bit-for-bit identical.
"""

from __future__ import annotations

import hashlib
from typing import NamedTuple, Union

import numpy as np
from numba import njit

from .errors import InvalidArgument

Key = Union[bytes, bytearray, memoryview, str, int, np.integer]

MASK64 = (1 << 64) - 1
MAX_RANGE = 1 << 32

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_S32 = np.uint64(32)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)


@njit(cache=True, inline="always")
def mix64(z):
    """splitmix64 output finalizer; a bijection on 64-bit words."""
    z = np.uint64(z)
    z = (z ^ (z >> _S30)) * _MUL1
    z = (z ^ (z >> _S27)) * _MUL2
    return z ^ (z >> _S31)


@njit(cache=True, inline="always")
def hash64(x, seed):
    k = mix64(np.uint64(seed) + GOLDEN)
    return mix64(mix64(np.uint64(x) ^ k) + k)


@njit(cache=True, inline="always")
def reduce_index(h, n):
    """Map a hash to ``[0, n)`` from its top 32 bits (multiply-shift)."""
    return np.int64(((np.uint64(h) >> _S32) * np.uint64(n)) >> _S32)


@njit(cache=True, inline="always")
def clz64(x):
    x = np.uint64(x)
    if x == _ZERO:
        return 64
    n = 0
    if x <= np.uint64(0x00000000FFFFFFFF):
        n += 32
        x = x << np.uint64(32)
    if x <= np.uint64(0x0000FFFFFFFFFFFF):
        n += 16
        x = x << np.uint64(16)
    if x <= np.uint64(0x00FFFFFFFFFFFFFF):
        n += 8
        x = x << np.uint64(8)
    if x <= np.uint64(0x0FFFFFFFFFFFFFFF):
        n += 4
        x = x << np.uint64(4)
    if x <= np.uint64(0x3FFFFFFFFFFFFFFF):
        n += 2
        x = x << np.uint64(2)
    if x <= np.uint64(0x7FFFFFFFFFFFFFFF):
        n += 1
    return n


@njit(cache=True, inline="always")
def rank_of(bits, width):
    """Leading zeros of a left-aligned bit string plus one, capped at ``width``."""
    r = clz64(bits) + 1
    return r if r < width else width


@njit(cache=True, inline="always")
def split_parts(h, m):
    """Return ``(bucket, rank)`` for a hash, bucket 0-based.

    Power-of-two ``m`` follows the classic layout: the first ``b = log2 m``
    bits pick the bucket and the rank comes from the remaining ``64 - b``
    bits. Otherwise the bucket is a multiply-shift reduction of the high
    32 bits and the rank is taken from the low 32 bits.
    """
    h = np.uint64(h)
    bucket = reduce_index(h, m)
    if m & (m - 1) == 0:
        b = 0
        while (1 << b) < m:
            b += 1
        return bucket, rank_of(h << np.uint64(b), 64 - b)
    return bucket, rank_of(h << _S32, 32)


@njit(cache=True, inline="always")
def family_slot(user_hash, i, n):
    """Position ``f_{i+1}(s)`` in ``[0, n)`` for a pre-hashed user."""
    return reduce_index(mix64(np.uint64(user_hash) + (np.uint64(i) + _ONE) * GOLDEN), n)


@njit(cache=True)
def hash64_array(xs, seed):
    out = np.empty(xs.shape[0], dtype=np.uint64)
    for i in range(xs.shape[0]):
        out[i] = hash64(xs[i], seed)
    return out


class HashedPair(NamedTuple):
    bucket: int
    rank: int


def key_digest(key: Key) -> int:
    """Reduce a key to an unsigned 64-bit integer.

    Byte strings (and ``str``, encoded as UTF-8) go through BLAKE2b; integers
    are taken modulo 2**64 as-is. ``b"5"`` and ``5`` are therefore different keys.
    """
    if isinstance(key, str):
        key = key.encode("utf-8")
    if isinstance(key, (bytes, bytearray, memoryview)):
        return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")
    if isinstance(key, (int, np.integer)) and not isinstance(key, bool):
        return int(key) & MASK64
    raise TypeError(f"unsupported key type {type(key).__name__}")


def digest_many(keys) -> np.ndarray:
    return np.fromiter((key_digest(k) for k in keys), dtype=np.uint64)


def derive_seed(seed: int, label: str) -> int:
    """Independent sub-seed for a named component (e.g. one method of a run)."""
    data = int(seed & MASK64).to_bytes(8, "little") + label.encode("utf-8")
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def _u64(x: int) -> np.uint64:
    return np.uint64(int(x) & MASK64)


def raw_hash(key: Key, seed: int) -> int:
    return int(hash64(_u64(key_digest(key)), _u64(seed)))


def _check_range(n: int, name: str) -> None:
    if n < 1:
        raise InvalidArgument(f"{name} must be >= 1, got {n}")
    if n > MAX_RANGE:
        raise InvalidArgument(f"{name} must be <= 2**32, got {n}")


def uniform_index(key: Key, range_: int, seed: int) -> int:
    """Uniform bucket in ``[1, range_]``."""
    _check_range(range_, "range")
    return int(reduce_index(_u64(raw_hash(key, seed)), range_)) + 1


def rank_from_bits(bits: int, width: int = 64) -> int:
    """Geometric rank of a left-aligned ``width``-bit string (leading zeros + 1)."""
    if width <= 64:
        bits = (bits << (64 - width)) & MASK64
    return int(rank_of(_u64(bits), width))


def geometric_rank(key: Key, seed: int) -> int:
    """Rank with ``P(rank = k) = 2**-k``, capped at 64."""
    return int(rank_of(_u64(raw_hash(key, seed)), 64))


def split_hash(key: Key, m: int, seed: int) -> HashedPair:
    _check_range(m, "m")
    bucket, rank = split_parts(_u64(raw_hash(key, seed)), m)
    return HashedPair(int(bucket) + 1, int(rank))


def split_bits(h: int, m: int) -> HashedPair:
    """Split an already-computed 64-bit hash; exposed for bit-level checks."""
    _check_range(m, "m")
    bucket, rank = split_parts(_u64(h), m)
    return HashedPair(int(bucket) + 1, int(rank))


def family_index(user: Key, i: int, range_: int, seed: int) -> int:
    """``f_i(user)`` for ``i`` in ``1..m``: a uniform position in ``[1, range_]``."""
    _check_range(range_, "range")
    if i < 1:
        raise InvalidArgument("family index starts at 1")
    uh = _u64(hash64(_u64(key_digest(user)), _u64(seed)))
    return int(family_slot(uh, i - 1, range_)) + 1
