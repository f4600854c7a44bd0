"""Virtual-sketch baselines: CSE (shared bits) and vHLL (shared registers).

Every user owns ``m`` virtual positions ``f_1(s) .. f_m(s)`` in one shared
array of size ``M``. An item picks one of them via ``h(d)``; estimation
scans all ``m`` positions, so it costs O(m) per query.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from . import snapshot
from .analysis import alpha_constant
from .base import DEFAULT_REGISTER_WIDTH, hll_value
from .errors import InvalidArgument, SaturationError
from .hashing import Key, _u64, derive_seed, family_slot, hash64, key_digest, split_parts

_ONE = np.uint64(1)
_LOW6 = np.uint64(63)


@njit(cache=True, inline="always")
def get_bit(words, i):
    return (words[i >> 6] >> (np.uint64(i) & _LOW6)) & _ONE


@njit(cache=True, inline="always")
def set_bit(words, i):
    words[i >> 6] |= _ONE << (np.uint64(i) & _LOW6)


def bit_words(size: int) -> np.ndarray:
    return np.zeros((size + 63) // 64, dtype=np.uint64)


def words_to_bits(words: np.ndarray, size: int) -> np.ndarray:
    raw = words.astype("<u8").view(np.uint8)
    return np.unpackbits(raw, count=size, bitorder="little")


def bits_to_words(bits: np.ndarray) -> np.ndarray:
    size = len(bits)
    words = bit_words(size)
    packed = np.packbits(np.asarray(bits, dtype=np.uint8), bitorder="little")
    buf = np.zeros(words.size * 8, dtype=np.uint8)
    buf[: packed.size] = packed
    return buf.view("<u8").astype(np.uint64)


@njit(cache=True, inline="always")
def cse_value(m, M, user_zeros, global_zeros):
    return -m * math.log(user_zeros / m) + m * math.log(global_zeros / M)


@njit(cache=True)
def _cse_user_zeros(words, M, m, user_hash):
    zeros = 0
    for i in range(m):
        if get_bit(words, family_slot(user_hash, i, M)) == 0:
            zeros += 1
    return zeros


@njit(cache=True, nogil=True)
def cse_run(words, M, m, family_seed, item_seed, U, ukeys, ikeys, uidx, counters, start, stop, track):
    """Feed edges ``[start, stop)``; returns ``(U, saturation_events)``.

    With ``track`` set, the arriving user's counter is refreshed after every
    edge. A saturated virtual sketch (or array) is read as having one zero
    bit, i.e. the estimator's range ceiling, and counted as an event.
    """
    saturated = 0
    for t in range(start, stop):
        uh = hash64(ukeys[t], family_seed)
        j, _ = split_parts(hash64(ikeys[t], item_seed), m)
        pos = family_slot(uh, j, M)
        if get_bit(words, pos) == 0:
            set_bit(words, pos)
            U -= 1
        if track:
            z = _cse_user_zeros(words, M, m, uh)
            g = U
            if z == 0 or g == 0:
                saturated += 1
                z = max(z, 1)
                g = max(g, 1)
            counters[uidx[t]] = cse_value(m, M, z, g)
    return U, saturated


@njit(cache=True)
def _vhll_user_scan(regs, M, m, user_hash, pow2neg):
    s = 0.0
    zeros = 0
    for i in range(m):
        r = regs[family_slot(user_hash, i, M)]
        s += pow2neg[r]
        if r == 0:
            zeros += 1
    return s, zeros


@njit(cache=True, inline="always")
def vhll_value(user_sum, user_zeros, global_sum, global_zeros, m, M, alpha_m, alpha_M):
    own = hll_value(user_sum, user_zeros, m, alpha_m)
    total = hll_value(global_sum, global_zeros, M, alpha_M)
    return M / (M - m) * (own - m / M * total)


@njit(cache=True, nogil=True)
def vhll_run(regs, M, m, cap, family_seed, item_seed, gsum, gzeros, alpha_m, alpha_M, pow2neg,
             ukeys, ikeys, uidx, counters, start, stop, track):
    """Feed edges ``[start, stop)``; returns ``(gsum, gzeros, saturated)``.

    ``saturated`` counts tracked estimates whose global term fell back to the
    raw HLL value because no zero register was left below ``2.5 M``.
    """
    saturated = 0
    for t in range(start, stop):
        uh = hash64(ukeys[t], family_seed)
        j, r = split_parts(hash64(ikeys[t], item_seed), m)
        if r > cap:
            r = cap
        pos = family_slot(uh, j, M)
        old = regs[pos]
        if r > old:
            gsum += pow2neg[r] - pow2neg[old]
            if old == 0:
                gzeros -= 1
            regs[pos] = r
        if track:
            s, z = _vhll_user_scan(regs, M, m, uh, pow2neg)
            counters[uidx[t]] = vhll_value(s, z, gsum, gzeros, m, M, alpha_m, alpha_M)
            if gzeros == 0 and alpha_M * M * M / gsum < 2.5 * M:
                saturated += 1
    return gsum, gzeros, saturated


POW2NEG = np.exp2(-np.arange(256, dtype=np.float64))


class _Shared:
    def __init__(self, M: int, m: int, seed: int):
        self.M = M
        self.m = m
        self.seed = seed
        self.family_seed = derive_seed(seed, "family")
        self.item_seed = derive_seed(seed, "item")

    def _user_hash(self, user: Key) -> np.uint64:
        return _u64(hash64(_u64(key_digest(user)), _u64(self.family_seed)))

    def positions(self, user: Key) -> list[int]:
        """The user's virtual positions ``f_1(s) .. f_m(s)``, 0-based."""
        uh = self._user_hash(user)
        return [int(family_slot(uh, i, self.M)) for i in range(self.m)]

    def _target(self, user: Key, item: Key):
        uh = self._user_hash(user)
        j, r = split_parts(_u64(hash64(_u64(key_digest(item)), _u64(self.item_seed))), self.m)
        return int(family_slot(uh, j, self.M)), int(r)


class CseArray(_Shared):
    """Shared bit array holding one virtual LPC sketch per user."""

    def __init__(self, M: int, m: int, seed: int = 0):
        if not 1 <= m <= M:
            raise InvalidArgument(f"CSE needs 1 <= m <= M, got m={m}, M={M}")
        super().__init__(M, m, seed)
        self.words = bit_words(M)
        self.zero_count = M

    @property
    def bits(self) -> np.ndarray:
        return words_to_bits(self.words, self.M)

    def update(self, user: Key, item: Key) -> "CseArray":
        pos, _ = self._target(user, item)
        if not get_bit(self.words, pos):
            set_bit(self.words, pos)
            self.zero_count -= 1
        return self

    def update_many(self, ukeys, ikeys) -> "CseArray":
        n = len(ukeys)
        self.zero_count, _ = cse_run(self.words, self.M, self.m, _u64(self.family_seed), _u64(self.item_seed),
                                     self.zero_count, np.asarray(ukeys, np.uint64), np.asarray(ikeys, np.uint64),
                                     np.zeros(n, np.int64), np.zeros(1), 0, n, False)
        return self

    def user_zeros(self, user: Key) -> int:
        return int(_cse_user_zeros(self.words, self.M, self.m, self._user_hash(user)))

    def estimate(self, user: Key) -> float:
        z = self.user_zeros(user)
        bound = self.m * math.log(self.m)
        if z == 0:
            raise SaturationError("virtual sketch has no zero bits", bound=bound)
        if self.zero_count == 0:
            raise SaturationError("shared bit array is saturated", bound=bound)
        return float(cse_value(self.m, self.M, z, self.zero_count))

    def recount(self) -> int:
        return int(self.M - self.bits.sum())

    def to_bytes(self) -> bytes:
        return snapshot.encode(snapshot.Kind.CSE, self.M, self.seed, snapshot.pack_bits(self.bits), vsize=self.m)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "CseArray":
        header, payload = snapshot.decode(blob, snapshot.Kind.CSE)
        arr = cls(header.size, header.vsize, header.seed)
        arr.words = bits_to_words(snapshot.unpack_bits(payload, header.size))
        arr.zero_count = arr.recount()
        return arr

    def __eq__(self, other):
        return (isinstance(other, CseArray) and (self.M, self.m, self.seed) == (other.M, other.m, other.seed)
                and np.array_equal(self.words, other.words))


class VhllArray(_Shared):
    """Shared register array holding one virtual HLL sketch per user."""

    def __init__(self, M: int, m: int, w: int = DEFAULT_REGISTER_WIDTH, seed: int = 0):
        if not 1 <= m < M:
            raise InvalidArgument(f"vHLL needs 1 <= m < M, got m={m}, M={M}")
        if not 1 <= w <= 8:
            raise InvalidArgument("register width must be in 1..8")
        super().__init__(M, m, seed)
        self.w = w
        self.alpha_m = alpha_constant(m)
        self.alpha_M = alpha_constant(M)
        self.registers = np.zeros(M, dtype=np.uint8)
        self.global_sum = float(M)
        self.global_zeros = M

    @property
    def cap(self) -> int:
        return (1 << self.w) - 1

    def update(self, user: Key, item: Key) -> "VhllArray":
        pos, r = self._target(user, item)
        r = min(r, self.cap)
        old = int(self.registers[pos])
        if r > old:
            self.global_sum += POW2NEG[r] - POW2NEG[old]
            self.global_zeros -= old == 0
            self.registers[pos] = r
        return self

    def update_many(self, ukeys, ikeys) -> "VhllArray":
        n = len(ukeys)
        self.global_sum, self.global_zeros, _ = vhll_run(
            self.registers, self.M, self.m, self.cap, _u64(self.family_seed), _u64(self.item_seed),
            self.global_sum, self.global_zeros, self.alpha_m, self.alpha_M, POW2NEG,
            np.asarray(ukeys, np.uint64), np.asarray(ikeys, np.uint64), np.zeros(n, np.int64), np.zeros(1),
            0, n, False)
        return self

    def estimate(self, user: Key) -> float:
        s, z = _vhll_user_scan(self.registers, self.M, self.m, self._user_hash(user), POW2NEG)
        return float(vhll_value(s, z, self.global_sum, self.global_zeros, self.m, self.M,
                                self.alpha_m, self.alpha_M))

    def recount(self) -> tuple[float, int]:
        return float(POW2NEG[self.registers].sum()), int(np.count_nonzero(self.registers == 0))

    def to_bytes(self) -> bytes:
        payload = snapshot.pack_registers(self.registers, self.w)
        return snapshot.encode(snapshot.Kind.VHLL, self.M, self.seed, payload, w=self.w, vsize=self.m)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "VhllArray":
        header, payload = snapshot.decode(blob, snapshot.Kind.VHLL)
        arr = cls(header.size, header.vsize, header.w, header.seed)
        arr.registers = snapshot.unpack_registers(payload, header.size, header.w)
        arr.global_sum, arr.global_zeros = arr.recount()
        return arr

    def __eq__(self, other):
        return (isinstance(other, VhllArray)
                and (self.M, self.m, self.w, self.seed) == (other.M, other.m, other.w, other.seed)
                and np.array_equal(self.registers, other.registers))
