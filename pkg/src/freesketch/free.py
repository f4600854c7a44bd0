"""FreeBS and FreeRS: parameter-free bit and register sharing.

Each distinct (user, item) pair is hashed over the whole shared array.
When a pair flips a bit (FreeBS) or raises a register (FreeRS), the
arriving user's estimate grows by ``1/q``, where ``q`` is the probability
that a brand-new pair would have changed the array in its state just
before this arrival. That is a Horvitz-Thompson estimator, so each
estimate is unbiased and is updated in O(1).
"""

from __future__ import annotations

from typing import Hashable, NamedTuple

import numpy as np
from numba import njit

from . import snapshot
from .base import DEFAULT_REGISTER_WIDTH
from .errors import InvalidArgument
from .hashing import Key, _u64, hash64, key_digest, reduce_index, split_parts
from .shared import POW2NEG, bit_words, bits_to_words, get_bit, set_bit, words_to_bits


class UpdateOutcome(NamedTuple):
    changed: bool
    increment: float
    user: Hashable


@njit(cache=True, inline="always")
def pair_hash(ukey, ikey, seed):
    return hash64(ikey, hash64(ukey, seed))


@njit(cache=True, inline="always")
def freebs_step(words, M, m0, ukey, ikey, seed):
    """Increment ``M / m0`` if the pair hits a zero bit (which is then set), else 0."""
    if m0 == 0:
        return 0.0
    pos = reduce_index(pair_hash(ukey, ikey, seed), M)
    if get_bit(words, pos) != 0:
        return 0.0
    set_bit(words, pos)
    return M / m0


@njit(cache=True, nogil=True)
def freebs_run(words, M, m0, seed, ukeys, ikeys, uidx, counters, start, stop):
    for t in range(start, stop):
        inc = freebs_step(words, M, m0, ukeys[t], ikeys[t], seed)
        if inc > 0.0:
            counters[uidx[t]] += inc
            m0 -= 1
    return m0


@njit(cache=True, inline="always")
def freers_step(regs, M, cap, qsum, ukey, ikey, seed, pow2neg):
    """Returns ``(increment, new_qsum)``; ``qsum`` is ``sum(2**-R)`` before the update."""
    j, r = split_parts(pair_hash(ukey, ikey, seed), M)
    if r > cap:
        r = cap
    old = regs[j]
    if r <= old:
        return 0.0, qsum
    regs[j] = r
    return M / qsum, qsum + (pow2neg[r] - pow2neg[old])


@njit(cache=True, nogil=True)
def freers_run(regs, M, cap, seed, qsum, pow2neg, ukeys, ikeys, uidx, counters, start, stop):
    for t in range(start, stop):
        inc, qsum = freers_step(regs, M, cap, qsum, ukeys[t], ikeys[t], seed, pow2neg)
        if inc > 0.0:
            counters[uidx[t]] += inc
    return qsum


class FreeBS:
    """Bit sharing over ``M`` bits with per-user Horvitz-Thompson counters.

    ``q`` is the fraction of zero bits; the array saturates once every bit
    is set, after which updates are no-ops and ``saturated`` is True.
    """

    def __init__(self, M: int, seed: int = 0):
        if not 1 <= M <= 1 << 32:
            raise InvalidArgument("M must be in [1, 2**32]")
        self.M = M
        self.seed = seed
        self.words = bit_words(M)
        self.m0 = M
        self.estimates: dict = {}

    @property
    def q(self) -> float:
        return self.m0 / self.M

    @property
    def saturated(self) -> bool:
        return self.m0 == 0

    @property
    def bits(self) -> np.ndarray:
        return words_to_bits(self.words, self.M)

    def update(self, user: Key, item: Key) -> UpdateOutcome:
        inc = float(freebs_step(self.words, self.M, self.m0, _u64(key_digest(user)), _u64(key_digest(item)),
                                _u64(self.seed)))
        if inc == 0.0:
            return UpdateOutcome(False, 0.0, user)
        self.m0 -= 1
        self.estimates[user] = self.estimates.get(user, 0.0) + inc
        return UpdateOutcome(True, inc, user)

    def run(self, ukeys, ikeys, uidx, counters, start: int = 0, stop: int | None = None) -> None:
        """Batch update over digested edges, accumulating into dense ``counters[uidx]``.

        ``self.estimates`` is not touched; the caller owns ``counters``.
        """
        stop = len(ukeys) if stop is None else stop
        self.m0 = int(freebs_run(self.words, self.M, self.m0, _u64(self.seed), ukeys, ikeys, uidx, counters,
                                 start, stop))

    def estimate(self, user: Key) -> float:
        return self.estimates.get(user, 0.0)

    def recount(self) -> int:
        return int(self.M - self.bits.sum())

    def to_bytes(self) -> bytes:
        return snapshot.encode(snapshot.Kind.FREEBS, self.M, self.seed, snapshot.pack_bits(self.bits))

    @classmethod
    def from_bytes(cls, blob: bytes) -> "FreeBS":
        """Restore the bit array; per-user counters travel separately (CSV dump)."""
        header, payload = snapshot.decode(blob, snapshot.Kind.FREEBS)
        st = cls(header.size, header.seed)
        st.words = bits_to_words(snapshot.unpack_bits(payload, header.size))
        st.m0 = st.recount()
        return st

    def same_array(self, other: "FreeBS") -> bool:
        return self.M == other.M and np.array_equal(self.words, other.words)


class FreeRS:
    """Register sharing over ``M`` registers of ``w`` bits with per-user counters."""

    def __init__(self, M: int, w: int = DEFAULT_REGISTER_WIDTH, seed: int = 0):
        if not 1 <= M <= 1 << 32:
            raise InvalidArgument("M must be in [1, 2**32]")
        if not 1 <= w <= 8:
            raise InvalidArgument("register width must be in 1..8")
        self.M = M
        self.w = w
        self.seed = seed
        self.registers = np.zeros(M, dtype=np.uint8)
        self.qsum = float(M)
        self.estimates: dict = {}

    @property
    def cap(self) -> int:
        return (1 << self.w) - 1

    @property
    def q(self) -> float:
        return self.qsum / self.M

    def update(self, user: Key, item: Key) -> UpdateOutcome:
        inc, self.qsum = freers_step(self.registers, self.M, self.cap, self.qsum, _u64(key_digest(user)),
                                     _u64(key_digest(item)), _u64(self.seed), POW2NEG)
        if inc == 0.0:
            return UpdateOutcome(False, 0.0, user)
        self.estimates[user] = self.estimates.get(user, 0.0) + inc
        return UpdateOutcome(True, float(inc), user)

    def run(self, ukeys, ikeys, uidx, counters, start: int = 0, stop: int | None = None) -> None:
        stop = len(ukeys) if stop is None else stop
        self.qsum = float(freers_run(self.registers, self.M, self.cap, _u64(self.seed), self.qsum, POW2NEG,
                                     ukeys, ikeys, uidx, counters, start, stop))

    def estimate(self, user: Key) -> float:
        return self.estimates.get(user, 0.0)

    def recount(self) -> float:
        """``q`` recomputed from scratch."""
        return float(POW2NEG[self.registers].sum()) / self.M

    def to_bytes(self) -> bytes:
        payload = snapshot.pack_registers(self.registers, self.w)
        return snapshot.encode(snapshot.Kind.FREERS, self.M, self.seed, payload, w=self.w)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "FreeRS":
        header, payload = snapshot.decode(blob, snapshot.Kind.FREERS)
        st = cls(header.size, header.w, header.seed)
        st.registers = snapshot.unpack_registers(payload, header.size, header.w)
        st.qsum = float(POW2NEG[st.registers].sum())
        return st

    def same_array(self, other: "FreeRS") -> bool:
        return self.M == other.M and np.array_equal(self.registers, other.registers)
