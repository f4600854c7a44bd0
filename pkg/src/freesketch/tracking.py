"""Per-method adapters that keep one counter per user while edges stream by.

FreeBS/FreeRS update their counters natively. The baselines re-estimate the
arriving user after each edge and store the result in that user's counter,
so a counter always holds the estimate taken at the user's latest arrival.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .analysis import alpha_constant, hll_supported
from .base import hll_value
from .errors import InvalidArgument
from .free import FreeBS, FreeRS
from .hashing import _u64, derive_seed, hash64, split_parts
from .shared import POW2NEG, CseArray, VhllArray, cse_run, vhll_run

ALL_METHODS = ("FreeBS", "FreeRS", "CSE", "vHLL", "LPC", "HLL")


@njit(cache=True, nogil=True)
def lpc_track_run(bits, zeros, m, seed, ukeys, ikeys, uidx, counters, start, stop):
    """Per-user LPC bitmaps laid out back to back in ``bits``; returns saturation events."""
    saturated = 0
    for t in range(start, stop):
        u = uidx[t]
        j, _ = split_parts(hash64(ikeys[t], hash64(ukeys[t], seed)), m)
        k = u * m + j
        if bits[k] == 0:
            bits[k] = 1
            zeros[u] -= 1
        z = zeros[u]
        if z == 0:
            saturated += 1
            z = 1
        counters[u] = -m * math.log(z / m)
    return saturated


@njit(cache=True, nogil=True)
def hll_track_run(regs, m, cap, alpha, seed, pow2neg, ukeys, ikeys, uidx, counters, start, stop):
    for t in range(start, stop):
        u = uidx[t]
        j, r = split_parts(hash64(ikeys[t], hash64(ukeys[t], seed)), m)
        if r > cap:
            r = cap
        base = u * m
        if r > regs[base + j]:
            regs[base + j] = r
        s = 0.0
        zeros = 0
        for i in range(base, base + m):
            s += pow2neg[regs[i]]
            if regs[i] == 0:
                zeros += 1
        counters[u] = hll_value(s, zeros, m, alpha)


def hll_size_for(budget_registers: int) -> int:
    """Largest supported HLL size not above the budget, or 0 if below 16."""
    if budget_registers >= 128:
        return budget_registers
    for size in (64, 32, 16):
        if budget_registers >= size:
            return size
    return 0


class Tracker:
    """Common shape: ``feed`` a slice of encoded edges, read ``counters``."""

    name = ""

    def __init__(self, n_users: int, seed: int):
        self.seed = seed
        self.counters = np.zeros(max(n_users, 1), dtype=np.float64)
        self.saturation_events = 0

    def feed(self, edges, start: int, stop: int) -> None:
        raise NotImplementedError

    def describe(self) -> dict:
        return {}

    def inv_q(self) -> float | None:
        return None


class FreeBSTracker(Tracker):
    name = "FreeBS"

    def __init__(self, n_users, seed, M):
        super().__init__(n_users, seed)
        self.state = FreeBS(M, seed)

    def feed(self, edges, start, stop):
        self.state.run(edges.ukeys, edges.ikeys, edges.uidx, self.counters, start, stop)

    def describe(self):
        return {"bits": self.state.M}

    def inv_q(self):
        return math.inf if self.state.m0 == 0 else self.state.M / self.state.m0


class FreeRSTracker(Tracker):
    name = "FreeRS"

    def __init__(self, n_users, seed, M, w):
        super().__init__(n_users, seed)
        self.state = FreeRS(M, w, seed)

    def feed(self, edges, start, stop):
        self.state.run(edges.ukeys, edges.ikeys, edges.uidx, self.counters, start, stop)

    def describe(self):
        return {"registers": self.state.M, "w": self.state.w}

    def inv_q(self):
        return self.state.M / self.state.qsum


class CseTracker(Tracker):
    name = "CSE"

    def __init__(self, n_users, seed, M, m, track=True):
        super().__init__(n_users, seed)
        self.state = CseArray(M, m, seed)
        self.track = track

    def feed(self, edges, start, stop):
        s = self.state
        s.zero_count, sat = cse_run(s.words, s.M, s.m, _u64(s.family_seed), _u64(s.item_seed), s.zero_count,
                                    edges.ukeys, edges.ikeys, edges.uidx, self.counters, start, stop, self.track)
        self.saturation_events += int(sat)

    def describe(self):
        return {"bits": self.state.M, "m": self.state.m}

    def inv_q(self):
        z = self.state.zero_count
        return math.inf if z == 0 else self.state.M / z


class VhllTracker(Tracker):
    name = "vHLL"

    def __init__(self, n_users, seed, M, m, w, track=True):
        super().__init__(n_users, seed)
        self.state = VhllArray(M, m, w, seed)
        self.track = track

    def feed(self, edges, start, stop):
        s = self.state
        s.global_sum, s.global_zeros, sat = vhll_run(
            s.registers, s.M, s.m, s.cap, _u64(s.family_seed), _u64(s.item_seed), s.global_sum, s.global_zeros,
            s.alpha_m, s.alpha_M, POW2NEG, edges.ukeys, edges.ikeys, edges.uidx, self.counters, start, stop,
            self.track)
        self.saturation_events += int(sat)

    def describe(self):
        return {"registers": self.state.M, "m": self.state.m, "w": self.state.w}


class LpcTracker(Tracker):
    """One ``m``-bit LPC sketch per user; user ``s`` is seeded with ``hash64(s, seed)``."""

    name = "LPC"

    def __init__(self, n_users, seed, m):
        super().__init__(n_users, seed)
        if m < 1:
            raise InvalidArgument("per-user LPC needs at least one bit")
        self.m = m
        self.bits = np.zeros(n_users * m, dtype=np.uint8)
        self.zeros = np.full(n_users, m, dtype=np.int64)

    def feed(self, edges, start, stop):
        self.saturation_events += int(lpc_track_run(self.bits, self.zeros, self.m, _u64(self.seed), edges.ukeys,
                                                    edges.ikeys, edges.uidx, self.counters, start, stop))

    def describe(self):
        return {"bits_per_user": self.m}


class HllTracker(Tracker):
    name = "HLL"

    def __init__(self, n_users, seed, m, w):
        super().__init__(n_users, seed)
        if not hll_supported(m):
            raise InvalidArgument(f"per-user HLL size {m} is not supported")
        self.m = m
        self.w = w
        self.alpha = alpha_constant(m)
        self.regs = np.zeros(n_users * m, dtype=np.uint8)

    def feed(self, edges, start, stop):
        hll_track_run(self.regs, self.m, (1 << self.w) - 1, self.alpha, _u64(self.seed), POW2NEG, edges.ukeys,
                      edges.ikeys, edges.uidx, self.counters, start, stop)

    def describe(self):
        return {"registers_per_user": self.m, "w": self.w}


def method_seed(seed: int, method: str) -> int:
    return derive_seed(seed, method)


def build_tracker(method: str, *, memory_bits: int, m: int, w: int, n_users: int, seed: int,
                  per_user_size: int | None = None, track: bool = True) -> Tracker:
    """Tracker for ``method`` under the equal-memory rule.

    ``per_user_size`` overrides the LPC/HLL per-user split (used by the
    runtime benchmark, where the per-user sketch size is the swept ``m``).
    """
    s = method_seed(seed, method)
    if method == "FreeBS":
        return FreeBSTracker(n_users, s, memory_bits)
    if method == "FreeRS":
        return FreeRSTracker(n_users, s, memory_bits // w, w)
    if method == "CSE":
        return CseTracker(n_users, s, memory_bits, m, track)
    if method == "vHLL":
        return VhllTracker(n_users, s, memory_bits // w, m, w, track)
    users = max(n_users, 1)
    if method == "LPC":
        return LpcTracker(n_users, s, per_user_size or memory_bits // users)
    if method == "HLL":
        return HllTracker(n_users, s, per_user_size or hll_size_for(memory_bits // (w * users)), w)
    raise InvalidArgument(f"unknown method {method!r}; expected one of {ALL_METHODS}")
