"""Closed-form and exact evaluators for sketch moments.

These are reference values for tests and for the ``analyze`` report. They
never touch the sketch implementations, so they can serve as independent
checks on them.

Notation: ``n`` is the number of distinct (user, item) pairs already in the
shared array when a pair arrives, ``n_s`` a user's cardinality, ``M`` the
shared array size and ``m`` the virtual sketch size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np

from .errors import InvalidArgument, OutOfRegime, UnsupportedSize

ALPHA_TABLE = {16: 0.673, 32: 0.697, 64: 0.709}
BETA_TABLE = {16: 1.106, 32: 1.070, 64: 1.054, 128: 1.046}
BETA_INF = 1.039
FREERS_COEF = 1.386  # ~ 1 / alpha_inf
VHLL_COEF = 2.163  # 2 * 1.04**2
EXACT_LIMIT = 64

METHODS = ("FreeBS", "FreeRS", "CSE", "vHLL")


@dataclass(frozen=True)
class MomentReport:
    expectation: float
    variance: float
    method: str
    params: dict = field(default_factory=dict)
    approximate: bool = True


def alpha_constant(m: int) -> float:
    """HLL bias-correction constant for ``m`` registers."""
    if m in ALPHA_TABLE:
        return ALPHA_TABLE[m]
    if m >= 128:
        return 0.7213 / (1.0 + 1.079 / m)
    raise UnsupportedSize(f"alpha_m is tabulated for m in {{16, 32, 64}} or m >= 128, got {m}")


def hll_supported(m: int) -> bool:
    return m in ALPHA_TABLE or m >= 128


def beta_constant(m: int) -> float:
    """HLL relative-error constant; sizes between table points are interpolated in 1/m."""
    if m < 16:
        raise UnsupportedSize(f"beta_m needs m >= 16, got {m}")
    if m in BETA_TABLE:
        return BETA_TABLE[m]
    points = sorted(BETA_TABLE)
    xs = [1.0 / p for p in points] + [0.0]
    ys = [BETA_TABLE[p] for p in points] + [BETA_INF]
    # np.interp wants increasing x
    return float(np.interp(1.0 / m, xs[::-1], ys[::-1]))


def beta_is_tabulated(m: int) -> bool:
    return m in BETA_TABLE


def _excess(x: float) -> float:
    return math.expm1(x) - x


def lpc_moments(n: float, m: int) -> MomentReport:
    if m < 1:
        raise InvalidArgument("m must be positive")
    if n < 0 or n > m * math.log(m) + 1e-9:
        raise InvalidArgument(f"n={n} outside LPC range [0, m ln m]")
    g = _excess(n / m)
    bias = 0.5 * g
    return MomentReport(n + bias, m * g, "LPC", {"n": n, "m": m})


def lpc_bias(n: float, m: int) -> float:
    return lpc_moments(n, m).expectation - n


def hll_rse(m: int) -> float:
    return beta_constant(m) / math.sqrt(m)


def stirling2(n: int, j: int) -> int:
    """Stirling number of the second kind via the alternating sum."""
    if j < 0 or n < 0:
        return 0
    if n == 0:
        return 1 if j == 0 else 0
    surj = sum((-1) ** k * comb(j, k) * (j - k) ** n for k in range(j + 1))
    return surj // math.factorial(j)


def freebs_occupancy(n: int, M: int) -> list[Fraction]:
    """Exact law of the number of set bits after ``n`` distinct pairs.

    ``P(j bits set) = C(M, j) * j! * S(n, j) / M**n``.
    """
    total = Fraction(1, M**n)
    return [comb(M, j) * math.factorial(j) * stirling2(n, j) * total for j in range(M + 1)]


def freebs_exact_E_inv_q(n: int, M: int) -> float:
    """Exact ``E(1/q_B)`` given ``n`` pairs already placed, conditioned on a free bit.

    Sums ``P(j set) * M / (M - j)`` over ``j <= M - 1`` in rational
    arithmetic and divides by ``P(j <= M - 1)``; the ``j = M`` outcome has
    ``q = 0`` and no estimator update can happen there.
    """
    if n < 0:
        raise InvalidArgument("n must be non-negative")
    if M < 2:
        raise InvalidArgument("M must be >= 2")
    if n > EXACT_LIMIT or M > EXACT_LIMIT:
        raise UnsupportedSize(f"exact mode supports n, M <= {EXACT_LIMIT}")
    probs = freebs_occupancy(n, M)
    num = sum(p * Fraction(M, M - j) for j, p in enumerate(probs[:M]))
    den = sum(probs[:M])
    return float(num / den)


def freebs_approx_E_inv_q(n: float, M: int) -> float:
    if M < 1:
        raise InvalidArgument("M must be positive")
    x = n / M
    ex = math.exp(x)
    return ex * (1.0 + _excess(x) / M)


def freers_approx_E_inv_q(n: float, M: int, *, allow_out_of_regime: bool = False) -> float:
    """``E(1/q_R) ~ 1.386 n / M``, valid once ``n > 2.5 M``."""
    if M < 1:
        raise InvalidArgument("M must be positive")
    if n <= 2.5 * M and not allow_out_of_regime:
        raise OutOfRegime(f"n={n} <= 2.5*M={2.5 * M}; pass allow_out_of_regime=True to evaluate anyway")
    return FREERS_COEF * n / M


def freers_mc_E_inv_q(n: int, M: int, trials: int = 2000, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo ``E(1/q_R)`` for ``n`` distinct pairs in ``M`` registers.

    Returns ``(mean, standard_error)``. Ranks are drawn directly from a
    Geometric(1/2) law, independent of the hashing code.
    """
    rng = np.random.default_rng(seed)
    out = np.empty(trials)
    chunk = max(1, min(trials, 2_000_000 // max(n, 1)))
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        buckets = rng.integers(0, M, size=(k, n)) + (np.arange(k) * M)[:, None]
        ranks = rng.geometric(0.5, size=(k, n))
        regs = np.zeros(k * M, dtype=np.int64)
        np.maximum.at(regs, buckets.ravel(), ranks.ravel())
        q = np.exp2(-regs.reshape(k, M).astype(float)).mean(axis=1)
        out[done : done + k] = 1.0 / q
        done += k
    return float(out.mean()), float(out.std(ddof=1) / math.sqrt(trials))


def freebs_variance(arrival_totals, M: int) -> float:
    """Variance of a FreeBS estimate: sum of ``E(1/q)`` over the user's arrivals minus ``n_s``.

    ``arrival_totals`` lists, for each of the user's distinct pairs, how many
    distinct pairs preceded it in the stream.
    """
    totals = list(arrival_totals)
    return sum(freebs_approx_E_inv_q(k, M) for k in totals) - len(totals)


def cse_moments(n_s: float, n: float, m: int, M: int) -> MomentReport:
    e_inv_q = freebs_approx_E_inv_q(n, M)
    g = e_inv_q * math.exp(n_s / m) - n_s / m - 1.0
    return MomentReport(n_s + 0.5 * g, m * g, "CSE", {"n_s": n_s, "n": n, "m": m, "M": M})


def vhll_variance(n_s: float, n: float, m: int, M: int) -> float:
    """Approximate vHLL variance with ``M`` shared registers and ``m`` per user."""
    if not 1 <= m < M:
        raise InvalidArgument("vHLL needs 1 <= m < M")
    r = m / M
    noise = n - n_s
    inner = 1.04**2 / m * (n_s + noise * r) ** 2 + noise * r * (1 - r) + (1.04 * n * m) ** 2 / M**3
    return (M / (M - m)) ** 2 * inner


def vhll_variance_floor(n_s: float, n: float, m: int, M: int) -> float:
    return VHLL_COEF * n * n_s / (M - m)


def variance_bounds(method: str, n_s: float, n: float, m: int | None = None, M: int = 0, w: int = 5,
                    *, allow_out_of_regime: bool = False) -> MomentReport:
    """Theoretical moments of one user's estimate under ``method``.

    ``M`` counts bits for FreeBS/CSE and registers for FreeRS/vHLL. For the
    shared-sketch baselines ``variance`` is the approximate variance; for
    FreeBS/FreeRS it is the upper bound ``n_s (E(1/q at t) - 1)``. A user
    with ``n_s = 0`` has never been estimated, so its variance is 0.
    """
    if method not in METHODS:
        raise InvalidArgument(f"unknown method {method!r}; expected one of {METHODS}")
    if n_s < 0 or n < n_s or M < 1:
        raise InvalidArgument("need 0 <= n_s <= n and M >= 1")
    params = {"n_s": n_s, "n": n, "m": m, "M": M, "w": w}
    if method in ("CSE", "vHLL") and (m is None or not 1 <= m <= M):
        raise InvalidArgument(f"{method} needs 1 <= m <= M")
    if n_s == 0:
        return MomentReport(0.0, 0.0, method, params)
    if method == "FreeBS":
        return MomentReport(n_s, n_s * (freebs_approx_E_inv_q(n, M) - 1.0), method, params)
    if method == "FreeRS":
        e = freers_approx_E_inv_q(n, M, allow_out_of_regime=allow_out_of_regime)
        return MomentReport(n_s, n_s * max(e - 1.0, 0.0), method, params)
    if method == "CSE":
        r = cse_moments(n_s, n, m, M)
        return MomentReport(r.expectation, r.variance, method, params)
    return MomentReport(n_s, vhll_variance(n_s, n, m, M), method, params)


def freebs_freers_crossover(w: int, tol: float = 1e-12) -> float:
    """Load factor ``x = n/M`` beyond which FreeRS has the smaller per-arrival factor.

    Compares FreeBS with ``M`` bits (factor ``e**x``) against FreeRS with
    ``M/w`` registers (factor ``1.386 w x``) and bisects for the larger root
    of ``e**x = 1.386 w x``. Returns 0.0 when the FreeRS factor is below
    ``e**x`` everywhere.
    """
    if w < 1:
        raise InvalidArgument("register width must be >= 1")
    c = FREERS_COEF * w

    def gap(x):
        return math.exp(x) - c * x

    lo = math.log(c) if c > 1 else 0.0
    if gap(lo) >= 0:
        return 0.0
    hi = max(2 * lo, 1.0)
    while gap(hi) < 0:
        hi *= 2
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gap(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
