"""Evaluation metrics: RSE by true cardinality and super-spreader detection."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import InvalidArgument
from .oracle import ExactOracle

RSE_COLUMNS = ("n", "count", "rse")
DETECTION_COLUMNS = ("method", "delta", "fnr", "fpr", "t")


@dataclass(frozen=True)
class DetectionResult:
    detected: frozenset
    truth: frozenset
    fnr: float
    fpr: float
    delta: float
    total_users: int


def _aligned(estimates: Mapping, oracle: ExactOracle):
    unknown = [u for u in estimates if u not in oracle]
    if unknown:
        raise InvalidArgument(f"{len(unknown)} estimated user(s) unknown to the oracle, e.g. {unknown[0]!r}")
    users = list(oracle.users)
    est = np.array([float(estimates.get(u, 0.0)) for u in users], dtype=float)
    truth = np.array([oracle.cardinality(u) for u in users], dtype=np.int64)
    return users, est, truth


def rse_arrays(estimates: np.ndarray, truth: np.ndarray):
    """``(n, count, rse)`` arrays over every realized cardinality ``n >= 1``."""
    estimates = np.asarray(estimates, dtype=float)
    truth = np.asarray(truth, dtype=np.int64)
    keep = truth > 0
    truth, estimates = truth[keep], estimates[keep]
    if truth.size == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    ns, inverse, counts = np.unique(truth, return_inverse=True, return_counts=True)
    sq = np.bincount(inverse, weights=(estimates - truth) ** 2, minlength=ns.size)
    return ns, counts, np.sqrt(sq / counts) / ns


def rse_table(estimates: Mapping, oracle: ExactOracle) -> list[tuple[int, int, float]]:
    _, est, truth = _aligned(estimates, oracle)
    ns, counts, rse = rse_arrays(est, truth)
    return [(int(n), int(c), float(r)) for n, c, r in zip(ns, counts, rse)]


def rse_by_cardinality(estimates: Mapping, oracle: ExactOracle) -> dict[int, float]:
    """Relative standard error of the estimates among users sharing each true cardinality.

    Users known to the oracle but missing from ``estimates`` count as estimated 0.
    """
    return {n: r for n, _, r in rse_table(estimates, oracle)}


def _check_delta(delta: float) -> None:
    if not 0.0 < delta < 1.0:
        raise InvalidArgument(f"delta must lie in (0, 1), got {delta}")


def detection_arrays(estimates: np.ndarray, truth: np.ndarray, total: int, delta: float):
    """Boolean masks ``(detected, actual)`` and ``(fnr, fpr)`` over aligned arrays.

    Both sides threshold against the exact total ``total``; ties count as detected.
    Negative estimates are clamped to zero.
    """
    _check_delta(delta)
    estimates = np.maximum(np.asarray(estimates, dtype=float), 0.0)
    truth = np.asarray(truth)
    threshold = delta * total
    detected = estimates >= threshold
    actual = truth >= threshold
    n_true = int(actual.sum())
    fnr = float((actual & ~detected).sum()) / n_true if n_true else 0.0
    fpr = float((detected & ~actual).sum()) / truth.size if truth.size else 0.0
    return detected, actual, fnr, fpr


def detect_super_spreaders(estimates: Mapping, oracle: ExactOracle, delta: float) -> DetectionResult:
    _check_delta(delta)
    users, est, truth = _aligned(estimates, oracle)
    detected, actual, fnr, fpr = detection_arrays(est, truth, oracle.total, delta)
    return DetectionResult(
        detected=frozenset(u for u, d in zip(users, detected) if d),
        truth=frozenset(u for u, a in zip(users, actual) if a),
        fnr=fnr,
        fpr=fpr,
        delta=delta,
        total_users=len(users),
    )


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: str | Path, header: Iterable[str], rows: Iterable[Iterable]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(x) for x in row])


def write_rse_csv(path, rows) -> None:
    write_csv(path, RSE_COLUMNS, rows)


def write_detection_csv(path, rows) -> None:
    write_csv(path, DETECTION_COLUMNS, rows)


def write_estimates_csv(path, estimates: Mapping) -> None:
    write_csv(path, ("user", "estimate"), estimates.items())
