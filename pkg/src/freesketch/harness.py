"""Experiment orchestration: equal-memory runs, runtime benchmarks, theory tables.

Every method in a run consumes the same encoded edge array, segment by
segment between checkpoints, and gets its own hash seed derived from the
run seed and the method name. Enabling or disabling one method therefore
never changes another method's output.
"""

from __future__ import annotations

import json
import math
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import freebs_approx_E_inv_q, freers_approx_E_inv_q, variance_bounds
from .errors import InvalidArgument, OutOfRegime
from .metrics import detection_arrays, rse_arrays, write_csv, write_detection_csv, write_rse_csv
from .oracle import ExactOracle
from .stream import (EncodedEdges, Stream, StreamSpec, encode, generate_stream, parse_generator_spec, read_edges,
                     spec_dict, zipf_mean)
from .tracking import ALL_METHODS, build_tracker, hll_size_for, method_seed

DEFAULT_GENERATOR = "zipf:users=10000,exponent=1.5,max=10000"
ANALYSIS_COLUMNS = ("method", "M", "m", "w", "n", "n_s", "theory_var", "empirical_var", "theory_E_inv_q",
                    "empirical_E_inv_q")
TIMING_COLUMNS = ("method", "m", "ns_per_edge", "edges")
SHARED_METHODS = ("FreeBS", "FreeRS", "CSE", "vHLL")


@dataclass
class ExperimentConfig:
    memory_bits: int = 1 << 22
    m: int = 1024
    register_width: int = 5
    methods: tuple = SHARED_METHODS
    seed: int = 0
    delta: float = 5e-5
    checkpoints: int | tuple = 10
    input: str | None = None
    out_dir: str | None = "results"
    trials: int = 1
    clamp: bool = False
    figures: bool = False
    workers: int = 1

    def validate(self) -> None:
        w = self.register_width
        if self.memory_bits < 1:
            raise InvalidArgument("memory_bits must be >= 1")
        if not 1 <= w <= 8:
            raise InvalidArgument("register width must be in 1..8")
        if self.m < 1:
            raise InvalidArgument("m must be >= 1")
        if not self.methods or len(set(self.methods)) != len(self.methods):
            raise InvalidArgument("methods must be a non-empty list without repeats")
        bad = [x for x in self.methods if x not in ALL_METHODS]
        if bad:
            raise InvalidArgument(f"unknown method(s) {bad}; expected a subset of {ALL_METHODS}")
        if "CSE" in self.methods and self.m > self.memory_bits:
            raise InvalidArgument("CSE needs m <= memory_bits")
        if "vHLL" in self.methods and self.m >= self.memory_bits // w:
            raise InvalidArgument("vHLL needs m < memory_bits / w")
        if any(x in self.methods for x in ("FreeRS", "vHLL")) and self.memory_bits // w < 1:
            raise InvalidArgument("memory budget too small for one register")
        if not 0.0 < self.delta < 1.0:
            raise InvalidArgument("delta must lie in (0, 1)")
        if isinstance(self.checkpoints, int):
            if self.checkpoints < 1:
                raise InvalidArgument("need at least one checkpoint")
        elif not self.checkpoints or any(int(c) < 0 for c in self.checkpoints):
            raise InvalidArgument("checkpoint positions must be non-negative")
        if self.trials < 1 or self.workers < 1:
            raise InvalidArgument("trials and workers must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        if not isinstance(self.checkpoints, int):
            d["checkpoints"] = [int(c) for c in self.checkpoints]
        return d


def load_stream(source: str | None, seed: int = 0) -> tuple[Stream, dict]:
    """Resolve ``--input``: a ``zipf:`` generator spec or an edge file path."""
    source = source or DEFAULT_GENERATOR
    if source.startswith("zipf:"):
        spec = parse_generator_spec(source)
        if "seed=" not in source:
            spec = replace(spec, seed=seed)
        return generate_stream(spec), {"source": source, "generator": spec_dict(spec)}
    path = Path(source)
    if not path.is_file():
        raise InvalidArgument(f"input {source!r} is neither a generator spec nor a readable file")
    return read_edges(path), {"source": str(path)}


def checkpoint_positions(checkpoints, total: int) -> list[int]:
    if isinstance(checkpoints, int):
        if total == 0:
            return [0]
        return sorted({max(1, round(total * k / checkpoints)) for k in range(1, checkpoints + 1)})
    return sorted({min(int(c), total) for c in checkpoints})


def resolve_methods(config: ExperimentConfig, n_users: int) -> tuple[list[str], dict]:
    """Methods that fit the budget, plus a reason for each one left out."""
    keep, skipped = [], {}
    users = max(n_users, 1)
    for name in config.methods:
        if name == "LPC" and config.memory_bits // users < 1:
            skipped[name] = f"budget gives {config.memory_bits // users} bits per user"
        elif name == "HLL" and hll_size_for(config.memory_bits // (config.register_width * users)) == 0:
            skipped[name] = f"budget gives {config.memory_bits // (config.register_width * users)} registers per user"
        else:
            keep.append(name)
    return keep, skipped


@dataclass
class RunResult:
    checkpoints: list
    labels: list
    truth: np.ndarray
    estimates: dict
    rse: dict = field(default_factory=dict)
    detection: list = field(default_factory=list)
    saturation: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)

    def final_rse(self, method: str):
        return self.rse[(method, self.checkpoints[-1])]


def _truth_array(oracle: ExactOracle, n_users: int) -> np.ndarray:
    truth = np.zeros(n_users, dtype=np.int64)
    for u, c in oracle.cardinalities().items():
        truth[u] = c
    return truth


def run_experiment(config: ExperimentConfig, edges: EncodedEdges | None = None, source: dict | None = None,
                   out_dir: str | Path | None = None) -> RunResult:
    """One seeded run over the whole stream with metrics at every checkpoint.

    ``edges`` skips input loading (the caller vouches for ``source``);
    ``out_dir`` defaults to ``config.out_dir`` and ``None`` writes nothing.
    """
    config.validate()
    if edges is None:
        stream, source = load_stream(config.input, config.seed)
        edges = encode(stream)
    out_dir = config.out_dir if out_dir is None else out_dir
    T, n_users = len(edges), edges.n_users
    positions = checkpoint_positions(config.checkpoints, T)
    methods, skipped = resolve_methods(config, n_users)
    trackers = {name: build_tracker(name, memory_bits=config.memory_bits, m=config.m, w=config.register_width,
                                    n_users=n_users, seed=config.seed) for name in methods}
    oracle = ExactOracle()
    uidx, ikeys = edges.uidx.tolist(), edges.ikeys.tolist()
    result = RunResult(positions, list(edges.labels), np.zeros(n_users, np.int64), {}, skipped=skipped)
    prev = 0
    for t in positions:
        for k in range(prev, t):
            oracle.observe(uidx[k], ikeys[k])
        for tracker in trackers.values():
            tracker.feed(edges, prev, t)
        prev = t
        truth = _truth_array(oracle, n_users)
        seen = truth > 0
        for name, tracker in trackers.items():
            est = tracker.counters[:n_users]
            rse_est = np.maximum(est, 0.0) if config.clamp else est
            result.rse[(name, t)] = rse_arrays(rse_est[seen], truth[seen])
            _, _, fnr, fpr = detection_arrays(est[seen], truth[seen], oracle.total, config.delta)
            result.detection.append((name, config.delta, fnr, fpr, t))
            if out_dir is not None:
                ckpt = Path(out_dir) / name / f"t_{t}"
                ns, counts, rse = result.rse[(name, t)]
                write_rse_csv(ckpt / "rse.csv", zip(ns.tolist(), counts.tolist(), rse.tolist()))
                labels = [edges.labels[u] for u in np.flatnonzero(seen)]
                write_csv(ckpt / "estimates.csv", ("user", "estimate"), zip(labels, est[seen].tolist()))
    result.truth = _truth_array(oracle, n_users)
    result.estimates = {name: tr.counters[:n_users].copy() for name, tr in trackers.items()}
    result.saturation = {name: tr.saturation_events for name, tr in trackers.items()}
    result.manifest = {
        "version": __version__,
        "config": config.to_dict(),
        "input": {**(source or {}), "edges": T, "users": n_users, "distinct_pairs": oracle.total},
        "checkpoints": positions,
        "methods": {name: {"seed": method_seed(config.seed, name), "memory": tr.describe(),
                           "saturation_events": tr.saturation_events} for name, tr in trackers.items()},
        "skipped": skipped,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_detection_csv(out / "detection.csv", result.detection)
        (out / "run.json").write_text(json.dumps(result.manifest, indent=2, sort_keys=True) + "\n")
        if config.figures:
            from .plotting import render_run
            render_run(out, result)
    return result


def run_trials(config: ExperimentConfig) -> list[RunResult]:
    """``config.trials`` runs with seeds ``seed, seed+1, ...``; trial ``k`` writes to ``trial_k/`` when k > 1 trials."""
    config.validate()
    stream, source = load_stream(config.input, config.seed)
    edges = encode(stream)
    if config.trials == 1:
        return [run_experiment(config, edges, source)]

    def one(k):
        cfg = replace(config, seed=config.seed + k, trials=1)
        out = None if config.out_dir is None else Path(config.out_dir) / f"trial_{k}"
        return run_experiment(cfg, edges, source, out)

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(one, range(config.trials)))


def bench_stream(min_edges: int = 10**6, seed: int = 0) -> EncodedEdges:
    """A Zipf stream of at least ``min_edges`` distinct edges for timing."""
    exponent, max_card = 1.0, 10_000
    users = math.ceil(1.1 * min_edges / zipf_mean(exponent, max_card))
    while True:
        stream = generate_stream(StreamSpec(users, exponent, max_card, seed=seed))
        if len(stream) >= min_edges:
            return encode(stream)
        users = math.ceil(users * 1.2)


def bench_runtime(config: ExperimentConfig, m_values, edges: EncodedEdges | None = None, repeats: int = 3,
                  per_m_free: bool = False, min_edges: int = 10**6, warmup_edges: int = 20_000) -> list[tuple]:
    """Median per-edge update+track time for each method and ``m``.

    FreeBS/FreeRS ignore ``m`` and are timed once (``m`` left blank) unless
    ``per_m_free`` is set. LPC/HLL are timed with ``m``-sized per-user sketches.
    Repeats cycle through the sizes in turn, and each starts from an empty
    state. A short warm-up run on a throwaway state (which also triggers
    compilation) is not timed.
    """
    config.validate()
    if edges is None:
        if config.input:
            edges = encode(load_stream(config.input, config.seed)[0])
        else:
            edges = bench_stream(min_edges, config.seed)
    T = len(edges)
    rows = []
    for name in config.methods:
        free = name in ("FreeBS", "FreeRS")
        sizes = list(m_values) if per_m_free or not free else [None]

        def make(m):
            size = int(m or m_values[0])
            return build_tracker(name, memory_bits=config.memory_bits, m=size, w=config.register_width,
                                 n_users=edges.n_users, seed=config.seed,
                                 per_user_size=size if name in ("LPC", "HLL") else None)

        for m in sizes:
            make(m).feed(edges, 0, min(T, warmup_edges))
        # round-robin over m so machine drift hits every size alike
        times = {m: [] for m in sizes}
        for _ in range(repeats):
            for m in sizes:
                tracker = make(m)
                t0 = time.perf_counter()
                tracker.feed(edges, 0, T)
                times[m].append(time.perf_counter() - t0)
        for m in sizes:
            ns = statistics.median(times[m]) / max(T, 1) * 1e9
            rows.append((name, "" if m is None else int(m), ns, T))
    if config.out_dir is not None:
        write_csv(Path(config.out_dir) / "timing.csv", TIMING_COLUMNS, rows)
        if config.figures:
            from .plotting import render_timing
            render_timing(Path(config.out_dir), rows)
    return rows


def _targets(stream: Stream, edges: EncodedEdges, n_s_values) -> dict:
    """Dense user index of a target user for each requested cardinality."""
    spec = stream.spec
    if spec is not None and spec.planted:
        base = spec.user_count
        index = {lab: i for i, lab in enumerate(edges.labels)}
        return {int(c): index[base + k] for k, c in enumerate(spec.planted) if base + k in index}
    truth = ExactOracle()
    for u, d in zip(edges.uidx.tolist(), edges.ikeys.tolist()):
        truth.observe(u, d)
    card = _truth_array(truth, edges.n_users)
    found = {}
    for n_s in n_s_values:
        hit = np.flatnonzero(card == n_s)
        if hit.size:
            found[int(n_s)] = int(hit[0])
    return found


def trial_estimates(config: ExperimentConfig, edges: EncodedEdges, targets, trials: int, methods=None) -> dict:
    """Final estimates of ``targets`` (dense user indices) and ``1/q`` over seeded trials.

    Trial ``k`` uses hash seed ``derive(seed, k)`` on the same edge sequence.
    Returns ``{method: (estimates[trials, len(targets)], inv_q[trials])}``.
    """
    methods = [x for x in (methods or config.methods) if x in SHARED_METHODS]
    targets = np.asarray(list(targets), dtype=np.int64)

    def one(k):
        seed = method_seed(config.seed, f"trial-{k}")
        out = {}
        for name in methods:
            tr = build_tracker(name, memory_bits=config.memory_bits, m=config.m, w=config.register_width,
                               n_users=edges.n_users, seed=seed)
            tr.feed(edges, 0, len(edges))
            iq = tr.inv_q()
            out[name] = (tr.counters[targets].copy(), np.nan if iq is None else iq)
        return out

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        runs = list(pool.map(one, range(trials)))
    return {name: (np.array([r[name][0] for r in runs]), np.array([r[name][1] for r in runs])) for name in methods}


def run_analysis(config: ExperimentConfig, n_s_values=(10, 100, 1000)) -> list[tuple]:
    """Theory vs. Monte-Carlo table: variance and ``E(1/q)`` per method and target cardinality."""
    config.validate()
    source = config.input or DEFAULT_GENERATOR
    if source.startswith("zipf:"):
        spec = parse_generator_spec(source)
        spec = replace(spec, planted=tuple(n_s_values), seed=spec.seed if "seed=" in source else config.seed)
        stream = generate_stream(spec)
    else:
        stream, _ = load_stream(source, config.seed)
    edges = encode(stream)
    targets = _targets(stream, edges, n_s_values)
    n_s_list = sorted(targets)
    n = ExactOracle()
    for u, d in zip(edges.uidx.tolist(), edges.ikeys.tolist()):
        n.observe(u, d)
    n = n.total
    w = config.register_width
    res = trial_estimates(config, edges, [targets[c] for c in n_s_list], config.trials)
    rows = []
    for name, (est, inv_q) in res.items():
        size = config.memory_bits // w if name in ("FreeRS", "vHLL") else config.memory_bits
        m = config.m if name in ("CSE", "vHLL") else ""
        if name in ("FreeBS", "CSE"):
            e_theory = freebs_approx_E_inv_q(n, size)
        elif name == "FreeRS":
            try:
                e_theory = freers_approx_E_inv_q(n, size)
            except OutOfRegime:
                e_theory = ""
        else:
            e_theory = ""
        e_emp = "" if name == "vHLL" else float(np.mean(inv_q))
        for j, n_s in enumerate(n_s_list):
            try:
                theory = variance_bounds(name, n_s, n, m or None, size, w).variance
            except OutOfRegime:
                theory = ""
            emp = float(np.var(est[:, j], ddof=1)) if est.shape[0] > 1 else ""
            rows.append((name, size, m, w, n, n_s, theory, emp, e_theory, e_emp))
    if config.out_dir is not None:
        write_csv(Path(config.out_dir) / "analysis.csv", ANALYSIS_COLUMNS, rows)
    return rows
