"""Optional figures for ``--figures``; the CSV files remain the primary output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def render_run(out_dir: Path, result) -> list[Path]:
    """RSE against true cardinality at the final checkpoint, one line per method."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for method in result.estimates:
        ns, _, rse = result.final_rse(method)
        if ns.size:
            ax.loglog(ns, rse, ".", label=method, markersize=3)
    ax.set_xlabel("true cardinality n")
    ax.set_ylabel("RSE")
    ax.legend()
    path = Path(out_dir) / "rse.png"
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]


def render_timing(out_dir: Path, rows) -> list[Path]:
    fig, ax = plt.subplots(figsize=(6, 4))
    methods = dict.fromkeys(r[0] for r in rows)
    all_m = sorted({r[1] for r in rows if r[1] != ""})
    for method in methods:
        pts = [(r[1], r[2]) for r in rows if r[0] == method]
        if len(pts) == 1 and pts[0][0] == "":
            ax.plot(all_m, [pts[0][1]] * len(all_m), "--", label=method)
        else:
            ax.plot(*zip(*pts), "o-", label=method)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("m")
    ax.set_ylabel("ns per edge")
    ax.legend()
    path = Path(out_dir) / "timing.png"
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return [path]
