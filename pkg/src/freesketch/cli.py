"""``freesketch`` command line: generate, run, bench, analyze."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .errors import SketchError
from .harness import (SHARED_METHODS, ExperimentConfig, bench_runtime, run_analysis, run_trials)
from .stream import ORDERS, StreamSpec, generate_stream, write_edges


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _methods(text: str) -> tuple:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _checkpoints(text: str):
    values = _ints(text)
    if "," not in text and len(values) == 1:
        return values[0]
    return tuple(values)


def _common(p: argparse.ArgumentParser, methods=SHARED_METHODS) -> None:
    p.add_argument("--memory-bits", type=int, default=1 << 22, help="total memory budget M in bits")
    p.add_argument("--m", type=int, default=1024, help="virtual sketch size for CSE/vHLL")
    p.add_argument("--register-width", type=int, default=5, help="register width w in bits")
    p.add_argument("--methods", type=_methods, default=methods,
                   help="comma-separated subset of FreeBS,FreeRS,CSE,vHLL,LPC,HLL")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=float, default=5e-5, help="super-spreader threshold fraction")
    p.add_argument("--checkpoints", type=_checkpoints, default=10,
                   help="number of evenly spaced checkpoints, or comma-separated stream positions")
    p.add_argument("--input", default=None, help="edge file (user<TAB>item, optionally .gz) or zipf:... spec")
    p.add_argument("--out-dir", default="results")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--workers", type=int, default=1, help="threads for independent trials")
    p.add_argument("--clamp", action="store_true", help="clamp negative estimates to 0 in RSE as well")
    p.add_argument("--figures", action="store_true", help="also render PNG figures (needs matplotlib)")


def _config(args) -> ExperimentConfig:
    return ExperimentConfig(
        memory_bits=args.memory_bits, m=args.m, register_width=args.register_width, methods=args.methods,
        seed=args.seed, delta=args.delta, checkpoints=args.checkpoints, input=args.input, out_dir=args.out_dir,
        trials=args.trials, clamp=args.clamp, figures=args.figures, workers=args.workers,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="freesketch", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic Zipf edge stream")
    g.add_argument("--users", type=int, default=10_000)
    g.add_argument("--exponent", type=float, default=1.5)
    g.add_argument("--max-cardinality", type=int, default=10_000)
    g.add_argument("--duplicates", type=float, default=1.0, help="mean occurrences per distinct pair")
    g.add_argument("--order", choices=ORDERS, default="shuffled")
    g.add_argument("--planted", type=_ints, default=(), help="extra users with these exact cardinalities")
    g.add_argument("--universe", type=int, default=1 << 40, help="item id range")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output path; .gz compresses")

    r = sub.add_parser("run", help="track every user under each method and report RSE/detection")
    _common(r)

    b = sub.add_parser("bench", help="per-edge update+track time against m")
    _common(b, methods=SHARED_METHODS)
    b.add_argument("--m-values", type=_ints, default=[128, 512, 1024, 4096])
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--per-m", action="store_true", help="also time FreeBS/FreeRS at every m")
    b.add_argument("--min-edges", type=int, default=10**6)

    a = sub.add_parser("analyze", help="theoretical vs. empirical variance and E(1/q)")
    _common(a, methods=SHARED_METHODS)
    a.add_argument("--targets", type=_ints, default=[10, 100, 1000], help="planted target cardinalities")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            spec = StreamSpec(args.users, args.exponent, args.max_cardinality, args.duplicates, args.order,
                              args.seed, tuple(args.planted), args.universe)
            count = write_edges(args.out, generate_stream(spec))
            print(f"wrote {count} edges to {args.out}")
        elif args.command == "run":
            results = run_trials(_config(args))
            for res in results:
                for method, events in res.saturation.items():
                    if events:
                        print(f"warning: {method} hit {events} saturation events", file=sys.stderr)
                for method, reason in res.skipped.items():
                    print(f"note: {method} skipped ({reason})", file=sys.stderr)
            print(f"results in {args.out_dir}")
        elif args.command == "bench":
            for row in bench_runtime(_config(args), args.m_values, repeats=args.repeats, per_m_free=args.per_m,
                                     min_edges=args.min_edges):
                print(f"{row[0]:>7} m={row[1]!s:>5} {row[2]:10.1f} ns/edge over {row[3]} edges")
        elif args.command == "analyze":
            rows = run_analysis(_config(args), args.targets)
            print(f"{len(rows)} rows written to {args.out_dir}/analysis.csv")
    except (SketchError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
