"""Edge streams: synthetic Zipf generation and the tab-separated file format.

Edge files are UTF-8 text, one ``user<TAB>item`` edge per line, in arrival
order. Paths ending in ``.gz`` are read and written gzip-compressed.
"""

from __future__ import annotations

import gzip
import io
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import InvalidArgument
from .hashing import digest_many

ORDERS = ("shuffled", "user-clustered")


@dataclass(frozen=True)
class StreamSpec:
    """Recipe for a synthetic graph stream.

    Per-user cardinalities follow a Zipf law truncated to
    ``[1, max_cardinality]``; ``planted`` adds users with fixed cardinalities
    (handy for tracking specific targets). Each distinct pair occurs
    ``1 + Poisson(duplicate_factor - 1)`` times.
    """

    user_count: int = 10_000
    exponent: float = 1.5
    max_cardinality: int = 10_000
    duplicate_factor: float = 1.0
    order: str = "shuffled"
    seed: int = 0
    planted: tuple = ()
    item_universe: int = 1 << 40

    def validate(self) -> None:
        if self.user_count < 0:
            raise InvalidArgument("user_count must be >= 0")
        if not self.exponent > 0:
            raise InvalidArgument("Zipf exponent must be > 0")
        if self.max_cardinality < 1:
            raise InvalidArgument("max_cardinality must be >= 1")
        if not self.duplicate_factor >= 1.0:
            raise InvalidArgument("duplicate_factor is a mean repetition count and must be >= 1")
        if self.order not in ORDERS:
            raise InvalidArgument(f"order must be one of {ORDERS}")
        if any(int(c) < 1 for c in self.planted):
            raise InvalidArgument("planted cardinalities must be >= 1")
        biggest = max([self.max_cardinality, *map(int, self.planted)])
        if self.item_universe < 2 * biggest:
            raise InvalidArgument("item_universe must be at least twice the largest cardinality")


def zipf_pmf(exponent: float, max_cardinality: int) -> np.ndarray:
    """``P(k)`` for ``k = 1..max_cardinality``."""
    k = np.arange(1, max_cardinality + 1, dtype=float)
    w = k**-exponent
    return w / w.sum()


def sample_cardinalities(rng: np.random.Generator, exponent: float, max_cardinality: int, size: int) -> np.ndarray:
    cdf = np.cumsum(zipf_pmf(exponent, max_cardinality))
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size), side="right").astype(np.int64) + 1


def zipf_mean(exponent: float, max_cardinality: int) -> float:
    pmf = zipf_pmf(exponent, max_cardinality)
    return float(np.dot(np.arange(1, max_cardinality + 1), pmf))


@dataclass
class Stream:
    """An edge sequence held as parallel arrays (``users[t]``, ``items[t]``)."""

    users: np.ndarray
    items: np.ndarray
    cardinalities: np.ndarray | None = None
    spec: StreamSpec | None = None

    def __len__(self) -> int:
        return len(self.users)

    def __iter__(self) -> Iterator[tuple]:
        return zip(self.users.tolist(), self.items.tolist())

    @property
    def distinct_pairs(self) -> int:
        if len(self) == 0:
            return 0
        return len(set(zip(self.users.tolist(), self.items.tolist())))


def _distinct_items(rng, owners: np.ndarray, universe: int) -> np.ndarray:
    items = rng.integers(0, universe, size=owners.size, dtype=np.int64)
    while True:
        order = np.lexsort((items, owners))
        dup = np.zeros(owners.size, dtype=bool)
        same = (owners[order][1:] == owners[order][:-1]) & (items[order][1:] == items[order][:-1])
        dup[order[1:][same]] = True
        if not dup.any():
            return items
        items[dup] = rng.integers(0, universe, size=int(dup.sum()), dtype=np.int64)


def generate_stream(spec: StreamSpec) -> Stream:
    """Deterministic synthetic stream for ``spec``; users are ``0..U-1``, items are integers."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    cards = sample_cardinalities(rng, spec.exponent, spec.max_cardinality, spec.user_count)
    cards = np.concatenate([cards, np.asarray(spec.planted, dtype=np.int64)])
    owners = np.repeat(np.arange(cards.size, dtype=np.int64), cards)
    items = _distinct_items(rng, owners, spec.item_universe)
    if spec.duplicate_factor > 1.0:
        reps = 1 + rng.poisson(spec.duplicate_factor - 1.0, size=owners.size)
        pick = np.repeat(np.arange(owners.size), reps)
    else:
        pick = np.arange(owners.size)
    if spec.order == "shuffled":
        pick = pick[rng.permutation(pick.size)]
    else:
        user_rank = rng.permutation(cards.size)
        jitter = rng.random(pick.size)
        pick = pick[np.lexsort((jitter, user_rank[owners[pick]]))]
    return Stream(owners[pick], items[pick], cards, spec)


def iter_edges(spec: StreamSpec) -> Iterator[tuple[int, int]]:
    return iter(generate_stream(spec))


def parse_generator_spec(text: str) -> StreamSpec:
    """Parse ``zipf:users=1000,exponent=1.5,max=10000,dup=2,order=shuffled,seed=3,planted=10;100``."""
    if not text.startswith("zipf:"):
        raise InvalidArgument("generator specs start with 'zipf:'")
    names = {"users": "user_count", "exponent": "exponent", "max": "max_cardinality",
             "dup": "duplicate_factor", "order": "order", "seed": "seed", "planted": "planted",
             "universe": "item_universe"}
    kwargs = {}
    body = text[len("zipf:"):]
    for part in filter(None, body.split(",")):
        key, sep, value = part.partition("=")
        if not sep or key not in names:
            raise InvalidArgument(f"bad generator field {part!r}")
        field_name = names[key]
        if field_name == "planted":
            kwargs[field_name] = tuple(int(v) for v in value.split(";") if v)
        elif field_name == "order":
            kwargs[field_name] = value
        elif field_name in ("exponent", "duplicate_factor"):
            kwargs[field_name] = float(value)
        else:
            kwargs[field_name] = int(value)
    spec = StreamSpec(**kwargs)
    spec.validate()
    return spec


def spec_dict(spec: StreamSpec) -> dict:
    d = asdict(spec)
    d["planted"] = list(spec.planted)
    return d


def _open_text(path: Path, mode: str):
    if path.suffix == ".gz":
        # empty name and zero mtime keep the gzip header byte-stable
        raw = gzip.GzipFile(filename="", mode=mode + "b", fileobj=open(path, mode + "b"), mtime=0)
        raw.myfileobj = raw.fileobj  # close the underlying file with the wrapper
        return io.TextIOWrapper(raw, encoding="utf-8", newline="\n")
    return open(path, mode, encoding="utf-8", newline="\n")


def write_edges(path: str | Path, edges) -> int:
    path = Path(path)
    count = 0
    with _open_text(path, "w") as fh:
        for user, item in edges:
            fh.write(f"{user}\t{item}\n")
            count += 1
    return count


def read_edges(path: str | Path) -> Stream:
    """Load an edge file; users and items stay as strings."""
    path = Path(path)
    users, items = [], []
    with _open_text(path, "r") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            user, sep, item = line.partition("\t")
            if not sep or "\t" in item:
                raise InvalidArgument(f"{path}:{lineno}: expected 'user<TAB>item'")
            users.append(user)
            items.append(item)
    return Stream(np.array(users, dtype=object), np.array(items, dtype=object))


@dataclass
class EncodedEdges:
    """Edges in kernel form: dense user index plus 64-bit user/item digests."""

    uidx: np.ndarray
    ukeys: np.ndarray
    ikeys: np.ndarray
    labels: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.uidx)

    @property
    def n_users(self) -> int:
        return len(self.labels)


def encode(stream: Stream) -> EncodedEdges:
    """Digest a stream once; dense user indices follow first appearance."""
    users, items = stream.users, stream.items
    if len(users) == 0:
        return EncodedEdges(np.zeros(0, np.int64), np.zeros(0, np.uint64), np.zeros(0, np.uint64), [])
    if users.dtype != object and items.dtype != object:
        uniq, first, inverse = np.unique(users, return_index=True, return_inverse=True)
        rank = np.empty(uniq.size, dtype=np.int64)
        rank[np.argsort(first, kind="stable")] = np.arange(uniq.size)
        labels = uniq[np.argsort(first, kind="stable")].tolist()
        return EncodedEdges(rank[inverse].astype(np.int64), users.astype(np.uint64), items.astype(np.uint64), labels)
    index: dict = {}
    uidx = np.fromiter((index.setdefault(u, len(index)) for u in users), dtype=np.int64, count=len(users))
    labels = list(index)
    ulab = digest_many(labels)
    uniq_items = list(dict.fromkeys(items.tolist()))
    idig = dict(zip(uniq_items, digest_many(uniq_items).tolist()))
    ikeys = np.fromiter((idig[d] for d in items.tolist()), dtype=np.uint64, count=len(items))
    return EncodedEdges(uidx, ulab[uidx], ikeys, labels)
