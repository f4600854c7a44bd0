"""Exact per-user distinct counting, used as ground truth."""

from __future__ import annotations

from typing import Hashable, Iterable

from .hashing import _u64, hash64, key_digest


class ExactOracle:
    """Per-user sets of distinct items and the running pair total ``n``.

    With ``lean=True`` only a 64-bit digest per (user, item) pair is kept;
    two pairs collide with probability about ``n**2 / 2**65``.
    """

    def __init__(self, lean: bool = False):
        self.lean = lean
        self.total = 0
        self._counts: dict = {}
        self._sets: dict = {}
        self._digests: set = set()

    def observe(self, user: Hashable, item: Hashable) -> bool:
        """Record an edge; True when the pair is new (a first occurrence)."""
        if self.lean:
            pair = int(hash64(_u64(key_digest(item)), _u64(key_digest(user))))
            if pair in self._digests:
                return False
            self._digests.add(pair)
        else:
            items = self._sets.setdefault(user, set())
            if item in items:
                return False
            items.add(item)
        self._counts[user] = self._counts.get(user, 0) + 1
        self.total += 1
        return True

    def observe_many(self, edges: Iterable[tuple]) -> list[bool]:
        return [self.observe(u, d) for u, d in edges]

    def cardinality(self, user: Hashable) -> int:
        return self._counts.get(user, 0)

    def cardinalities(self) -> dict:
        return dict(self._counts)

    def __contains__(self, user) -> bool:
        return user in self._counts

    def __len__(self) -> int:
        return len(self._counts)

    @property
    def users(self):
        return self._counts.keys()
