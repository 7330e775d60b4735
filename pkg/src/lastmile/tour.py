"""Tours over the 2n-node split graph: linked list plus rank array.

Node ``i < n`` is stop ``i`` and node ``i + n`` its dummy.  In a valid tour
every dummy is immediately followed by its own stop, so walking ``nxt`` from a
stop ``v`` reaches the next stop at ``nxt[nxt[v]]``.

Moves are applied to the links only; ``rank`` is refreshed by :meth:`Tour.commit`
once the caller has decided to keep the move.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numba
import numpy as np


class TourInvariantError(RuntimeError):
    pass


@dataclass(frozen=True)
class KOptMove:
    """A special 3-opt (``k == 3``) or 4-opt (``k == 4``) move.

    ``nodes`` holds t1..t2k in the orientation the move was found in.  With
    ``reverse`` set, "successor" means ``prv`` of the stored tour.  ``gain`` is
    removed minus added cost.

    3-opt: segments [t2..t5] and [t6..t3] swap places.
    4-opt: [t2..t5] [t6..t3] [t4..t7] [t8..t1] become [t8..t1] [t4..t7] [t6..t3] [t2..t5].
    """

    k: int
    nodes: tuple
    gain: int
    reverse: bool = False

    def __post_init__(self):
        if self.k not in (3, 4) or len(self.nodes) != 2 * self.k:
            raise ValueError(f"bad move shape k={self.k} nodes={self.nodes}")

    def removed_edges(self) -> list[tuple[int, int]]:
        t = self.nodes
        return [(t[i], t[i + 1]) for i in range(0, len(t), 2)]

    def added_edges(self) -> list[tuple[int, int]]:
        t = self.nodes
        if self.k == 3:
            t1, t2, t3, t4, t5, t6 = t
            return [(t2, t3), (t4, t5), (t6, t1)]
        t1, t2, t3, t4, t5, t6, t7, t8 = t
        return [(t1, t4), (t7, t6), (t3, t2), (t5, t8)]

    def successor_pairs(self) -> list[tuple[int, int]]:
        """New (u, succ u) pairs in the move's own orientation."""
        t = self.nodes
        if self.k == 3:
            t1, t2, t3, t4, t5, t6 = t
            return [(t1, t6), (t3, t2), (t5, t4)]
        t1, t2, t3, t4, t5, t6, t7, t8 = t
        return [(t1, t4), (t7, t6), (t3, t2), (t5, t8)]


@numba.njit(cache=True)
def between_ranks(rank, size, a, b, c):
    ab = rank[b] - rank[a]
    if ab < 0:
        ab += size
    ac = rank[c] - rank[a]
    if ac < 0:
        ac += size
    return ab < ac


@numba.njit(cache=True)
def apply3(succ, pred, t1, t2, t3, t4, t5, t6):
    succ[t1] = t6
    pred[t6] = t1
    succ[t3] = t2
    pred[t2] = t3
    succ[t5] = t4
    pred[t4] = t5


@numba.njit(cache=True)
def apply4(succ, pred, t1, t2, t3, t4, t5, t6, t7, t8):
    succ[t1] = t4
    pred[t4] = t1
    succ[t7] = t6
    pred[t6] = t7
    succ[t3] = t2
    pred[t2] = t3
    succ[t5] = t8
    pred[t8] = t5


@numba.njit(cache=True)
def relink(succ, pred, a, b):
    succ[a] = b
    pred[b] = a


@numba.njit(cache=True)
def rebuild_rank(nxt, rank, start):
    """Ranks along ``nxt`` from ``start``; returns the cycle length found."""
    size = nxt.shape[0]
    for i in range(size):
        rank[i] = -1
    v = start
    for r in range(size):
        if rank[v] != -1:
            return r
        rank[v] = r
        v = nxt[v]
    if v != start:
        return -1
    return size


def _links_from_order(order: Sequence[int], n: int):
    nxt = np.empty(2 * n, dtype=np.int64)
    prv = np.empty(2 * n, dtype=np.int64)
    order = list(order)
    for k, s in enumerate(order):
        following = order[(k + 1) % n]
        nxt[s + n] = s
        prv[s] = s + n
        nxt[s] = following + n
        prv[following + n] = s
    return nxt, prv


class Tour:
    """Doubly linked tour over ``2n`` nodes with a deferred rank array."""

    def __init__(self, nxt: np.ndarray, prv: np.ndarray, depot: int = 0, cost: Optional[np.ndarray] = None):
        self.nxt = np.asarray(nxt, dtype=np.int64)
        self.prv = np.asarray(prv, dtype=np.int64)
        self.size = self.nxt.shape[0]
        self.n = self.size // 2
        self.depot = depot
        self.rank = np.empty(self.size, dtype=np.int64)
        self.rank_dirty = True
        self.cost = cost
        self.commit()

    @classmethod
    def from_order(cls, order: Sequence[int], depot: Optional[int] = None, cost=None) -> "Tour":
        order = [int(s) for s in order]
        n = len(order)
        if sorted(order) != list(range(n)):
            raise ValueError("order must be a permutation of the stops")
        nxt, prv = _links_from_order(order, n)
        return cls(nxt, prv, order[0] if depot is None else depot, cost)

    def copy(self) -> "Tour":
        t = Tour.__new__(Tour)
        t.nxt = self.nxt.copy()
        t.prv = self.prv.copy()
        t.size, t.n, t.depot, t.cost = self.size, self.n, self.depot, self.cost
        t.rank = self.rank.copy()
        t.rank_dirty = self.rank_dirty
        return t

    def order(self) -> list[int]:
        """Stops from the depot, dummies omitted.  Reads only ``nxt``."""
        out = [self.depot]
        v = self.nxt[self.nxt[self.depot]]
        while v != self.depot and len(out) <= self.n:
            out.append(int(v))
            v = self.nxt[self.nxt[v]]
        return out

    def nodes(self) -> list[int]:
        out = [self.depot + self.n]
        v = self.nxt[out[0]]
        while v != out[0] and len(out) <= self.size:
            out.append(int(v))
            v = self.nxt[v]
        return out

    @property
    def length(self) -> int:
        if self.cost is None:
            raise ValueError("tour has no cost matrix attached")
        return int(self.cost[np.arange(self.size), self.nxt].sum())

    def between(self, a: int, b: int, c: int) -> bool:
        """True iff ``b`` lies on the forward path from ``a`` to ``c``."""
        if self.rank_dirty:
            raise TourInvariantError("between() on a tour with uncommitted moves")
        return bool(between_ranks(self.rank, self.size, a, b, c))

    def apply_move(self, move: KOptMove) -> None:
        """Rewire the links for ``move``; the rank array becomes stale."""
        succ, pred = (self.prv, self.nxt) if move.reverse else (self.nxt, self.prv)
        for a, b in move.removed_edges():
            if abs(a - b) == self.n:
                raise ValueError(f"move removes fixed edge ({a}, {b})")
            if succ[a] != b:
                raise ValueError(f"({a}, {b}) is not a tour edge in the move's orientation")
        if move.k == 3:
            apply3(succ, pred, *move.nodes)
        else:
            apply4(succ, pred, *move.nodes)
        self.rank_dirty = True

    def undo_move(self, move: KOptMove) -> None:
        succ, pred = (self.prv, self.nxt) if move.reverse else (self.nxt, self.prv)
        for a, b in move.removed_edges():
            relink(succ, pred, a, b)
        self.rank_dirty = True

    def commit(self) -> None:
        """Rebuild ``rank`` from the links after checking every invariant."""
        self.validate()
        rebuild_rank(self.nxt, self.rank, self.depot + self.n)
        self.rank_dirty = False

    def validate(self) -> None:
        n = self.n
        seen = rebuild_rank(self.nxt, np.empty(self.size, dtype=np.int64), 0)
        if seen != self.size:
            raise TourInvariantError(f"links do not form one cycle over {self.size} nodes")
        if np.any(self.prv[self.nxt] != np.arange(self.size)):
            raise TourInvariantError("prv is not the inverse of nxt")
        dummies = np.arange(n) + n
        if np.any(self.nxt[dummies] != np.arange(n)):
            raise TourInvariantError("a dummy node is not followed by its stop")

    def __eq__(self, other) -> bool:
        return isinstance(other, Tour) and np.array_equal(self.nxt, other.nxt)


def random_tour(n: int, seed, depot: int = 0, cost=None) -> Tour:
    """Uniformly random stop order (depot first), each dummy before its stop."""
    if hasattr(n, "n"):
        cost = getattr(n, "cost", cost)
        depot = n.base.depot if hasattr(n, "base") else depot
        n = n.n
    rng = np.random.default_rng(seed)
    others = [s for s in range(n) if s != depot]
    order = [depot] + [others[i] for i in rng.permutation(len(others))]
    return Tour.from_order(order, depot, cost)
