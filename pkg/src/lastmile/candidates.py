"""Held-Karp subgradient ascent on 1-trees and alpha-nearness candidate lists.

Works on the 2n-node split graph.  Node 0 is the special 1-tree node; every
fixed edge ``(i, i + n)`` is forced into every tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from .instance import INF, TransformedInstance

MAX_CANDIDATES = 6
ASCENT_ITERATIONS = 1000
NON_IMPROVING_PERIODS = 3

_FORCE = -INF
_NEG = -INF


@numba.njit(cache=True)
def _w(cost, pi, u, v):
    return cost[u, v] + pi[u] + pi[v]


@numba.njit(cache=True)
def min_one_tree(cost, pi, special, n):
    """Minimum 1-tree under potentials ``pi`` with all fixed edges forced.

    Returns (dad, order, second, degree, weight) where ``dad``/``order`` give the
    spanning tree on all nodes but ``special`` in Prim insertion order, ``second``
    is the special node's non-fixed edge endpoint and ``weight`` the 1-tree
    weight minus ``2 * sum(pi)``.
    """
    size = cost.shape[0]
    in_tree = np.zeros(size, dtype=np.bool_)
    key = np.full(size, INF * 2, dtype=np.int64)
    dad = np.full(size, -1, dtype=np.int64)
    order = np.empty(size - 1, dtype=np.int64)
    degree = np.zeros(size, dtype=np.int64)
    start = (special + 1) % size
    key[start] = 0
    weight = 0
    for step in range(size - 1):
        v = -1
        best = INF * 3
        for u in range(size):
            if u != special and not in_tree[u] and key[u] < best:
                best = key[u]
                v = u
        in_tree[v] = True
        order[step] = v
        if dad[v] >= 0:
            weight += _w(cost, pi, dad[v], v)
            degree[v] += 1
            degree[dad[v]] += 1
        mate = v + n if v < n else v - n
        for u in range(size):
            if u == special or in_tree[u]:
                continue
            if u == mate:
                key[u] = _FORCE
                dad[u] = v
            elif key[u] != _FORCE:
                c = _w(cost, pi, v, u)
                if c < key[u]:
                    key[u] = c
                    dad[u] = v
    mate = special + n if special < n else special - n
    second = -1
    best = INF * 3
    for u in range(size):
        if u != special and u != mate:
            c = _w(cost, pi, special, u)
            if c < best:
                best = c
                second = u
    weight += _w(cost, pi, special, mate) + best
    degree[special] = 2
    degree[mate] += 1
    degree[second] += 1
    for u in range(size):
        weight -= 2 * pi[u]
    return dad, order, second, degree, weight


@numba.njit(cache=True)
def alpha_matrix(cost, pi, dad, order, special, second, n):
    """alpha(a, b): increase of the minimum 1-tree weight when (a, b) is forced.

    Path maxima skip fixed edges, which can never leave the tree.
    """
    size = cost.shape[0]
    alpha = np.zeros((size, size), dtype=np.int64)
    beta = np.empty(size, dtype=np.int64)
    mark = np.full(size, -1, dtype=np.int64)
    m = order.shape[0]
    for ia in range(m):
        a = order[ia]
        beta[a] = _NEG
        b = a
        while dad[b] >= 0:
            d = dad[b]
            e = _NEG if (b - d == n or d - b == n) else _w(cost, pi, b, d)
            beta[d] = beta[b] if beta[b] > e else e
            mark[d] = a
            b = d
        for ib in range(m):
            b = order[ib]
            if b == a:
                continue
            if mark[b] != a:
                d = dad[b]
                e = _NEG if (b - d == n or d - b == n) else _w(cost, pi, b, d)
                beta[b] = beta[d] if beta[d] > e else e
            if beta[b] == _NEG:
                alpha[a, b] = 0
            else:
                alpha[a, b] = _w(cost, pi, a, b) - beta[b]
    mate = special + n if special < n else special - n
    ref = _w(cost, pi, special, second)
    for u in range(size):
        if u == special or u == mate:
            continue
        alpha[special, u] = _w(cost, pi, special, u) - ref
        alpha[u, special] = alpha[special, u]
    return alpha


@dataclass
class OneTree:
    """Best 1-tree of the ascent: edges, integer potentials and its lower bound."""

    edges: list[tuple[int, int]]
    pi: np.ndarray
    lower_bound: int
    cost: np.ndarray = field(repr=False)
    n: int
    special: int
    dad: np.ndarray = field(repr=False)
    order: np.ndarray = field(repr=False)
    second: int
    degree: np.ndarray = field(repr=False)
    history: list[int] = field(default_factory=list, repr=False)

    @property
    def is_tour(self) -> bool:
        return bool(np.all(self.degree == 2))


def _tree(cost: np.ndarray, pi: np.ndarray, n: int, special: int = 0, history=None) -> OneTree:
    dad, order, second, degree, weight = min_one_tree(cost, pi, special, n)
    edges = [(int(dad[v]), int(v)) for v in order if dad[v] >= 0]
    mate = special + n if special < n else special - n
    edges += [(special, mate), (special, int(second))]
    return OneTree(edges, pi.copy(), int(weight), cost, n, special, dad, order, int(second), degree,
                   list(history or []))


def nearest_neighbor_length(travel: np.ndarray, start: int = 0) -> int:
    n = travel.shape[0]
    seen = np.zeros(n, dtype=bool)
    v, total = start, 0
    seen[v] = True
    for _ in range(n - 1):
        row = np.where(seen, np.iinfo(np.int64).max, travel[v])
        u = int(np.argmin(row))
        total += int(travel[v, u])
        seen[u] = True
        v = u
    return total + int(travel[v, start])


def held_karp_ascent(
    instance: TransformedInstance,
    iterations: int = ASCENT_ITERATIONS,
    upper_bound: Optional[int] = None,
) -> OneTree:
    """Subgradient ascent on node potentials; returns the best 1-tree seen.

    Step ``t = lam * (UB - w) / sum((deg - 2)^2)`` truncated toward zero per node.
    A period starts at ``2n`` steps and doubles when its last step improved; a
    period without improvement halves ``lam``, three in a row stop the ascent.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    cost = np.ascontiguousarray(instance.cost, dtype=np.int64)
    n, size = instance.n, instance.size
    if upper_bound is None:
        upper_bound = nearest_neighbor_length(np.asarray(instance.search_travel), instance.base.depot)
    pi = np.zeros(size, dtype=np.int64)
    dad, order, second, degree, weight = min_one_tree(cost, pi, 0, n)
    best_pi, best_w = pi.copy(), int(weight)
    history = [best_w]
    it = 1
    period = size
    lam = 1.0
    quiet = 0
    done = False
    while it < iterations and not done:
        improved = last_improved = False
        for _ in range(period):
            if it >= iterations:
                break
            dev = degree - 2
            norm = int((dev * dev).sum())
            gap = upper_bound - int(weight)
            if norm == 0 or gap <= 0:
                done = True
                break
            t = lam * gap / norm
            step = np.trunc(t * dev).astype(np.int64)
            if not step.any():
                done = True
                break
            pi = pi + step
            dad, order, second, degree, weight = min_one_tree(cost, pi, 0, n)
            it += 1
            last_improved = weight > best_w
            if last_improved:
                best_w, best_pi = int(weight), pi.copy()
                history.append(best_w)
                improved = True
        if done:
            break
        if improved:
            quiet = 0
            if last_improved:
                period *= 2
        else:
            quiet += 1
            lam /= 2
            if quiet >= NON_IMPROVING_PERIODS:
                break
    return _tree(cost, best_pi, n, 0, history)


@dataclass
class CandidateGraph:
    """Per-node candidate lists (``-1`` padded) ordered by alpha, then cost, then index."""

    cand: np.ndarray
    alpha: np.ndarray = field(repr=False)
    cost: np.ndarray = field(repr=False)

    def __getitem__(self, v: int) -> list[int]:
        return [int(w) for w in self.cand[v] if w >= 0]

    @property
    def max_candidates(self) -> int:
        return self.cand.shape[1]

    def dump(self) -> str:
        lines = []
        for v in range(self.cand.shape[0]):
            items = " ".join(f"{w}({int(self.alpha[v, w])})" for w in self[v])
            lines.append(f"{v}: {items}")
        return "\n".join(lines) + "\n"


def addable(v: int, w: int, n: int) -> bool:
    """Edges a move may add: stop -> another stop's dummy or the reverse."""
    return (v < n) != (w < n) and abs(v - w) != n


def build_candidates(onetree: OneTree, max_candidates: int = MAX_CANDIDATES) -> CandidateGraph:
    cost, n = onetree.cost, onetree.n
    alpha = alpha_matrix(cost, onetree.pi, onetree.dad, onetree.order, onetree.special, onetree.second, n)
    size = 2 * n
    cand = np.full((size, max_candidates), -1, dtype=np.int64)
    for v in range(size):
        others = np.arange(n, size) if v < n else np.arange(n)
        others = others[(others != v + n) & (others != v - n) & (cost[v, others] < INF)]
        keys = np.lexsort((others, cost[v, others], alpha[v, others]))
        chosen = others[keys[:max_candidates]]
        cand[v, : len(chosen)] = chosen
    return CandidateGraph(cand, alpha, cost)


def candidate_graph(
    instance: TransformedInstance,
    max_candidates: int = MAX_CANDIDATES,
    iterations: int = ASCENT_ITERATIONS,
) -> CandidateGraph:
    return build_candidates(held_karp_ascent(instance, iterations), max_candidates)
