"""Penalty-gated special 3-opt / 4-opt local search inside an iterated local search.

A move is kept only when it strictly shortens the tour and does not raise the
penalty.  Each run improves a random tour, then repeats kick -> improve -> IPT
against the run's best tour.  Runs are compared by
``penalty_multiplier * pen + len``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np

from .candidates import (
    ASCENT_ITERATIONS,
    MAX_CANDIDATES,
    CandidateGraph,
    addable,
    candidate_graph,
)
from .constraints import ConstraintSet
from .instance import INF, RoutingInstance, TransformedInstance, apply_bigm, atsp_to_tsp
from .penalty import PARTS, PenaltyModel, order_from_links, penalty_of_order
from .tour import KOptMove, Tour, apply3, apply4, between_ranks, random_tour, rebuild_rank, relink

log = logging.getLogger(__name__)

PENALTY_MULTIPLIER = 1500
MAX_TRIALS_FACTOR = 8
KICK_SAMPLE = 10
WALK_LENGTH = 50
KICK_ATTEMPTS = 20


@dataclass
class SearchConfig:
    max_candidates: int = MAX_CANDIDATES
    max_trials_factor: int = MAX_TRIALS_FACTOR
    max_trials: Optional[int] = None  # overrides factor * n when set
    penalty_multiplier: int = PENALTY_MULTIPLIER
    time_limit: float = 1.0
    seed: int = 1
    move_type: str = "34"
    runs: Optional[int] = None  # None: keep starting runs until the time limit
    ascent_iterations: int = ASCENT_ITERATIONS
    ipt: bool = True

    def __post_init__(self):
        if self.move_type not in ("3", "34"):
            raise ValueError("move_type must be '3' or '34'")
        if self.max_candidates < 1 or self.max_trials_factor < 1 or self.penalty_multiplier < 0:
            raise ValueError("search parameters must be positive")
        if self.max_trials is not None and self.max_trials < 1:
            raise ValueError("max_trials must be positive")
        if self.runs is not None and self.runs < 1:
            raise ValueError("runs must be positive")
        if self.time_limit <= 0:
            raise ValueError("time_limit must be positive")

    def trials(self, n: int) -> int:
        return self.max_trials if self.max_trials is not None else self.max_trials_factor * n


@dataclass
class SolveResult:
    tour: Tour
    order: list[int]
    length: int  # original travel matrix
    search_length: int  # matrix the search optimised (big-M transformed if any)
    penalty: int
    breakdown: dict[str, int]
    value: int
    runs: int
    seconds: float
    run_values: list[int] = field(default_factory=list)


# ---------------------------------------------------------------- kernels


@numba.njit(cache=True)
def _bt(rank, size, rev, a, b, c):
    if rev:
        return between_ranks(rank, size, c, b, a)
    return between_ranks(rank, size, a, b, c)


@numba.njit(cache=True)
def _mates(u, v, n):
    return u - v == n or v - u == n


@numba.njit(cache=True)
def _pen(nxt, depot, n, pm, active, buf, parts):
    if not active:
        return 0
    order_from_links(nxt, depot, n, buf)
    return penalty_of_order(buf, pm, parts)


@numba.njit(cache=True)
def try_view(t1, rev, nxt, prv, rank, cost, cand, use4, pm, active, depot, n, pen_cur, buf, parts, touched):
    """First penalty-accepted move from ``t1``; applied in place.

    Returns (gain, new penalty); gain 0 means nothing was found and the links
    are as before.  ``touched`` receives t1..t2k (-1 padded).
    """
    size = 2 * n
    if rev:
        succ = prv
        pred = nxt
    else:
        succ = nxt
        pred = prv
    t2 = succ[t1]
    if _mates(t1, t2, n):
        return 0, pen_cur
    c12 = cost[t1, t2]
    K = cand.shape[1]
    for i3 in range(K):
        t3 = cand[t2, i3]
        if t3 < 0:
            break
        if t3 == t1:
            continue
        g1 = c12 - cost[t2, t3]
        if g1 <= 0:
            continue
        t4 = succ[t3]
        if _mates(t3, t4, n):
            continue
        g2 = g1 + cost[t3, t4]
        for i5 in range(K):
            t5 = cand[t4, i5]
            if t5 < 0:
                break
            g3 = g2 - cost[t4, t5]
            if g3 <= 0 or t5 == t3 or not _bt(rank, size, rev, t2, t5, t3):
                continue
            t6 = succ[t5]
            if _mates(t6, t1, n):
                continue
            gain = g3 + cost[t5, t6] - cost[t6, t1]
            if gain <= 0:
                continue
            apply3(succ, pred, t1, t2, t3, t4, t5, t6)
            p = _pen(nxt, depot, n, pm, active, buf, parts)
            if p <= pen_cur:
                touched[0] = t1
                touched[1] = t2
                touched[2] = t3
                touched[3] = t4
                touched[4] = t5
                touched[5] = t6
                touched[6] = -1
                touched[7] = -1
                return gain, p
            relink(succ, pred, t1, t2)
            relink(succ, pred, t3, t4)
            relink(succ, pred, t5, t6)
        if not use4:
            continue
        # (t5, t6) inside [t2 .. t3], (t7, t8) inside [t4 .. t1]; each pair taken
        # from the nearest valid candidate of one endpoint of the edge it follows
        # ``touched`` doubles as scratch until a move is accepted
        opt5 = touched[0:2]
        opt6 = touched[2:4]
        opt7 = touched[4:6]
        opt8 = touched[6:8]
        touched[:] = -1
        for i in range(K):
            c = cand[t2, i]
            if c < 0:
                break
            if c != t3 and _bt(rank, size, rev, t2, c, t3):
                opt5[0] = c
                opt6[0] = succ[c]
                break
        for i in range(K):
            d = cand[t1, i]
            if d < 0:
                break
            if d != t2 and d != t3 and _bt(rank, size, rev, t2, d, t3):
                opt5[1] = pred[d]
                opt6[1] = d
                break
        for i in range(K):
            c = cand[t4, i]
            if c < 0:
                break
            if c != t1 and _bt(rank, size, rev, t4, c, t1):
                opt7[0] = c
                opt8[0] = succ[c]
                break
        for i in range(K):
            d = cand[t3, i]
            if d < 0:
                break
            if d != t4 and d != t1 and _bt(rank, size, rev, t4, d, t1):
                opt7[1] = pred[d]
                opt8[1] = d
                break
        c34 = cost[t3, t4]
        c23 = cost[t2, t3]
        for a in range(2):
            t5 = opt5[a]
            if t5 < 0 or (a == 1 and t5 == opt5[0]):
                continue
            t6 = opt6[a]
            if _mates(t5, t6, n):
                continue
            for b in range(2):
                t7 = opt7[b]
                if t7 < 0 or (b == 1 and t7 == opt7[0]):
                    continue
                t8 = opt8[b]
                if _mates(t7, t8, n) or _mates(t1, t4, n) or _mates(t7, t6, n) or _mates(t5, t8, n):
                    continue
                gain = (c12 + c34 + cost[t5, t6] + cost[t7, t8]
                        - cost[t1, t4] - cost[t7, t6] - c23 - cost[t5, t8])
                if gain <= 0:
                    continue
                apply4(succ, pred, t1, t2, t3, t4, t5, t6, t7, t8)
                p = _pen(nxt, depot, n, pm, active, buf, parts)
                if p <= pen_cur:
                    touched[0] = t1
                    touched[1] = t2
                    touched[2] = t3
                    touched[3] = t4
                    touched[4] = t5
                    touched[5] = t6
                    touched[6] = t7
                    touched[7] = t8
                    return gain, p
                relink(succ, pred, t1, t2)
                relink(succ, pred, t3, t4)
                relink(succ, pred, t5, t6)
                relink(succ, pred, t7, t8)
    return 0, pen_cur


@numba.njit(cache=True)
def _push(q, inq, state, s, n):
    # state = [head, count]
    if inq[s]:
        return
    q[(state[0] + state[1]) % n] = s
    state[1] += 1
    inq[s] = True


@numba.njit(cache=True)
def improve_links(nxt, prv, rank, cost, cand, use4, pm, active, depot, n, pen, length, start, buf, parts):
    """Apply accepted moves until no queued stop yields one.  Returns (length, pen, moves)."""
    q = np.empty(n, dtype=np.int64)
    inq = np.zeros(n, dtype=np.bool_)
    state = np.zeros(2, dtype=np.int64)
    touched = np.full(8, -1, dtype=np.int64)
    for s in start:
        _push(q, inq, state, s, n)
    moves = 0
    while state[1] > 0:
        o = q[state[0]]
        state[0] = (state[0] + 1) % n
        state[1] -= 1
        inq[o] = False
        gain, p = try_view(o, False, nxt, prv, rank, cost, cand, use4, pm, active, depot, n, pen,
                           buf, parts, touched)
        if gain == 0:
            gain, p = try_view(nxt[o], True, nxt, prv, rank, cost, cand, use4, pm, active, depot, n,
                               pen, buf, parts, touched)
        if gain == 0:
            continue
        moves += 1
        length -= gain
        pen = p
        rebuild_rank(nxt, rank, depot + n)
        _push(q, inq, state, o, n)
        for t in touched:
            if t < 0:
                continue
            if t < n:
                _push(q, inq, state, t, n)
            else:
                _push(q, inq, state, t - n, n)
                _push(q, inq, state, prv[t], n)
    return length, pen, moves


@numba.njit(cache=True)
def kick_links(nxt, prv, rank, cost, cand, near, depot, n, sample, walk, attempts, out):
    """Rohe-style double bridge.  Fills ``out`` with the 4 cut stops; returns the length change.

    The first stop maximises ``cost(v, next v) - near(v)`` over ``sample`` random
    stops; the other three end random walks of ``walk`` steps over candidate
    edges.  After ``attempts`` failed walks the cut stops are drawn uniformly.
    """
    size = 2 * n
    v = -1
    best = -INF
    for _ in range(sample):
        u = np.random.randint(n)
        val = cost[u, nxt[u]] - near[u]
        if val > best:
            best = val
            v = u
    ok = False
    for _ in range(attempts):
        out[0] = v
        k = 1
        for _w in range(3):
            x = v
            for _s in range(walk):
                deg = 0
                for i in range(cand.shape[1]):
                    if cand[x, i] >= 0:
                        deg += 1
                if deg == 0:
                    break
                x = cand[x, np.random.randint(deg)]
            s = x if x < n else x - n
            dup = False
            for i in range(k):
                if out[i] == s:
                    dup = True
            if dup:
                break
            out[k] = s
            k += 1
        if k == 4:
            ok = True
            break
    if not ok:
        out[0] = np.random.randint(n)
        k = 1
        while k < 4:
            s = np.random.randint(n)
            dup = False
            for i in range(k):
                if out[i] == s:
                    dup = True
            if not dup:
                out[k] = s
                k += 1
        v = out[0]
    # sort the cut stops along the tour starting from v
    base = rank[v]
    for i in range(4):
        for j in range(3 - i):
            ri = (rank[out[j]] - base) % size
            rj = (rank[out[j + 1]] - base) % size
            if ri > rj:
                tmp = out[j]
                out[j] = out[j + 1]
                out[j + 1] = tmp
    t1 = out[0]
    t2 = nxt[t1]
    t5 = out[1]
    t6 = nxt[t5]
    t3 = out[2]
    t4 = nxt[t3]
    t7 = out[3]
    t8 = nxt[t7]
    delta = (cost[t1, t4] + cost[t7, t6] + cost[t3, t2] + cost[t5, t8]
             - cost[t1, t2] - cost[t3, t4] - cost[t5, t6] - cost[t7, t8])
    apply4(nxt, prv, t1, t2, t3, t4, t5, t6, t7, t8)
    rebuild_rank(nxt, rank, depot + n)
    return delta


@numba.njit(cache=True)
def ipt_orders(a, b, travel, pm, active, pen_a, parts):
    """Copy into ``a`` every cheaper segment of ``b`` with the same end stops and stop set.

    Both orders start at the depot.  Substitutions are tried by decreasing gain
    and kept only when the penalty does not rise.  Returns (order, gain, pen).
    """
    n = a.shape[0]
    a = a.copy()
    posb = np.empty(n, dtype=np.int64)
    for k in range(n):
        posb[b[k]] = k
    pb = np.zeros(n, dtype=np.int64)
    for k in range(1, n):
        pb[k] = pb[k - 1] + travel[b[k - 1], b[k]]
    pa = np.zeros(n, dtype=np.int64)
    total = 0
    pen = pen_a
    trial = np.empty(n, dtype=np.int64)
    while True:
        for k in range(1, n):
            pa[k] = pa[k - 1] + travel[a[k - 1], a[k]]
        gains = []
        starts = []
        ends = []
        for i in range(n - 3):
            k0 = posb[a[i]]
            if posb[a[i + 1]] == k0 + 1:
                continue  # shared first edge: the segment from i + 1 has the same gain
            lo = k0
            hi = k0
            for j in range(i + 1, n):
                p = posb[a[j]]
                if p < lo:
                    break
                if p > hi:
                    hi = p
                if j - i < 3 or hi - lo != j - i or hi != p:
                    continue
                g = (pa[j] - pa[i]) - (pb[hi] - pb[lo])
                if g > 0:
                    gains.append(g)
                    starts.append(i)
                    ends.append(j)
        if len(gains) == 0:
            break
        idx = np.argsort(-np.array(gains), kind="mergesort")
        applied = False
        for r in idx:
            i = starts[r]
            j = ends[r]
            trial[:] = a
            lo = posb[a[i]]
            for k in range(j - i + 1):
                trial[i + k] = b[lo + k]
            if active:
                p = penalty_of_order(trial, pm, parts)
                if p > pen:
                    continue
                pen = p
            a[:] = trial
            total += gains[r]
            applied = True
            break
        if not applied:
            break
    return a, total, pen


@numba.njit(cache=True)
def links_from_order(order, nxt, prv):
    n = order.shape[0]
    for k in range(n):
        s = order[k]
        f = order[(k + 1) % n]
        nxt[s + n] = s
        prv[s] = s + n
        nxt[s] = f + n
        prv[f + n] = s


@numba.njit(cache=True)
def _links_cost(nxt, cost):
    total = 0
    for v in range(nxt.shape[0]):
        total += cost[v, nxt[v]]
    return total


@numba.njit(cache=True)
def run_kernel(seed, nxt, prv, cost, travel, cand, near, use4, pm, active, depot, n, trials, ipt,
               sample, walk, attempts):
    """One run: improve the start tour, then ``trials - 1`` kick/improve/IPT trials.

    Returns (best nxt, best prv, best length, best penalty).
    """
    np.random.seed(seed)
    size = 2 * n
    rank = np.empty(size, dtype=np.int64)
    rebuild_rank(nxt, rank, depot + n)
    buf = np.empty(n, dtype=np.int64)
    parts = np.zeros(6, dtype=np.int64)
    length = _links_cost(nxt, cost)
    pen = _pen(nxt, depot, n, pm, active, buf, parts)
    everyone = np.arange(n)
    length, pen, _ = improve_links(nxt, prv, rank, cost, cand, use4, pm, active, depot, n, pen, length,
                                   everyone, buf, parts)
    best_nxt = nxt.copy()
    best_prv = prv.copy()
    best_len = length
    best_pen = pen
    if n < 5:
        return best_nxt, best_prv, best_len, best_pen
    cut = np.empty(4, dtype=np.int64)
    start = np.empty(8, dtype=np.int64)
    a = np.empty(n, dtype=np.int64)
    b = np.empty(n, dtype=np.int64)
    for _ in range(1, trials):
        nxt[:] = best_nxt
        prv[:] = best_prv
        rebuild_rank(nxt, rank, depot + n)
        length = best_len + kick_links(nxt, prv, rank, cost, cand, near, depot, n, sample, walk, attempts,
                                       cut)
        pen = _pen(nxt, depot, n, pm, active, buf, parts)
        for i in range(4):
            start[2 * i] = cut[i]
            start[2 * i + 1] = nxt[nxt[cut[i]]]
        length, pen, _ = improve_links(nxt, prv, rank, cost, cand, use4, pm, active, depot, n, pen,
                                       length, start, buf, parts)
        if ipt and not (length < best_len and pen <= best_pen):
            order_from_links(nxt, depot, n, a)
            order_from_links(best_nxt, depot, n, b)
            merged, gain, p = ipt_orders(a, b, travel, pm, active, pen, parts)
            if gain > 0:
                links_from_order(merged, nxt, prv)
                length -= gain
                pen = p
        if length < best_len and pen <= best_pen:
            best_nxt[:] = nxt
            best_prv[:] = prv
            best_len = length
            best_pen = pen
    return best_nxt, best_prv, best_len, best_pen


# ---------------------------------------------------------------- Python API


class SearchContext:
    """Everything a run needs that does not change between runs."""

    def __init__(self, instance: RoutingInstance, constraints: Optional[ConstraintSet] = None,
                 config: Optional[SearchConfig] = None, candidates: Optional[CandidateGraph] = None):
        self.instance = instance
        self.constraints = constraints if constraints is not None else ConstraintSet()
        self.config = config or SearchConfig()
        cs = self.constraints
        search_travel = apply_bigm(instance, cs.transforms).travel if cs.transforms else instance.travel
        self.transformed: TransformedInstance = atsp_to_tsp(instance, search_travel)
        self.travel = np.ascontiguousarray(search_travel, dtype=np.int64)
        self.cost = np.ascontiguousarray(self.transformed.cost)
        if candidates is None:
            candidates = candidate_graph(self.transformed, self.config.max_candidates,
                                         self.config.ascent_iterations)
        self.candidates = candidates
        self.model = PenaltyModel(instance, cs)
        n = instance.n
        # cheapest addable edge at every node, for the kick's long-edge score
        masked = self.cost.copy()
        idx = np.arange(n)
        masked[idx, idx + n] = INF
        masked[idx + n, idx] = INF
        self.near = masked.min(axis=1)

    @property
    def n(self) -> int:
        return self.instance.n

    def penalty(self, order) -> int:
        return self.model.evaluate(order)


def try_move(tour: Tour, t1: int, ctx: SearchContext, reverse: bool = False) -> Optional[KOptMove]:
    """First move from ``t1`` that strictly shortens the tour without raising the penalty.

    The tour is left unchanged; apply the returned move with :meth:`Tour.apply_move`.
    """
    if tour.rank_dirty:
        tour.commit()
    nxt, prv, rank = tour.nxt.copy(), tour.prv.copy(), tour.rank.copy()
    n = tour.n
    buf = np.empty(n, dtype=np.int64)
    parts = np.zeros(len(PARTS), dtype=np.int64)
    touched = np.full(8, -1, dtype=np.int64)
    pen = _pen(tour.nxt, tour.depot, n, ctx.model.args, ctx.model.active, buf, parts)
    gain, _ = try_view(t1, reverse, nxt, prv, rank, ctx.cost, ctx.candidates.cand,
                       ctx.config.move_type == "34", ctx.model.args, ctx.model.active, tour.depot, n, pen,
                       buf, parts, touched)
    if gain == 0:
        return None
    nodes = tuple(int(t) for t in touched if t >= 0)
    return KOptMove(len(nodes) // 2, nodes, int(gain), reverse)


def improve(tour: Tour, ctx: SearchContext, start=None) -> Tour:
    """Local minimum reached from ``tour`` (returned as a new tour)."""
    out = tour.copy()
    out.cost = ctx.cost
    n = tour.n
    rank = np.empty(2 * n, dtype=np.int64)
    rebuild_rank(out.nxt, rank, out.depot + n)
    buf = np.empty(n, dtype=np.int64)
    parts = np.zeros(len(PARTS), dtype=np.int64)
    pen = _pen(out.nxt, out.depot, n, ctx.model.args, ctx.model.active, buf, parts)
    queue = np.arange(n) if start is None else np.asarray(start, dtype=np.int64)
    improve_links(out.nxt, out.prv, rank, ctx.cost, ctx.candidates.cand, ctx.config.move_type == "34",
                  ctx.model.args, ctx.model.active, out.depot, n, pen, int(_links_cost(out.nxt, ctx.cost)),
                  queue, buf, parts)
    out.commit()
    return out


def rohe_start(tour: Tour, ctx: SearchContext, rng: np.random.Generator, sample: int = KICK_SAMPLE) -> int:
    """The kick's first cut stop: the sampled stop with the longest edge relative to its nearest neighbour."""
    best, v = None, -1
    for u in rng.integers(0, tour.n, size=sample):
        val = int(ctx.cost[u, tour.nxt[u]] - ctx.near[u])
        if best is None or val > best:
            best, v = val, int(u)
    return v


def kick_rohe(tour: Tour, ctx: SearchContext, seed: int) -> Tour:
    """Double-bridge perturbation of a copy of ``tour``."""
    if tour.n < 5:
        return tour.copy()
    out = tour.copy()
    out.commit()
    _seed_kernel(seed)
    kick_links(out.nxt, out.prv, out.rank, ctx.cost, ctx.candidates.cand, ctx.near, out.depot, out.n,
               KICK_SAMPLE, WALK_LENGTH, KICK_ATTEMPTS, np.empty(4, dtype=np.int64))
    out.commit()
    return out


@numba.njit(cache=True)
def _seed_kernel(seed):
    np.random.seed(seed)


def ipt(t_new: Tour, t_best: Tour, ctx: SearchContext) -> Tour:
    """Partial transcription of cheaper matching segments from ``t_best`` into ``t_new``."""
    a = np.asarray(t_new.order(), dtype=np.int64)
    b = np.asarray(t_best.order(), dtype=np.int64)
    pen = ctx.penalty(a) if ctx.model.active else 0
    parts = np.zeros(len(PARTS), dtype=np.int64)
    merged, gain, _ = ipt_orders(a, b, ctx.travel, ctx.model.args, ctx.model.active, pen, parts)
    return Tour.from_order(merged, t_new.depot, t_new.cost)


def value(pen: int, length: int, multiplier: int = PENALTY_MULTIPLIER) -> int:
    """Run-selection objective."""
    return multiplier * pen + length


def solve(instance: RoutingInstance, constraints: Optional[ConstraintSet] = None,
          config: Optional[SearchConfig] = None, candidates: Optional[CandidateGraph] = None,
          context: Optional[SearchContext] = None) -> SolveResult:
    """Best tour over repeated runs; new runs start only while time remains."""
    config = config or SearchConfig()
    t0 = time.perf_counter()
    ctx = context or SearchContext(instance, constraints, config, candidates)
    n = instance.n
    depot = instance.depot
    rng = np.random.default_rng(config.seed)
    trials = config.trials(n)
    use4 = config.move_type == "34"
    t_start = time.perf_counter()
    best = None
    values = []
    runs = 0
    while True:
        run_seed = int(rng.integers(0, 2**31 - 1))
        start = random_tour(n, run_seed, depot)
        nxt, prv, length, pen = run_kernel(
            run_seed, start.nxt, start.prv, ctx.cost, ctx.travel, ctx.candidates.cand, ctx.near, use4,
            ctx.model.args, ctx.model.active, depot, n, trials, config.ipt,
            KICK_SAMPLE, WALK_LENGTH, KICK_ATTEMPTS,
        )
        runs += 1
        v = value(int(pen), int(length), config.penalty_multiplier)
        values.append(v)
        if best is None or v < best[0]:
            best = (v, nxt.copy(), prv.copy(), int(length), int(pen))
        if config.runs is not None:
            if runs >= config.runs:
                break
        elif time.perf_counter() - t_start >= config.time_limit:
            break
    v, nxt, prv, length, pen = best
    tour = Tour(nxt, prv, depot, ctx.cost)
    order = tour.order()
    breakdown = ctx.model.breakdown(order) if ctx.model.active else dict.fromkeys(PARTS, 0)
    res = SolveResult(
        tour=tour,
        order=order,
        length=instance.tour_length(order),
        search_length=length,
        penalty=pen,
        breakdown=breakdown,
        value=v,
        runs=runs,
        seconds=time.perf_counter() - t0,
        run_values=values,
    )
    log.debug("solved %s: len=%d pen=%d runs=%d", instance.name, res.length, pen, runs)
    return res


__all__ = [
    "SearchConfig",
    "SearchContext",
    "SolveResult",
    "addable",
    "improve",
    "ipt",
    "kick_rohe",
    "rohe_start",
    "solve",
    "try_move",
    "value",
]
