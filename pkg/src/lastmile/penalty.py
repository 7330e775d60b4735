"""Single-pass penalty evaluation: cluster crossings, zone-order constraints, lateness."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Optional, Sequence

import numba
import numpy as np

from .constraints import ConstraintSet
from .instance import INF, RoutingInstance
from .zones import LEVEL_NAMES, ZONE, ZoneHierarchy, level_unit_name

PARTS = ("neighbor", "path", "precedence", "disjunction", "cluster", "time_window")
DEPOT_UNIT = "__depot__"


@dataclass
class VisitTable:
    visit: dict[Hashable, int]
    blocks: dict[Hashable, int]
    crossing: int

    @property
    def z(self) -> int:
        return len(self.blocks)


def visit_positions(order: Sequence[int], units: Sequence[Hashable]) -> VisitTable:
    """Block positions of every unit along ``order`` (which starts at the depot).

    A new block starts whenever the unit changes; a split unit is placed at its
    final block.  The depot sits at position 0 and is not counted.
    """
    order = list(order)
    visit: dict[Hashable, int] = {}
    blocks: dict[Hashable, int] = {}
    prev = object()
    count = 0
    for stop in order[1:]:
        u = units[stop]
        if u is None:
            raise ValueError(f"stop {stop} has no unit assignment")
        if u != prev:
            count += 1
            visit[u] = count
            blocks[u] = blocks.get(u, 0) + 1
            prev = u
    return VisitTable(visit, blocks, count)


def _order_of(tour) -> np.ndarray:
    if hasattr(tour, "order"):
        return np.asarray(tour.order(), dtype=np.int64)
    return np.asarray(tour, dtype=np.int64)


def unit_labels(instance: RoutingInstance, level: int, hierarchy: Optional[ZoneHierarchy]) -> list[Optional[str]]:
    labels: list[Optional[str]] = []
    for s in instance.stops:
        if s.is_depot:
            labels.append(DEPOT_UNIT)
        elif s.zone_id is None:
            labels.append(None)
        else:
            labels.append(level_unit_name(s.zone_id, level, hierarchy))
    return labels


class PenaltyModel:
    """Array form of a :class:`ConstraintSet` for one instance.

    Unit indices are 1-based per level; index 0 is the depot.
    """

    def __init__(self, instance: RoutingInstance, cs: ConstraintSet):
        n = instance.n
        self.instance = instance
        self.constraints = cs
        self.unit_names: list[list[str]] = [[] for _ in LEVEL_NAMES]
        unit_of = np.zeros((len(LEVEL_NAMES), n), dtype=np.int64)
        n_units = np.zeros(len(LEVEL_NAMES), dtype=np.int64)
        need = np.zeros(len(LEVEL_NAMES), dtype=np.bool_)
        index: list[dict[str, int]] = [{} for _ in LEVEL_NAMES]
        for lv in sorted(cs.levels_used()):
            need[lv] = True
            labels = unit_labels(instance, lv, cs.hierarchy)
            for stop, lab in enumerate(labels):
                if lab is None:
                    raise ValueError(f"stop {stop} has no zone id; fill missing zones first")
                if lab == DEPOT_UNIT:
                    unit_of[lv, stop] = 0
                    continue
                if lab not in index[lv]:
                    index[lv][lab] = len(index[lv]) + 1
                    self.unit_names[lv].append(lab)
                unit_of[lv, stop] = index[lv][lab]
            n_units[lv] = len(index[lv])
        self.index = index

        rho = np.zeros(len(LEVEL_NAMES), dtype=np.int64)
        for lv, r in cs.cluster_penalties.items():
            rho[lv] = r

        rows = [(c, -1) for c in cs.singles]
        for g, group in enumerate(cs.disjunctions):
            rows.extend((c, g) for c in group)
        m = len(rows)
        kind = np.zeros(m, dtype=np.int64)
        level = np.zeros(m, dtype=np.int64)
        ua = np.zeros(m, dtype=np.int64)
        ub = np.zeros(m, dtype=np.int64)
        weight = np.zeros(m, dtype=np.int64)
        group_of = np.full(m, -1, dtype=np.int64)
        for r, (c, g) in enumerate(rows):
            for name in (c.a, c.b):
                if name not in index[c.level]:
                    raise ValueError(
                        f"unknown {LEVEL_NAMES[c.level]} unit {name!r} in {c.kind.value} constraint"
                    )
            kind[r] = c.kind.code
            level[r] = c.level
            ua[r] = index[c.level][c.a]
            ub[r] = index[c.level][c.b]
            weight[r] = c.weight
            group_of[r] = g

        tw_lo = np.zeros(n, dtype=np.int64)
        tw_hi = np.full(n, INF, dtype=np.int64)
        service = np.zeros(n, dtype=np.int64)
        for s in instance.stops:
            if s.time_window is not None:
                tw_lo[s.id], tw_hi[s.id] = s.time_window
            service[s.id] = s.service_time

        self.active = bool(m or rho.any() or cs.time_windows)
        self.args = (
            unit_of,
            n_units,
            rho,
            need,
            kind,
            level,
            ua,
            ub,
            weight,
            group_of,
            len(cs.disjunctions),
            bool(cs.time_windows),
            tw_lo,
            tw_hi,
            service,
            np.ascontiguousarray(instance.travel, dtype=np.int64),
        )

    def evaluate(self, order: Sequence[int]) -> int:
        parts = np.zeros(len(PARTS), dtype=np.int64)
        return int(penalty_of_order(np.asarray(order, dtype=np.int64), self.args, parts))

    def breakdown(self, order: Sequence[int]) -> dict[str, int]:
        parts = np.zeros(len(PARTS), dtype=np.int64)
        penalty_of_order(np.asarray(order, dtype=np.int64), self.args, parts)
        return dict(zip(PARTS, (int(p) for p in parts)))


@numba.njit(cache=True)
def lateness_of_order(order, tw_lo, tw_hi, service, travel):
    n = order.shape[0]
    late = 0
    cur = order[0]
    arrival = 0
    for k in range(1, n + 1):
        nxt = order[k % n]
        start = arrival if arrival > tw_lo[cur] else tw_lo[cur]
        arrival = start + service[cur] + travel[cur, nxt]
        if arrival > tw_hi[nxt]:
            late += arrival - tw_hi[nxt]
        cur = nxt
    return late


@numba.njit(cache=True)
def penalty_of_order(order, pm, parts):
    (unit_of, n_units, rho, need, kind, level, ua, ub, weight, group_of, n_groups,
     tw_on, tw_lo, tw_hi, service, travel) = pm
    n = order.shape[0]
    maxu = 1
    for lv in range(n_units.shape[0]):
        if n_units[lv] + 1 > maxu:
            maxu = n_units[lv] + 1
    visit = np.zeros((n_units.shape[0], maxu), dtype=np.int64)
    for i in range(parts.shape[0]):
        parts[i] = 0
    for lv in range(n_units.shape[0]):
        if not need[lv]:
            continue
        prev = -1
        blocks = 0
        for k in range(1, n):
            u = unit_of[lv, order[k]]
            if u != prev:
                blocks += 1
                visit[lv, u] = blocks
                prev = u
        if rho[lv] > 0:
            parts[4] += rho[lv] * (blocks - n_units[lv])
    if kind.shape[0] > 0:
        gmin = np.full(max(n_groups, 1), -1, dtype=np.int64)
        for c in range(kind.shape[0]):
            va = visit[level[c], ua[c]]
            vb = visit[level[c], ub[c]]
            k = kind[c]
            if k == 0:
                ok = va - vb == 1 or vb - va == 1
            elif k == 1:
                ok = va == vb - 1
            else:
                ok = va < vb
            p = 0 if ok else weight[c]
            g = group_of[c]
            if g < 0:
                parts[k] += p
            elif gmin[g] < 0 or p < gmin[g]:
                gmin[g] = p
        for g in range(n_groups):
            if gmin[g] > 0:
                parts[3] += gmin[g]
    if tw_on:
        parts[5] = lateness_of_order(order, tw_lo, tw_hi, service, travel)
    total = 0
    for i in range(parts.shape[0]):
        total += parts[i]
    return total


@numba.njit(cache=True)
def order_from_links(nxt, depot, n, out):
    """Stop sequence from the depot, following only successor links."""
    v = depot
    for k in range(n):
        out[k] = v
        v = nxt[nxt[v]]
    return out


def evaluate_pen(tour, cs: ConstraintSet, instance: RoutingInstance) -> int:
    """pen(T): zero iff every constraint in ``cs`` holds for the tour."""
    return PenaltyModel(instance, cs).evaluate(_order_of(tour))


def penalty_breakdown(tour, cs: ConstraintSet, instance: RoutingInstance) -> dict[str, int]:
    return PenaltyModel(instance, cs).breakdown(_order_of(tour))


def time_window_lateness(tour, instance: RoutingInstance) -> int:
    """Total late seconds; early arrivals wait for the window to open."""
    order = _order_of(tour)
    n = instance.n
    tw_lo = np.zeros(n, dtype=np.int64)
    tw_hi = np.full(n, INF, dtype=np.int64)
    service = np.array([s.service_time for s in instance.stops], dtype=np.int64)
    for s in instance.stops:
        if s.time_window is not None:
            tw_lo[s.id], tw_hi[s.id] = s.time_window
    return int(lateness_of_order(order, tw_lo, tw_hi, service, np.asarray(instance.travel, dtype=np.int64)))


def zone_order(order: Sequence[int], instance: RoutingInstance) -> list[str]:
    """Zones by first occurrence along ``order``, depot excluded."""
    seen: dict[str, None] = {}
    for stop in order:
        z = instance.stops[stop].zone_id
        if not instance.stops[stop].is_depot and z is not None:
            seen.setdefault(z)
    return list(seen)


def crossing(order: Sequence[int], instance: RoutingInstance) -> tuple[int, int]:
    """(crossing(T), z) for the zone partition."""
    table = visit_positions(order, unit_labels(instance, ZONE, None))
    return table.crossing, table.z
