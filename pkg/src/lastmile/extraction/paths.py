"""Component paths of driven zone sequences and precedence constraints from a reference route."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Optional, Sequence

import networkx as nx

from ..constraints import PRECEDENCE_WEIGHT, Constraint, precedence
from ..instance import RoutingInstance
from ..zones import ZONE, ZoneHierarchy, level_unit_name
from .routes import TrainingRoute

log = logging.getLogger(__name__)


class NoReferenceRoute(LookupError):
    pass


@dataclass(frozen=True)
class Target:
    """What extraction needs to know about the route being solved."""

    name: str
    station: Optional[str]
    zones: frozenset

    @classmethod
    def of(cls, route) -> "Target":
        if isinstance(route, Target):
            return route
        if isinstance(route, TrainingRoute):
            return cls(route.name, route.station, frozenset(route.zones()))
        if isinstance(route, RoutingInstance):
            return cls(route.name, route.station, frozenset(route.zone_names()))
        raise TypeError(f"cannot use {type(route).__name__} as an extraction target")

    def units(self, level: int, hierarchy: Optional[ZoneHierarchy]) -> set[str]:
        return {level_unit_name(z, level, hierarchy) for z in self.zones}


def component_path(route: TrainingRoute) -> list[frozenset]:
    """Strongly connected components of the zone-transition digraph, in path order."""
    walk = route.zone_walk()
    if not walk:
        raise ValueError(f"route {route.name} visits no zone")
    g = nx.DiGraph()
    g.add_nodes_from(walk)
    g.add_edges_from(zip(walk, walk[1:]))
    dag = nx.condensation(g)
    order = list(nx.topological_sort(dag))
    for a, b in zip(order, order[1:]):
        if not dag.has_edge(a, b):
            raise ValueError(f"route {route.name}: contracted zone graph is not a path")
    return [frozenset(dag.nodes[c]["members"]) for c in order]


def select_reference_route(
    target,
    training: Sequence[TrainingRoute],
    level: int = ZONE,
    hierarchy: Optional[ZoneHierarchy] = None,
) -> TrainingRoute:
    """Same-station route with the largest quality-weighted overlap of units at ``level``.

    The target itself (by name) is never chosen.  Ties: larger raw overlap, then name.
    """
    tgt = Target.of(target)
    mine = tgt.units(level, hierarchy)
    best, best_key = None, None
    for q in training:
        if q.station != tgt.station or q.name == tgt.name:
            continue
        theirs = {level_unit_name(z, level, hierarchy) for z in q.zones()}
        common = len(mine & theirs)
        key = (-common * q.weight, -common, q.name)
        if best_key is None or key < best_key:
            best, best_key = q, key
    if best is None:
        raise NoReferenceRoute(f"no training route from station {tgt.station!r} for {tgt.name}")
    return best


def pruned_component_path(path: Sequence[frozenset], zones: set) -> list[frozenset]:
    return [c for c in path if c & zones]


def precedence_constraints(target, reference: TrainingRoute, transitive: bool = False,
                           weight: int = PRECEDENCE_WEIGHT) -> list[Constraint]:
    """precedence(a, b) for zones of both routes whose components are joined in the pruned path.

    With ``transitive`` every ordered component pair counts, not only consecutive ones.
    """
    tgt = Target.of(target)
    try:
        path = component_path(reference)
    except ValueError as exc:
        log.warning("%s", exc)
        return []
    pruned = pruned_component_path(path, set(tgt.zones))
    if transitive:
        pairs = combinations(range(len(pruned)), 2)
    else:
        pairs = ((i, i + 1) for i in range(len(pruned) - 1))
    out = []
    for i, j in pairs:
        for a in sorted(pruned[i] & tgt.zones):
            for b in sorted(pruned[j] & tgt.zones):
                out.append(precedence(a, b, weight))
    return out


def unit_sequence(route: TrainingRoute, level: int, hierarchy: Optional[ZoneHierarchy]) -> list[str]:
    """Units along the driven zone walk with repeats collapsed."""
    seq: list[str] = []
    for z in route.zone_walk():
        u = level_unit_name(z, level, hierarchy)
        if not seq or seq[-1] != u:
            seq.append(u)
    return seq

