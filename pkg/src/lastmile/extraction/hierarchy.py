"""Zone-ID hierarchy selection and the constraints derived from sorted cluster orders."""

from __future__ import annotations

from collections import defaultdict
from typing import Optional, Sequence

from ..constraints import (
    NEIGHBOR_WEIGHT,
    PATH_WEIGHT,
    SUPER_WEIGHT,
    Constraint,
    neighbor,
    path,
    precedence,
)
from ..zones import (
    SUPER,
    SUPERSUPER,
    TOP,
    ZONE,
    ZoneHierarchy,
    parse_zone_id,
    sort_key,
    try_parse_zone_id,
    unit_key,
    unit_name,
)
from .paths import Target, unit_sequence
from .routes import TrainingRoute


def _transitions(keys: Sequence[tuple], symbols: Sequence[str]) -> int:
    count = 0
    prev = None
    for i, k in enumerate(keys):
        u = tuple(v if s in symbols else None for s, v in zip(("gamma", "x", "y", "delta"), k))
        if i and u != prev:
            count += 1
        prev = u
    return count


def hierarchy_crossings(training: Sequence[TrainingRoute], chain: ZoneHierarchy,
                        level_weights: Sequence[float] = (1.0, 1.0, 1.0)) -> float:
    """Weighted count of unit changes along the training zone sequences, per level of ``chain``."""
    total = 0.0
    for route in training:
        keys = []
        for z in route.zone_sequence():
            zid = try_parse_zone_id(z)
            if zid is not None:
                keys.append(zid.key())
        for w, level in zip(level_weights, (SUPER, SUPERSUPER, TOP)):
            total += w * _transitions(keys, chain.symbols(level))
    return total


def select_hierarchy_symbols(training: Sequence[TrainingRoute],
                             level_weights: Sequence[float] = (1.0, 1.0, 1.0)) -> ZoneHierarchy:
    """The nested (S, T, U) chain whose clusters the training tours cross least often.

    Ties keep the first chain in canonical symbol order.
    """
    best, best_score = None, None
    for chain in ZoneHierarchy.all_chains():
        score = hierarchy_crossings(training, chain, level_weights)
        if best_score is None or score < best_score:
            best, best_score = chain, score
    return best


def sorted_cluster_constraints(
    target, hierarchy: ZoneHierarchy
) -> tuple[list[Constraint], list[list[Constraint]]]:
    """Neighbor constraints that make every cluster level follow sorted or reverse-sorted order.

    For each level L in zone / super / super-super, the L-units inside one
    (L+1)-unit are sorted by ID and consecutive ones must be neighbours.  For
    (L+1)-units adjacent in the sorted order of their (L+2)-unit, first/last
    children that agree on the symbol distinguishing L from L+1 must be
    neighbours; two such pairs form a disjunction.  Every constraint here comes
    from the cluster structure and carries the super-cluster weight.
    """
    zones = sorted({parse_zone_id(z) for z in Target.of(target).zones}, key=lambda z: sort_key(z.key()))
    keys = [[unit_key(z, hierarchy.symbols(lv)) for z in zones] for lv in (ZONE, SUPER, SUPERSUPER, TOP)]

    def children(level: int) -> dict[tuple, list[tuple]]:
        """(level + 1)-unit -> sorted distinct level-units inside it."""
        out: dict[tuple, list[tuple]] = defaultdict(list)
        for i in range(len(zones)):
            parent, child = keys[level + 1][i], keys[level][i]
            if child not in out[parent]:
                out[parent].append(child)
        for parent in out:
            out[parent].sort(key=sort_key)
        return out

    singles: list[Constraint] = []
    groups: list[list[Constraint]] = []
    for level in (ZONE, SUPER, SUPERSUPER):
        by_parent = children(level)
        for parent in sorted(by_parent, key=sort_key):
            kids = by_parent[parent]
            for a, b in zip(kids, kids[1:]):
                singles.append(neighbor(unit_name(a), unit_name(b), SUPER_WEIGHT, level))

    symbols = ("gamma", "x", "y", "delta")
    for level in (ZONE, SUPER):
        sym = symbols.index(hierarchy.distinguishing_symbol(level))
        inner = children(level)
        outer = children(level + 1)
        for grand in sorted(outer, key=sort_key):
            parents = outer[grand]
            for g, h in zip(parents, parents[1:]):
                gs, hs = inner[g], inner[h]
                pairs = []
                for a in dict.fromkeys((gs[0], gs[-1])):
                    for b in dict.fromkeys((hs[0], hs[-1])):
                        if a[sym] == b[sym]:
                            pairs.append(neighbor(unit_name(a), unit_name(b), SUPER_WEIGHT, level))
                if len(pairs) == 1:
                    singles.append(pairs[0])
                elif pairs:
                    groups.append(pairs)
    return singles, groups


def super_cluster_path_constraints(target, reference: TrainingRoute, hierarchy: ZoneHierarchy,
                                   kind: str = "path", weight: int = SUPER_WEIGHT) -> list[Constraint]:
    """path(C, D) (or precedence) for super clusters driven as single consecutive blocks in ``reference``.

    A cluster qualifies when the reference tour enters it exactly once and leaves
    it exactly once (two boundary crossings); C and D must also be present in the
    target.
    """
    make = {"path": path, "precedence": precedence}[kind]
    seq = unit_sequence(reference, SUPER, hierarchy)
    blocks: dict[str, int] = defaultdict(int)
    for u in seq:
        blocks[u] += 1
    mine = Target.of(target).units(SUPER, hierarchy)
    out = []
    for c, d in zip(seq, seq[1:]):
        if blocks[c] == 1 and blocks[d] == 1 and c in mine and d in mine:
            out.append(make(c, d, weight, SUPER))
    return out


def driver_order_constraints(zone_order: Sequence[str], weight: Optional[int] = None) -> list[Constraint]:
    """path(z1, z2) then neighbor(z_i, z_i+1): pins the tour to this zone order."""
    if len(zone_order) < 2:
        return []
    out = [path(zone_order[0], zone_order[1], weight or PATH_WEIGHT)]
    out += [neighbor(a, b, weight or NEIGHBOR_WEIGHT) for a, b in zip(zone_order[1:], zone_order[2:])]
    return out
