"""Assemble the "full" and "alternate" constraint models for one target route."""

from __future__ import annotations

import logging
from typing import Optional, Sequence

from ..constraints import CLUSTER_RHO, ConstraintSet
from ..instance import RoutingInstance, TravelTimeTransform
from ..zones import SUPER, SUPERSUPER, ZoneHierarchy
from .hierarchy import (
    driver_order_constraints,
    select_hierarchy_symbols,
    sorted_cluster_constraints,
    super_cluster_path_constraints,
)
from .paths import NoReferenceRoute, precedence_constraints, select_reference_route
from .routes import TrainingRoute, fill_instance_zones

log = logging.getLogger(__name__)

VARIANTS = ("full", "alternate")


def prepare_training(training: Sequence[TrainingRoute]) -> list[TrainingRoute]:
    """Training routes with missing zone ids filled; routes that cannot be filled are dropped."""
    out = []
    for r in training:
        try:
            out.append(r.filled())
        except ValueError as exc:
            log.warning("skipping training route %s: %s", r.name, exc)
    return out


def build_model(
    instance: RoutingInstance,
    training: Sequence[TrainingRoute],
    variant: str = "full",
    transitive: Optional[bool] = None,
    hierarchy: Optional[ZoneHierarchy] = None,
    prepared: bool = False,
) -> tuple[RoutingInstance, ConstraintSet]:
    """Zone-filled instance plus its learned constraints.

    full: cluster transform, sorted multi-level clusters, super-level crossing
    penalties, component-path zone precedence and super-cluster path constraints.
    alternate: the same with transitive zone precedence and super-cluster
    precedence in place of the path constraints.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    if transitive is None:
        transitive = variant == "alternate"
    instance = fill_instance_zones(instance)
    if not prepared:
        training = prepare_training(training)
    if hierarchy is None:
        hierarchy = select_hierarchy_symbols(training)
    cs = ConstraintSet(hierarchy=hierarchy, transforms=[TravelTimeTransform("cluster")])
    cs.cluster_penalties = {SUPER: CLUSTER_RHO, SUPERSUPER: CLUSTER_RHO}
    singles, groups = sorted_cluster_constraints(instance, hierarchy)
    cs.singles.extend(singles)
    cs.disjunctions.extend(groups)
    try:
        ref = select_reference_route(instance, training)
        cs.singles.extend(precedence_constraints(instance, ref, transitive))
        ref_super = select_reference_route(instance, training, SUPER, hierarchy)
        kind = "path" if variant == "full" else "precedence"
        cs.singles.extend(super_cluster_path_constraints(instance, ref_super, hierarchy, kind))
    except NoReferenceRoute as exc:
        log.warning("%s; using cluster constraints only", exc)
    return instance, cs


def build_driver_order_model(instance: RoutingInstance, zone_order: Sequence[str],
                             transformed: bool = True) -> tuple[RoutingInstance, ConstraintSet]:
    """Cluster model pinned to a known zone order (upper-bound experiments).

    ``transformed`` encodes the path/neighbor constraints in the travel matrix;
    otherwise they are penalised.
    """
    instance = fill_instance_zones(instance)
    cs = ConstraintSet(transforms=[TravelTimeTransform("cluster")])
    cons = driver_order_constraints(list(zone_order))
    if transformed:
        cs.transforms.extend(TravelTimeTransform(c.kind.value, c.a, c.b) for c in cons)
    else:
        cs.singles.extend(cons)
    return instance, cs
