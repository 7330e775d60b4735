"""Routing instances, the node-splitting ATSP->TSP transform and big-M travel-time transforms."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np

# Cost of an edge that does not exist in the transformed graph.  Never summed
# more than twice, so it cannot overflow int64.
INF = np.iinfo(np.int64).max // 4


@dataclass
class Stop:
    id: int
    zone_id: Optional[str] = None
    lat: Optional[float] = None
    lon: Optional[float] = None
    time_window: Optional[tuple[int, int]] = None
    service_time: int = 0
    is_depot: bool = False

    def __post_init__(self):
        if self.time_window is not None:
            lo, hi = self.time_window
            if lo > hi:
                raise ValueError(f"stop {self.id}: time window {self.time_window} has earliest > latest")
        if self.service_time < 0:
            raise ValueError(f"stop {self.id}: negative service time")


@dataclass
class RoutingInstance:
    """An ATSP travel-time matrix in integer seconds plus per-stop attributes."""

    name: str
    travel: np.ndarray
    stops: list[Stop]
    station: Optional[str] = None

    def __post_init__(self):
        travel = np.asarray(self.travel)
        if travel.ndim != 2 or travel.shape[0] != travel.shape[1]:
            raise ValueError(f"travel matrix must be square, got shape {travel.shape}")
        if not np.issubdtype(travel.dtype, np.integer):
            if not np.all(np.isfinite(travel)) or np.any(travel != np.round(travel)):
                raise ValueError("travel times must be integers")
        travel = travel.astype(np.int64)
        if np.any(np.diag(travel) != 0):
            raise ValueError("travel matrix diagonal must be zero")
        if np.any(travel < 0):
            raise ValueError("travel times must be nonnegative")
        if len(self.stops) != travel.shape[0]:
            raise ValueError(f"{len(self.stops)} stops for a {travel.shape[0]}x{travel.shape[0]} matrix")
        depots = [s.id for s in self.stops if s.is_depot]
        if len(depots) != 1:
            raise ValueError(f"exactly one depot required, found {len(depots)}")
        travel.setflags(write=False)
        self.travel = travel

    @property
    def n(self) -> int:
        return self.travel.shape[0]

    @property
    def depot(self) -> int:
        return next(s.id for s in self.stops if s.is_depot)

    def zones(self) -> list[Optional[str]]:
        return [s.zone_id for s in self.stops]

    def zone_names(self) -> list[str]:
        """Distinct zone IDs in first-appearance order, depot excluded."""
        seen: dict[str, None] = {}
        for s in self.stops:
            if not s.is_depot and s.zone_id is not None:
                seen.setdefault(s.zone_id)
        return list(seen)

    def tour_length(self, order: Sequence[int]) -> int:
        order = np.asarray(order)
        return int(self.travel[order, np.roll(order, -1)].sum())

    def with_travel(self, travel: np.ndarray) -> "RoutingInstance":
        return replace(self, travel=np.array(travel, dtype=np.int64))

    def with_zones(self, zones: Sequence[Optional[str]]) -> "RoutingInstance":
        stops = [replace(s, zone_id=z) for s, z in zip(self.stops, zones)]
        return replace(self, stops=stops, travel=self.travel.copy())


def big_m(instance: RoutingInstance) -> int:
    """Per-instance big constant: larger than any tour built from original entries."""
    return int(instance.n * int(instance.travel.max(initial=0)) + 1)


@dataclass(frozen=True)
class TravelTimeTransform:
    """One big-M rewrite of the travel matrix.

    ``kind`` is ``"cluster"`` (every inter-zone edge), ``"neighbor"`` (edges
    leaving ``a ∪ b``) or ``"path"`` (neighbor plus every ``b -> a`` edge).
    ``m`` of ``None`` means "use :func:`big_m` of the instance".
    """

    kind: str
    a: Optional[str] = None
    b: Optional[str] = None
    m: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("cluster", "neighbor", "path"):
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.kind != "cluster" and (self.a is None or self.b is None or self.a == self.b):
            raise ValueError(f"{self.kind} transform needs two distinct zones")


def zone_partition(instance: RoutingInstance) -> list[str]:
    """Cluster label per stop; the depot gets its own singleton cluster."""
    labels = []
    for s in instance.stops:
        if s.is_depot:
            labels.append("__depot__")
        elif s.zone_id is None:
            raise ValueError(f"stop {s.id} has no zone id; fill missing zones first")
        else:
            labels.append(s.zone_id)
    return labels


def apply_bigm(
    instance: RoutingInstance,
    transforms: Sequence[TravelTimeTransform],
    partition: Optional[Sequence[str]] = None,
) -> RoutingInstance:
    """Return a copy of ``instance`` whose travel matrix encodes ``transforms``.

    Transforms compose additively; each adds its constant at most once per entry.
    """
    if not transforms:
        return instance
    labels = np.asarray(partition if partition is not None else zone_partition(instance), dtype=object)
    travel = instance.travel.copy()
    default_m = big_m(instance)
    present = set(labels.tolist())
    for tf in transforms:
        m = default_m if tf.m is None else tf.m
        if tf.kind == "cluster":
            travel += m * (labels[:, None] != labels[None, :])
            continue
        for z in (tf.a, tf.b):
            if z not in present:
                raise ValueError(f"zone {z!r} is not in the partition")
        in_a = labels == tf.a
        in_b = labels == tf.b
        in_ab = in_a | in_b
        travel += m * (in_ab[:, None] ^ in_ab[None, :])
        if tf.kind == "path":
            travel += m * (in_b[:, None] & in_a[None, :])
    return instance.with_travel(travel)


@dataclass
class TransformedInstance:
    """Symmetric 2n-node view of an ATSP instance.

    Node ``i < n`` is original stop ``i``; node ``i + n`` is its incoming dummy.
    The fixed edge ``(i, i + n)`` costs 0, edge ``(j, i + n)`` costs
    ``travel[j][i]`` and all other pairs are absent (:data:`INF`).
    """

    base: RoutingInstance
    search_travel: np.ndarray
    cost: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def size(self) -> int:
        return 2 * self.base.n

    def partner(self, v: int) -> int:
        n = self.n
        return v + n if v < n else v - n

    def fixed_edges(self) -> set[tuple[int, int]]:
        return {(i, i + self.n) for i in range(self.n)}

    def is_fixed(self, u: int, v: int) -> bool:
        return abs(u - v) == self.n

    def edge_cost(self, u: int, v: int) -> int:
        return int(self.cost[u, v])


def transformed_costs(travel: np.ndarray) -> np.ndarray:
    n = travel.shape[0]
    cost = np.full((2 * n, 2 * n), INF, dtype=np.int64)
    # original j -> dummy i+n carries the arc j -> i
    cost[:n, n:] = travel
    cost[n:, :n] = travel.T
    idx = np.arange(n)
    cost[idx, idx + n] = 0
    cost[idx + n, idx] = 0
    return cost


def atsp_to_tsp(instance: RoutingInstance, travel: Optional[np.ndarray] = None) -> TransformedInstance:
    """Split every stop into (original, dummy) nodes joined by a zero-cost fixed edge.

    ``travel`` overrides the matrix used for costs (e.g. a big-M transformed one)
    while keeping ``instance`` as the reporting base.
    """
    search = instance.travel if travel is None else np.asarray(travel, dtype=np.int64)
    cost = transformed_costs(search)
    cost.setflags(write=False)
    return TransformedInstance(base=instance, search_travel=search, cost=cost)
