"""Zone-order constraints and the constraint set attached to an instance."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .instance import TravelTimeTransform
from .zones import LEVEL_NAMES, ZoneHierarchy

NEIGHBOR_WEIGHT = 1
PRECEDENCE_WEIGHT = 1
PATH_WEIGHT = 1000
SUPER_WEIGHT = 1000
CLUSTER_RHO = 1000


class Kind(enum.Enum):
    NEIGHBOR = "neighbor"
    PATH = "path"
    PRECEDENCE = "precedence"

    @property
    def code(self) -> int:
        return _KIND_CODES[self]


_KIND_CODES = {Kind.NEIGHBOR: 0, Kind.PATH: 1, Kind.PRECEDENCE: 2}


@dataclass(frozen=True)
class Constraint:
    """``kind`` relation between units ``a`` and ``b`` at cluster ``level``.

    neighbor: ``|visit(a) - visit(b)| == 1``; path: ``visit(a) == visit(b) - 1``;
    precedence: ``visit(a) < visit(b)``.
    """

    kind: Kind
    a: str
    b: str
    weight: int = 1
    level: int = 0

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError(f"constraint on a single unit {self.a!r}")
        if self.weight < 0:
            raise ValueError("constraint weight must be nonnegative")
        if not 0 <= self.level < len(LEVEL_NAMES):
            raise ValueError(f"bad cluster level {self.level}")

    def holds(self, visit_a: int, visit_b: int) -> bool:
        if self.kind is Kind.NEIGHBOR:
            return abs(visit_a - visit_b) == 1
        if self.kind is Kind.PATH:
            return visit_a == visit_b - 1
        return visit_a < visit_b


def neighbor(a: str, b: str, weight: int = NEIGHBOR_WEIGHT, level: int = 0) -> Constraint:
    return Constraint(Kind.NEIGHBOR, a, b, weight, level)


def path(a: str, b: str, weight: int = PATH_WEIGHT, level: int = 0) -> Constraint:
    return Constraint(Kind.PATH, a, b, weight, level)


def precedence(a: str, b: str, weight: int = PRECEDENCE_WEIGHT, level: int = 0) -> Constraint:
    return Constraint(Kind.PRECEDENCE, a, b, weight, level)


@dataclass
class ConstraintSet:
    singles: list[Constraint] = field(default_factory=list)
    disjunctions: list[list[Constraint]] = field(default_factory=list)
    # cluster level -> rho for the crossing penalty rho * (crossing(T) - z)
    cluster_penalties: dict[int, int] = field(default_factory=dict)
    transforms: list[TravelTimeTransform] = field(default_factory=list)
    time_windows: bool = False
    hierarchy: Optional[ZoneHierarchy] = None

    def __iter__(self) -> Iterator[Constraint]:
        yield from self.singles
        for group in self.disjunctions:
            yield from group

    def __len__(self) -> int:
        return len(self.singles) + sum(len(g) for g in self.disjunctions)

    @property
    def has_penalty(self) -> bool:
        return bool(len(self) or self.cluster_penalties or self.time_windows)

    def levels_used(self) -> set[int]:
        return {c.level for c in self} | set(self.cluster_penalties)

    def extend(self, other: "ConstraintSet") -> None:
        self.singles.extend(other.singles)
        self.disjunctions.extend(other.disjunctions)
        self.cluster_penalties.update(other.cluster_penalties)
        self.transforms.extend(other.transforms)
        self.time_windows = self.time_windows or other.time_windows
        if other.hierarchy is not None:
            self.hierarchy = other.hierarchy

    def copy(self) -> "ConstraintSet":
        return ConstraintSet(
            list(self.singles),
            [list(g) for g in self.disjunctions],
            dict(self.cluster_penalties),
            list(self.transforms),
            self.time_windows,
            self.hierarchy,
        )
