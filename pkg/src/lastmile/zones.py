"""Zone identifiers of the form ``G-x.yD`` and the nested clusterings they induce.

A zone ID carries four symbols: a capital letter ``gamma``, two integers ``x``
and ``y`` and a trailing capital letter ``delta``.  Grouping zones that agree
on a subset of the symbols gives a coarser clustering; three nested subsets
give the super / super-super / top-level hierarchy.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional, Sequence

SYMBOLS = ("gamma", "x", "y", "delta")

LEVEL_NAMES = ("zone", "super", "supersuper", "top")
ZONE, SUPER, SUPERSUPER, TOP = range(4)

_ZONE_RE = re.compile(r"^([A-Z])-(\d+)\.(\d+)([A-Z])$")
_UNIT_RE = re.compile(r"^([A-Z*])-(\d+|\*)\.(\d+|\*)([A-Z*])$")


@dataclass(frozen=True)
class ZoneId:
    gamma: str
    x: int
    y: int
    delta: str
    raw: str = field(default="", compare=False)

    def value(self, symbol: str):
        return getattr(self, symbol)

    def key(self) -> tuple:
        return (self.gamma, self.x, self.y, self.delta)

    def __str__(self) -> str:
        return self.raw or f"{self.gamma}-{self.x}.{self.y}{self.delta}"


def parse_zone_id(raw: str) -> ZoneId:
    """Parse ``"A-2.1E"`` into its four symbols; raise ``ValueError`` otherwise."""
    m = _ZONE_RE.match(raw.strip())
    if not m:
        raise ValueError(f"malformed zone id {raw!r} (expected form 'A-2.1E')")
    g, x, y, d = m.groups()
    return ZoneId(g, int(x), int(y), d, raw.strip())


def try_parse_zone_id(raw: Optional[str]) -> Optional[ZoneId]:
    if raw is None:
        return None
    try:
        return parse_zone_id(raw)
    except ValueError:
        return None


def symbol_set(names: Iterable[str]) -> tuple[str, ...]:
    """Normalise a collection of symbol names to canonical order."""
    chosen = set(names)
    unknown = chosen - set(SYMBOLS)
    if unknown:
        raise ValueError(f"unknown zone-id symbols: {sorted(unknown)}")
    return tuple(s for s in SYMBOLS if s in chosen)


def unit_key(zone: ZoneId, symbols: Sequence[str]) -> tuple:
    """Key of the cluster containing ``zone`` when grouping on ``symbols``.

    Dropped positions are ``None`` so keys from different levels never collide.
    """
    return tuple(zone.value(s) if s in symbols else None for s in SYMBOLS)


def unit_name(key: tuple) -> str:
    g, x, y, d = ("*" if v is None else v for v in key)
    return f"{g}-{x}.{y}{d}"


def parse_unit_name(name: str) -> Optional[tuple]:
    m = _UNIT_RE.match(name)
    if not m:
        return None
    g, x, y, d = m.groups()
    return (
        None if g == "*" else g,
        None if x == "*" else int(x),
        None if y == "*" else int(y),
        None if d == "*" else d,
    )


def sort_key(key: tuple) -> tuple:
    # numeric on x and y: 'M-10' must sort after 'M-2'
    return tuple(v for v in key if v is not None)


@dataclass(frozen=True)
class ZoneHierarchy:
    """Nested symbol selections ``super ⊃ supersuper ⊃ top`` (3, 2 and 1 symbols)."""

    super: tuple[str, ...]
    supersuper: tuple[str, ...]
    top: tuple[str, ...]

    def __post_init__(self):
        s, t, u = (symbol_set(v) for v in (self.super, self.supersuper, self.top))
        object.__setattr__(self, "super", s)
        object.__setattr__(self, "supersuper", t)
        object.__setattr__(self, "top", u)
        if (len(s), len(t), len(u)) != (3, 2, 1):
            raise ValueError("hierarchy needs 3, 2 and 1 symbols")
        if not (set(u) < set(t) < set(s)):
            raise ValueError("hierarchy symbol sets must be nested")

    def symbols(self, level: int) -> tuple[str, ...]:
        return (SYMBOLS, self.super, self.supersuper, self.top)[level]

    def unit(self, zone: ZoneId, level: int) -> tuple:
        return unit_key(zone, self.symbols(level))

    def distinguishing_symbol(self, level: int) -> str:
        """The single symbol kept at ``level`` but dropped at ``level + 1``."""
        (sym,) = set(self.symbols(level)) - set(self.symbols(level + 1))
        return sym

    def spec(self) -> str:
        return " ".join(",".join(self.symbols(lv)) for lv in (SUPER, SUPERSUPER, TOP))

    @classmethod
    def from_spec(cls, text: str) -> "ZoneHierarchy":
        parts = text.split()
        if len(parts) != 3:
            raise ValueError(f"hierarchy string needs three groups, got {text!r}")
        return cls(*(tuple(p.split(",")) for p in parts))

    @classmethod
    def all_chains(cls) -> list["ZoneHierarchy"]:
        """Every nested chain, 4 x 3 x 2 = 24 of them, in canonical symbol order."""
        chains = []
        for s in combinations(SYMBOLS, 3):
            for t in combinations(s, 2):
                for u in combinations(t, 1):
                    chains.append(cls(s, t, u))
        return chains


def level_unit_name(zone: str, level: int, hierarchy: Optional[ZoneHierarchy]) -> str:
    """Name of the unit containing ``zone`` at ``level`` (the zone itself at level 0)."""
    if level == ZONE:
        return zone
    if hierarchy is None:
        raise ValueError("cluster levels above 'zone' need a zone hierarchy")
    return unit_name(hierarchy.unit(parse_zone_id(zone), level))
