"""Historical (training) routes: data type, missing-zone filling and file formats.

Text format, one route per document, stop indices 0-based::

    ROUTE RouteID_0001
    STATION DLA7
    QUALITY High
    STOPS 3
    0 - 47.61 -122.33 - - 0
    1 A-2.1E 47.62 -122.34 28800 36000 45
    2 A-2.2E 47.63 -122.35 - - 30
    DEPOT 0
    SEQUENCE 0 2 1
    END

A stop record is ``index zone lat lon window_start window_end service`` where
``-`` marks a missing value.  The JSON form carries the same fields.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

from ..instance import RoutingInstance, Stop

QUALITY_WEIGHTS = {"High": 2.0, "Medium": 1.5, "Low": 1.0}


class RouteFormatError(ValueError):
    pass


@dataclass
class TrainingRoute:
    name: str
    station: Optional[str]
    quality: str
    stops: list[Stop]
    sequence: list[int]  # stops as driven, starting at the depot

    def __post_init__(self):
        if self.quality not in QUALITY_WEIGHTS:
            raise RouteFormatError(f"route {self.name}: unknown quality {self.quality!r}")
        depots = [s.id for s in self.stops if s.is_depot]
        if len(depots) != 1:
            raise RouteFormatError(f"route {self.name}: exactly one depot required")
        if self.sequence:
            if sorted(self.sequence) != list(range(len(self.stops))):
                raise RouteFormatError(f"route {self.name}: sequence is not a permutation of the stops")
            k = self.sequence.index(depots[0])
            self.sequence = self.sequence[k:] + self.sequence[:k]

    @property
    def depot(self) -> int:
        return next(s.id for s in self.stops if s.is_depot)

    @property
    def weight(self) -> float:
        return QUALITY_WEIGHTS[self.quality]

    def zones(self) -> set[str]:
        return {s.zone_id for s in self.stops if not s.is_depot and s.zone_id is not None}

    def zone_walk(self) -> list[str]:
        """Zone of every driven stop with repeats collapsed, depot excluded."""
        walk: list[str] = []
        for i in self.sequence:
            s = self.stops[i]
            if s.is_depot or s.zone_id is None:
                continue
            if not walk or walk[-1] != s.zone_id:
                walk.append(s.zone_id)
        return walk

    def zone_sequence(self) -> list[str]:
        """Zones by first occurrence along the driven sequence (depot excluded)."""
        return list(dict.fromkeys(self.zone_walk()))

    def filled(self) -> "TrainingRoute":
        zones = fill_missing_zone_ids(self.stops)
        stops = [Stop(s.id, z, s.lat, s.lon, s.time_window, s.service_time, s.is_depot)
                 for s, z in zip(self.stops, zones)]
        return TrainingRoute(self.name, self.station, self.quality, stops, list(self.sequence))


def fill_missing_zone_ids(stops: Sequence[Stop]) -> list[Optional[str]]:
    """Zone per stop; an unzoned stop takes the zone of its nearest zoned stop.

    Distance is planar on (lat, lon); ties go to the lowest stop id.  The depot
    keeps whatever it had.
    """
    zoned = [s for s in stops if not s.is_depot and s.zone_id is not None]
    out: list[Optional[str]] = []
    for s in stops:
        if s.is_depot or s.zone_id is not None:
            out.append(s.zone_id)
            continue
        if not zoned:
            raise ValueError("no zoned stop to copy a zone id from")
        if s.lat is None or s.lon is None:
            raise ValueError(f"stop {s.id} has neither a zone id nor coordinates")
        best = min(
            (z for z in zoned if z.lat is not None and z.lon is not None),
            key=lambda z: (math.hypot(z.lat - s.lat, z.lon - s.lon), z.id),
            default=None,
        )
        if best is None:
            raise ValueError("no zoned stop with coordinates")
        out.append(best.zone_id)
    return out


def fill_instance_zones(instance: RoutingInstance) -> RoutingInstance:
    if all(s.zone_id is not None for s in instance.stops if not s.is_depot):
        return instance
    return instance.with_zones(fill_missing_zone_ids(instance.stops))


# ---------------------------------------------------------------- text format


def _opt(tok: str, conv):
    return None if tok == "-" else conv(tok)


def parse_route_text(text: str) -> TrainingRoute:
    fields: dict[str, str] = {}
    stops: list[Stop] = []
    sequence: list[int] = []
    lines = [ln.strip() for ln in text.splitlines()]
    i = 0
    depot = None
    in_sequence = False
    while i < len(lines):
        line = lines[i]
        i += 1
        if not line or line.startswith("#"):
            continue
        head, _, rest = line.partition(" ")
        head = head.upper()
        try:
            if head == "END":
                break
            if in_sequence and head.lstrip("-").isdigit():
                sequence.extend(int(t) for t in line.split())
                continue
            in_sequence = False
            if head in ("ROUTE", "STATION", "QUALITY"):
                fields[head] = rest.strip()
            elif head == "STOPS":
                k = int(rest)
                for _ in range(k):
                    while i < len(lines) and not lines[i]:
                        i += 1
                    if i >= len(lines):
                        raise RouteFormatError("fewer stop records than announced")
                    parts = lines[i].split()
                    i += 1
                    if len(parts) != 7:
                        raise RouteFormatError(f"line {i}: stop records have 7 fields")
                    idx = int(parts[0])
                    if idx != len(stops):
                        raise RouteFormatError(f"line {i}: stop records must be numbered 0..k-1 in order")
                    lo, hi = _opt(parts[4], int), _opt(parts[5], int)
                    tw = None if lo is None and hi is None else (lo or 0, hi if hi is not None else 10**9)
                    stops.append(Stop(idx, _opt(parts[1], str), _opt(parts[2], float), _opt(parts[3], float),
                                      tw, int(parts[6])))
            elif head == "DEPOT":
                depot = int(rest)
            elif head == "SEQUENCE":
                sequence.extend(int(t) for t in rest.split())
                in_sequence = True
            else:
                raise RouteFormatError(f"line {i}: unknown keyword {head!r}")
        except ValueError as exc:
            if isinstance(exc, RouteFormatError):
                raise
            raise RouteFormatError(f"line {i}: {exc}") from None
    if depot is None or not 0 <= depot < len(stops):
        raise RouteFormatError("missing or invalid DEPOT")
    stops[depot].is_depot = True
    return TrainingRoute(fields.get("ROUTE", "route"), fields.get("STATION"), fields.get("QUALITY", "Low"),
                         stops, sequence)


def format_route_text(route: TrainingRoute) -> str:
    def opt(v):
        return "-" if v is None else str(v)

    out = [f"ROUTE {route.name}"]
    if route.station:
        out.append(f"STATION {route.station}")
    out.append(f"QUALITY {route.quality}")
    out.append(f"STOPS {len(route.stops)}")
    for s in route.stops:
        lo, hi = s.time_window if s.time_window else (None, None)
        out.append(f"{s.id} {opt(s.zone_id)} {opt(s.lat)} {opt(s.lon)} {opt(lo)} {opt(hi)} {s.service_time}")
    out.append(f"DEPOT {route.depot}")
    out.append("SEQUENCE " + " ".join(str(v) for v in route.sequence))
    out.append("END")
    return "\n".join(out) + "\n"


def route_to_json(route: TrainingRoute) -> dict:
    return {
        "route": route.name,
        "station": route.station,
        "quality": route.quality,
        "depot": route.depot,
        "stops": [
            {"zone": s.zone_id, "lat": s.lat, "lon": s.lon,
             "time_window": list(s.time_window) if s.time_window else None, "service_time": s.service_time}
            for s in route.stops
        ],
        "sequence": list(route.sequence),
    }


def route_from_json(obj: dict) -> TrainingRoute:
    try:
        depot = int(obj["depot"])
        stops = []
        for i, rec in enumerate(obj["stops"]):
            tw = rec.get("time_window")
            stops.append(Stop(i, rec.get("zone"), rec.get("lat"), rec.get("lon"),
                              tuple(tw) if tw else None, int(rec.get("service_time", 0)), i == depot))
        return TrainingRoute(obj.get("route", "route"), obj.get("station"), obj.get("quality", "Low"),
                             stops, [int(v) for v in obj.get("sequence", [])])
    except (KeyError, TypeError) as exc:
        raise RouteFormatError(f"bad route object: {exc}") from None


def read_route(path: Union[str, Path]) -> TrainingRoute:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        return route_from_json(json.loads(text))
    return parse_route_text(text)


def write_route(path: Union[str, Path], route: TrainingRoute) -> None:
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps(route_to_json(route)), encoding="utf-8")
    else:
        path.write_text(format_route_text(route), encoding="utf-8")


def load_training(directory: Union[str, Path]) -> list[TrainingRoute]:
    """Every ``*.route`` / ``*.json`` document in ``directory``, sorted by file name."""
    directory = Path(directory)
    paths = sorted(p for p in directory.iterdir() if p.suffix in (".route", ".json"))
    return [read_route(p) for p in paths]


def route_instance(route: TrainingRoute, travel) -> RoutingInstance:
    return RoutingInstance(route.name, travel, [Stop(s.id, s.zone_id, s.lat, s.lon, s.time_window,
                                                     s.service_time, s.is_depot) for s in route.stops],
                           route.station)


def same_station(routes: Iterable[TrainingRoute], station: Optional[str]) -> list[TrainingRoute]:
    return [r for r in routes if r.station == station]
