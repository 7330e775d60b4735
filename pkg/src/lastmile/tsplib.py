"""Extended TSPLIB documents (ATSP, FULL_MATRIX) with zone, time-window and
zone-order constraint sections, plus plain tour files.

Stop indices in files are 1-based.  Sections end at ``-1``, at the next
keyword or at ``EOF``.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .constraints import Constraint, ConstraintSet, Kind
from .instance import RoutingInstance, Stop, TravelTimeTransform
from .zones import LEVEL_NAMES, ZoneHierarchy, level_unit_name

HEADER_KEYS = {
    "NAME", "TYPE", "COMMENT", "DIMENSION", "EDGE_WEIGHT_TYPE", "EDGE_WEIGHT_FORMAT",
    "STATION", "ZONE_HIERARCHY", "TIME_WINDOW_PENALTY",
}
SECTIONS = {
    "EDGE_WEIGHT_SECTION", "DEPOT_SECTION", "ZONE_SECTION", "TIME_WINDOW_SECTION",
    "SERVICE_TIME_SECTION", "NODE_COORD_SECTION", "NEIGHBOR_CONSTRAINTS", "PATH_CONSTRAINTS",
    "PRECEDENCE_CONSTRAINTS", "CLUSTER_PENALTY_SECTION", "TRANSFORM_SECTION",
}
_KIND_OF_SECTION = {
    "NEIGHBOR_CONSTRAINTS": Kind.NEIGHBOR,
    "PATH_CONSTRAINTS": Kind.PATH,
    "PRECEDENCE_CONSTRAINTS": Kind.PRECEDENCE,
}
_SECTION_OF_KIND = {v: k for k, v in _KIND_OF_SECTION.items()}


class InstanceFormatError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _keyword(line: str) -> str:
    head = line.split(":", 1)[0].strip()
    return head.split()[0].upper() if head else ""


def _tokens(text: str):
    """(line number, stripped line) for every non-blank line."""
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line:
            yield no, line


def _int(tok: str, no: int, what: str) -> int:
    try:
        return int(tok)
    except ValueError:
        raise InstanceFormatError(f"{what} must be an integer, got {tok!r}", no) from None


def parse_instance(text: str, name: Optional[str] = None) -> tuple[RoutingInstance, ConstraintSet]:
    """Parse an extended TSPLIB document into an instance and its constraints."""
    lines = list(_tokens(text))
    header: dict[str, str] = {}
    sections: dict[str, list[tuple[int, str]]] = {}
    section_line: dict[str, int] = {}
    current: Optional[str] = None
    saw_eof = False
    for no, line in lines:
        kw = _keyword(line)
        if kw == "EOF":
            saw_eof = True
            break
        if kw in SECTIONS:
            if kw in sections:
                raise InstanceFormatError(f"duplicate section {kw}", no)
            current = kw
            sections[kw] = []
            section_line[kw] = no
            continue
        if kw in HEADER_KEYS and ":" in line and current != "EDGE_WEIGHT_SECTION":
            header[kw] = line.split(":", 1)[1].strip()
            current = None
            continue
        if current is None:
            raise InstanceFormatError(f"unexpected line {line!r}", no)
        if line == "-1":
            current = None
            continue
        sections[current].append((no, line))
    del saw_eof  # EOF is optional in practice

    if header.get("TYPE", "ATSP").upper() not in ("ATSP", "TSP"):
        raise InstanceFormatError(f"unsupported TYPE {header['TYPE']!r}")
    fmt = header.get("EDGE_WEIGHT_FORMAT", "FULL_MATRIX").upper()
    if fmt != "FULL_MATRIX":
        raise InstanceFormatError(f"unsupported EDGE_WEIGHT_FORMAT {fmt!r}")
    if "DIMENSION" not in header:
        raise InstanceFormatError("missing DIMENSION")
    n = _int(header["DIMENSION"], None, "DIMENSION")
    if n < 2:
        raise InstanceFormatError("DIMENSION must be at least 2")
    if "EDGE_WEIGHT_SECTION" not in sections:
        raise InstanceFormatError("missing EDGE_WEIGHT_SECTION")

    values: list[int] = []
    rows = sections["EDGE_WEIGHT_SECTION"]
    for no, line in rows:
        for tok in line.split():
            values.append(_int(tok, no, "travel time"))
    if len(values) != n * n:
        last = rows[-1][0] if rows else section_line["EDGE_WEIGHT_SECTION"]
        raise InstanceFormatError(f"DIMENSION {n} needs {n * n} matrix entries, found {len(values)}", last)
    travel = np.array(values, dtype=np.int64).reshape(n, n)

    depot = 0
    if "DEPOT_SECTION" in sections:
        entries = sections["DEPOT_SECTION"]
        if len(entries) != 1:
            raise InstanceFormatError("DEPOT_SECTION must list exactly one stop", section_line["DEPOT_SECTION"])
        no, line = entries[0]
        depot = _stop_index(line.split()[0], n, no)

    stops = [Stop(i, is_depot=(i == depot)) for i in range(n)]

    def per_stop(section: str, width: int):
        for no, line in sections.get(section, []):
            parts = line.split()
            if len(parts) != width:
                raise InstanceFormatError(f"{section} lines need {width} fields", no)
            yield no, _stop_index(parts[0], n, no), parts[1:]

    for no, i, (zone,) in per_stop("ZONE_SECTION", 2):
        stops[i].zone_id = None if zone in ("-", "NONE") else zone
    for no, i, (lo, hi) in per_stop("TIME_WINDOW_SECTION", 3):
        lo, hi = _int(lo, no, "window start"), _int(hi, no, "window end")
        if lo > hi:
            raise InstanceFormatError("time window start after end", no)
        stops[i].time_window = (lo, hi)
    for no, i, (sec,) in per_stop("SERVICE_TIME_SECTION", 2):
        stops[i].service_time = _int(sec, no, "service time")
        if stops[i].service_time < 0:
            raise InstanceFormatError("negative service time", no)
    for no, i, (lat, lon) in per_stop("NODE_COORD_SECTION", 3):
        try:
            stops[i].lat, stops[i].lon = float(lat), float(lon)
        except ValueError:
            raise InstanceFormatError("coordinates must be numbers", no) from None

    try:
        instance = RoutingInstance(name or header.get("NAME", "instance"), travel, stops, header.get("STATION"))
    except ValueError as exc:
        raise InstanceFormatError(str(exc)) from None

    hierarchy = None
    if "ZONE_HIERARCHY" in header:
        try:
            hierarchy = ZoneHierarchy.from_spec(header["ZONE_HIERARCHY"])
        except ValueError as exc:
            raise InstanceFormatError(str(exc)) from None
    cs = ConstraintSet(hierarchy=hierarchy)
    known = _known_units(instance, hierarchy)

    for section, kind in _KIND_OF_SECTION.items():
        entries = sections.get(section, [])
        k = 0
        while k < len(entries):
            no, line = entries[k]
            parts = line.split()
            if parts[0].upper() == "DISJUNCTION":
                if len(parts) != 2:
                    raise InstanceFormatError("DISJUNCTION needs a member count", no)
                size = _int(parts[1], no, "DISJUNCTION size")
                if size < 1 or k + size > len(entries) - 1:
                    raise InstanceFormatError(f"DISJUNCTION {size} runs past the section", no)
                group = [_constraint(entries[k + 1 + m], kind, known) for m in range(size)]
                cs.disjunctions.append(group)
                k += size + 1
            else:
                cs.singles.append(_constraint(entries[k], kind, known))
                k += 1

    for no, line in sections.get("CLUSTER_PENALTY_SECTION", []):
        parts = line.split()
        if len(parts) != 2 or parts[0].lower() not in LEVEL_NAMES:
            raise InstanceFormatError(f"expected '<{'|'.join(LEVEL_NAMES)}> <rho>'", no)
        level = LEVEL_NAMES.index(parts[0].lower())
        if level and hierarchy is None:
            raise InstanceFormatError("cluster levels above 'zone' need ZONE_HIERARCHY", no)
        cs.cluster_penalties[level] = _int(parts[1], no, "rho")
    for no, line in sections.get("TRANSFORM_SECTION", []):
        parts = line.split()
        kind = parts[0].lower()
        if kind == "cluster" and len(parts) == 1:
            cs.transforms.append(TravelTimeTransform("cluster"))
        elif kind in ("neighbor", "path") and len(parts) == 3:
            for z in parts[1:]:
                if z not in known[0]:
                    raise InstanceFormatError(f"unknown zone {z!r}", no)
            cs.transforms.append(TravelTimeTransform(kind, parts[1], parts[2]))
        else:
            raise InstanceFormatError(f"bad transform {line!r}", no)

    tw_flag = header.get("TIME_WINDOW_PENALTY", "ON" if "TIME_WINDOW_SECTION" in sections else "OFF")
    cs.time_windows = tw_flag.upper() == "ON"
    if cs.time_windows and "TIME_WINDOW_SECTION" not in sections:
        raise InstanceFormatError("TIME_WINDOW_PENALTY ON without TIME_WINDOW_SECTION")
    return instance, cs


def _stop_index(tok: str, n: int, no: int) -> int:
    i = _int(tok, no, "stop index")
    if not 1 <= i <= n:
        raise InstanceFormatError(f"stop index {i} outside 1..{n}", no)
    return i - 1


def _known_units(instance: RoutingInstance, hierarchy: Optional[ZoneHierarchy]) -> list[set[str]]:
    zones = instance.zone_names()
    known = [set(zones)]
    for level in range(1, len(LEVEL_NAMES)):
        names = set()
        if hierarchy is not None:
            for z in zones:
                try:
                    names.add(level_unit_name(z, level, hierarchy))
                except ValueError:
                    pass
        known.append(names)
    return known


def _constraint(entry: tuple[int, str], default_kind: Kind, known: list[set[str]]) -> Constraint:
    no, line = entry
    parts = line.split()
    kind = default_kind
    if parts and parts[0].upper() in ("NEIGHBOR", "PATH", "PRECEDENCE"):
        kind = Kind[parts[0].upper()]
        parts = parts[1:]
    if len(parts) not in (2, 3, 4):
        raise InstanceFormatError("constraint lines are '<unit-a> <unit-b> <weight> [<level>]'", no)
    a, b = parts[0], parts[1]
    weight = _int(parts[2], no, "weight") if len(parts) >= 3 else 1
    level = 0
    if len(parts) == 4:
        if parts[3].lower() not in LEVEL_NAMES:
            raise InstanceFormatError(f"unknown cluster level {parts[3]!r}", no)
        level = LEVEL_NAMES.index(parts[3].lower())
    for u in (a, b):
        if u not in known[level]:
            raise InstanceFormatError(f"unknown zone {u!r}" if level == 0 else f"unknown {LEVEL_NAMES[level]} unit {u!r}", no)
    try:
        return Constraint(kind, a, b, weight, level)
    except ValueError as exc:
        raise InstanceFormatError(str(exc), no) from None


def format_instance(instance: RoutingInstance, cs: Optional[ConstraintSet] = None) -> str:
    """Serialise ``instance`` and ``cs``; :func:`parse_instance` reads it back unchanged."""
    if cs is None:
        cs = ConstraintSet()
    out = io.StringIO()
    w = out.write
    n = instance.n
    w(f"NAME : {instance.name}\nTYPE : ATSP\nDIMENSION : {n}\n")
    w("EDGE_WEIGHT_TYPE : EXPLICIT\nEDGE_WEIGHT_FORMAT : FULL_MATRIX\n")
    if instance.station:
        w(f"STATION : {instance.station}\n")
    if cs.hierarchy is not None:
        w(f"ZONE_HIERARCHY : {cs.hierarchy.spec()}\n")
    has_tw = any(s.time_window is not None for s in instance.stops)
    if has_tw:
        w(f"TIME_WINDOW_PENALTY : {'ON' if cs.time_windows else 'OFF'}\n")
    w("EDGE_WEIGHT_SECTION\n")
    for row in instance.travel:
        w(" ".join(str(int(v)) for v in row) + "\n")
    w(f"DEPOT_SECTION\n{instance.depot + 1}\n-1\n")
    if any(s.zone_id is not None for s in instance.stops):
        w("ZONE_SECTION\n")
        for s in instance.stops:
            w(f"{s.id + 1} {s.zone_id if s.zone_id is not None else '-'}\n")
        w("-1\n")
    if has_tw:
        w("TIME_WINDOW_SECTION\n")
        for s in instance.stops:
            if s.time_window is not None:
                w(f"{s.id + 1} {s.time_window[0]} {s.time_window[1]}\n")
        w("-1\n")
    if any(s.service_time for s in instance.stops):
        w("SERVICE_TIME_SECTION\n")
        for s in instance.stops:
            if s.service_time:
                w(f"{s.id + 1} {s.service_time}\n")
        w("-1\n")
    if any(s.lat is not None for s in instance.stops):
        w("NODE_COORD_SECTION\n")
        for s in instance.stops:
            if s.lat is not None:
                w(f"{s.id + 1} {s.lat!r} {s.lon!r}\n")
        w("-1\n")

    def line(c: Constraint, tagged: bool) -> str:
        text = f"{c.a} {c.b} {c.weight}"
        if c.level:
            text += f" {LEVEL_NAMES[c.level]}"
        return f"{c.kind.name} {text}" if tagged else text

    for kind, section in _SECTION_OF_KIND.items():
        singles = [c for c in cs.singles if c.kind is kind]
        groups = [g for g in cs.disjunctions if g and g[0].kind is kind]
        if not singles and not groups:
            continue
        w(section + "\n")
        for c in singles:
            w(line(c, False) + "\n")
        for g in groups:
            w(f"DISJUNCTION {len(g)}\n")
            for c in g:
                w(line(c, any(m.kind is not kind for m in g)) + "\n")
        w("-1\n")
    if cs.cluster_penalties:
        w("CLUSTER_PENALTY_SECTION\n")
        for level, rho in sorted(cs.cluster_penalties.items()):
            w(f"{LEVEL_NAMES[level]} {rho}\n")
        w("-1\n")
    if cs.transforms:
        w("TRANSFORM_SECTION\n")
        for tf in cs.transforms:
            if tf.m is not None:
                raise ValueError("transforms with an explicit M cannot be written")
            w("CLUSTER\n" if tf.kind == "cluster" else f"{tf.kind.upper()} {tf.a} {tf.b}\n")
        w("-1\n")
    w("EOF\n")
    return out.getvalue()


def read_instance(path: Union[str, Path]) -> tuple[RoutingInstance, ConstraintSet]:
    path = Path(path)
    return parse_instance(path.read_text(encoding="utf-8"), None)


def write_instance(path: Union[str, Path], instance: RoutingInstance, cs: Optional[ConstraintSet] = None) -> None:
    Path(path).write_text(format_instance(instance, cs), encoding="utf-8")


def format_tour(order: Sequence[int], comments: Iterable[str] = ()) -> str:
    """One 1-based stop index per line, depot first; ``#`` lines carry metadata."""
    head = "".join(f"# {c}\n" for c in comments)
    return head + "".join(f"{int(s) + 1}\n" for s in order)


def parse_tour(text: str, n: Optional[int] = None) -> list[int]:
    order = []
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line == "-1" or line.upper() == "EOF":
            break
        order.append(_int(line, no, "stop index") - 1)
    if n is not None and sorted(order) != list(range(n)):
        raise InstanceFormatError(f"tour is not a permutation of {n} stops")
    if len(set(order)) != len(order):
        raise InstanceFormatError("tour repeats a stop")
    return order
