"""Synthetic stations, routes and driver tours with a planted zone-ID hierarchy.

Every station has two top-level clusters (letters ``gamma``).  A top cluster is
a row of blocks, one per ``x``; a block is a grid of zones, one column per
``delta`` and one cell per ``y``.  Drivers follow a snake through the station:
blocks of the first top in increasing ``x``, blocks of the second top in
decreasing ``x``; ``delta`` order alternates per block and ``y`` order per
column.  Both top clusters lie in one row along +x and the geometry follows
the snake, so the planted order is also a short tour: travel heading along the
snake is cheaper than against it, and the depot is a long drive south of the
area whose return leg does not depend on the last stop.  A route is a window of consecutive whole blocks.

The planted hierarchy is S = (gamma, x, delta), T = (gamma, x), U = (gamma).
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .extraction.routes import TrainingRoute, write_route
from .instance import RoutingInstance, Stop
from .tsplib import format_tour, write_instance
from .zones import ZoneHierarchy

PLANTED_HIERARCHY = ZoneHierarchy(("gamma", "x", "delta"), ("gamma", "x"), ("gamma",))
METRES_PER_DEGREE = 111_320.0


@dataclass
class SynthConfig:
    routes: int = 200
    stations: int = 5
    seed: int = 0
    split_rate: float = 0.05
    mean_stops: float = 148.0
    sd_stops: float = 40.0
    min_stops: int = 32
    max_stops: int = 237
    cell: float = 350.0  # zone height in metres
    column_width: float = 2.5  # zone width, in zone heights
    jitter: float = 0.2  # stop offset from its zone centre, as a fraction of the zone height
    depot_drive: tuple[int, int] = (1500, 1560)  # seconds; stations sit far outside their delivery area
    speed: float = 8.0  # metres per second
    asymmetry: tuple[float, float] = (1.0, 1.3)
    flow: float = 0.6  # share of the asymmetry that depends on heading
    max_window: int = 3  # blocks per route
    quality_mix: tuple[float, float, float] = (0.6, 0.25, 0.15)  # High, Medium, Low


@dataclass
class Zone:
    name: str
    column: int  # global column index along the snake
    rank: int  # position of the zone along the snake
    upward: bool  # driven towards larger map y
    centre: tuple[float, float]


@dataclass
class Station:
    name: str
    depot: tuple[float, float]
    blocks: list[list[Zone]]  # snake order; zones inside a block in snake order


@dataclass
class SynthRoute:
    instance: RoutingInstance
    planted: list[int]  # clean zone-contiguous tour from the depot
    driver: TrainingRoute  # the same tour with occasional zone splits
    zone_order: list[str]  # planted zone order


@dataclass
class SynthCorpus:
    routes: list[SynthRoute]
    stations: list[Station] = field(default_factory=list)
    hierarchy: ZoneHierarchy = PLANTED_HIERARCHY

    @property
    def training(self) -> list[TrainingRoute]:
        return [r.driver for r in self.routes]


def _station(rng: np.random.Generator, name: str, cell: float, width: float) -> Station:
    letters = rng.choice(list(string.ascii_uppercase[:12]), size=2, replace=False)
    blocks: list[list[Zone]] = []
    column = 0
    rank = 0
    x_pos = 0.0
    for t, gamma in enumerate(letters):
        x0 = int(rng.integers(1, 4))
        nblocks = int(rng.integers(3, 6))
        ncols = int(rng.choice([2, 4]))  # even: every block starts at the bottom of its first column
        ncells = int(rng.integers(2, 5))
        d0 = int(rng.integers(0, 26 - ncols))
        deltas = list(string.ascii_uppercase[d0:d0 + ncols])
        xs = list(range(x0, x0 + nblocks))
        for x in (xs if t == 0 else xs[::-1]):
            order = deltas if len(blocks) % 2 == 0 else deltas[::-1]
            block = []
            for delta in order:
                ascending = column % 2 == 0
                ys = range(1, ncells + 1) if ascending else range(ncells, 0, -1)
                for y in ys:
                    centre = (x_pos + 0.5 * width, (y - 0.5) * cell)
                    block.append(Zone(f"{gamma}-{x}.{y}{delta}", column, rank, ascending, centre))
                    rank += 1
                column += 1
                x_pos += width
            blocks.append(block)
            x_pos += 0.5 * width
        x_pos += 1.5 * width  # wider gap between the two top clusters
    depot = (-3.0 * width, -2.0 * cell)  # map position only; see SynthConfig.depot_drive
    return Station(name, depot, blocks)


def _travel(points: np.ndarray, rng: np.random.Generator, speed: float, asym: tuple[float, float],
            flow: float = 0.0) -> np.ndarray:
    """Euclidean seconds times a factor in ``asym``.

    A share ``flow`` of the factor's spread follows the direction of travel
    (heading towards +x is cheapest, towards -x dearest); the rest is uniform noise.
    """
    delta = points[None, :, :] - points[:, None, :]
    dist = np.linalg.norm(delta, axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        against = np.where(dist > 0, (1.0 - delta[:, :, 0] / np.where(dist > 0, dist, 1.0)) / 2.0, 0.0)
    share = flow * against + (1.0 - flow) * rng.uniform(0.0, 1.0, size=dist.shape)
    factor = asym[0] + (asym[1] - asym[0]) * share
    travel = np.rint(dist / speed * factor).astype(np.int64)
    travel = np.maximum(travel, 1)
    np.fill_diagonal(travel, 0)
    return travel


def _route(rng: np.random.Generator, station: Station, index: int, cfg: SynthConfig) -> SynthRoute:
    n = int(np.clip(round(rng.normal(cfg.mean_stops, cfg.sd_stops)), cfg.min_stops, cfg.max_stops))
    width = int(rng.integers(1, cfg.max_window + 1))
    while width > 1 and sum(len(b) for b in station.blocks[:width]) > n - 1:
        width -= 1
    first = int(rng.integers(0, len(station.blocks) - width + 1))
    zones = [z for b in station.blocks[first:first + width] for z in b]
    if len(zones) > n - 1:
        zones = zones[: n - 1]
    counts = np.ones(len(zones), dtype=int) + rng.multinomial(n - 1 - len(zones), np.full(len(zones), 1 / len(zones)))

    cell = cfg.cell
    points = [station.depot]
    stop_zone: list[Optional[Zone]] = [None]
    for z, k in zip(zones, counts):
        for _ in range(k):
            dx = rng.uniform(-cfg.jitter, cfg.jitter) * cell
            dy = rng.uniform(-cfg.jitter, cfg.jitter) * cell
            points.append((z.centre[0] + dx, z.centre[1] + dy))
            stop_zone.append(z)
    pts = np.asarray(points)
    # shuffle stop indices so files do not reveal the planted order
    perm = np.concatenate([[0], 1 + rng.permutation(n - 1)])
    pts = pts[perm]
    stop_zone = [stop_zone[i] for i in perm]
    travel = _travel(pts, rng, cfg.speed, cfg.asymmetry, cfg.flow)
    # the depot is a long drive south: outbound legs enter the area from its
    # southern edge, the drive back does not depend on the last stop
    lo, hi = cfg.depot_drive
    approach = np.rint(np.maximum(pts[1:, 1], 0.0) / cfg.speed).astype(np.int64)
    travel[0, 1:] = rng.integers(lo, hi + 1, size=n - 1) + approach
    travel[1:, 0] = rng.integers(lo, hi + 1, size=n - 1)

    stops = [
        Stop(i, None if z is None else z.name, float(p[1] / METRES_PER_DEGREE), float(p[0] / METRES_PER_DEGREE),
             is_depot=(i == 0))
        for i, (p, z) in enumerate(zip(pts, stop_zone))
    ]
    name = f"{station.name}_r{index:04d}"
    instance = RoutingInstance(name, travel, stops, station.name)

    planted = [0]
    for z in zones:
        members = [i for i in range(1, n) if stop_zone[i] is z]
        members.sort(key=lambda i: pts[i, 1] if z.upward else -pts[i, 1])
        planted.extend(members)

    driver = list(planted)
    if cfg.split_rate > 0:
        driver = _split(driver, stop_zone, rng, cfg.split_rate)
    quality = rng.choice(["High", "Medium", "Low"], p=list(cfg.quality_mix))
    route = TrainingRoute(name, station.name, str(quality), [Stop(s.id, s.zone_id, s.lat, s.lon, is_depot=s.is_depot)
                                                            for s in stops], driver)
    return SynthRoute(instance, planted, route, [z.name for z in zones])


def _split(order: list[int], stop_zone, rng: np.random.Generator, rate: float) -> list[int]:
    """At a zone change, with probability ``rate``, serve the next zone's first stop
    before the current zone's last one (the current zone is split)."""
    out = list(order)
    k = 1
    while k < len(out) - 2:
        a, b = out[k], out[k + 1]
        za, zb = stop_zone[a], stop_zone[b]
        same_before = k > 1 and stop_zone[out[k - 1]] is za
        if za is not None and zb is not None and za is not zb and same_before and rng.random() < rate:
            out[k], out[k + 1] = b, a
            k += 3
        else:
            k += 1
    return out


def generate_synthetic(config: Optional[SynthConfig] = None, **overrides) -> SynthCorpus:
    """Deterministic corpus for ``config.seed``."""
    cfg = config or SynthConfig()
    if overrides:
        cfg = SynthConfig(**{**cfg.__dict__, **overrides})
    rng = np.random.default_rng(cfg.seed)
    stations = [_station(rng, f"S{i:02d}", cfg.cell, cfg.cell * cfg.column_width) for i in range(cfg.stations)]
    routes = []
    for r in range(cfg.routes):
        st = stations[r % len(stations)]
        routes.append(_route(rng, st, r, cfg))
    return SynthCorpus(routes, stations)


# ---------------------------------------------------------------- time windows


@dataclass
class TimeWindowCase:
    instance: RoutingInstance
    planted: list[int]
    windows: dict[int, tuple[int, int]]


def generate_tw_instance(seed: int, n: int = 40, n_windows: int = 5, slack: float = 0.03,
                         radius: float = 2500.0, speed: float = 8.0) -> TimeWindowCase:
    """Stops on a noisy ring around the depot; deadlines fit the more expensive direction.

    The planted tour goes around the ring in the direction whose locally
    improved length is larger; a handful of stops early in that tour get a
    deadline shortly after the planted arrival.  Windows are feasible by
    construction and an unconstrained shortest tour tends to break them.
    """
    rng = np.random.default_rng(seed)
    angles = np.sort(rng.uniform(0, 2 * np.pi, size=n - 1))
    r = radius * rng.uniform(0.85, 1.15, size=n - 1)
    pts = np.vstack([[0.0, 0.0], np.column_stack([r * np.cos(angles), r * np.sin(angles)])])
    travel = _travel(pts, rng, speed, (1.0, 1.3))
    service = rng.integers(30, 61, size=n)
    service[0] = 0
    ccw = [0] + list(range(1, n))
    cw = [0] + list(range(n - 1, 0, -1))

    def length(order):
        return int(sum(travel[a, b] for a, b in zip(order, order[1:] + order[:1])))

    planted = cw if length(cw) > length(ccw) else ccw
    arrival = {}
    t = 0
    for a, b in zip(planted, planted[1:]):
        t += int(service[a]) + int(travel[a, b])
        arrival[b] = t
    total = length(planted) + int(service.sum())
    early = planted[1: max(2, int(0.4 * (n - 1)))]
    chosen = rng.choice(early, size=min(n_windows, len(early)), replace=False)
    windows = {int(s): (0, arrival[int(s)] + int(slack * total)) for s in chosen}
    stops = [Stop(i, None, float(pts[i, 1] / METRES_PER_DEGREE), float(pts[i, 0] / METRES_PER_DEGREE),
                  windows.get(i), int(service[i]), i == 0) for i in range(n)]
    return TimeWindowCase(RoutingInstance(f"tw{seed:04d}", travel, stops), planted, windows)


# ---------------------------------------------------------------- corpus files


def write_corpus(corpus: SynthCorpus, directory: Union[str, Path]) -> Path:
    """instances/*.tsp, training/*.route and planted/*.tour under ``directory``."""
    root = Path(directory)
    for sub in ("instances", "training", "planted"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for r in corpus.routes:
        name = r.instance.name
        write_instance(root / "instances" / f"{name}.tsp", r.instance)
        write_route(root / "training" / f"{name}.route", r.driver)
        (root / "planted" / f"{name}.tour").write_text(
            format_tour(r.planted, [f"planted zone order: {' '.join(r.zone_order)}"]), encoding="utf-8")
    (root / "hierarchy.txt").write_text(corpus.hierarchy.spec() + "\n", encoding="utf-8")
    return root
