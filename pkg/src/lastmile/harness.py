"""Best-of-two selection, the brute-force oracle and the batch runner."""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence, Union

import numba
import numpy as np

from .constraints import ConstraintSet
from .extraction import build_model, load_training, prepare_training, select_hierarchy_symbols
from .instance import RoutingInstance
from .penalty import PARTS, PenaltyModel, penalty_of_order
from .search import SearchConfig, SearchContext, SolveResult, solve
from .tsplib import format_tour, read_instance

log = logging.getLogger(__name__)

MERGE_FACTOR = 1.01
BRUTE_FORCE_LIMIT = 10


@dataclass(frozen=True)
class MergePolicy:
    merge_factor: float = MERGE_FACTOR

    def __post_init__(self):
        if not self.merge_factor >= 1:
            raise ValueError("merge_factor must be at least 1")

    def prefers_full(self, t_full: int, t_alt: int) -> bool:
        return t_full <= self.merge_factor * t_alt


def best_of_two(full: Sequence[int], alternate: Sequence[int], instance: RoutingInstance,
                policy: Optional[MergePolicy] = None) -> tuple[list[int], str]:
    """The full-model tour unless the alternate is shorter by more than the merge factor.

    Lengths use the instance's own (untransformed) travel matrix.
    """
    policy = policy or MergePolicy()
    t_f = instance.tour_length(full)
    t_a = instance.tour_length(alternate)
    if policy.prefers_full(t_f, t_a):
        return list(full), "full"
    return list(alternate), "alternate"


# ---------------------------------------------------------------- oracle


@numba.njit(cache=True)
def _next_permutation(a):
    k = a.shape[0] - 2
    while k >= 0 and a[k] >= a[k + 1]:
        k -= 1
    if k < 0:
        return False
    j = a.shape[0] - 1
    while a[j] <= a[k]:
        j -= 1
    a[k], a[j] = a[j], a[k]
    a[k + 1:] = a[k + 1:][::-1]
    return True


@numba.njit(cache=True)
def _brute_force(depot, rest, travel, pm, active):
    n = rest.shape[0] + 1
    order = np.empty(n, dtype=np.int64)
    best = np.empty(n, dtype=np.int64)
    parts = np.zeros(6, dtype=np.int64)
    best_pen = -1
    best_len = 0
    perm = rest.copy()
    while True:
        order[0] = depot
        order[1:] = perm
        length = 0
        for k in range(n):
            length += travel[order[k], order[(k + 1) % n]]
        pen = penalty_of_order(order, pm, parts) if active else 0
        if best_pen < 0 or pen < best_pen or (pen == best_pen and length < best_len):
            best_pen = pen
            best_len = length
            best[:] = order
        if not _next_permutation(perm):
            break
    return best, best_pen, best_len


def brute_force_optimum(instance: RoutingInstance, constraints: Optional[ConstraintSet] = None,
                        limit: int = BRUTE_FORCE_LIMIT) -> tuple[list[int], int, int]:
    """Enumerate every depot-first tour; (order, pen, length) minimising (pen, length).

    Ties go to the lexicographically least order.
    """
    n = instance.n
    if n > limit:
        raise ValueError(f"brute force needs n <= {limit}, got {n}")
    depot = instance.depot
    if n == 1:
        return [depot], 0, 0
    model = PenaltyModel(instance, constraints if constraints is not None else ConstraintSet())
    rest = np.array([v for v in range(n) if v != depot], dtype=np.int64)
    best, pen, length = _brute_force(depot, rest, instance.travel, model.args, model.active)
    return [int(v) for v in best], int(pen), int(length)


# ---------------------------------------------------------------- batch


@dataclass
class BatchJob:
    instance: str
    output: str
    full_seconds: float = 1.0
    alternate_seconds: Optional[float] = 1.0  # None: solve the full model only
    seed: int = 1
    training: Optional[str] = None  # without training data the file's own constraints are used
    runs: Optional[int] = None  # fixed run count: results independent of machine speed

    def __post_init__(self):
        if not self.full_seconds > 0:
            raise ValueError("full_seconds must be positive")
        if self.alternate_seconds is not None and not self.alternate_seconds > 0:
            raise ValueError("alternate_seconds must be positive")

    @classmethod
    def from_dict(cls, obj: dict, base: Optional[Path] = None, **defaults) -> "BatchJob":
        fields = {**defaults, **obj}
        if base is not None:
            for key in ("instance", "output", "training"):
                if fields.get(key) is not None:
                    fields[key] = str(base / fields[key])
        return cls(**fields)


@lru_cache(maxsize=8)
def _training(directory: str):
    training = prepare_training(load_training(directory))
    return training, select_hierarchy_symbols(training)


def _result_row(res: SolveResult) -> dict:
    return {"length": res.length, "penalty": res.penalty, "runs": res.runs,
            "seconds": round(res.seconds, 3), "breakdown": res.breakdown}


def run_job(job: BatchJob, policy: Optional[MergePolicy] = None) -> dict:
    """Extraction, full and alternate solves, best-of-two, tour file.  Never raises."""
    policy = policy or MergePolicy()
    t0 = time.perf_counter()
    row: dict = {"instance": job.instance, "output": job.output, "status": "ok"}
    try:
        instance, own = read_instance(job.instance)
        row["name"] = instance.name
        row["n"] = instance.n
        models: dict[str, tuple[RoutingInstance, ConstraintSet]] = {}
        if job.training:
            training, hierarchy = _training(job.training)
            models["full"] = build_model(instance, training, "full", hierarchy=hierarchy, prepared=True)
            if job.alternate_seconds is not None:
                models["alternate"] = build_model(instance, training, "alternate", hierarchy=hierarchy,
                                                  prepared=True)
        else:
            models["full"] = (instance, own)
        results: dict[str, SolveResult] = {}
        candidates = {}  # variants with the same transforms search the same matrix
        for variant, (inst, cs) in models.items():
            seconds = job.full_seconds if variant == "full" else job.alternate_seconds
            config = SearchConfig(time_limit=seconds, seed=job.seed, runs=job.runs)
            key = repr(cs.transforms)
            ctx = SearchContext(inst, cs, config, candidates.get(key))
            candidates[key] = ctx.candidates
            results[variant] = solve(inst, cs, config, context=ctx)
            row[variant] = _result_row(results[variant])
        if "alternate" in results:
            order, chosen = best_of_two(results["full"].order, results["alternate"].order, instance, policy)
        else:
            order, chosen = results["full"].order, "full"
        res = results[chosen]
        row.update(variant=chosen, length=instance.tour_length(order), penalty=res.penalty,
                   satisfied=res.penalty == 0, breakdown=res.breakdown)
        comments = [f"NAME {instance.name}", f"LENGTH {row['length']}", f"PENALTY {res.penalty}",
                    f"VARIANT {chosen}",
                    "BREAKDOWN " + " ".join(f"{k}={res.breakdown.get(k, 0)}" for k in PARTS)]
        out = Path(job.output)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(format_tour(order, comments), encoding="utf-8")
    except Exception as exc:  # one bad job must not stop the batch
        log.warning("job %s failed: %s", job.instance, exc)
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    row["wall_seconds"] = round(time.perf_counter() - t0, 3)
    return row


def _run_job_args(args):
    return run_job(*args)


def run_batch(jobs: Sequence[BatchJob], workers: int = 1, policy: Optional[MergePolicy] = None,
              report: Optional[Union[str, Path]] = None) -> dict:
    """Run every job on a process pool; rows come back in job order.

    The report has one row per job plus totals over the successful ones.  With
    fixed ``runs`` everything but the timing fields is reproducible.
    """
    if workers < 1:
        raise ValueError("workers must be positive")
    policy = policy or MergePolicy()
    t0 = time.perf_counter()
    if workers == 1 or len(jobs) <= 1:
        rows = [run_job(job, policy) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_job_args, [(job, policy) for job in jobs]))
    ok = [r for r in rows if r["status"] == "ok"]
    summary = {
        "jobs": len(rows),
        "ok": len(ok),
        "failed": len(rows) - len(ok),
        "satisfied": sum(1 for r in ok if r["satisfied"]),
        "total_length": sum(r["length"] for r in ok),
        "total_penalty": sum(r["penalty"] for r in ok),
        "workers": workers,
        "merge_factor": policy.merge_factor,
        "wall_seconds": round(time.perf_counter() - t0, 3),
    }
    result = {"summary": summary, "jobs": rows}
    if report is not None:
        Path(report).write_text(json.dumps(result, indent=2), encoding="utf-8")
    return result


def load_jobs(path: Union[str, Path], **defaults) -> list[BatchJob]:
    """Jobs file: a JSON list of job objects, or ``{"defaults": {...}, "jobs": [...]}``.

    Relative paths are resolved against the jobs file's directory.
    """
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    if isinstance(data, dict):
        defaults = {**data.get("defaults", {}), **defaults}
        data = data["jobs"]
    base = path.parent
    return [BatchJob.from_dict(obj, base, **defaults) for obj in data]


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


__all__ = [
    "BatchJob",
    "MERGE_FACTOR",
    "MergePolicy",
    "best_of_two",
    "brute_force_optimum",
    "default_workers",
    "load_jobs",
    "run_batch",
    "run_job",
]
