"""End-to-end acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (see conftest.py) that is printed in the
terminal summary.  Together they take roughly half an hour on one core.
"""

import itertools
import time

import numpy as np
import pytest

from lastmile.constraints import ConstraintSet
from lastmile.extraction import build_model, select_hierarchy_symbols
from lastmile.harness import BatchJob, MergePolicy, best_of_two, brute_force_optimum, run_batch
from lastmile.instance import RoutingInstance, Stop, TravelTimeTransform, atsp_to_tsp
from lastmile.penalty import crossing, evaluate_pen, time_window_lateness, zone_order
from lastmile.search import SearchConfig, SearchContext, solve, try_move
from lastmile.synth import generate_synthetic, generate_tw_instance
from lastmile.candidates import alpha_matrix, held_karp_ascent
from lastmile.tour import random_tour
from lastmile.tsplib import parse_tour, read_instance, write_instance

from oracles import alpha_oracle, naive_pen, random_constrained_instance, random_instance

pytestmark = pytest.mark.acceptance


def test_01_optimum_on_small_instances(criterion):
    t0 = time.perf_counter()
    exact, within = 0, 0
    for seed in range(100):
        inst = random_instance(8, 10_000 + seed)
        _, _, best = brute_force_optimum(inst)
        res = solve(inst, None, SearchConfig(time_limit=1.0, seed=seed))
        assert res.length == inst.tour_length(res.order)
        exact += res.length == best
        within += res.length <= 1.02 * best
    elapsed = time.perf_counter() - t0
    criterion(1, "exact optimum on n=8", exact >= 95 and within == 100 and elapsed <= 180,
              f"{exact}/100 optimal, {within}/100 within 2%, {elapsed:.0f}s")


def test_02_transformation_round_trip(criterion):
    mismatches = 0
    for k in range(50):
        n = 2 + k % 11
        inst = random_instance(n, 20_000 + k)
        t = atsp_to_tsp(inst)
        rest = list(range(1, n))
        if n <= 8:
            orders = ([0, *p] for p in itertools.permutations(rest))
        else:
            rng = np.random.default_rng(k)
            orders = ([0, *(int(v) for v in rng.permutation(rest))] for _ in range(5000))
        for order in orders:
            nodes = [v for s in order for v in (s + n, s)]  # dummy, then its stop
            cost = sum(int(t.cost[a, b]) for a, b in zip(nodes, nodes[1:] + nodes[:1]))
            mismatches += cost != inst.tour_length(order)

    moves, bad, seed = 0, 0, 0
    while moves < 100_000:
        inst = random_instance(12, 30_000 + seed)
        ctx = SearchContext(inst)
        for k in range(20):
            tour = random_tour(ctx.transformed, seed * 100 + k)
            rng = np.random.default_rng(seed * 100 + k)
            improved = True
            while improved and moves < 100_000:
                improved = False
                for t1 in rng.permutation(tour.size):
                    m = try_move(tour, int(t1), ctx, bool(rng.integers(2)))
                    if m is None:
                        continue
                    tour.apply_move(m)
                    tour.commit()
                    tour.validate()  # dummy right before its stop, one cycle
                    order = tour.order()
                    bad += tour.length != inst.tour_length(order) or order[0] != 0
                    moves += 1
                    improved = True
                    break
        seed += 1
    criterion(2, "transformation round trip", mismatches == 0 and bad == 0,
              f"{mismatches} length mismatches, {moves} moves with {bad} invariant failures")


def test_03_penalty_matches_naive_checker(criterion):
    t0 = time.perf_counter()
    wrong = 0
    for k in range(1000):
        inst, cs = random_constrained_instance(40_000 + k // 10)
        rng = np.random.default_rng(k)
        order = [0] + [int(v) for v in rng.permutation(np.arange(1, inst.n))]
        wrong += evaluate_pen(order, cs, inst) != naive_pen(order, cs, inst)
    elapsed = time.perf_counter() - t0
    criterion(3, "penalty equals naive checker", wrong == 0 and elapsed <= 30,
              f"{wrong}/1000 disagreements, {elapsed:.1f}s")


def test_04_cluster_formulations(criterion):
    corpus = generate_synthetic(routes=100, seed=11)
    transformed, penalised = 0, 0
    for k, r in enumerate(corpus.routes):
        inst = r.instance
        cs = ConstraintSet(transforms=[TravelTimeTransform("cluster")])
        res = solve(inst, cs, SearchConfig(time_limit=1.0, seed=k))
        cross, z = crossing(res.order, inst)
        transformed += cross == z
        cs = ConstraintSet(cluster_penalties={0: 1000})
        res = solve(inst, cs, SearchConfig(time_limit=2.0, seed=k))
        penalised += res.penalty == 0
    criterion(4, "clustered tours", transformed == 100 and penalised >= 95,
              f"transform {transformed}/100 with crossing = z, penalty {penalised}/100 with pen = 0")


def test_05_alpha_values(criterion):
    checked, wrong = 0, 0
    for k in range(60):
        n = 2 + k % 7
        t = atsp_to_tsp(random_instance(n, 50_000 + k, high=60))
        tree = held_karp_ascent(t, iterations=1 if k % 3 == 0 else 50)
        got = alpha_matrix(tree.cost, tree.pi, tree.dad, tree.order, tree.special, tree.second, tree.n)
        for (u, v), a in alpha_oracle(tree.cost, tree.pi, tree.special).items():
            checked += 1
            wrong += got[u, v] != a
    criterion(5, "alpha values", wrong == 0, f"{checked} pairs on 2n <= 16, {wrong} wrong")


def test_06_extraction_round_trip(criterion):
    corpus = generate_synthetic(routes=200, seed=0)
    training = corpus.training
    chain = select_hierarchy_symbols(training)
    same_order, planted_ok = 0, 0
    for r in corpus.routes:
        inst, cs = build_model(r.instance, training, "full", hierarchy=chain)
        planted_ok += evaluate_pen(r.planted, cs, inst) == 0
        res = solve(inst, cs, SearchConfig(time_limit=1.0, seed=1))
        same_order += zone_order(res.order, inst) == r.zone_order
    ok = chain == corpus.hierarchy and same_order >= 180 and planted_ok == 200
    criterion(6, "extraction round trip", ok,
              f"chain {'recovered' if chain == corpus.hierarchy else 'wrong: ' + chain.spec()}, "
              f"zone order {same_order}/200, planted pen 0 on {planted_ok}/200")


VARIANTS = [
    ("3+4-opt, kicks, multi-run", dict()),
    ("3-opt, kicks, multi-run", dict(move_type="3")),
    ("3-opt, one trial, multi-run", dict(move_type="3", max_trials=1)),
    ("3-opt, kicks, one run", dict(move_type="3", runs=1)),
    ("3-opt, one trial, one run", dict(move_type="3", max_trials=1, runs=1)),
]


def test_07_ablation_ordering(criterion):
    corpus = generate_synthetic(routes=30, seed=0)
    ratios = np.zeros((len(corpus.routes), len(VARIANTS)))
    for k, r in enumerate(corpus.routes):
        inst = r.instance
        ctx = SearchContext(inst)
        lengths = [solve(inst, None, SearchConfig(time_limit=1.0, seed=k, **kw), context=ctx).length
                   for _, kw in VARIANTS]
        # best known: ten full runs, or anything a variant found that beats them
        reference = solve(inst, None, SearchConfig(runs=10, seed=1000 + k), context=ctx).length
        ratios[k] = np.array(lengths) / min(reference, *lengths)
    gaps = ratios.mean(axis=0) - 1
    ordered = all(a <= b for a, b in zip(gaps, gaps[1:]))
    spread = gaps[-1] > gaps[-2] and gaps[-1] >= 2 * gaps[0]
    detail = ", ".join(f"{name} {g:.5f}" for (name, _), g in zip(VARIANTS, gaps))
    criterion(7, "ablation ordering", ordered and spread, "mean gap " + detail)


def test_08_time_windows(criterion):
    on_ok, off_late = 0, 0
    for seed in range(100):
        case = generate_tw_instance(seed)
        res = solve(case.instance, ConstraintSet(time_windows=True), SearchConfig(time_limit=1.0, seed=seed))
        on_ok += time_window_lateness(res.order, case.instance) == 0
        res = solve(case.instance, ConstraintSet(), SearchConfig(time_limit=1.0, seed=seed))
        off_late += time_window_lateness(res.order, case.instance) > 0
    criterion(8, "time windows", on_ok == 100 and off_late >= 50,
              f"windows on: {on_ok}/100 on time, windows off: {off_late}/100 late")


def two_tour_instance(t_full, t_alt):
    """Tour 0 1 2 has length ``t_full`` and tour 0 2 1 has length ``t_alt``."""
    travel = np.array([[0, t_full - 2, t_alt - 2], [1, 0, 1], [1, 1, 0]])
    return RoutingInstance("merge", travel, [Stop(i, is_depot=(i == 0)) for i in range(3)])


MERGE_CASES = [
    # (t_full, t_alt, merge factor, expected winner)
    (100, 98, 1.01, "alternate"),
    (100, 99, 1.01, "alternate"),
    (1000, 991, 1.01, "full"),
    (1000, 990, 1.01, "alternate"),  # 999.9 < 1000
    (1000, 989, 1.01, "alternate"),
    (100, 100, 1.01, "full"),
    (98, 100, 1.01, "full"),
    (50, 1000, 1.01, "full"),
    (1000, 500, 1.01, "alternate"),
    (10_000, 9_901, 1.01, "full"),
    (10_000, 9_900, 1.01, "alternate"),
    (100, 100, 1.0, "full"),
    (100, 99, 1.0, "alternate"),
    (99, 100, 1.0, "full"),
    (105, 100, 1.05, "full"),
    (106, 100, 1.05, "alternate"),
    (300, 200, 1.5, "full"),
    (301, 200, 1.5, "alternate"),
    (5, 4, 1.01, "alternate"),
    (4, 4, 1.01, "full"),
]


def test_09_best_of_two_table(criterion):
    wrong = []
    for t_full, t_alt, factor, want in MERGE_CASES:
        inst = two_tour_instance(t_full, t_alt)
        full, alt = [0, 1, 2], [0, 2, 1]
        assert (inst.tour_length(full), inst.tour_length(alt)) == (t_full, t_alt)
        order, chosen = best_of_two(full, alt, inst, MergePolicy(factor))
        if chosen != want or order != (full if want == "full" else alt):
            wrong.append((t_full, t_alt, factor))
    criterion(9, "best-of-two table", len(MERGE_CASES) == 20 and not wrong,
              f"{len(MERGE_CASES) - len(wrong)}/{len(MERGE_CASES)} cases{' wrong: ' + str(wrong) if wrong else ''}")


def test_10_batch_throughput(criterion, tmp_path):
    corpus = generate_synthetic(routes=100, seed=21, min_stops=150, max_stops=150)
    jobs = []
    for r in corpus.routes:
        path = tmp_path / f"{r.instance.name}.tsp"
        write_instance(path, r.instance)
        jobs.append(BatchJob(str(path), str(tmp_path / "out" / f"{r.instance.name}.tour"),
                             full_seconds=1.0, alternate_seconds=None))
    t0 = time.perf_counter()
    result = run_batch(jobs, workers=8)
    wall = time.perf_counter() - t0
    valid = 0
    for row in result["jobs"]:
        if row["status"] != "ok":
            continue
        inst, _ = read_instance(row["instance"])
        order = parse_tour(open(row["output"]).read(), inst.n)
        valid += inst.n == 150 and inst.tour_length(order) == row["length"]
    criterion(10, "batch throughput", valid == 100 and wall <= 25,
              f"{valid}/100 valid tours in {wall:.1f}s wall with 8 workers")
