import itertools

import numpy as np
import pytest

from lastmile.constraints import SUPER_WEIGHT, ConstraintSet, Kind, neighbor, path, precedence
from lastmile.extraction import (
    NoReferenceRoute,
    TrainingRoute,
    build_driver_order_model,
    build_model,
    component_path,
    fill_missing_zone_ids,
    precedence_constraints,
    select_hierarchy_symbols,
    select_reference_route,
    sorted_cluster_constraints,
    super_cluster_path_constraints,
)
from lastmile.extraction.paths import Target
from lastmile.instance import RoutingInstance, Stop
from lastmile.penalty import evaluate_pen
from lastmile.synth import generate_synthetic
from lastmile.zones import SUPER, ZoneHierarchy, level_unit_name

PLANTED = ZoneHierarchy(("gamma", "x", "delta"), ("gamma", "x"), ("gamma",))
TEN_ZONE_ROUTE = ["A-2.2E", "A-2.1E", "A-2.1D", "A-2.2D", "A-2.3D", "A-2.3C", "A-2.2C", "A-2.1C", "A-2.1B", "A-2.2B"]


def route(name, walk, station="S", quality="High"):
    """A training route that drives one stop per entry of ``walk``, in order."""
    stops = [Stop(0, None, 0.0, 0.0, is_depot=True)]
    stops += [Stop(i + 1, z, float(i), 0.0) for i, z in enumerate(walk)]
    return TrainingRoute(name, station, quality, stops, list(range(len(stops))))


def target(zones, name="R", station="S"):
    return Target(name, station, frozenset(zones))


def test_component_path_example():
    r = route("q", list("abcadefe"))
    assert component_path(r) == [frozenset("abc"), frozenset("d"), frozenset("ef")]


def test_component_path_linear_and_cyclic():
    assert component_path(route("q", list("xyz"))) == [frozenset(c) for c in "xyz"]
    assert component_path(route("q", list("aba"))) == [frozenset("ab")]


def test_component_path_cycle_then_exit_and_empty_route():
    r = route("q", list("abac"))
    assert component_path(r) == [frozenset("ab"), frozenset("c")]
    with pytest.raises(ValueError):
        component_path(route("q", []))


def test_components_partition_zones():
    rng = np.random.default_rng(0)
    for _ in range(50):
        walk = list(rng.choice(list("abcdef"), size=12))
        r = route("q", [str(z) for z in walk])
        try:
            comps = component_path(r)
        except ValueError:
            continue
        assert set().union(*comps) == r.zones()
        assert sum(map(len, comps)) == len(r.zones())


def test_precedence_from_pruned_path():
    q = route("q", list("abcadefe"))
    got = precedence_constraints(target("abeg"), q)
    assert got == [precedence("a", "e"), precedence("b", "e")]


def test_precedence_transitive_three_components():
    q = route("q", list("abc"))
    assert precedence_constraints(target("abc"), q) == [precedence("a", "b"), precedence("b", "c")]
    assert precedence_constraints(target("abc"), q, transitive=True) == [
        precedence("a", "b"), precedence("a", "c"), precedence("b", "c")]
    assert precedence_constraints(target("xyz"), q) == []


def test_reference_selection_weights():
    common = [f"A-1.{i}A" for i in range(1, 13)]
    q1 = route("q1", common[:10], quality="High")
    q2 = route("q2", common, quality="Medium")
    assert select_reference_route(target(common), [q1, q2]).name == "q1"
    assert select_reference_route(target(common), [q2]).name == "q2"


def test_reference_selection_excludes_self_and_other_stations():
    zones = ["A-1.1A", "A-1.2A"]
    me = route("R", zones)
    other = route("q", zones[:1], quality="Low")
    far = route("f", zones, station="T")
    assert select_reference_route(target(zones), [me, other, far]).name == "q"
    with pytest.raises(NoReferenceRoute):
        select_reference_route(target(zones), [me, far])


def test_reference_ties_break_by_raw_overlap_then_name():
    zones = [f"A-1.{i}A" for i in range(1, 7)]
    high = route("h", zones[:3], quality="High")  # 6
    low = route("l", zones, quality="Low")  # 6, larger raw overlap
    assert select_reference_route(target(zones), [high, low]).name == "l"
    assert select_reference_route(target(zones), [route("b", zones), route("a", zones)]).name == "a"


def test_reference_argmax_scale_invariant_for_high_routes():
    rng = np.random.default_rng(3)
    zones = [f"A-1.{i}A" for i in range(1, 15)]
    for _ in range(20):
        cands = [route(f"q{k}", list(rng.choice(zones, size=rng.integers(1, 14), replace=False)))
                 for k in range(5)]
        tgt = target(zones)
        best = select_reference_route(tgt, cands)
        # brute force: every candidate has weight 2, so raw overlap decides
        want = min(cands, key=lambda q: (-len(q.zones() & set(zones)), q.name))
        assert best.name == want.name


def test_fill_missing_nearest_and_ties():
    stops = [Stop(0, None, 9.0, 9.0, is_depot=True), Stop(1, None, 0.0, 0.0),
             Stop(2, "A-1.1A", 0.0, 1.0), Stop(3, "A-1.2A", 5.0, 5.0)]
    assert fill_missing_zone_ids(stops) == [None, "A-1.1A", "A-1.1A", "A-1.2A"]
    tie = [Stop(0, None, 9.0, 9.0, is_depot=True), Stop(1, None, 0.0, 0.0),
           Stop(2, "A-1.2A", 0.0, 1.0), Stop(3, "A-1.1A", 1.0, 0.0)]
    assert fill_missing_zone_ids(tie)[1] == "A-1.2A"
    # the result does not depend on the order the stops are listed in
    for perm in itertools.permutations(tie[1:]):
        got = dict(zip((s.id for s in (tie[0],) + perm), fill_missing_zone_ids([tie[0], *perm])))
        assert got[1] == "A-1.2A"
    with pytest.raises(ValueError):
        fill_missing_zone_ids([Stop(0, None, is_depot=True), Stop(1, None, 0.0, 0.0)])


def test_hierarchy_planted_and_degenerate():
    corpus = generate_synthetic(routes=30, seed=1)
    assert select_hierarchy_symbols(corpus.training) == corpus.hierarchy == PLANTED
    one = route("q", ["A-1.1A"])
    assert select_hierarchy_symbols([one]) == ZoneHierarchy.all_chains()[0]


def test_ten_zone_route_super_clusters():
    groups = {}
    for z in TEN_ZONE_ROUTE:
        groups.setdefault(level_unit_name(z, SUPER, PLANTED), set()).add(z)
    assert sorted(map(sorted, groups.values())) == sorted(map(sorted, [
        {"A-2.2E", "A-2.1E"}, {"A-2.1D", "A-2.2D", "A-2.3D"},
        {"A-2.3C", "A-2.2C", "A-2.1C"}, {"A-2.1B", "A-2.2B"}]))


def pairs(constraints):
    return {frozenset((c.a, c.b)) for c in constraints if c.level == 0}


def test_ten_zone_route_sorted_cluster_constraints():
    singles, groups = sorted_cluster_constraints(target(TEN_ZONE_ROUTE), PLANTED)
    assert all(c.kind is Kind.NEIGHBOR and c.weight == SUPER_WEIGHT for c in singles)
    inside = {frozenset(p) for p in [("A-2.1E", "A-2.2E"), ("A-2.1D", "A-2.2D"), ("A-2.2D", "A-2.3D"),
                                      ("A-2.1C", "A-2.2C"), ("A-2.2C", "A-2.3C"), ("A-2.1B", "A-2.2B")]}
    assert inside <= pairs(singles)
    # y matches on exactly one end pair between D and E; C-D matches twice and becomes a disjunction
    assert frozenset(("A-2.1E", "A-2.1D")) in pairs(singles)
    grouped = [pairs(g) for g in groups]
    assert {frozenset(("A-2.3D", "A-2.3C")), frozenset(("A-2.1D", "A-2.1C"))} in grouped
    assert all(len(g) == 2 for g in groups)


def test_sorted_cluster_edge_cases():
    singles, groups = sorted_cluster_constraints(target(["A-2.1E"]), PLANTED)
    assert singles == [] and groups == []
    # super clusters E and D, no end pair agrees on y
    singles, groups = sorted_cluster_constraints(target(["A-2.1E", "A-2.2E", "A-2.3D"]), PLANTED)
    assert pairs(singles) == {frozenset(("A-2.1E", "A-2.2E"))} and groups == []


def test_super_cluster_path_rules():
    # super clusters visited as single blocks: E, D, C; C is split in the second reference
    q = route("q", ["A-2.1E", "A-2.2E", "A-2.1D", "A-2.2D", "A-2.1C"])
    got = super_cluster_path_constraints(target(["A-2.1E", "A-2.1D", "A-2.1C"]), q, PLANTED)
    assert got == [path("A-2.*E", "A-2.*D", SUPER_WEIGHT, SUPER), path("A-2.*D", "A-2.*C", SUPER_WEIGHT, SUPER)]
    split = route("q", ["A-2.1E", "A-2.1D", "A-2.1C", "A-2.2D", "A-2.2C"])
    assert super_cluster_path_constraints(target(["A-2.1E", "A-2.1D", "A-2.1C"]), split, PLANTED) == []
    # D absent from the target
    assert super_cluster_path_constraints(target(["A-2.1E", "A-2.1C"]), q, PLANTED) == []
    prec = super_cluster_path_constraints(target(["A-2.1E", "A-2.1D"]), q, PLANTED, kind="precedence")
    assert prec == [precedence("A-2.*E", "A-2.*D", SUPER_WEIGHT, SUPER)]


def small_instance(zones, name="R", station="S"):
    n = len(zones) + 1
    travel = np.ones((n, n), dtype=int) - np.eye(n, dtype=int)
    stops = [Stop(0, None, is_depot=True)] + [Stop(i + 1, z) for i, z in enumerate(zones)]
    return RoutingInstance(name, travel, stops, station=station)


def test_no_reference_falls_back_to_clusters():
    inst = small_instance(["A-2.1E", "A-2.2E"])
    _, cs = build_model(inst, [route("far", ["A-2.1E"], station="T")], hierarchy=PLANTED)
    singles, groups = sorted_cluster_constraints(inst, PLANTED)
    assert cs.singles == singles and cs.disjunctions == groups
    assert [t.kind for t in cs.transforms] == ["cluster"]


def test_full_and_alternate_differ_only_in_reference_parts():
    corpus = generate_synthetic(routes=20, seed=2)
    for r in corpus.routes[:5]:
        _, full = build_model(r.instance, corpus.training, "full", hierarchy=PLANTED)
        _, alt = build_model(r.instance, corpus.training, "alternate", hierarchy=PLANTED)
        shared, _ = sorted_cluster_constraints(r.instance, PLANTED)
        rest_full = [c for c in full.singles if c not in shared]
        rest_alt = [c for c in alt.singles if c not in shared]
        assert full.disjunctions == alt.disjunctions
        assert full.transforms == alt.transforms and full.cluster_penalties == alt.cluster_penalties
        assert {c.kind for c in rest_full if c.level == SUPER} <= {Kind.PATH}
        assert {c.kind for c in rest_alt if c.level == SUPER} <= {Kind.PRECEDENCE}
        zone_full = {(c.a, c.b) for c in rest_full if c.level == 0}
        zone_alt = {(c.a, c.b) for c in rest_alt if c.level == 0}
        assert zone_full <= zone_alt
        assert not full.time_windows and not alt.time_windows
    with pytest.raises(ValueError):
        build_model(corpus.routes[0].instance, corpus.training, "other")


def test_planted_tours_have_zero_penalty():
    corpus = generate_synthetic(routes=40, seed=3)
    for r in corpus.routes:
        for variant in ("full", "alternate"):
            inst, cs = build_model(r.instance, corpus.training, variant, hierarchy=PLANTED)
            assert evaluate_pen(r.planted, cs, inst) == 0, (r.instance.name, variant)


def test_self_reference_consistency():
    corpus = generate_synthetic(routes=10, seed=4, split_rate=0.0)
    for r in corpus.routes:
        cons = precedence_constraints(r.instance, r.driver, transitive=True)
        cons += super_cluster_path_constraints(r.instance, r.driver, PLANTED)
        cs = ConstraintSet(singles=cons, hierarchy=PLANTED)
        assert evaluate_pen(r.driver.sequence, cs, r.instance) == 0


def test_emission_deterministic():
    from lastmile.tsplib import format_instance
    corpus = generate_synthetic(routes=10, seed=5)
    r = corpus.routes[3]
    a = format_instance(*build_model(r.instance, corpus.training, "full"))
    b = format_instance(*build_model(r.instance, list(reversed(corpus.training)), "full"))
    assert a == b


def test_driver_order_model_pins_zone_order():
    inst = small_instance(["A-1.1A", "A-1.2A", "A-1.3A"])
    _, cs = build_driver_order_model(inst, ["A-1.3A", "A-1.1A", "A-1.2A"], transformed=False)
    assert cs.singles == [path("A-1.3A", "A-1.1A"), neighbor("A-1.1A", "A-1.2A")]
    assert evaluate_pen([0, 3, 1, 2], cs, inst) == 0
    assert evaluate_pen([0, 1, 2, 3], cs, inst) > 0
    _, cs = build_driver_order_model(inst, ["A-1.3A", "A-1.1A", "A-1.2A"])
    assert [t.kind for t in cs.transforms] == ["cluster", "path", "neighbor"]
