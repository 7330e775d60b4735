import collections
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lastmile.instance import atsp_to_tsp
from lastmile.tour import KOptMove, Tour, TourInvariantError, between_ranks, random_tour

from oracles import random_instance


def walk_between(tour, a, b, c):
    """Forward walk from ``a``: is ``b`` met before ``c``?"""
    seq = [a]
    v = tour.nxt[a]
    while v != a:
        seq.append(int(v))
        v = tour.nxt[v]
    return seq.index(b) < seq.index(c)


def dummy(order, k, n):
    return order[k] + n


def three_opt(order, n, k1, k2, k3):
    """Move cutting after stop positions k1 < k2 < k3, and the order it must produce."""
    t1, t2 = order[k1], dummy(order, k1 + 1, n)
    t5, t6 = order[k2], dummy(order, k2 + 1, n)
    t3, t4 = order[k3], dummy(order, (k3 + 1) % n, n)
    move = KOptMove(3, (t1, t2, t3, t4, t5, t6), 0)
    expected = order[:k1 + 1] + order[k2 + 1:k3 + 1] + order[k1 + 1:k2 + 1] + order[k3 + 1:]
    return move, expected


def four_opt(order, n, k1, k2, k3, k4):
    t1, t2 = order[k1], dummy(order, k1 + 1, n)
    t5, t6 = order[k2], dummy(order, k2 + 1, n)
    t3, t4 = order[k3], dummy(order, k3 + 1, n)
    t7, t8 = order[k4], dummy(order, (k4 + 1) % n, n)
    move = KOptMove(4, (t1, t2, t3, t4, t5, t6, t7, t8), 0)
    a = order[k1 + 1:k2 + 1]
    b = order[k2 + 1:k3 + 1]
    c = order[k3 + 1:k4 + 1]
    d = order[k4 + 1:] + order[:k1 + 1]
    # A B C D becomes A D C B; rotate so the depot comes first
    cyc = a + d + c + b
    i = cyc.index(order[0])
    return move, cyc[i:] + cyc[:i]


@pytest.mark.parametrize("ranks, expected", [
    ((0, 3, 7), True),
    ((5, 1, 3), True),
    ((0, 7, 3), False),
])
def test_between_examples(ranks, expected):
    rank = np.full(8, -1, dtype=np.int64)
    free = iter(r for r in range(8) if r not in ranks)
    for node in range(8):
        rank[node] = ranks[node] if node < 3 else next(free)
    assert between_ranks(rank, 8, 0, 1, 2) == expected


def test_three_opt_on_eight_nodes():
    order = [0, 1, 2, 3]
    tour = Tour.from_order(order)
    move, expected = three_opt(order, 4, 0, 1, 2)
    tour.apply_move(move)
    for u, v in move.successor_pairs():
        assert tour.nxt[u] == v
    tour.commit()
    assert tour.order() == expected == [0, 2, 1, 3]


def test_four_opt_successors():
    order = list(range(6))
    tour = Tour.from_order(order)
    move, expected = four_opt(order, 6, 0, 1, 3, 4)
    tour.apply_move(move)
    t1, t2, t3, t4, t5, t6, t7, t8 = move.nodes
    assert (tour.nxt[t1], tour.nxt[t7], tour.nxt[t3], tour.nxt[t5]) == (t4, t6, t2, t8)
    tour.commit()
    assert tour.order() == expected


@settings(max_examples=80, deadline=None)
@given(n=st.integers(4, 12), seed=st.integers(0, 10**6), four=st.booleans())
def test_moves_match_segment_oracle_and_undo(n, seed, four):
    rng = np.random.default_rng(seed)
    inst = random_instance(n, seed)
    t = atsp_to_tsp(inst)
    tour = random_tour(t, seed)
    order = tour.order()
    if four and n >= 5:
        ks = sorted(rng.choice(n, size=4, replace=False))
        move, expected = four_opt(order, n, *ks)
    else:
        ks = sorted(rng.choice(n, size=3, replace=False))
        move, expected = three_opt(order, n, *ks)
    before_nxt, before_len = tour.nxt.copy(), tour.length
    tour.apply_move(move)
    assert tour.rank_dirty
    assert tour.order() == expected  # order() reads nxt only
    tour.commit()
    assert tour.length == inst.tour_length(expected)
    tour.undo_move(move)
    tour.commit()
    assert np.array_equal(tour.nxt, before_nxt)
    assert tour.length == before_len


def test_apply_rejects_fixed_edge():
    tour = Tour.from_order([0, 1, 2, 3])
    n = 4
    bad = KOptMove(3, (1 + n, 1, 2, 3 + n, 3, 0 + n), 0)
    with pytest.raises(ValueError):
        tour.apply_move(bad)
    tour.commit()
    assert tour.order() == [0, 1, 2, 3]


def test_between_agrees_with_walk_after_moves():
    order = [0, 1, 2, 3, 4, 5, 6, 7]
    tour = Tour.from_order(order)
    move, _ = three_opt(order, 8, 1, 4, 6)
    tour.apply_move(move)
    with pytest.raises(TourInvariantError):
        tour.between(0, 1, 2)
    tour.commit()
    for a, b, c in itertools.permutations(range(16), 3):
        assert tour.between(a, b, c) == walk_between(tour, a, b, c)


def test_commit_on_clean_tour_keeps_rank():
    tour = Tour.from_order([0, 3, 1, 2])
    rank = tour.rank.copy()
    tour.commit()
    assert np.array_equal(rank, tour.rank)


def test_commit_detects_two_cycles():
    tour = Tour.from_order([0, 1, 2, 3])
    n = 4
    # split into (0 -> 1) and (2 -> 3) loops
    tour.nxt[1] = 0 + n
    tour.prv[0 + n] = 1
    tour.nxt[3] = 2 + n
    tour.prv[2 + n] = 3
    with pytest.raises(TourInvariantError):
        tour.commit()


def test_commit_detects_dummy_after_its_stop():
    nxt = np.array([2, 3, 1, 0])  # 0 -> 0' -> 1 -> 1' -> 0 puts dummies behind their stops
    prv = np.empty(4, dtype=np.int64)
    prv[nxt] = np.arange(4)
    with pytest.raises(TourInvariantError):
        Tour(nxt, prv)


def test_random_tour_deterministic_and_valid():
    a = random_tour(5, 42)
    b = random_tour(5, 42)
    assert a == b
    assert sorted(a.nodes()) == list(range(10))
    assert a.order()[0] == 0


def test_random_tour_covers_all_cyclic_orders():
    seen = collections.Counter(tuple(random_tour(4, s).order()) for s in range(1000))
    assert len(seen) == 6
    assert min(seen.values()) > 100
