import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from noarb_lab import finite_market as fm
from noarb_lab.errors import InternalConsistencyError, InvalidInput
from noarb_lab.market import CostModel
from oracles import brute_arbitrage_exists, brute_universal, lp_emm_exists

seeds = st.integers(0, 10**9)


def tree_from(seed, depth, rate=0.3, arity=(2, 3)):
    return fm.random_tree(random.Random(seed), depth, arity=arity, arbitrage_rate=rate,
                          p0=100, max_move=20)


def records(tree):
    return tree.to_records()


# --- tree structure ---------------------------------------------------------------


@pytest.mark.parametrize("recs, msg", [
    ([{"id": "a", "parent": None, "price": 1}, {"id": "b", "parent": "a", "price": 2}],
     "single child"),
    ([{"id": "a", "parent": None, "price": 1}, {"id": "a", "parent": None, "price": 2}],
     "duplicate"),
    ([{"id": "a", "parent": None, "price": 1}, {"id": "b", "parent": "z", "price": 2}],
     "unknown parent"),
    ([{"id": "a", "parent": None, "price": 0}], "non-positive"),
    ([{"id": "a", "parent": "b", "price": 1}, {"id": "b", "parent": "a", "price": 1}],
     "exactly one root"),
])
def test_malformed_trees_rejected(recs, msg):
    with pytest.raises(InvalidInput, match=msg):
        fm.MarketTree.from_records(recs)


def test_binomial_tree_layout():
    t = fm.binomial_tree(100, 1.2, 0.8, 2)
    assert t.preorder() == ["r", "rU", "rUU", "rUD", "rD", "rDU", "rDD"]
    assert t.nodes["rUD"].price == 96 and t.depth == 2
    assert len(t.leaf_paths()) == 4


# --- node measure -------------------------------------------------------------------


def test_binomial_closed_form():
    q, unique = fm.node_measure(F(100), (F(120), F(80)))
    assert q == (F(1, 2), F(1, 2)) and unique


@given(st.lists(st.integers(-30, 30), min_size=2, max_size=6))
def test_node_measure_is_a_martingale_measure_when_it_exists(moves):
    parent = F(100)
    kids = tuple(parent + m for m in moves)
    sol = fm.node_measure(parent, kids)
    straddles = min(moves) < 0 < max(moves)
    degenerate = all(m == 0 for m in moves)
    assert (sol is not None) == (straddles or degenerate)
    if sol:
        q, _ = sol
        assert all(x > 0 for x in q) and sum(q) == 1
        assert sum(x * c for x, c in zip(q, kids)) == parent


def test_degenerate_node_is_flagged_non_unique():
    t = fm.MarketTree.from_records([
        {"id": "r", "parent": None, "price": 5},
        {"id": "a", "parent": "r", "price": 5},
        {"id": "b", "parent": "r", "price": 5},
    ])
    res = fm.solve_emm(t)
    assert res.exists and res.non_unique == {"r"}


# --- duality against independent oracles -------------------------------------------


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 3))
def test_solve_emm_agrees_with_global_lp(seed, depth):
    tree = tree_from(seed, depth)
    res = fm.solve_emm(tree)
    assert res.exists == lp_emm_exists(records(tree))
    if res.exists:
        for ids in tree.leaf_paths():
            assert fm.path_probability(res.q, tree, ids) > 0
    else:
        assert res.certificate.verify(tree)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 2))
def test_detect_arbitrage_agrees_with_brute_force(seed, depth):
    tree = tree_from(seed, depth)
    assert (fm.detect_arbitrage(tree) is not None) == brute_arbitrage_exists(records(tree))


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 3))
def test_emm_makes_every_node_driftless(seed, depth):
    tree = tree_from(seed, depth, rate=0.0)
    q = fm.solve_emm(tree).q
    for nid in tree.internal_nodes():
        kids = tree.child_prices(nid)
        assert sum(a * b for a, b in zip(q[nid], kids)) == tree.nodes[nid].price


def test_certificate_on_one_sided_tree():
    t = fm.MarketTree.from_records([
        {"id": "r", "parent": None, "price": 10},
        {"id": "a", "parent": "r", "price": 10},
        {"id": "b", "parent": "r", "price": 12},
    ])
    cert = fm.detect_arbitrage(t)
    assert cert.node == "r" and cert.positions["r"] == 1
    assert cert.terminal_pnl == {"a": 0, "b": 2} and cert.verify(t)
    tampered = fm.ArbitrageCertificate(cert.positions, {"a": 0, "b": 3}, "r")
    assert not tampered.verify(t)


def test_solve_emm_raises_if_detector_misses(monkeypatch):
    t = tree_from(3, 1, rate=1.0)
    monkeypatch.setattr(fm, "detect_arbitrage", lambda tree: None)
    with pytest.raises(InternalConsistencyError):
        fm.solve_emm(t)


# --- universal search ---------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 2), st.sampled_from([F(0), F(1, 100)]))
def test_search_matches_brute_force_enumeration(seed, depth, c):
    tree = tree_from(seed, depth, rate=0.6)
    found = fm.search_universal(tree, [-1, 0, 1], CostModel(c))
    assert found == brute_universal(records(tree), [-1, 0, 1], c)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_search_respects_admissibility_bound(seed):
    tree = tree_from(seed, 2, rate=0.6)
    bound = F(3)
    found = fm.search_universal(tree, [-2, 0, 2], bound=bound)
    assert found == brute_universal(records(tree), [-2, 0, 2], bound=bound)


def test_search_finds_nothing_on_emm_trees():
    for seed in range(10):
        tree = fm.random_binomial_tree(random.Random(seed), 3)
        assert fm.search_universal(tree, [-1, 0, 1]) is None


def test_search_guards():
    tree = fm.binomial_tree(100, 1.2, 0.8, 2)
    with pytest.raises(InvalidInput, match="contain 0"):
        fm.search_universal(tree, [-1, 1])
    assert fm.search_universal(tree, [0]) is None
    deep = fm.binomial_tree(100, 1.2, 0.8, 5)
    assert fm.candidate_count(deep, range(-2, 3)) > fm.SEARCH_LIMIT
    with pytest.raises(InvalidInput, match="too large"):
        fm.search_universal(deep, range(-2, 3))


def test_search_refuses_contradiction(monkeypatch):
    t = tree_from(3, 1, rate=1.0)
    monkeypatch.setattr(fm, "solve_emm", lambda tree: fm.EmmResult(q={}))
    with pytest.raises(InternalConsistencyError):
        fm.search_universal(t, [-1, 0, 1])


def test_one_sided_and_symmetric_nodes():
    rising = fm.MarketTree.from_records([
        {"id": "r", "parent": None, "price": 100},
        {"id": "a", "parent": "r", "price": 121},
        {"id": "b", "parent": "r", "price": 110},
    ])
    res = fm.solve_emm(rising)
    assert not res.exists and res.certificate.positions == {"r": 1}
    sym = fm.binomial_tree(100, F(101, 100), F(99, 100), 1)
    assert fm.solve_emm(sym).q["r"] == (F(1, 2), F(1, 2))
    assert fm.search_universal(rising, [-1, 0, 1]) == {"r": 1}


def test_hidden_falling_node_is_localized():
    recs = fm.binomial_tree(100, F(6, 5), F(4, 5), 3).to_records()
    for r in recs:  # push both children of rDU below their parent (price 96)
        if r["id"] in ("rDUU", "rDUD"):
            r["price"] = F(90) if r["id"] == "rDUU" else F(80)
    tree = fm.MarketTree.from_records(recs)
    cert = fm.detect_arbitrage(tree)
    assert cert.node == "rDU" and cert.positions["rDU"] == -1
    assert sum(1 for w in cert.positions.values() if w) == 1
    assert cert.verify(tree)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 2))
def test_universal_table_implies_certificate(seed, depth):
    tree = tree_from(seed, depth, rate=0.7)
    if fm.search_universal(tree, [-1, 0, 1]) is not None:
        assert fm.detect_arbitrage(tree) is not None


def test_search_none_on_200_emm_trees():
    rng = random.Random(11)
    done = 0
    while done < 200:
        tree = fm.random_tree(rng, 1 + done % 3, arity=(2, 3), p0=100, max_move=20)
        assert fm.solve_emm(tree).exists
        assert fm.search_universal(tree, [-1, 0, 1]) is None
        done += 1
