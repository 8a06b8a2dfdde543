from fractions import Fraction as F

import pytest
from hypothesis import assume, given, settings, strategies as st

from noarb_lab.errors import InvalidInput
from noarb_lab.finite_market import binomial_tree
from noarb_lab.market import CostModel, PricePath, positions_of, time_reverse
from noarb_lab.wheel import (SCENARIOS, FailureMode, LatticePricer, Phase, WheelConfig,
                             check_transitions, emm_expectation, generate_scenario,
                             price_option, run_wheel, wheel_strategy)
from oracles import enumerated_option_value

PRICER = LatticePricer.from_factors(1.05, 0.95)
factors = st.tuples(st.integers(101, 150), st.integers(50, 99)).map(
    lambda ud: (F(ud[0], 100), F(ud[1], 100)))


# --- pricer -----------------------------------------------------------------------


def test_one_step_put_by_hand():
    p = LatticePricer.from_factors(1.2, 0.8)
    assert p.q == F(1, 2)
    assert price_option(p, "put", 100, 95) == F(15, 2)


@settings(max_examples=60, deadline=None)
@given(factors, st.integers(50, 150), st.integers(1, 6), st.sampled_from(["put", "call"]))
def test_backward_induction_matches_path_enumeration(ud, strike, n, kind):
    up, down = ud
    p = LatticePricer.from_factors(up, down)
    assert p.value(kind, 100, strike, n) == enumerated_option_value(kind, 100, strike, up, down, n)


@given(factors, st.integers(1, 300), st.integers(1, 8))
def test_put_call_parity_at_zero_rate(ud, strike, n):
    p = LatticePricer.from_factors(*ud)
    assert p.value("call", 100, strike, n) - p.value("put", 100, strike, n) == 100 - strike


def test_pricer_validation():
    with pytest.raises(InvalidInput):
        LatticePricer(F(12, 10), F(8, 10), F(1, 3))
    with pytest.raises(InvalidInput):
        LatticePricer.from_factors(0.9, 0.8)
    with pytest.raises(InvalidInput):
        PRICER.value("straddle", 100, 100)
    with pytest.raises(InvalidInput):
        PRICER.value("put", 100, -1)
    assert PRICER.value("put", 100, 0) == 0


def test_pricer_from_tree_requires_constant_factors():
    assert LatticePricer.from_tree(binomial_tree(100, 1.2, 0.8, 3)).q == F(1, 2)


# --- state machine ------------------------------------------------------------------


def test_config_strike_rounding():
    cfg = WheelConfig()
    assert cfg.put_strike(F("100.07")) == F("95.06")
    assert cfg.call_strike(F("93.1")) == F("97.76")
    with pytest.raises(InvalidInput):
        WheelConfig(pricing="fixed")
    with pytest.raises(InvalidInput):
        WheelConfig(put_strike_ratio=1.1)


def test_run_guards():
    cfg = WheelConfig()
    with pytest.raises(InvalidInput, match="LatticePricer"):
        run_wheel(cfg, generate_scenario("flat"))
    with pytest.raises(InvalidInput, match="tenor"):
        run_wheel(cfg, PricePath([100, 101]), PRICER)
    with pytest.raises(InvalidInput, match="capital"):
        run_wheel(WheelConfig(capital=1000), generate_scenario("flat"), PRICER)


def test_depth_two_leaf_pnl_by_hand():
    # put K = 95 over two steps of u = 1.2, d = 0.8: premium 7.75 per share
    tree = binomial_tree(100, 1.2, 0.8, 2)
    cfg = WheelConfig(expiry_steps=2, capital=10**6)
    pricer = LatticePricer.from_tree(tree)
    pnl = [run_wheel(cfg, tree.price_path(ids), pricer).pnl for ids in tree.leaf_paths()]
    assert pnl == [775, 775, 775, -2325]
    assert emm_expectation(cfg, tree, pricer) == 0


def test_fixed_premium_expectation_by_hand():
    tree = binomial_tree(100, 1.2, 0.8, 1)
    cfg = WheelConfig(expiry_steps=1, pricing="fixed", fixed_premium=10, capital=10**6)
    # +1000 on the up leaf, 1000 - 15 * 100 on the down leaf
    assert emm_expectation(cfg, tree, LatticePricer.from_tree(tree)) == 250


def test_emm_expectation_rejects_mismatched_pricer():
    tree = binomial_tree(100, 1.2, 0.8, 2)
    with pytest.raises(InvalidInput, match="does not match"):
        emm_expectation(WheelConfig(expiry_steps=2, capital=10**6), tree, PRICER)


prices = st.lists(st.integers(5000, 15000).map(lambda n: F(n, 100)), min_size=6, max_size=30)


@settings(max_examples=60, deadline=None)
@given(prices, st.integers(1, 5), st.sampled_from([0, F(1, 100)]))
def test_state_machine_invariants(ps, tenor, c):
    path = PricePath(ps)
    assume(path.horizon >= tenor)
    run = run_wheel(WheelConfig(expiry_steps=tenor), path, PRICER, CostModel(c))
    assert check_transitions(run.state_trace)
    assert run.pnl == run.ledger.wealth[-1] == run.steps[-1].wealth
    assert run.ledger.wealth[0] == 0
    assert all(s.shares_held in (0, 100) for s in run.state_trace)
    assert len(run.call_aways) <= len(run.assignments)
    if run.classification is FailureMode.III_BREAKOUT:
        assert run.call_aways


def test_phase_cycle_on_breakout():
    run = run_wheel(WheelConfig(), generate_scenario("breakout"), PRICER)
    phases = [s.phase for s in run.state_trace]
    assert phases[0] is Phase.SHORT_PUT and Phase.CALLED_AWAY in phases
    i = phases.index(Phase.ASSIGNED_LONG)
    assert phases[i + 1] is Phase.SHORT_CALL


def test_costs_reduce_wheel_pnl():
    path = generate_scenario("flat")
    assert run_wheel(WheelConfig(), path, PRICER, CostModel(0.01)).pnl < \
        run_wheel(WheelConfig(), path, PRICER).pnl


# --- scenarios and classifier ----------------------------------------------------------


@pytest.mark.parametrize("kind, mode", [
    ("crash", FailureMode.I_CRASH), ("bleed", FailureMode.II_BLEED),
    ("breakout", FailureMode.III_BREAKOUT), ("ruin", FailureMode.IV_RUIN),
    ("rally", FailureMode.NONE), ("flat", FailureMode.NONE),
])
def test_canonical_classification(kind, mode):
    assert run_wheel(WheelConfig(), generate_scenario(kind), PRICER).classification is mode


def test_crash_is_reversed_rally_and_jitter_is_seeded():
    assert generate_scenario("crash") == time_reverse(generate_scenario("rally"))
    a = generate_scenario("bleed", seed=3, jitter_ticks=5)
    assert a == generate_scenario("bleed", seed=3, jitter_ticks=5) != generate_scenario("bleed")
    with pytest.raises(InvalidInput):
        generate_scenario("moon")
    assert set(SCENARIOS) >= {"crash", "bleed", "breakout", "ruin"}


def test_breakout_opportunity_cost():
    path = generate_scenario("breakout")
    run = run_wheel(WheelConfig(), path, PRICER)
    k_call = run.call_aways[-1][1]
    assert run.opportunity_cost == (path.prices[-1] - k_call) * 100 == 3025


# --- wheel as a position strategy -------------------------------------------------------


def test_wheel_strategy_positions_are_bounded_and_deterministic():
    s = wheel_strategy(WheelConfig(), PRICER)
    path = generate_scenario("bleed")
    w = positions_of(s, path)
    assert w == positions_of(s, path)
    assert all(abs(x) <= 100 for x in w)
    # short put delta is positive exposure before any assignment
    assert w[0] > 0


def test_zero_strike_call_is_worth_the_spot():
    assert PRICER.value("call", F("123.45"), 0, 7) == F("123.45")
