"""Preference-family behavior: values, costs, inverses, utilities, WTP."""

import math

import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from pacing import DomainError, InputError, RangeError
from pacing.agents import (
    AgentType,
    Identity,
    Instance,
    Linear,
    PiecewiseLinearConcave,
    PiecewiseLinearConvex,
    Power,
    PowerCost,
    budgeted,
    cost_derivative,
    cost_inverse,
    eval_cost,
    eval_valuation,
    linear,
    utility,
    utility_from_prices,
    valuation_derivative,
    willingness_to_pay,
)
from pacing.numerics import INF

# ---------------------------------------------------------------------------
# strategies
# ---------------------------------------------------------------------------


# dyadic widths/slopes keep every breakpoint arithmetic exact in binary
_eighths = st.integers(1, 24).map(lambda k: k / 8.0)
_slopes8 = st.integers(0, 40).map(lambda k: k / 8.0)


@st.composite
def pwl_concave_valuations(draw):
    k = draw(st.integers(1, 4))
    widths = draw(st.lists(_eighths, min_size=k, max_size=k))
    slopes = sorted(draw(st.lists(_slopes8, min_size=k, max_size=k)), reverse=True)
    pts = [(0.0, 0.0)]
    for wd, s in zip(widths, slopes):
        q0, y0 = pts[-1]
        pts.append((q0 + wd, y0 + s * wd))
    return PiecewiseLinearConcave(tuple(pts))


@st.composite
def pwl_convex_costs(draw, min_slope=0):
    k = draw(st.integers(1, 4))
    widths = draw(st.lists(_eighths, min_size=k, max_size=k))
    raw = st.integers(min_slope, 40).map(lambda k: k / 8.0)
    slopes = sorted(draw(st.lists(raw, min_size=k, max_size=k)))
    pts = [(0.0, 0.0)]
    for wd, s in zip(widths, slopes):
        t0, y0 = pts[-1]
        pts.append((t0 + wd, y0 + s * wd))
    return PiecewiseLinearConvex(tuple(pts))


valuations = st.one_of(
    st.builds(Linear, st.floats(0.0, 50.0)),
    st.builds(Power, st.floats(0.1, 10.0), st.floats(0.1, 1.0)),
    pwl_concave_valuations(),
)

costs = st.one_of(
    st.just(Identity()),
    st.builds(PowerCost, st.floats(0.1, 10.0), st.floats(1.0, 4.0)),
    pwl_convex_costs(),
)

# strictly increasing costs, where the inverse is a true inverse
invertible_costs = st.one_of(
    st.just(Identity()),
    st.builds(PowerCost, st.floats(0.1, 10.0), st.floats(1.0, 4.0)),
    pwl_convex_costs(min_slope=1),
)


# ---------------------------------------------------------------------------
# pinned evaluations
# ---------------------------------------------------------------------------


def test_linear_valuation_scales():
    assert eval_valuation(Linear(2.0), 0.5) == 1.0


def test_power_valuation_sqrt():
    assert eval_valuation(Power(1.0, 0.5), 4.0) == 2.0


@pytest.mark.parametrize(
    "fn",
    [Linear(3.0), Power(2.0, 0.7), PiecewiseLinearConcave(((0, 0), (1, 2), (2, 3)))],
)
def test_valuation_of_zero_clicks_is_zero(fn):
    assert eval_valuation(fn, 0.0) == 0.0


def test_linear_derivative_is_constant():
    assert valuation_derivative(Linear(3.0), 0.7) == 3.0


def test_power_derivative():
    assert abs(valuation_derivative(Power(1.0, 0.5), 1.0) - 0.5) < 1e-15


def test_pwl_valuation_uses_right_slope_at_breakpoint():
    fn = PiecewiseLinearConcave(((0, 0), (1, 2), (2, 3)))
    assert valuation_derivative(fn, 1.0) == 1.0
    assert valuation_derivative(fn, 0.0) == 2.0


def test_identity_cost_round_numbers():
    c = Identity()
    assert eval_cost(c, 0.4) == 0.4
    assert cost_derivative(c, 0.4) == 1.0
    assert cost_inverse(c, 0.4) == 0.4


def test_power_cost_inverse_closed_form():
    assert cost_inverse(PowerCost(1.0, 2.0), 4.0) == 2.0


def test_pwl_cost_second_segment():
    c = PiecewiseLinearConvex(((0, 0), (1, 1), (2, 3)))
    assert eval_cost(c, 1.5) == 2.0
    assert cost_derivative(c, 1.0) == 2.0  # right slope at the kink


def test_pwl_cost_inverse_resolves_flat_prefix_to_far_end():
    c = PiecewiseLinearConvex(((0, 0), (1, 0), (2, 2)))
    assert abs(cost_inverse(c, 0.0) - 1.0) < 1e-9


def test_zero_cost_inverse_raises_above_range():
    c = PiecewiseLinearConvex(((0, 0), (1, 0)))
    with pytest.raises(RangeError):
        cost_inverse(c, 0.5)


# ---------------------------------------------------------------------------
# input validation
# ---------------------------------------------------------------------------


def test_negative_clicks_rejected():
    with pytest.raises(DomainError):
        eval_valuation(Linear(1.0), -0.1)
    with pytest.raises(DomainError):
        valuation_derivative(Power(1.0, 0.5), -1.0)


def test_bad_families_rejected():
    with pytest.raises(InputError):
        Power(1.0, 1.5)  # convex, not allowed as a valuation
    with pytest.raises(InputError):
        PowerCost(1.0, 0.5)  # concave, not allowed as a cost
    with pytest.raises(InputError):
        PiecewiseLinearConcave(((0, 0), (1, 1), (2, 3)))  # increasing slopes
    with pytest.raises(InputError):
        PiecewiseLinearConvex(((0, 0), (1, 2), (2, 3)))  # decreasing slopes
    with pytest.raises(InputError):
        PiecewiseLinearConcave(((0.5, 0.0), (1, 1)))  # must start at the origin


def test_free_unlimited_money_rejected():
    with pytest.raises(InputError):
        AgentType(Linear(1.0), PiecewiseLinearConvex(((0, 0), (1, 0))), INF)


def test_instance_shape_checks():
    with pytest.raises(InputError):
        Instance((budgeted(1, 1),), ((0.5, 0.2), (0.1, 0.1)))
    with pytest.raises(InputError):
        Instance((budgeted(1, 1),), ((-0.5,),))


# ---------------------------------------------------------------------------
# utilities
# ---------------------------------------------------------------------------


def test_budgeted_utility_within_budget():
    a = budgeted(2.0, 0.5)
    assert utility(a, [1.0], [1.0], 0.5) == 1.5


def test_utility_is_minus_inf_beyond_budget():
    a = budgeted(2.0, 0.5)
    assert utility(a, [1.0], [1.0], 0.6) == -INF
    assert utility_from_prices(a, 0.6, [1.0], [1.0]) == -INF


def test_zero_allocation_zero_spend():
    a = budgeted(2.0, 0.5)
    assert utility(a, [0.0], [1.0], 0.0) == 0.0
    assert utility_from_prices(a, 0.0, [1.0], [1.0]) == 0.0


def test_utility_from_prices_linear_agent():
    a = linear(2.0)
    assert abs(utility_from_prices(a, 0.7, [1.0], [1.0]) - 0.7) < 1e-15


def test_utility_from_prices_zero_price_domain_error():
    a = linear(2.0)
    with pytest.raises(DomainError):
        utility_from_prices(a, 0.1, [0.0], [1.0])
    # spending nothing is still fine
    assert utility_from_prices(a, 0.0, [0.0], [1.0]) == 0.0


def test_wtp_budget_cap():
    assert willingness_to_pay(budgeted(100.0, 1.0), 0.01) == 1.0


def test_wtp_unbudgeted_linear():
    assert abs(willingness_to_pay(linear(1.0), 0.99) - 0.99) < 1e-15


def test_wtp_of_nothing_is_zero():
    assert willingness_to_pay(budgeted(3.0, 2.0), 0.0) == 0.0


def test_wtp_with_bounded_cost_falls_back_to_budget():
    a = AgentType(Linear(5.0), PiecewiseLinearConvex(((0, 0), (1, 1), (2, 2))), 7.0)
    # cost tops out at slope 1: disutility can never reach V(10) = 50
    assert willingness_to_pay(a, 10.0) == 7.0


# ---------------------------------------------------------------------------
# property tests
# ---------------------------------------------------------------------------


@given(valuations, st.floats(0.0, 10.0), st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_valuation_concavity_chords(fn, a, b, c):
    q1, q2, q3 = sorted((a, b, c))
    if q3 - q1 < 1e-9:
        return
    chord = ((q3 - q2) * fn.value(q1) + (q2 - q1) * fn.value(q3)) / (q3 - q1)
    scale = max(1.0, abs(fn.value(q3)))
    assert fn.value(q2) >= chord - 1e-12 * scale


@given(valuations, st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_valuation_monotone(fn, a, b):
    lo, hi = min(a, b), max(a, b)
    assert fn.value(hi) >= fn.value(lo) - 1e-12


@given(
    st.one_of(
        st.builds(Linear, st.floats(0.0, 50.0)),
        st.builds(Power, st.floats(0.1, 10.0), st.floats(0.3, 1.0)),
    ),
    st.floats(0.5, 8.0),
)
def test_derivative_matches_finite_difference(fn, q):
    h = 1e-6
    fd = (fn.value(q + h) - fn.value(q - h)) / (2 * h)
    assert abs(fn.slope(q) - fd) <= 1e-5


@given(valuations, st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_slope_non_increasing(fn, a, b):
    lo, hi = min(a, b), max(a, b)
    assert fn.slope(hi) <= fn.slope(lo) + 1e-12


@settings(max_examples=1000)
@given(invertible_costs, st.floats(0.0, 20.0))
def test_cost_inverse_round_trip(cost, t):
    back = cost_inverse(cost, eval_cost(cost, t))
    assert abs(back - t) <= 1e-9 * max(1.0, t)


@given(costs, st.floats(0.0, 20.0), st.floats(0.0, 20.0))
def test_marginal_cost_non_decreasing(cost, a, b):
    lo, hi = min(a, b), max(a, b)
    assert cost_derivative(cost, hi) >= cost_derivative(cost, lo) - 1e-12


@given(valuations, invertible_costs, st.floats(0.0, 5.0), st.floats(0.0, 10.0))
def test_wtp_caps(val, cost, w, q):
    agent = AgentType(val, cost, w)
    wtp = willingness_to_pay(agent, q)
    assert wtp <= w + 1e-12
    assert wtp <= cost_inverse(cost, val.value(q)) + 1e-9 * max(1.0, wtp)


@given(valuations, invertible_costs, st.floats(0.0, 5.0), st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_wtp_non_decreasing_in_clicks(val, cost, w, a, b):
    agent = AgentType(val, cost, w)
    lo, hi = min(a, b), max(a, b)
    assert willingness_to_pay(agent, hi) >= willingness_to_pay(agent, lo) - 1e-12


@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(0.1, 3.0))
def test_utility_from_prices_agrees_with_explicit_allocation(v, price, w):
    # a budgeted linear agent buying x at a single posted price
    agent = budgeted(v, w)
    t = min(w, price)  # one full item at most
    x = t / price
    assert math.isclose(
        utility_from_prices(agent, t, [price], [1.0]),
        utility(agent, [x], [1.0], t),
        abs_tol=1e-12,
    )
