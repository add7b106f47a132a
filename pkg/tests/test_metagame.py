"""Strategic layer: exact best responses, Nash verification, profile-grid
search, the stable-share price ranges with their constructors, and the
mixed-profile deviation bound.

Most pinned numbers come from two-agent markets small enough to solve by
hand; the quasilinear pair with values (1, 0.7) reappears throughout
because every regime of the theory is visible on it.
"""

import math
import random

import pytest

from pacing.agents import (
    AgentType,
    Identity,
    Instance,
    Linear,
    Power,
    budgeted,
    linear,
    single_item_instance,
)
from pacing.errors import InputError, SizeError
from pacing.fppe import Message, profile, solve_fppe_single_item
from pacing.metagame import (
    AllocBounds,
    MessageSpace,
    MixedProfile,
    alloc_bounds,
    best_response_single_item,
    construct_high_price_eq,
    construct_low_price_eq,
    default_strategy_grid,
    grid_epsilon_pne_search,
    mixed_deviation_bound_check,
    price_intervals,
    solve_pure_nash_single_item,
    utility_of_profile,
    verify_pure_nash,
)
from pacing.numerics import INF
from pacing.sampling import (
    random_message_profile,
    random_single_item_instance,
)
from pacing.welfare import optimal_liquid_welfare


def quasilinear_pair(v2: float = 0.7) -> Instance:
    return single_item_instance([linear(1.0), linear(v2)])


def mutual_shade(v1: float, v2: float) -> float:
    # the budget fraction at which both all-in reports are simultaneously
    # stationary: each agent spends g·v_i against the other's g·v_other
    return v1 * v2 / (v1 + v2) ** 2


# ---------------------------------------------------------------------------
# utilities of reported profiles
# ---------------------------------------------------------------------------


def test_winner_pays_her_bid_level():
    inst = quasilinear_pair()
    prof = profile((1.0, 0.7), (0.7, 0.7))
    assert utility_of_profile(inst, prof, 0) == pytest.approx(0.3, abs=1e-12)
    assert utility_of_profile(inst, prof, 1) == 0.0


def test_truthful_quasilinear_reports_earn_nothing():
    inst = single_item_instance([linear(2.0), linear(1.0)])
    prof = profile((2.0, INF), (1.0, INF))
    # the price is bid up to the winner's own value, wiping out her surplus
    assert utility_of_profile(inst, prof, 0) == 0.0
    assert utility_of_profile(inst, prof, 1) == 0.0


def test_silent_market_leaves_everyone_at_zero():
    inst = quasilinear_pair()
    prof = profile((0.0, 0.0), (0.0, 0.0))
    assert utility_of_profile(inst, prof, 0) == 0.0
    assert utility_of_profile(inst, prof, 1) == 0.0


# ---------------------------------------------------------------------------
# exact best responses
# ---------------------------------------------------------------------------


def test_best_response_against_an_all_in_opponent():
    inst = quasilinear_pair()
    prof = profile((1.0, 0.7), (0.7, 0.7))
    br = best_response_single_item(inst, prof, 0)
    assert br.attained
    assert br.message.v == INF
    assert br.message.w == pytest.approx(0.7, abs=1e-9)
    assert br.utility == pytest.approx(0.3, abs=1e-12)


def test_best_response_recovers_the_mutual_shade_budget():
    g = mutual_shade(1.0, 0.7)
    inst = quasilinear_pair()
    prof = profile((1.0, g * 1.0), (0.7, g * 0.7))
    br = best_response_single_item(inst, prof, 0)
    assert br.message.w == pytest.approx(g, abs=1e-6)
    assert br.utility == pytest.approx(0.34602076124567477, abs=1e-9)


def test_unopposed_value_is_a_supremum_not_a_maximum():
    inst = single_item_instance([linear(1.0), linear(0.4)])
    prof = profile((1.0, 0.5), (INF, 0.0))
    br = best_response_single_item(inst, prof, 0)
    assert not br.attained
    assert br.message.w == 0.0
    assert br.utility == 1.0
    assert "w̃ → 0⁺" in br.witness


def test_value_only_winner_shades_down_to_the_runner_up():
    inst = quasilinear_pair()
    prof = profile((1.0, INF), (0.7, INF))
    br = best_response_single_item(inst, prof, 0, MessageSpace.VALUE_ONLY)
    assert br.attained
    assert br.message.w == INF
    assert br.message.v == pytest.approx(0.7, abs=1e-9)
    assert br.utility == pytest.approx(0.3, abs=1e-9)


def test_value_only_loser_stays_out():
    inst = quasilinear_pair()
    prof = profile((1.0, INF), (0.7, INF))
    br = best_response_single_item(inst, prof, 1, MessageSpace.VALUE_ONLY)
    assert br.utility == 0.0


def test_known_value_reports_pin_the_true_value():
    inst = single_item_instance([budgeted(0.8, 0.5), linear(0.6)])
    prof = profile((0.8, 0.5), (0.6, INF))
    br = best_response_single_item(
        inst, prof, 0, MessageSpace.BUDGET_ONLY_KNOWN_VALUE
    )
    assert br.message.v == 0.8


def test_known_value_needs_a_linear_valuation():
    inst = single_item_instance([AgentType(Power(1.0, 0.5), Identity(), INF), linear(0.6)])
    prof = profile((1.0, 1.0), (0.6, INF))
    with pytest.raises(InputError):
        best_response_single_item(inst, prof, 0, MessageSpace.BUDGET_ONLY_KNOWN_VALUE)


def test_best_response_rejects_several_items():
    inst = Instance([budgeted(1.0, 0.5), budgeted(1.0, 0.5)], [[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(InputError):
        best_response_single_item(inst, profile((1.0, 0.5), (1.0, 0.5)), 0)


def test_exact_best_response_dominates_a_dense_message_grid():
    rng = random.Random(7)
    budgets = [j * 0.02 for j in range(64)] + [0.9, 1.7, 2.6, 4.0]
    values = [j * 0.05 for j in range(48)] + [INF]
    for _ in range(40):
        inst = random_single_item_instance(rng, 2, 4)
        prof = random_message_profile(rng, inst.n)
        i = rng.randrange(inst.n)
        br = best_response_single_item(inst, prof, i)
        for v in values:
            for w in budgets if v == INF else [INF] + budgets:
                u = utility_of_profile(inst, prof.replace(i, Message(v, w)), i)
                assert br.utility >= u - 1e-7


def test_restricting_the_message_space_never_helps():
    rng = random.Random(11)
    for _ in range(25):
        inst = random_single_item_instance(rng, 2, 4)
        prof = random_message_profile(rng, inst.n)
        i = rng.randrange(inst.n)
        full = best_response_single_item(inst, prof, i)
        vo = best_response_single_item(inst, prof, i, MessageSpace.VALUE_ONLY)
        bo = best_response_single_item(inst, prof, i, MessageSpace.BUDGET_ONLY)
        assert full.utility >= vo.utility - 1e-9
        assert full.utility >= bo.utility - 1e-9
        if isinstance(inst.agents[i].valuation, Linear):
            kv = best_response_single_item(
                inst, prof, i, MessageSpace.BUDGET_ONLY_KNOWN_VALUE
            )
            assert full.utility >= kv.utility - 1e-9


def test_any_report_is_money_equivalent_to_its_payment():
    # whatever (ṽ, w̃) an agent sends, resending (∞, final payment) leaves
    # every agent's price, allocation, and utility untouched
    rng = random.Random(7)
    for _ in range(200):
        inst = random_single_item_instance(rng, 2, 5)
        prof = random_message_profile(rng, inst.n)
        col = [row[0] for row in inst.ctr]
        out = solve_fppe_single_item(prof, col)
        i = rng.randrange(inst.n)
        swapped = prof.replace(i, Message(INF, out.payments[i]))
        for k in range(inst.n):
            u = utility_of_profile(inst, prof, k)
            u_swapped = utility_of_profile(inst, swapped, k)
            assert u_swapped == pytest.approx(u, abs=1e-8)


# ---------------------------------------------------------------------------
# Nash verification
# ---------------------------------------------------------------------------


def test_the_efficient_profile_is_a_pure_equilibrium():
    inst = quasilinear_pair()
    report = verify_pure_nash(inst, profile((1.0, 0.7), (0.7, 0.7)), 1e-7)
    assert report.is_eps_nash
    assert report.gain == pytest.approx(0.0, abs=1e-12)
    assert report.method == "exact_single_item"
    assert report.grid_points is None


def test_the_shaded_profile_is_a_pure_equilibrium():
    g = mutual_shade(1.0, 0.7)
    inst = quasilinear_pair()
    report = verify_pure_nash(inst, profile((1.0, g * 1.0), (0.7, g * 0.7)), 1e-7)
    assert report.is_eps_nash
    assert report.gain <= 1e-12


def test_shading_breaks_down_when_values_spread_too_far():
    # with v2 = 0.5 the strong agent prefers jumping to the rival's value
    # plateau over the mutual-shade split, and pockets exactly 1/18 more
    g = mutual_shade(1.0, 0.5)
    inst = quasilinear_pair(0.5)
    report = verify_pure_nash(inst, profile((1.0, g), (0.5, g * 0.5)), 1e-7)
    assert not report.is_eps_nash
    assert report.worst_agent == 0
    assert report.worst_deviation.v == INF
    assert report.worst_deviation.w == pytest.approx(0.5, abs=1e-6)
    assert report.gain == pytest.approx(1.0 / 18.0, abs=1e-9)


def test_shading_gain_at_a_narrower_spread():
    g = mutual_shade(1.0, 0.6)
    inst = quasilinear_pair(0.6)
    report = verify_pure_nash(inst, profile((1.0, g), (0.6, g * 0.6)), 1e-7)
    assert not report.is_eps_nash
    assert report.gain == pytest.approx(0.009375, abs=1e-9)


def test_default_tolerance_for_exact_verification():
    report = verify_pure_nash(quasilinear_pair(), profile((1.0, 0.7), (0.7, 0.7)))
    assert report.eps == 1e-7


def test_verification_requires_one_message_per_agent():
    with pytest.raises(InputError):
        verify_pure_nash(quasilinear_pair(), profile((1.0, 0.7)), 1e-6)


def test_several_items_fall_back_to_a_deviation_sweep():
    inst = Instance([budgeted(1.0, 0.5), budgeted(1.0, 0.5)], [[1.0, 1.0], [1.0, 1.0]])
    wasteful = verify_pure_nash(inst, profile((INF, 10.0), (INF, 10.0)), 1e-4)
    assert wasteful.method == "grid_sweep"
    assert wasteful.grid_points > 0
    assert not wasteful.is_eps_nash
    assert wasteful.gain > 0.0

    modest = verify_pure_nash(inst, profile((INF, 0.5), (INF, 0.5)), 1e-4)
    assert modest.method == "grid_sweep"
    assert modest.is_eps_nash


# ---------------------------------------------------------------------------
# grid search over reported profiles
# ---------------------------------------------------------------------------


def test_grid_search_finds_the_efficient_equilibrium():
    inst = quasilinear_pair()
    extras = (Message(1.0, 0.7), Message(0.7, 0.7), Message(INF, 0.7))
    found = grid_epsilon_pne_search(inst, default_strategy_grid() + extras, 1e-3)
    assert found.profiles_checked == 203 * 203
    assert found.grid_shape == (203, 203)
    assert found.min_max_gain == 0.0
    assert profile((1.0, 0.7), (0.7, 0.7)) in found.equilibria
    assert found.tightest_profile in found.equilibria
    assert len(found.equilibria) == 369


def test_grid_search_with_one_agent():
    inst = single_item_instance([linear(1.0)])
    grid = [Message(INF, 0.05), Message(INF, 0.5), Message(0.25, 0.05)]
    found = grid_epsilon_pne_search(inst, grid, 1e-3)
    # both cheap reports buy the item for 0.05; the mid-budget one overpays
    assert found.min_max_gain == 0.0
    assert len(found.equilibria) == 2


def test_grid_search_accepts_per_agent_grids():
    inst = quasilinear_pair()
    grids = [[Message(INF, 0.2), Message(INF, 0.4)], [Message(0.6, INF)]]
    found = grid_epsilon_pne_search(inst, grids, 0.5)
    assert found.grid_shape == (2, 1)
    assert found.profiles_checked == 2


def test_grid_search_refuses_oversized_products():
    inst = Instance([linear(1.0)] * 3, [[1.0]] * 3)
    with pytest.raises(SizeError):
        grid_epsilon_pne_search(inst, default_strategy_grid(), 1e-3)


# ---------------------------------------------------------------------------
# stable-share bounds
# ---------------------------------------------------------------------------


def test_share_bounds_for_a_quasilinear_agent():
    assert alloc_bounds(linear(1.0), 0.25) == pytest.approx((0.75, 1.0), abs=1e-9)
    assert alloc_bounds(linear(1.0), 1.25) == pytest.approx((0.0, 0.0), abs=1e-9)


def test_share_bounds_cap_at_the_budget():
    y, z = alloc_bounds(budgeted(1.0, 0.3), 0.5)
    assert y == pytest.approx(0.5, abs=1e-9)
    assert z == pytest.approx(0.6, abs=1e-9)


def test_share_bounds_match_a_scan_for_curved_value():
    agent = AgentType(Power(1.0, 0.5), Identity(), INF)
    y, z = alloc_bounds(agent, 0.25)
    scan = next(
        k / 40000.0
        for k in range(1, 40001)
        if 0.5 * (k / 40000.0) ** -0.5 * (1.0 - k / 40000.0) <= 0.25
    )
    assert y == pytest.approx(scan, abs=5e-5)
    assert z == 1.0  # marginal value 0.5·x^{-1/2} never drops below 0.25


def test_share_bounds_scale_with_the_click_rate():
    inst = Instance([budgeted(1.0, 0.3)], [[0.5]])
    bounds = AllocBounds.at_price(inst, 0.25)
    assert bounds.y == pytest.approx((0.5,), abs=1e-9)
    assert bounds.z == pytest.approx((1.0,), abs=1e-9)


def test_share_bounds_need_a_positive_price():
    with pytest.raises(InputError):
        alloc_bounds(linear(1.0), 0.0)


def test_share_bounds_shrink_as_the_price_rises():
    rng = random.Random(23)
    from pacing.sampling import random_agent

    for _ in range(40):
        agent = random_agent(rng)
        prev_y, prev_z = None, None
        for p in (0.05, 0.2, 0.5, 1.0, 2.0, 5.0, 20.0):
            y, z = alloc_bounds(agent, p)
            assert 0.0 <= y <= z <= 1.0
            if prev_y is not None:
                assert y <= prev_y + 1e-7
                assert z <= prev_z + 1e-7
            prev_y, prev_z = y, z


# ---------------------------------------------------------------------------
# equilibrium price ranges
# ---------------------------------------------------------------------------


def test_low_range_of_the_quasilinear_pair_is_one_point():
    p_low, p_high = price_intervals(quasilinear_pair())
    assert p_low.lo == pytest.approx(0.7 / 1.7, abs=1e-6)
    assert p_low.hi == pytest.approx(0.7 / 1.7, abs=1e-6)
    assert p_high.lo == pytest.approx(0.7 / 1.7, abs=1e-6)
    assert p_high.hi == pytest.approx(1.0, abs=1e-6)
    assert not p_high.hi_open
    assert p_high.contains(1.0)


def test_ranges_for_a_budget_capped_heavyweight():
    inst = single_item_instance([budgeted(100.0, 1.0), budgeted(1.0, INF)])
    p_low, p_high = price_intervals(inst)
    assert p_low.lo == pytest.approx(100.0 / 101.0, abs=1e-6)
    assert p_low.hi == pytest.approx(100.0 / 101.0, abs=1e-6)
    assert p_high.hi == pytest.approx(1.0, abs=1e-6)


def test_ranges_for_two_modest_budgets():
    inst = single_item_instance([budgeted(1.0, 0.3), budgeted(0.8, 0.25)])
    p_low, p_high = price_intervals(inst)
    assert p_low.lo == pytest.approx(4.0 / 9.0, abs=1e-6)
    assert p_low.hi == pytest.approx(4.0 / 9.0, abs=1e-6)
    # above 0.55 the pooled budgets can no longer clear the item
    assert p_high.hi == pytest.approx(0.55, abs=1e-6)


def test_a_lone_agent_has_no_positive_clearing_price():
    p_low, p_high = price_intervals(single_item_instance([linear(0.9)]))
    assert p_low.is_empty
    assert (p_low.lo, p_low.hi, p_low.lo_open, p_low.hi_open) == (0.0, 0.0, True, True)
    assert p_high.lo == 0.0 and p_high.lo_open
    assert p_high.hi == pytest.approx(0.9, abs=1e-6)
    assert not p_high.hi_open


def test_worthless_markets_have_empty_ranges():
    p_low, p_high = price_intervals(single_item_instance([linear(0.0), linear(0.0)]))
    assert p_low.is_empty
    assert p_high.is_empty


def test_low_range_sits_inside_high_range():
    rng = random.Random(29)
    for _ in range(15):
        inst = random_single_item_instance(rng, 2, 5)
        p_low, p_high = price_intervals(inst)
        if p_low.is_empty:
            continue
        assert p_high.lo <= p_low.lo + 1e-6
        assert p_low.hi <= p_high.hi + 1e-6
        assert p_high.contains(p_low.lo, tol=1e-6)
        assert p_high.contains(p_low.hi, tol=1e-6)


# ---------------------------------------------------------------------------
# equilibrium constructors
# ---------------------------------------------------------------------------


def test_low_constructor_reproduces_the_mutual_shade_budgets():
    inst = quasilinear_pair()
    p_low, _ = price_intervals(inst)
    prof = construct_low_price_eq(inst, p_low.lo)
    g = mutual_shade(1.0, 0.7)
    assert [m.v for m in prof] == [INF, INF]
    assert prof.messages[0].w == pytest.approx(g * 1.0, abs=1e-6)
    assert prof.messages[1].w == pytest.approx(g * 0.7, abs=1e-6)


def test_low_constructor_rejects_prices_outside_the_range():
    with pytest.raises(InputError):
        construct_low_price_eq(quasilinear_pair(), 0.6)


def test_high_constructor_at_the_runner_up_value():
    prof = construct_high_price_eq(quasilinear_pair(), 0.7)
    assert prof.messages[0] == Message(INF, 0.7)
    assert prof.messages[1] == Message(0.7, INF)


def test_high_constructor_lets_the_heavyweight_take_everything():
    inst = single_item_instance([budgeted(100.0, 1.0), budgeted(1.0, INF)])
    prof = construct_high_price_eq(inst, 1.0)
    assert prof.messages[0] == Message(INF, 1.0)
    assert prof.messages[1] == Message(1.0, INF)
    out = solve_fppe_single_item(prof)
    assert out.allocation == ((1.0,), (0.0,))
    assert out.prices[0] == pytest.approx(1.0, abs=1e-9)


def test_high_constructor_returns_none_without_a_price_setter():
    # at the very top of the range the pooled stable shares exactly cover
    # the item, leaving no candidate whose lower share still fits
    inst = single_item_instance([budgeted(1.0, 0.3), budgeted(0.8, 0.25)])
    assert construct_high_price_eq(inst, 0.55) is None


def test_high_constructor_rejects_prices_outside_the_range():
    with pytest.raises(InputError):
        construct_high_price_eq(quasilinear_pair(), 0.2)


# ---------------------------------------------------------------------------
# the single-item equilibrium solver
# ---------------------------------------------------------------------------


def test_solver_maps_the_quasilinear_pair():
    inst = quasilinear_pair()
    sol = solve_pure_nash_single_item(inst)
    assert all(pt.report.is_eps_nash for pt in sol)
    kinds = {pt.kind for pt in sol}
    assert kinds == {"low", "high"}
    prices = sorted(pt.price for pt in sol)
    assert prices[0] == pytest.approx(0.7 / 1.7, abs=1e-6)
    assert prices[-1] == pytest.approx(1.0, abs=1e-6)
    assert any(abs(p - 0.7) < 1e-6 for p in prices)
    assert sol.lowest_price == pytest.approx(0.7 / 1.7, abs=1e-6)
    assert sol.highest_price == pytest.approx(1.0, abs=1e-6)


def test_modest_budgets_support_several_equilibrium_prices():
    # both budgets exceed a quarter of their values, which is enough to
    # open a band of high-price equilibria above the all-budget point
    inst = single_item_instance([budgeted(1.0, 0.3), budgeted(0.8, 0.25)])
    sol = solve_pure_nash_single_item(inst)
    prices = sorted(pt.price for pt in sol)
    assert len(prices) >= 2
    assert prices[0] == pytest.approx(4.0 / 9.0, abs=1e-6)
    assert any(abs(p - math.sqrt(0.24)) < 1e-6 for p in prices)
    assert any(abs(p - 0.5) < 1e-6 for p in prices)
    by_price = {round(pt.price, 4): pt.kind for pt in sol}
    assert by_price[round(4.0 / 9.0, 4)] == "low"
    assert by_price[0.5] == "high"


def test_a_lone_agent_gets_a_boundary_entry():
    sol = solve_pure_nash_single_item(single_item_instance([linear(0.9)]))
    assert len(sol) == 1
    pt = sol[0]
    assert pt.boundary
    assert pt.price == 0.0
    assert pt.kind == "low"
    assert not pt.report.is_eps_nash
    assert "w̃ → 0⁺" in pt.note


def test_solver_unpacks_like_a_sequence():
    sol = solve_pure_nash_single_item(quasilinear_pair())
    price, prof, kind = sol[0]
    assert price == sol.points[0].price
    assert kind in ("low", "high")
    assert len(prof) == 2


def test_solver_requires_a_single_item():
    inst = Instance([budgeted(1.0, 0.5)], [[1.0, 1.0]])
    with pytest.raises(InputError):
        solve_pure_nash_single_item(inst)


def test_everything_the_solver_returns_verifies():
    rng = random.Random(31)
    for _ in range(6):
        inst = random_single_item_instance(rng)
        sol = solve_pure_nash_single_item(inst)
        for pt in sol:
            if not pt.boundary:
                assert pt.report.is_eps_nash


# ---------------------------------------------------------------------------
# mixed profiles and the deviation bound
# ---------------------------------------------------------------------------


def test_point_mass_wraps_a_pure_profile():
    prof = profile((1.0, 0.7), (0.7, 0.7))
    mixed = MixedProfile.point_mass(prof)
    assert mixed.n == 2
    assert mixed.supports == ((prof.messages[0],), (prof.messages[1],))
    assert mixed.probs == ((1.0,), (1.0,))


def test_mixed_profile_validation():
    m = Message(1.0, 1.0)
    with pytest.raises(InputError):
        MixedProfile(((m,),), ((0.5, 0.5),))
    with pytest.raises(InputError):
        MixedProfile(((m, Message(2.0, 1.0)),), ((1.2, -0.2),))
    with pytest.raises(InputError):
        MixedProfile(((m, Message(2.0, 1.0)),), ((0.7, 0.2),))


def test_deviation_bound_on_a_pure_equilibrium():
    inst = quasilinear_pair()
    mixed = MixedProfile.point_mass(profile((1.0, 0.7), (0.7, 0.7)))
    x_star = optimal_liquid_welfare(inst).allocation
    report = mixed_deviation_bound_check(inst, mixed, x_star)
    assert report.ok
    assert report.slacks == pytest.approx((0.5, 0.0), abs=1e-9)
    assert report.expected_prices == pytest.approx((0.7,), abs=1e-9)
    assert report.reduced_prices[0] == pytest.approx((0.7,), abs=1e-9)
    assert report.reduced_prices[1] == pytest.approx((0.7,), abs=1e-9)
    assert report.welfare_opt == pytest.approx(1.0, abs=1e-9)
    assert report.welfare_eq == pytest.approx(1.0, abs=1e-9)
    assert report.ratio == pytest.approx(1.0, abs=1e-9)
    assert report.slack_4x == pytest.approx(3.0, abs=1e-9)


def test_expected_prices_average_over_the_support():
    inst = single_item_instance([budgeted(1.0, 1.0), budgeted(1.0, 1.0)])
    mixed = MixedProfile(
        ((Message(INF, 0.4),), (Message(INF, 0.2), Message(INF, 0.6))),
        ((1.0,), (0.5, 0.5)),
    )
    report = mixed_deviation_bound_check(inst, mixed, [[0.5], [0.5]])
    assert report.expected_prices == pytest.approx((0.8,), abs=1e-12)


def test_deviation_bound_rejects_mismatched_agents():
    mixed = MixedProfile(((Message(INF, 0.4),),), ((1.0,),))
    with pytest.raises(InputError):
        mixed_deviation_bound_check(quasilinear_pair(), mixed, [[1.0], [0.0]])


def test_deviation_bound_refuses_huge_supports():
    inst = quasilinear_pair()
    support = tuple(Message(INF, 0.01 * j) for j in range(150))
    probs = tuple([1.0 / 150.0] * 150)
    mixed = MixedProfile((support, support), (probs, probs))
    with pytest.raises(SizeError):
        mixed_deviation_bound_check(inst, mixed, [[1.0], [0.0]])
