"""Liquid welfare: exact evaluation, concave optimization, anarchy ratios.

An allocation is worth, per agent, the money whose disutility matches the
value of the received clicks, capped at the hard budget — so no agent can
contribute more than she could actually pay.  That objective is concave and
separable across agents given click totals, which the optimizer exploits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .agents import (
    AgentType,
    Instance,
    cost_derivative,
    cost_inverse,
    eval_valuation,
    valuation_derivative,
    willingness_to_pay,
)
from .errors import ConvergenceError, InputError, RangeError, SizeError
from .numerics import DEFAULT_TOLS, INF, Tolerances, bisect_predicate

_MAX_GRID_POINTS = 1_500_000


@dataclass(frozen=True)
class WelfareResult:
    """An allocation together with its per-agent liquid value."""

    per_agent_wtp: tuple[float, ...]
    total: float
    allocation: tuple[tuple[float, ...], ...]


def _as_rows(instance: Instance, allocation) -> list[list[float]]:
    rows = [[float(v) for v in row] for row in allocation]
    if len(rows) != instance.n or any(len(row) != instance.m for row in rows):
        raise InputError(f"allocation must be {instance.n}x{instance.m}")
    for row in rows:
        for v in row:
            if math.isnan(v) or v < -1e-12:
                raise InputError(f"allocation entries must be >= 0, got {v}")
    for j in range(instance.m):
        supply = sum(row[j] for row in rows)
        if supply > 1.0 + 1e-9:
            raise InputError(f"item {j} oversold: supply {supply}")
    return rows


def liquid_welfare(instance: Instance, allocation) -> WelfareResult:
    """Evaluate W(x) = sum_i min{w_i, C_i^{-1}(V_i(clicks_i))} exactly."""
    rows = _as_rows(instance, allocation)
    wtp = []
    for agent, row, ctr_row in zip(instance.agents, rows, instance.ctr):
        clicks = sum(max(x, 0.0) * phi for x, phi in zip(row, ctr_row))
        wtp.append(willingness_to_pay(agent, clicks))
    return WelfareResult(tuple(wtp), sum(wtp), tuple(tuple(row) for row in rows))


def _wtp_slope(agent: AgentType, clicks: float) -> float:
    """Right derivative of the willingness to pay in clicks.

    Zero once the budget cap binds; V'(q) / C'(C^{-1}(V(q))) before it.  A
    still-flat cost segment makes the ratio infinite, which the searches read
    as "raising this share is free value".
    """
    value = eval_valuation(agent.valuation, clicks)
    try:
        spend = cost_inverse(agent.money_cost, value)
    except RangeError:
        return 0.0  # wtp already pinned at the budget
    if spend >= agent.budget:
        return 0.0
    mv = valuation_derivative(agent.valuation, clicks)
    if mv <= 0.0:
        return 0.0
    mc = cost_derivative(agent.money_cost, spend)
    if mc <= 0.0:
        return INF
    return mv / mc


def _waterfill(agents, rates, bases, supply: float, tol: float) -> list[float]:
    """Maximize sum_i wtp_i(base_i + rate_i x_i) over x >= 0, sum x <= supply.

    Searches for a common marginal lam: each agent takes the largest share
    whose marginal willingness still clears lam (inner bisection), and the
    outer bisection squeezes lam until demand matches supply.  Agents sitting
    exactly on the final lam form a plateau that is filled in index order.
    """
    n = len(agents)

    def share_at(i: int, lam: float) -> float:
        rate = rates[i]
        if rate <= 0.0:
            return 0.0
        agent, base = agents[i], bases[i]

        def starved(x: float) -> bool:
            return rate * _wtp_slope(agent, base + rate * x) < lam

        if starved(0.0):
            return 0.0
        if not starved(supply):
            return supply
        return bisect_predicate(starved, 0.0, supply, tol=tol)

    def demand(lam: float) -> float:
        return sum(share_at(i, lam) for i in range(n))

    if demand(1e-15) <= supply:
        return [share_at(i, 1e-15) for i in range(n)]
    lo, hi = 1e-15, 1.0
    while demand(hi) > supply:
        lo = hi
        hi *= 2.0
        if hi > 1e18:
            raise ConvergenceError(
                "water-filling could not bracket the common marginal",
                residuals={"lambda": hi},
            )
    for _ in range(200):
        if hi - lo <= 1e-13 * max(1.0, hi):
            break
        mid = 0.5 * (lo + hi)
        if demand(mid) <= supply:
            hi = mid
        else:
            lo = mid
    fill = [share_at(i, hi) for i in range(n)]
    room = [share_at(i, lo) for i in range(n)]  # generous side of the plateau
    slack = supply - sum(fill)
    for i in range(n):
        if slack <= 1e-15:
            break
        extra = min(max(room[i] - fill[i], 0.0), slack)
        fill[i] += extra
        slack -= extra
    return fill


def optimal_liquid_welfare(
    instance: Instance, *, tols: Tolerances = DEFAULT_TOLS
) -> WelfareResult:
    """Maximize liquid welfare over feasible allocations.

    Single item: common-marginal water-filling (the objective is concave and
    separable in shares).  Multiple items: projected supergradient ascent
    with diminishing steps, then exact one-item-at-a-time re-solves until no
    item moves.  Value ties are resolved toward lower agent indices by the
    fill order.
    """
    if instance.m == 1:
        rates = [row[0] for row in instance.ctr]
        shares = _waterfill(
            instance.agents, rates, [0.0] * instance.n, 1.0, tols.bisect_tol
        )
        return liquid_welfare(instance, [[x] for x in shares])
    return _optimal_multi_item(instance, tols)


def _value_of(instance: Instance, phi: "np.ndarray", x: "np.ndarray") -> float:
    clicks = (phi * x).sum(axis=1)
    return sum(
        willingness_to_pay(agent, max(float(q), 0.0))
        for agent, q in zip(instance.agents, clicks)
    )


def _project_column(v: "np.ndarray") -> "np.ndarray":
    """Euclidean projection onto {y >= 0, sum y <= 1}."""
    clipped = np.maximum(v, 0.0)
    if clipped.sum() <= 1.0:
        return clipped
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ks = np.arange(1, v.size + 1)
    k = int(ks[u - css / ks > 0][-1])
    theta = css[k - 1] / k
    return np.maximum(v - theta, 0.0)


def _optimal_multi_item(instance: Instance, tols: Tolerances) -> WelfareResult:
    n, m = instance.n, instance.m
    phi = np.asarray(instance.ctr, dtype=float)
    x = np.zeros((n, m))
    best_x, best_val = x.copy(), _value_of(instance, phi, x)

    slope_cap = 1e6
    start = max(
        min(_wtp_slope(agent, 0.0), slope_cap) * float(phi[i].max(initial=0.0))
        for i, agent in enumerate(instance.agents)
    )
    step0 = 0.5 / max(start, 1.0)

    for t in range(1, 500 * n * m + 1):
        clicks = (phi * x).sum(axis=1)
        slopes = np.array(
            [
                min(_wtp_slope(agent, max(float(q), 0.0)), slope_cap)
                for agent, q in zip(instance.agents, clicks)
            ]
        )
        x = x + (step0 / math.sqrt(t)) * slopes[:, None] * phi
        for j in range(m):
            x[:, j] = _project_column(x[:, j])
        val = _value_of(instance, phi, x)
        if val > best_val:
            best_x, best_val = x.copy(), val

    # Exact polish: re-solve one item against the click totals of the rest.
    x = best_x
    val = best_val
    scale = max(1.0, abs(val))
    for _ in range(200):
        moved = False
        for j in range(m):
            bases = (phi * x).sum(axis=1) - phi[:, j] * x[:, j]
            column = _waterfill(
                instance.agents, phi[:, j], bases.tolist(), 1.0, tols.bisect_tol
            )
            trial = x.copy()
            trial[:, j] = column
            trial_val = _value_of(instance, phi, trial)
            if trial_val > val + 1e-12 * scale:
                moved = True
            if trial_val >= val:
                x, val = trial, trial_val
        if not moved:
            break
    else:
        raise ConvergenceError(
            "item-wise polish still improving at the iteration cap",
            residuals={"best": val, "last_gain": trial_val - best_val},
        )
    return liquid_welfare(instance, x.tolist())


def _column_grid(n: int, steps: int) -> list[tuple[float, ...]]:
    """All ways to split one item across n agents on a steps-denominator grid."""
    if n == 1:
        return [(1.0,)]
    out: list[tuple[float, ...]] = []

    def rec(prefix: list[int], left: int, slots: int) -> None:
        if slots == 1:
            out.append(tuple((*prefix, left)))
            return
        for k in range(left + 1):
            rec([*prefix, k], left - k, slots - 1)

    rec([], steps, n)
    return [tuple(k / steps for k in row) for row in out]


def _offset_columns(
    center: list[float], pitch: float, reach: int
) -> list[tuple[float, ...]]:
    """Lattice of supply-preserving nudges of one column around its incumbent."""
    n = len(center)
    moves: list[tuple[float, ...]] = []
    for deltas in product(range(-reach, reach + 1), repeat=n - 1):
        last = -sum(deltas)
        if abs(last) > reach:
            continue
        d = (*deltas, last)
        col = [c + pitch * k for c, k in zip(center, d)]
        if all(v >= -1e-12 for v in col):
            moves.append(tuple(max(v, 0.0) for v in col))
    return moves


def brute_force_optimal_welfare(
    instance: Instance, grid_steps: int, *, refine_rounds: int = 0
) -> WelfareResult:
    """Exhaustive simplex-grid search for the welfare optimum.

    Every item's shares walk a uniform grid at full supply (no loss for a
    monotone objective).  refine_rounds > 0 re-enumerates a shrinking lattice
    around the incumbent, halving the pitch each round; concavity keeps the
    incumbent's value within one cell of the truth, so the zoom is safe.
    """
    n, m = instance.n, instance.m
    if n * m > 6:
        raise SizeError(f"brute force capped at n*m <= 6, got {n}x{m}")
    if grid_steps < 1:
        raise InputError("grid_steps must be >= 1")
    per_column = math.comb(grid_steps + n - 1, n - 1)
    if per_column**m > _MAX_GRID_POINTS:
        raise SizeError(
            f"{per_column ** m} grid allocations; lower grid_steps or the instance size"
        )

    def best_over(columns_by_item: list[list[tuple[float, ...]]]):
        top_val, top_alloc = -1.0, None
        for combo in product(*columns_by_item):
            total = 0.0
            for i, agent in enumerate(instance.agents):
                clicks = sum(
                    instance.ctr[i][j] * combo[j][i] for j in range(m)
                )
                total += willingness_to_pay(agent, clicks)
            if total > top_val:
                top_val, top_alloc = total, combo
        return top_val, top_alloc

    base = _column_grid(n, grid_steps)
    _, incumbent = best_over([base] * m)
    pitch = 1.0 / grid_steps
    for _ in range(refine_rounds):
        pitch /= 2.0
        columns = [
            _offset_columns([incumbent[j][i] for i in range(n)], pitch, 2)
            for j in range(m)
        ]
        _, incumbent = best_over(columns)

    rows = [[incumbent[j][i] for j in range(m)] for i in range(n)]
    return liquid_welfare(instance, rows)


def poa_ratio(
    instance: Instance, eq_allocation, *, optimal: WelfareResult | None = None
) -> float:
    """Optimal liquid welfare over the welfare of an equilibrium allocation.

    Returns inf when the equilibrium earns zero welfare against a positive
    optimum (callers surface that as a diagnostic), and 1.0 for the vacuous
    zero-over-zero market.
    """
    w_eq = liquid_welfare(instance, eq_allocation).total
    w_opt = (optimal if optimal is not None else optimal_liquid_welfare(instance)).total
    if w_eq <= 0.0:
        return INF if w_opt > 0.0 else 1.0
    return w_opt / w_eq
