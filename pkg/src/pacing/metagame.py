"""The strategic layer above the inner market: exact single-item best
responses, Nash verification and grid search over reported messages, the
stable-share price characterization with its equilibrium constructors, and
the mixed-profile deviation bound that drives the welfare guarantee.

Throughout, a "deviation" re-solves the inner market with one message
replaced and scores the deviator by her true preferences.  Any reported
pair is outcome-equivalent to reporting an unbounded value with the same
final payment as budget, so budget sweeps with ṽ = ∞ cover the full
message space; the restricted spaces pin one coordinate instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from itertools import product

import numpy as np

from .agents import (
    AgentType,
    Instance,
    Linear,
    cost_derivative,
    cost_inverse,
    eval_valuation,
    utility,
    valuation_derivative,
)
from .errors import ConvergenceError, InputError, RangeError, SizeError
from .numerics import DEFAULT_TOLS, INF, Tolerances, bisect_predicate, golden_section_max
from .fppe import FppeOutcome, Message, MessageProfile, solve_fppe, solve_fppe_single_item
from .welfare import liquid_welfare


class MessageSpace(Enum):
    """Which message coordinates an agent may choose freely.

    FULL leaves both free.  BUDGET_ONLY pins the reported value to ∞,
    BUDGET_ONLY_KNOWN_VALUE pins it to the agent's true (linear) per-click
    value, and VALUE_ONLY pins the reported budget to ∞.
    """

    FULL = "full"
    BUDGET_ONLY = "budget_only"
    BUDGET_ONLY_KNOWN_VALUE = "budget_only_known_value"
    VALUE_ONLY = "value_only"


@dataclass(frozen=True)
class BestResponse:
    """An optimal deviation message and the true utility it earns.

    When the optimum is a supremum chased at an open edge (e.g. winning
    everything at a vanishing price) ``attained`` is False, ``message`` is
    the limit point, and ``witness`` names the approaching sequence.
    Unpacks as ``(message, utility)``.
    """

    message: Message
    utility: float
    attained: bool = True
    witness: str = ""

    def __iter__(self):
        return iter((self.message, self.utility))


@dataclass(frozen=True)
class EquilibriumReport:
    is_eps_nash: bool
    eps: float
    worst_agent: int
    worst_deviation: Message
    gain: float
    method: str  # "exact_single_item" or "grid_sweep"
    grid_points: int | None = None  # deviations swept per agent (grid path only)


@dataclass(frozen=True)
class GridSearchResult:
    """Everything learned from an exhaustive profile-grid sweep."""

    equilibria: tuple[MessageProfile, ...]
    min_max_gain: float
    tightest_profile: MessageProfile
    profiles_checked: int
    grid_shape: tuple[int, ...]
    eps: float


@dataclass(frozen=True)
class MixedProfile:
    """Independent per-agent lotteries over messages, each finitely supported."""

    supports: tuple[tuple[Message, ...], ...]
    probs: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        supports = tuple(tuple(s) for s in self.supports)
        probs = tuple(tuple(float(q) for q in row) for row in self.probs)
        if len(supports) != len(probs) or not supports:
            raise InputError("supports and probabilities must cover the same agents")
        for i, (sup, row) in enumerate(zip(supports, probs)):
            if len(sup) != len(row) or not sup:
                raise InputError(f"agent {i}: each support point needs one probability")
            if any(q < 0.0 for q in row):
                raise InputError(f"agent {i}: probabilities must be >= 0")
            if abs(sum(row) - 1.0) > 1e-12:
                raise InputError(f"agent {i}: probabilities sum to {sum(row)}, not 1")
        object.__setattr__(self, "supports", supports)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def point_mass(cls, profile: MessageProfile) -> "MixedProfile":
        return cls(tuple((m,) for m in profile), tuple((1.0,) for _ in profile))

    @property
    def n(self) -> int:
        return len(self.supports)


@dataclass(frozen=True)
class MixedDeviationReport:
    """Per-agent deviation-bound slacks under a randomized profile.

    ``slacks[i]`` is C_i^{-1}(u_i) + Σ_j x*_ij·E[p_j] − ½·W_i(x*_i), the
    amount by which the deviation inequality holds (negative = violated);
    ``slack_4x`` is 4·W(eq) − W(x*).  Inverse costs are capped at the hard
    budget, so no agent is credited purchasing power she could never spend.
    """

    slacks: tuple[float, ...]
    utilities: tuple[float, ...]
    expected_prices: tuple[float, ...]
    reduced_prices: tuple[tuple[float, ...], ...]
    welfare_opt: float
    welfare_eq: float
    ratio: float
    slack_4x: float
    ok: bool


@dataclass(frozen=True)
class AllocBounds:
    """Per-agent stable-share bounds (y, z) at a posted price."""

    p: float
    y: tuple[float, ...]
    z: tuple[float, ...]

    @classmethod
    def at_price(
        cls, instance: Instance, p: float, tols: Tolerances = DEFAULT_TOLS
    ) -> "AllocBounds":
        pairs = [
            _scaled_bounds(a, row[0], p, tols)
            for a, row in zip(instance.agents, instance.ctr)
        ]
        return cls(p, tuple(y for y, _ in pairs), tuple(z for _, z in pairs))


@dataclass(frozen=True)
class PriceInterval:
    """A price range with open/closed endpoint flags.

    Endpoints are bisection approximations; a degenerate open-open pair at
    zero records a set that is empty for positive prices but approached in
    the limit.
    """

    lo: float
    hi: float
    lo_open: bool = False
    hi_open: bool = False

    @property
    def is_empty(self) -> bool:
        return self.hi < self.lo or (self.hi == self.lo and (self.lo_open or self.hi_open))

    def contains(self, p: float, tol: float = 1e-7) -> bool:
        if self.is_empty:
            return False
        lo_ok = p > self.lo if self.lo_open else p >= self.lo - tol
        hi_ok = p < self.hi if self.hi_open else p <= self.hi + tol
        return lo_ok and hi_ok


@dataclass(frozen=True)
class PureNashPoint:
    """One constructed equilibrium: price, profile, and its verification.

    Unpacks as ``(price, profile, kind)``.  ``boundary`` marks limit points
    that no attainable profile realizes (their reports fail honestly).
    """

    price: float
    profile: MessageProfile
    kind: str  # "low" or "high"
    report: EquilibriumReport
    boundary: bool = False
    note: str = ""

    def __iter__(self):
        return iter((self.price, self.profile, self.kind))


@dataclass(frozen=True)
class NashSolution:
    """All equilibria found for a single-item market, plus the price ranges."""

    points: tuple[PureNashPoint, ...]
    p_low: PriceInterval
    p_high: PriceInterval
    lowest_price: float
    highest_price: float

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, k):
        return self.points[k]


# --------------------------------------------------------------------------
# profile utilities
# --------------------------------------------------------------------------


def _ctr_column(instance: Instance) -> list[float]:
    return [row[0] for row in instance.ctr]


def _true_utility(instance: Instance, out: FppeOutcome, i: int) -> float:
    return utility(instance.agents[i], out.allocation[i], instance.ctr[i], out.payments[i])


def utility_of_profile(
    instance: Instance,
    prof: MessageProfile,
    i: int,
    *,
    tie_break: str = "low",
    tols: Tolerances = DEFAULT_TOLS,
) -> float:
    """Agent i's true utility at the market outcome the profile induces."""
    if len(prof) != instance.n:
        raise InputError(f"profile has {len(prof)} messages for {instance.n} agents")
    if not 0 <= i < instance.n:
        raise InputError(f"agent index {i} out of range")
    if instance.m == 1:
        out = solve_fppe_single_item(prof, _ctr_column(instance), tie_break, tols)
    else:
        out = solve_fppe(instance, prof, tie_break=tie_break, tols=tols)
    return _true_utility(instance, out, i)


# --------------------------------------------------------------------------
# single-item best response
# --------------------------------------------------------------------------


def _opponent_summary(prof: MessageProfile, col: list[float], i: int):
    """Finite effective opponent bids [(value·rate, budget)], plus the money
    of unbounded-value opponents (who are all-in at every positive price)."""
    finite, inf_money = [], 0.0
    for ell, msg in enumerate(prof):
        if ell == i:
            continue
        nu = msg.v * col[ell] if col[ell] > 0.0 else 0.0
        if nu <= 0.0:
            continue
        if nu == INF:
            inf_money += msg.w  # budget is finite by message validity
        else:
            finite.append((nu, msg.w))
    return finite, inf_money


def _money_at_least(finite, t: float) -> float:
    return sum(w for nu, w in finite if nu >= t)


def _money_above(finite, t: float) -> float:
    return sum(w for nu, w in finite if nu > t)


def _budget_cap(agent: AgentType, v_top: float, fallback_scale: float) -> float:
    """A budget beyond which every deviation is dominated by bidding nothing."""
    try:
        cap = cost_inverse(agent.money_cost, v_top) + 1.0
    except RangeError:
        cap = INF
    cap = min(agent.budget, cap)
    if not math.isfinite(cap):
        cap = 64.0 * max(1.0, fallback_scale)  # money beyond all regime changes
    return cap


def _piecewise_max(f, knots: list[float], tols: Tolerances):
    """Maximize f over [knots[0], knots[-1]] given concavity between knots.

    Golden-section per piece, then a uniform safeguard scan with one local
    refinement.  Returns (argmax, max); f is assumed cached by the caller.
    """
    best_x, best_u = knots[0], f(knots[0])
    for a, c in zip(knots, knots[1:]):
        if c - a <= tols.golden_tol:
            x, u = c, f(c)
        else:
            x, u = golden_section_max(f, a, c, tols.golden_tol)
        if u > best_u:
            best_x, best_u = x, u
    lo, hi = knots[0], knots[-1]
    if hi > lo:
        grid = np.linspace(lo, hi, 96)
        vals = [f(float(g)) for g in grid]
        k = int(np.argmax(vals))
        if vals[k] > best_u:
            a = float(grid[max(0, k - 1)])
            c = float(grid[min(95, k + 1)])
            x, u = golden_section_max(f, a, c, tols.golden_tol)
            best_x, best_u = (x, u) if u >= vals[k] else (float(grid[k]), vals[k])
    return best_x, best_u


def _budget_best_response(
    instance: Instance,
    prof: MessageProfile,
    i: int,
    pinned_v: float,
    tols: Tolerances,
) -> BestResponse:
    col = _ctr_column(instance)
    agent = instance.agents[i]
    phi = col[i]
    v_top = eval_valuation(agent.valuation, phi)
    finite, inf_money = _opponent_summary(prof, col, i)

    scale = sum(w for _, w in finite if w < INF) + max((nu for nu, _ in finite), default=0.0)
    b_hi = _budget_cap(agent, v_top, scale + inf_money)

    thresholds = sorted({nu for nu, _ in finite})
    own_nu = pinned_v * phi if pinned_v < INF and phi > 0.0 else INF
    if own_nu < INF:
        thresholds = sorted(set(thresholds) | {own_nu})
    knots = {0.0, b_hi}
    for t in thresholds:
        for g in (inf_money + _money_at_least(finite, t), inf_money + _money_above(finite, t)):
            b = t - g
            if 0.0 < b < b_hi:
                knots.add(b)

    cache: dict[float, float] = {}

    def score(b: float) -> float:
        b = min(max(b, 0.0), b_hi)
        if b not in cache:
            out = solve_fppe_single_item(prof.replace(i, Message(pinned_v, b)), col, "low", tols)
            cache[b] = _true_utility(instance, out, i)
        return cache[b]

    best_b, best_u = _piecewise_max(score, sorted(knots), tols)

    # with no opposing money, any positive budget buys everything: the
    # supremum sits at a vanishing bid and is never attained
    g0 = inf_money + _money_above(finite, 0.0)
    if g0 == 0.0 and v_top > best_u + 1e-12 * max(1.0, abs(v_top)):
        return BestResponse(Message(pinned_v, 0.0), v_top, attained=False, witness="w̃ → 0⁺")
    return BestResponse(Message(pinned_v, best_b), best_u)


def _value_best_response(
    instance: Instance,
    prof: MessageProfile,
    i: int,
    tols: Tolerances,
) -> BestResponse:
    col = _ctr_column(instance)
    agent = instance.agents[i]
    phi = col[i]
    losing = Message(0.0, INF)
    if phi <= 0.0:
        return BestResponse(losing, _deviation_utility(instance, prof, i, losing, tols))
    v_top = eval_valuation(agent.valuation, phi)
    finite, inf_money = _opponent_summary(prof, col, i)

    fin_money = sum(w for _, w in finite if w < INF)
    try:
        cap = inf_money + fin_money + cost_inverse(agent.money_cost, v_top) + 1.0
    except RangeError:
        cap = inf_money + fin_money + agent.budget + 1.0
    thresholds = sorted({nu for nu, _ in finite})
    if thresholds:
        cap = max(cap, thresholds[-1] + 1.0)

    cache: dict[float, float] = {}

    def score(nu: float) -> float:
        nu = min(max(nu, 0.0), cap)
        if nu not in cache:
            msg = Message(nu / phi, INF)
            out = solve_fppe_single_item(prof.replace(i, msg), col, "low", tols)
            cache[nu] = _true_utility(instance, out, i)
        return cache[nu]

    knots = sorted({0.0, cap} | {t for t in thresholds if t < cap})
    best_nu, best_u = 0.0, score(0.0)
    edges = []  # (open edge, utility just inside) pairs, for supremum reporting
    for a, c in zip(knots, knots[1:]):
        # money bid by opponents ranked strictly above any report inside (a, c)
        g = inf_money + _money_at_least(finite, c)
        if not math.isfinite(g):
            continue  # an unbounded budget above: no report in this piece ever wins
        lo = max(a, g) + max(1e-12, 1e-9 * max(1.0, a))
        if lo >= c:
            u = score(c)
            if u > best_u:
                best_nu, best_u = c, u
            continue
        x, u = golden_section_max(score, lo, c, tols.golden_tol)
        if u > best_u:
            best_nu, best_u = x, u
        edges.append((max(a, g), lo))

    grid = np.linspace(0.0, cap, 256)[1:]
    vals = [score(float(g)) for g in grid]
    k = int(np.argmax(vals))
    if vals[k] > best_u:
        a = float(grid[max(0, k - 1)])
        c = float(grid[min(len(grid) - 1, k + 1)])
        x, u = golden_section_max(score, a, c, tols.golden_tol)
        best_nu, best_u = (x, u) if u >= vals[k] else (float(grid[k]), vals[k])

    # a maximizer pinned against an open piece edge either extends to the
    # edge (the tie resolves for the deviator) or is a chased supremum
    for edge, lo in edges:
        if abs(best_nu - lo) <= 4.0 * (lo - edge):
            if score(edge) < best_u - 1e-12:
                return BestResponse(
                    Message(edge / phi, INF),
                    best_u,
                    attained=False,
                    witness=f"ṽ → {edge / phi:.12g}⁺",
                )
            if score(edge) >= best_u:
                best_nu, best_u = edge, score(edge)
    return BestResponse(Message(best_nu / phi, INF), best_u)


def _deviation_utility(instance, prof, i, msg, tols) -> float:
    out = solve_fppe_single_item(prof.replace(i, msg), _ctr_column(instance), "low", tols)
    return _true_utility(instance, out, i)


def best_response_single_item(
    instance: Instance,
    prof: MessageProfile,
    i: int,
    space: MessageSpace = MessageSpace.FULL,
    *,
    tols: Tolerances = DEFAULT_TOLS,
) -> BestResponse:
    """Agent i's optimal deviation in a one-item market.

    The deviation price is piecewise linear in the reported budget, with
    regime changes exactly where an opponent's effective bid meets the
    price; true utility is concave between those breakpoints, so a golden
    search per piece (plus a uniform safeguard scan) finds the optimum.
    Budget sweeps with an unbounded reported value cover the full space;
    the restricted spaces pin one coordinate and sweep the other.
    """
    if instance.m != 1:
        raise InputError("best response is exact for single-item markets only")
    if len(prof) != instance.n:
        raise InputError(f"profile has {len(prof)} messages for {instance.n} agents")
    if not 0 <= i < instance.n:
        raise InputError(f"agent index {i} out of range")
    if space in (MessageSpace.FULL, MessageSpace.BUDGET_ONLY):
        return _budget_best_response(instance, prof, i, INF, tols)
    if space is MessageSpace.BUDGET_ONLY_KNOWN_VALUE:
        val = instance.agents[i].valuation
        if not isinstance(val, Linear):
            raise InputError("known-value reporting needs a linear true valuation")
        return _budget_best_response(instance, prof, i, val.v, tols)
    return _value_best_response(instance, prof, i, tols)


# --------------------------------------------------------------------------
# equilibrium verification
# --------------------------------------------------------------------------


def _restricted_candidates(instance, prof, i, space, points):
    """Deviation messages for the grid path: budget sweeps with the value
    pinned per the space, and value sweeps where values are free."""
    agent = instance.agents[i]
    budget_total = sum(m.w for m in prof if m.w < INF)
    val_reach = max(
        (m.v * sum(instance.ctr[k]) for k, m in enumerate(prof) if m.v < INF),
        default=0.0,
    )
    hi = budget_total + val_reach
    if hi <= 0.0:
        hi = 1.0
    half = points // 2
    budgets = np.unique(
        np.concatenate([
            np.geomspace(hi * 1e-9, hi, half),
            np.linspace(0.0, hi, points - half),
        ])
    )

    out: list[Message] = []
    if space in (MessageSpace.FULL, MessageSpace.BUDGET_ONLY):
        out.extend(Message(INF, float(b)) for b in budgets)
    if space is MessageSpace.BUDGET_ONLY_KNOWN_VALUE:
        if not isinstance(agent.valuation, Linear):
            raise InputError("known-value reporting needs a linear true valuation")
        out.extend(Message(agent.valuation.v, float(b)) for b in budgets)
    if space in (MessageSpace.FULL, MessageSpace.VALUE_ONLY):
        vals = {m.v for m in prof if m.v < INF}
        if isinstance(agent.valuation, Linear) and agent.valuation.v > 0.0:
            vals |= {k * agent.valuation.v for k in (0.25, 0.5, 0.75, 1.0, 1.5, 2.0)}
        v_hi = 2.0 * max(vals | {hi})
        vals |= {float(v) for v in np.geomspace(max(v_hi * 1e-9, 1e-12), v_hi, points // 10)}
        out.extend(Message(float(v), INF) for v in sorted(vals) if v > 0.0)
        out.append(Message(0.0, INF))
    return out


def verify_pure_nash(
    instance: Instance,
    prof: MessageProfile,
    eps: float | None = None,
    space: MessageSpace = MessageSpace.FULL,
    *,
    grid_points: int = 2000,
    tols: Tolerances = DEFAULT_TOLS,
) -> EquilibriumReport:
    """Check that no agent gains more than eps by deviating alone.

    Single-item markets are checked against the exact best response, so the
    verdict is sound either way.  Markets with several items sweep a
    geometric+linear deviation grid instead and can certify only up to the
    grid's resolution (the report records how many points were swept).
    """
    if len(prof) != instance.n:
        raise InputError(f"profile has {len(prof)} messages for {instance.n} agents")

    if instance.m == 1:
        eps_eff = tols.eps_nash_single if eps is None else float(eps)
        worst_gain, worst_agent, worst_dev = -INF, 0, prof.messages[0]
        for i in range(instance.n):
            current = utility_of_profile(instance, prof, i, tols=tols)
            br = best_response_single_item(instance, prof, i, space, tols=tols)
            gain = br.utility - current
            if gain > worst_gain:
                worst_gain, worst_agent, worst_dev = gain, i, br.message
        return EquilibriumReport(
            is_eps_nash=worst_gain <= eps_eff,
            eps=eps_eff,
            worst_agent=worst_agent,
            worst_deviation=worst_dev,
            gain=worst_gain,
            method="exact_single_item",
        )

    eps_eff = tols.eps_nash_grid if eps is None else float(eps)
    base = solve_fppe(instance, prof, tols=tols)
    worst_gain, worst_agent, worst_dev = -INF, 0, prof.messages[0]
    swept = 0
    for i in range(instance.n):
        current = _true_utility(instance, base, i)
        candidates = _restricted_candidates(instance, prof, i, space, grid_points)
        swept = max(swept, len(candidates))
        for msg in candidates:
            out = solve_fppe(instance, prof.replace(i, msg), tols=tols)
            gain = _true_utility(instance, out, i) - current
            if gain > worst_gain:
                worst_gain, worst_agent, worst_dev = gain, i, msg
    return EquilibriumReport(
        is_eps_nash=worst_gain <= eps_eff,
        eps=eps_eff,
        worst_agent=worst_agent,
        worst_deviation=worst_dev,
        gain=worst_gain,
        method="grid_sweep",
        grid_points=swept,
    )


# --------------------------------------------------------------------------
# exhaustive grid search for approximate equilibria
# --------------------------------------------------------------------------

DEFAULT_VALUE_GRID: tuple[float, ...] = (0.0, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, INF)
DEFAULT_BUDGET_GRID: tuple[float, ...] = tuple(round(0.05 * k, 2) for k in range(25))


def default_strategy_grid() -> tuple[Message, ...]:
    """The stock message grid: every reported value crossed with every budget."""
    return tuple(
        Message(v, w) for v in DEFAULT_VALUE_GRID for w in DEFAULT_BUDGET_GRID
    )


def grid_epsilon_pne_search(
    instance: Instance,
    strategy_grid,
    eps: float,
    *,
    max_profiles: int = 200_000,
    tols: Tolerances = DEFAULT_TOLS,
) -> GridSearchResult:
    """Score every profile on a finite message grid against grid deviations.

    Returns all profiles whose best unilateral grid improvement is at most
    eps, together with the minimum over profiles of the worst gain — a
    strictly positive minimum witnesses that no grid profile is close to
    stable.  The grid may be one shared message list or one list per agent.
    """
    grids = _per_agent_grids(instance.n, strategy_grid)
    shape = tuple(len(g) for g in grids)
    total = math.prod(shape)
    if total > max_profiles:
        raise SizeError(f"{total} grid profiles exceed the cap of {max_profiles}")
    if total == 0:
        raise InputError("every agent needs at least one grid message")

    col = _ctr_column(instance) if instance.m == 1 else None
    utils = np.empty((instance.n,) + shape)
    for idx in np.ndindex(shape):
        prof = MessageProfile(tuple(g[k] for g, k in zip(grids, idx)))
        if col is not None:
            out = solve_fppe_single_item(prof, col, "low", tols)
        else:
            out = solve_fppe(instance, prof, tols=tols)
        for i in range(instance.n):
            utils[(i, *idx)] = _true_utility(instance, out, i)

    worst = np.full(shape, -INF)
    for i in range(instance.n):
        gain_i = utils[i].max(axis=i, keepdims=True) - utils[i]
        np.maximum(worst, gain_i, out=worst)

    eq_profiles = tuple(
        MessageProfile(tuple(g[k] for g, k in zip(grids, idx)))
        for idx in np.argwhere(worst <= eps)
    )
    flat_min = int(np.argmin(worst))
    tight_idx = np.unravel_index(flat_min, shape)
    tightest = MessageProfile(tuple(g[k] for g, k in zip(grids, tight_idx)))
    return GridSearchResult(
        equilibria=eq_profiles,
        min_max_gain=float(worst.min()),
        tightest_profile=tightest,
        profiles_checked=total,
        grid_shape=shape,
        eps=float(eps),
    )


def _per_agent_grids(n: int, strategy_grid) -> list[list[Message]]:
    items = list(strategy_grid)
    if items and all(isinstance(x, Message) for x in items):
        return [items] * n
    grids = [list(g) for g in items]
    if len(grids) != n:
        raise InputError(f"{len(grids)} grids for {n} agents")
    for g in grids:
        if not all(isinstance(x, Message) for x in g):
            raise InputError("strategy grids must contain messages")
    return grids


# --------------------------------------------------------------------------
# stable-share bounds and the equilibrium price ranges
# --------------------------------------------------------------------------


def _scaled_bounds(
    agent: AgentType, rate: float, p: float, tols: Tolerances
) -> tuple[float, float]:
    """(y, z) for one agent whose clicks accrue at ``rate`` per unit share."""
    if p <= 0.0:
        raise InputError(f"price must be positive, got {p}")
    if rate <= 0.0:
        return 0.0, 0.0

    def mv(x: float) -> float:  # marginal value of supply share
        return rate * valuation_derivative(agent.valuation, rate * x)

    def mc(x: float) -> float:  # marginal cost of money when paying p per share
        return cost_derivative(agent.money_cost, p * x)

    # smallest share where granting the remainder at price p stops helping
    def settled(x: float) -> bool:
        return mv(x) * (1.0 - x) <= p * mc(x)

    y = 0.0 if settled(0.0) else bisect_predicate(settled, 0.0, 1.0, tols.bisect_tol)

    # largest share with weakly positive marginal surplus
    def starved(x: float) -> bool:
        return mv(x) < p * mc(x)

    if starved(0.0):
        z = 0.0
    elif not starved(1.0):
        z = 1.0
    else:
        z = bisect_predicate(starved, 0.0, 1.0, tols.bisect_tol)

    cap = agent.budget / p
    return min(y, z, cap, 1.0), min(z, cap, 1.0)


def alloc_bounds(
    agent: AgentType, p: float, *, tols: Tolerances = DEFAULT_TOLS
) -> tuple[float, float]:
    """Stable-share bounds (y, z) for an agent facing a per-click price p.

    y is the smallest share at which no budget increase would help: beyond
    it, the marginal value of the remaining supply no longer covers its
    price.  z is the largest share bought at weakly positive marginal
    surplus.  Both fall with the price, cap at budget/p, and equal 1 as the
    price vanishes.
    """
    return _scaled_bounds(agent, 1.0, p, tols)


def _sum_bounds(instance: Instance, p: float, tols: Tolerances) -> tuple[float, float]:
    ys = zs = 0.0
    for agent, row in zip(instance.agents, instance.ctr):
        y, z = _scaled_bounds(agent, row[0], p, tols)
        ys += y
        zs += z
    return ys, zs


_P_MIN = 1e-12


def price_intervals(
    instance: Instance, *, tols: Tolerances = DEFAULT_TOLS
) -> tuple[PriceInterval, PriceInterval]:
    """The equilibrium price ranges of a single-item market.

    The low range is where the lower stable shares exactly fill the item;
    the high range is where the lower shares fit and the upper shares still
    cover it.  Both sums fall weakly in the price, so each range is an
    interval found by bisection.  The low range is contained in the high
    one; a degenerate open pair at zero marks a range that is only
    approached as the price vanishes.
    """
    if instance.m != 1:
        raise InputError("price characterization requires a single item")

    def sum_y(p: float) -> float:
        return _sum_bounds(instance, p, tols)[0]

    def sum_z(p: float) -> float:
        return _sum_bounds(instance, p, tols)[1]

    empty = PriceInterval(0.0, 0.0, True, True)
    if sum_z(_P_MIN) < 1.0:
        return empty, empty

    hi_bracket = 1.0
    for _ in range(200):
        if sum_z(hi_bracket) < 1.0:
            break
        hi_bracket *= 2.0
    else:
        raise ConvergenceError("upper stable shares never fall below the supply")

    hi_h = bisect_predicate(lambda q: sum_z(q) < 1.0, _P_MIN, hi_bracket, tols.interval_tol)
    hi_h, hi_h_open = _snap_endpoint(sum_z, hi_h, tols)

    if sum_y(_P_MIN) <= 1.0:
        # the lower shares never overfill: the low range is a vanishing-price limit
        return empty, PriceInterval(0.0, hi_h, True, hi_h_open)

    lo = bisect_predicate(lambda q: sum_y(q) <= 1.0, _P_MIN, hi_bracket, tols.interval_tol)
    hi_l = bisect_predicate(lambda q: sum_y(q) < 1.0, _P_MIN, hi_bracket, tols.interval_tol)
    hi_l = max(hi_l, lo)
    return (
        PriceInterval(lo, hi_l, False, False),
        PriceInterval(lo, max(hi_h, lo), False, hi_h_open),
    )


def _snap_endpoint(total, p: float, tols: Tolerances) -> tuple[float, bool]:
    """Nudge a bisected upper endpoint back onto the satisfied side if the
    defining sum jumps there; report open when no nearby price satisfies it."""
    for cand in (p, p - tols.interval_tol, p - 4.0 * tols.interval_tol):
        if cand > 0.0 and total(cand) >= 1.0:
            return max(cand, _P_MIN), False
    return p, True


# --------------------------------------------------------------------------
# equilibrium constructors
# --------------------------------------------------------------------------


def construct_low_price_eq(
    instance: Instance, p: float, *, tols: Tolerances = DEFAULT_TOLS
) -> MessageProfile:
    """The all-budget profile clearing a single-item market at price p.

    Everyone reports an unbounded value with budget p·y_i(p); the budgets
    sum to p, so the market clears exactly at p with shares y.  Requires p
    in the low price range.
    """
    p_low, _ = price_intervals(instance, tols=tols)
    if not p_low.contains(p):
        raise InputError(f"price {p} lies outside the low equilibrium range")
    return _low_profile(instance, p, tols)


def _low_profile(instance: Instance, p: float, tols: Tolerances) -> MessageProfile:
    bounds = AllocBounds.at_price(instance, p, tols)
    return MessageProfile(tuple(Message(INF, p * y) for y in bounds.y))


def construct_high_price_eq(
    instance: Instance, p: float, *, tols: Tolerances = DEFAULT_TOLS
) -> MessageProfile | None:
    """A profile clearing at p with one agent reporting the price as value.

    The price-setting agent i* reports (p, ∞) and absorbs her lower stable
    share; everyone else reports an unbounded value with a budget chosen by
    water-filling shares from y up to z, in ascending index, until the item
    is exactly covered.  Candidates for i* are tried by descending share
    slack z−y; returns None when no candidate leaves the others enough
    room.  Requires p in the high price range.
    """
    _, p_high = price_intervals(instance, tols=tols)
    if not p_high.contains(p):
        raise InputError(f"price {p} lies outside the high equilibrium range")
    return _high_profile(instance, p, tols)


def _high_profile(instance: Instance, p: float, tols: Tolerances) -> MessageProfile | None:
    bounds = AllocBounds.at_price(instance, p, tols)
    y, z = bounds.y, bounds.z

    order = sorted(range(instance.n), key=lambda i: (-(z[i] - y[i]), i))
    for star in order:
        rate = instance.ctr[star][0]
        if rate <= 0.0:
            continue
        others = [i for i in range(instance.n) if i != star]
        if y[star] + sum(z[i] for i in others) < 1.0 - 1e-12:
            continue
        room = (1.0 - y[star]) - sum(y[i] for i in others)
        if room < -1e-9:
            continue
        shares = {i: y[i] for i in others}
        room = max(room, 0.0)
        for i in others:
            take = min(z[i] - y[i], room)
            shares[i] += take
            room -= take
        if room > 1e-9:
            continue
        msgs = [
            Message(INF, p * shares[i]) if i != star else Message(p / rate, INF)
            for i in range(instance.n)
        ]
        return MessageProfile(tuple(msgs))
    return None


def solve_pure_nash_single_item(
    instance: Instance,
    *,
    eps: float = 1e-6,
    tols: Tolerances = DEFAULT_TOLS,
) -> NashSolution:
    """Construct and verify the pure equilibria of a single-item market.

    Low-price profiles are built at the endpoints of the low price range;
    high-price profiles at that range's endpoints, nine interior prices,
    and each agent's feasibility pivot (the price where her candidacy as
    price setter becomes tight).  Only profiles passing verification are
    returned, deduplicated by price.  A lone agent gets a boundary entry:
    her utility climbs as the winning bid vanishes, so no reported price
    attains the supremum.
    """
    if instance.m != 1:
        raise InputError("pure Nash construction requires a single item")
    p_low, p_high = price_intervals(instance, tols=tols)
    # verification only needs deviation gains resolved far below eps, and a
    # golden search localizes a concave maximum's value quadratically in the
    # argument tolerance — a looser bracket keeps the sweep fast without
    # loosening the verdict
    vtols = replace(tols, golden_tol=max(tols.golden_tol, 1e-6))

    if instance.n == 1:
        prof = MessageProfile((Message(INF, 0.0),))
        report = verify_pure_nash(instance, prof, eps, tols=vtols)
        point = PureNashPoint(
            0.0,
            prof,
            "low",
            report,
            boundary=True,
            note="supremum chased as w̃ → 0⁺; no positive bid attains it",
        )
        return NashSolution((point,), p_low, p_high, p_low.lo, p_high.hi)

    points: list[PureNashPoint] = []
    seen: list[tuple[float, str]] = []

    def push(p: float, prof: MessageProfile | None, kind: str):
        if prof is None:
            return
        for q, k in seen:
            if k == kind and abs(q - p) <= 1e-9 * max(1.0, abs(q)):
                return
        report = verify_pure_nash(instance, prof, eps, tols=vtols)
        if report.is_eps_nash:
            seen.append((p, kind))
            points.append(PureNashPoint(p, prof, kind, report))

    if not p_low.is_empty:
        for p in sorted({p_low.lo, p_low.hi}):
            push(p, _low_profile(instance, p, tols), "low")

    if not p_high.is_empty and p_high.hi > 0.0:
        lo = p_high.lo if not p_high.lo_open else min(p_high.hi, max(_P_MIN, p_high.hi * 1e-6))
        prices = {float(p) for p in np.linspace(lo, p_high.hi, 11)}
        prices |= _pivot_prices(instance, lo, p_high.hi, tols)
        for p in sorted(prices):
            push(p, _high_profile(instance, p, tols), "high")

    return NashSolution(tuple(points), p_low, p_high, p_low.lo, p_high.hi)


def _pivot_prices(instance, lo: float, hi: float, tols) -> set[float]:
    """Prices where some agent's candidacy as price setter becomes tight."""
    out: set[float] = set()
    if hi <= lo:
        return out
    for star in range(instance.n):

        def slack(p: float, star=star) -> float:
            ys = zs = 0.0
            for i, (agent, row) in enumerate(zip(instance.agents, instance.ctr)):
                y, z = _scaled_bounds(agent, row[0], p, tols)
                if i == star:
                    ys = y
                else:
                    zs += z
            return ys + zs - 1.0

        if slack(lo) >= 0.0 > slack(hi):
            root = bisect_predicate(lambda q: slack(q) < 0.0, lo, hi, tols.interval_tol)
            out.add(root)
            inside = root - 8.0 * tols.interval_tol
            if inside > lo:
                out.add(inside)
    return out


# --------------------------------------------------------------------------
# mixed-profile deviation bound
# --------------------------------------------------------------------------


def _capped_inverse(agent: AgentType, u: float) -> float:
    try:
        return min(agent.budget, cost_inverse(agent.money_cost, max(u, 0.0)))
    except RangeError:
        return agent.budget


def mixed_deviation_bound_check(
    instance: Instance,
    mixed: MixedProfile,
    x_star,
    *,
    max_outcomes: int = 20_000,
    tols: Tolerances = DEFAULT_TOLS,
) -> MixedDeviationReport:
    """Check the deviation inequality of a randomized profile against a
    benchmark allocation.

    For each agent, half her benchmark welfare must be covered by the money
    equivalent of her equilibrium utility plus what the benchmark clicks
    would cost at the expected prices; for profiles verified as (near-)
    equilibria the slack stays (near-)nonnegative, and the benchmark total
    stays within 4x of the equilibrium welfare — within 2x when the profile
    is a pure equilibrium.  The expectation enumerates the full support
    product; prices with one agent silenced (reduced prices) are reported
    alongside for diagnosis.
    """
    if mixed.n != instance.n:
        raise InputError(f"mixed profile covers {mixed.n} of {instance.n} agents")
    sizes = [len(s) for s in mixed.supports]
    total = math.prod(sizes)
    if total > max_outcomes:
        raise SizeError(f"{total} support outcomes exceed the cap of {max_outcomes}")
    star = liquid_welfare(instance, x_star)

    def solve(prof: MessageProfile) -> FppeOutcome:
        if instance.m == 1:
            return solve_fppe_single_item(prof, _ctr_column(instance), "low", tols)
        return solve_fppe(instance, prof, tols=tols)

    n, m = instance.n, instance.m
    exp_prices = [0.0] * m
    exp_util = [0.0] * n
    exp_value = [0.0] * n
    for combo in product(*(range(k) for k in sizes)):
        prob = math.prod(mixed.probs[i][k] for i, k in enumerate(combo))
        if prob == 0.0:
            continue
        prof = MessageProfile(tuple(mixed.supports[i][k] for i, k in enumerate(combo)))
        out = solve(prof)
        for j in range(m):
            exp_prices[j] += prob * out.prices[j]
        for i in range(n):
            exp_util[i] += prob * _true_utility(instance, out, i)
            clicks = sum(c * x for c, x in zip(instance.ctr[i], out.allocation[i]))
            exp_value[i] += prob * eval_valuation(instance.agents[i].valuation, clicks)

    silent = Message(INF, 0.0)
    reduced: list[tuple[float, ...]] = []
    for i in range(n):
        acc = [0.0] * m
        others = [k for k in range(n) if k != i]
        for combo in product(*(range(sizes[k]) for k in others)):
            prob = math.prod(mixed.probs[k][c] for k, c in zip(others, combo))
            if prob == 0.0:
                continue
            msgs = [silent] * n
            for k, c in zip(others, combo):
                msgs[k] = mixed.supports[k][c]
            out = solve(MessageProfile(tuple(msgs)))
            for j in range(m):
                acc[j] += prob * out.prices[j]
        reduced.append(tuple(acc))

    slacks = []
    for i in range(n):
        covered = _capped_inverse(instance.agents[i], exp_util[i])
        covered += sum(x * pj for x, pj in zip(x_star[i], exp_prices))
        slacks.append(covered - 0.5 * star.per_agent_wtp[i])

    w_eq = sum(
        _capped_inverse(agent, ev) for agent, ev in zip(instance.agents, exp_value)
    )
    ratio = INF if w_eq <= 0.0 < star.total else (1.0 if w_eq <= 0.0 else star.total / w_eq)
    slack_4x = 4.0 * w_eq - star.total
    ok = min(slacks, default=0.0) >= -1e-6 and slack_4x >= -1e-6 * max(1.0, star.total)
    return MixedDeviationReport(
        slacks=tuple(slacks),
        utilities=tuple(exp_util),
        expected_prices=tuple(exp_prices),
        reduced_prices=tuple(reduced),
        welfare_opt=star.total,
        welfare_eq=w_eq,
        ratio=ratio,
        slack_4x=slack_4x,
        ok=ok,
    )
