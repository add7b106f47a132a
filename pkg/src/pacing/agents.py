"""Agent preference families and the market instance container.

An agent is a triple (valuation over clicks, money-cost curve, hard budget).
Valuations are weakly increasing and concave with V(0) = 0; money costs are
weakly increasing and convex with C(0) = 0.  The classic "budgeted" agent is
linear value + identity cost + finite budget; a "linear" (quasi-linear) agent
is the same with an infinite budget.

Derivatives use the right-hand limit at piecewise-linear breakpoints, and cost
inverses are the generalized sup-inverse  C^{-1}(u) = sup{t : C(t) <= u}  so
that flat cost prefixes resolve to the far end of the flat region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, InputError, RangeError
from .numerics import INF, bisect_predicate

# --------------------------------------------------------------------------
# valuation families
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Linear:
    """V(q) = v * q."""

    v: float

    def __post_init__(self):
        if not (0.0 <= self.v < INF) or math.isnan(self.v):
            raise InputError(f"linear valuation slope must be finite and >= 0, got {self.v}")

    def value(self, q: float) -> float:
        return self.v * q

    def slope(self, q: float) -> float:
        return self.v


@dataclass(frozen=True)
class Power:
    """V(q) = a * q**rho with 0 < rho <= 1 (concave); slope at 0 is +inf for rho < 1."""

    a: float
    rho: float

    def __post_init__(self):
        if not (self.a > 0.0 and math.isfinite(self.a)):
            raise InputError(f"power valuation coefficient must be finite and > 0, got {self.a}")
        if not (0.0 < self.rho <= 1.0):
            raise InputError(f"power valuation exponent must lie in (0, 1], got {self.rho}")

    def value(self, q: float) -> float:
        return self.a * q**self.rho

    def slope(self, q: float) -> float:
        if self.rho == 1.0:
            return self.a
        if q <= 0.0:
            return INF
        return self.a * self.rho * q ** (self.rho - 1.0)


def _check_breakpoints(points, *, convex: bool, what: str) -> tuple[tuple[float, float], ...]:
    pts = tuple((float(q), float(y)) for q, y in points)
    if len(pts) < 2 or pts[0] != (0.0, 0.0):
        raise InputError(f"{what} needs >= 2 breakpoints starting at (0, 0)")
    slopes = []
    for (q0, y0), (q1, y1) in zip(pts, pts[1:]):
        if not (q1 > q0):
            raise InputError(f"{what} breakpoint abscissae must strictly increase")
        s = (y1 - y0) / (q1 - q0)
        if s < 0.0:
            raise InputError(f"{what} must be weakly increasing")
        slopes.append(s)
    for s0, s1 in zip(slopes, slopes[1:]):
        if convex and s1 < s0 - 1e-15:
            raise InputError(f"{what} slopes must be non-decreasing (convex)")
        if not convex and s1 > s0 + 1e-15:
            raise InputError(f"{what} slopes must be non-increasing (concave)")
    return pts


def _pwl_eval(pts, slopes, q: float) -> float:
    if q <= 0.0:
        return 0.0
    for (q0, y0), (q1, y1) in zip(pts, pts[1:]):
        if q <= q1:
            return y0 + (q - q0) * (y1 - y0) / (q1 - q0)
    qk, yk = pts[-1]
    return yk + (q - qk) * slopes[-1]


def _pwl_slope(pts, slopes, q: float) -> float:
    # right-derivative: breakpoint q_k takes the slope of [q_k, q_{k+1}]
    if q < 0.0:
        q = 0.0
    for k, (q1, _) in enumerate(pts[1:]):
        if q < q1:
            return slopes[k]
    return slopes[-1]


@dataclass(frozen=True)
class PiecewiseLinearConcave:
    """Concave piecewise-linear valuation from (clicks, value) breakpoints.

    Extends past the last breakpoint with the final slope.
    """

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = _check_breakpoints(self.points, convex=False, what="piecewise-linear concave valuation")
        object.__setattr__(self, "points", pts)

    @property
    def _slopes(self) -> tuple[float, ...]:
        return tuple(
            (y1 - y0) / (q1 - q0) for (q0, y0), (q1, y1) in zip(self.points, self.points[1:])
        )

    def value(self, q: float) -> float:
        return _pwl_eval(self.points, self._slopes, q)

    def slope(self, q: float) -> float:
        return _pwl_slope(self.points, self._slopes, q)


ValuationFn = Linear | Power | PiecewiseLinearConcave


# --------------------------------------------------------------------------
# money-cost families
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Identity:
    """C(t) = t: the quasi-linear money cost."""

    def cost(self, t: float) -> float:
        return t

    def marginal(self, t: float) -> float:
        return 1.0

    def inverse(self, u: float) -> float:
        return u


@dataclass(frozen=True)
class PowerCost:
    """C(t) = a * t**kappa with kappa >= 1 (convex)."""

    a: float
    kappa: float

    def __post_init__(self):
        if not (self.a > 0.0 and math.isfinite(self.a)):
            raise InputError(f"power cost coefficient must be finite and > 0, got {self.a}")
        if not (self.kappa >= 1.0 and math.isfinite(self.kappa)):
            raise InputError(f"power cost exponent must be >= 1, got {self.kappa}")

    def cost(self, t: float) -> float:
        return self.a * t**self.kappa

    def marginal(self, t: float) -> float:
        if self.kappa == 1.0:
            return self.a
        return self.a * self.kappa * t ** (self.kappa - 1.0)

    def inverse(self, u: float) -> float:
        return (u / self.a) ** (1.0 / self.kappa)


@dataclass(frozen=True)
class PiecewiseLinearConvex:
    """Convex piecewise-linear money cost from (money, disutility) breakpoints."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = _check_breakpoints(self.points, convex=True, what="piecewise-linear convex cost")
        object.__setattr__(self, "points", pts)

    @property
    def _slopes(self) -> tuple[float, ...]:
        return tuple(
            (y1 - y0) / (q1 - q0) for (q0, y0), (q1, y1) in zip(self.points, self.points[1:])
        )

    def cost(self, t: float) -> float:
        return _pwl_eval(self.points, self._slopes, t)

    def marginal(self, t: float) -> float:
        return _pwl_slope(self.points, self._slopes, t)

    def is_identically_zero(self) -> bool:
        return all(s == 0.0 for s in self._slopes)

    def inverse(self, u: float) -> float:
        # sup{t : C(t) <= u}, by monotone bisection on the strictly rising part.
        if u < 0.0:
            raise DomainError(f"cost inverse of a negative disutility {u}")
        if self._slopes[-1] == 0.0:
            # convexity forces every slope to zero: C is identically 0
            if u > 0.0:
                raise RangeError(f"disutility {u} above the range of a bounded cost")
            return INF
        hi = max(self.points[-1][0], 1.0)
        while self.cost(hi) <= u:
            hi *= 2.0
        return bisect_predicate(lambda t: self.cost(t) > u, 0.0, hi, tol=1e-14)


MoneyCostFn = Identity | PowerCost | PiecewiseLinearConvex


# --------------------------------------------------------------------------
# agents and instances
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AgentType:
    """An advertiser's true preferences: valuation, money cost, hard budget.

    Invariant: the budget is finite or the cost is not identically zero;
    otherwise money is free and unlimited and utilities are unbounded.
    """

    valuation: ValuationFn
    money_cost: MoneyCostFn
    budget: float

    def __post_init__(self):
        if math.isnan(self.budget) or self.budget < 0.0:
            raise InputError(f"budget must be >= 0 (inf allowed), got {self.budget}")
        if self.budget == INF and isinstance(self.money_cost, PiecewiseLinearConvex):
            if self.money_cost.is_identically_zero():
                raise InputError("an agent with infinite budget needs a non-zero money cost")


def budgeted(v: float, w: float) -> AgentType:
    """Budgeted agent: linear value, identity cost, hard budget."""
    return AgentType(Linear(v), Identity(), w)


def linear(v: float) -> AgentType:
    """Quasi-linear agent: linear value, identity cost, no budget."""
    return AgentType(Linear(v), Identity(), INF)


@dataclass(frozen=True)
class Instance:
    """A market: n agents and an n x m click-through-rate matrix, immutable."""

    agents: tuple[AgentType, ...]
    ctr: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        agents = tuple(self.agents)
        ctr = tuple(tuple(float(c) for c in row) for row in self.ctr)
        if len(agents) < 1:
            raise InputError("an instance needs at least one agent")
        if len(ctr) != len(agents):
            raise InputError(f"ctr has {len(ctr)} rows for {len(agents)} agents")
        m = len(ctr[0]) if ctr else 0
        if m < 1:
            raise InputError("an instance needs at least one item")
        for i, row in enumerate(ctr):
            if len(row) != m:
                raise InputError(f"ctr row {i} has length {len(row)}, expected {m}")
            for j, c in enumerate(row):
                if not (0.0 <= c < INF) or math.isnan(c):
                    raise InputError(f"ctr[{i}][{j}] must be finite and >= 0, got {c}")
        object.__setattr__(self, "agents", agents)
        object.__setattr__(self, "ctr", ctr)

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def m(self) -> int:
        return len(self.ctr[0])


def single_item_instance(agents) -> Instance:
    """One item, unit click rate for everyone."""
    ags = tuple(agents)
    return Instance(ags, tuple((1.0,) for _ in ags))


# --------------------------------------------------------------------------
# evaluation operations
# --------------------------------------------------------------------------


def eval_valuation(fn: ValuationFn, q: float) -> float:
    """Value of q clicks."""
    if q < 0.0 or math.isnan(q):
        raise DomainError(f"clicks must be >= 0, got {q}")
    return fn.value(q)


def valuation_derivative(fn: ValuationFn, q: float) -> float:
    """Marginal value of clicks (right derivative at breakpoints)."""
    if q < 0.0 or math.isnan(q):
        raise DomainError(f"clicks must be >= 0, got {q}")
    return fn.slope(q)


def eval_cost(fn: MoneyCostFn, t: float) -> float:
    """Disutility of spending t."""
    if t < 0.0 or math.isnan(t):
        raise DomainError(f"spend must be >= 0, got {t}")
    return fn.cost(t)


def cost_derivative(fn: MoneyCostFn, t: float) -> float:
    """Marginal disutility of money (right derivative at breakpoints)."""
    if t < 0.0 or math.isnan(t):
        raise DomainError(f"spend must be >= 0, got {t}")
    return fn.marginal(t)


def cost_inverse(fn: MoneyCostFn, u: float) -> float:
    """Generalized inverse sup{t : C(t) <= u}.

    Raises RangeError when u exceeds the range of a bounded (identically zero)
    piecewise cost; returns inf exactly at the bound.
    """
    if u < 0.0 or math.isnan(u):
        raise DomainError(f"disutility must be >= 0, got {u}")
    return fn.inverse(u)


def utility(agent: AgentType, x_row, ctr_row, t: float) -> float:
    """True utility of an allocation row at spend t: V(sum phi*x) - C(t).

    Returns -inf when the spend exceeds the hard budget.
    """
    if t < 0.0 or math.isnan(t):
        raise DomainError(f"spend must be >= 0, got {t}")
    if t > agent.budget:
        return -INF
    clicks = sum(p * x for p, x in zip(ctr_row, x_row))
    return agent.valuation.value(clicks) - agent.money_cost.cost(t)


def utility_from_prices(agent: AgentType, t: float, prices, ctr_row) -> float:
    """Best utility a spend of t can buy at posted per-unit prices.

    The agent buys only maximum bang-per-buck items, so t of money converts
    into  (max_j phi_ij / p_j) * t  clicks.  A zero-priced item with positive
    click rate makes that ratio infinite: spending anything is then outside
    the formula's domain (DomainError); spending nothing is worth 0.
    """
    if t < 0.0 or math.isnan(t):
        raise DomainError(f"spend must be >= 0, got {t}")
    if t > agent.budget:
        return -INF
    best_rate = 0.0
    for p, phi in zip(prices, ctr_row):
        if phi <= 0.0:
            continue
        if p <= 0.0:
            if t > 0.0:
                raise DomainError("zero-priced item with positive click rate and positive spend")
            continue
        best_rate = max(best_rate, phi / p)
    if t == 0.0:
        return 0.0
    return agent.valuation.value(best_rate * t) - agent.money_cost.cost(t)


def willingness_to_pay(agent: AgentType, clicks: float) -> float:
    """min{w, C^{-1}(V(clicks))}: the liquid value of an awarded click count."""
    if clicks < 0.0 or math.isnan(clicks):
        raise DomainError(f"clicks must be >= 0, got {clicks}")
    val = agent.valuation.value(clicks)
    try:
        equiv = cost_inverse(agent.money_cost, val)
    except RangeError:
        # bounded cost: disutility never reaches the valuation, so only the
        # hard budget caps the willingness to pay (finite by the type invariant)
        return agent.budget
    return min(agent.budget, equiv)
