"""Shared numeric configuration and 1-D search primitives.

Everything downstream funnels its tolerances through one Tolerances record so
tests can tighten/loosen a single knob, and the bisection / golden-section
helpers here are the only root-finding machinery used by the solvers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

INF = math.inf


@dataclass(frozen=True)
class Tolerances:
    """Central numeric configuration.

    eps_num: generic comparison slack for "is this the same number".
    eps_fppe: maximum acceptable verification residual for a solved market.
    eps_exact: acceptance residual for the closed-form / support-enumeration path.
    bisect_tol: absolute interval width at which bisections stop.
    golden_tol: bracket width at which golden-section stops.
    interval_tol: accuracy of the price-interval endpoints.
    eps_nash_single: default equilibrium tolerance, exact single-item path.
    eps_nash_grid: default equilibrium tolerance, grid-swept multi-item path.
    """

    eps_num: float = 1e-9
    eps_fppe: float = 1e-8
    eps_exact: float = 1e-10
    bisect_tol: float = 1e-10
    golden_tol: float = 1e-10
    interval_tol: float = 1e-9
    eps_nash_single: float = 1e-7
    eps_nash_grid: float = 1e-4
    max_iter: int = 100_000


DEFAULT_TOLS = Tolerances()

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0  # 1/phi
_INVPHI2 = (3.0 - math.sqrt(5.0)) / 2.0  # 1/phi^2


def bisect_predicate(
    pred: Callable[[float], bool],
    lo: float,
    hi: float,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> float:
    """Smallest x in [lo, hi] with pred(x) true, for monotone false->true pred.

    Assumes pred(hi) is true; if pred(lo) is already true, returns lo.
    """
    if pred(lo):
        return lo
    a, b = lo, hi
    for _ in range(max_iter):
        if b - a <= tol:
            break
        mid = 0.5 * (a + b)
        if pred(mid):
            b = mid
        else:
            a = mid
    return b


def bisect_decreasing_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-10,
) -> float:
    """Root of a weakly decreasing f on [lo, hi] (first crossing f <= 0).

    f(lo) may be +inf (steep marginals at zero); treated as positive.
    """
    return bisect_predicate(lambda x: f(x) <= 0.0, lo, hi, tol=tol)


def golden_section_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-10,
    max_iter: int = 200,
) -> tuple[float, float]:
    """Maximize unimodal f on [lo, hi]; returns (argmax, max).

    Endpoints are evaluated too, so weakly monotone pieces resolve to the
    correct end of the bracket.
    """
    a, b = lo, hi
    h = b - a
    if h <= tol:
        x = 0.5 * (a + b)
        fx = f(x)
    else:
        c = a + _INVPHI2 * h
        d = a + _INVPHI * h
        fc, fd = f(c), f(d)
        for _ in range(max_iter):
            if h <= tol:
                break
            if fc >= fd:
                b, d, fd = d, c, fc
                h = b - a
                c = a + _INVPHI2 * h
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                h = b - a
                d = a + _INVPHI * h
                fd = f(d)
        x, fx = (c, fc) if fc >= fd else (d, fd)
    for end in (lo, hi):
        fe = f(end)
        if fe > fx:
            x, fx = end, fe
    return x, fx


def is_close(a: float, b: float, tol: float = DEFAULT_TOLS.eps_num) -> bool:
    """Absolute-plus-relative closeness, inf-aware."""
    if a == b:  # covers matching infinities
        return True
    if math.isinf(a) or math.isinf(b):
        return False
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))
