"""Seeded random markets shared by tests and the sweep scenarios.

All generators take an explicit ``random.Random`` so a scenario seed pins the
whole sweep.  Message/instance families deliberately mix the awkward corners:
infinite values, infinite budgets, zero click rates, spectators.
"""

from __future__ import annotations

import random

from .agents import (
    AgentType,
    Identity,
    Instance,
    Linear,
    PiecewiseLinearConcave,
    Power,
    PowerCost,
)
from .fppe import Message, MessageProfile
from .numerics import INF


def random_message(rng: random.Random, *, specials: bool = True) -> Message:
    """A reported (value, budget) pair, occasionally infinite or zero."""
    r = rng.random()
    if specials and r < 0.12:
        v = INF
    elif specials and r < 0.18:
        v = 0.0
    else:
        v = round(rng.uniform(0.05, 1.8), 3)
    r = rng.random()
    if specials and v < INF and r < 0.10:
        w = INF
    elif specials and r < 0.16:
        w = 0.0
    else:
        w = round(rng.uniform(0.02, 1.2), 3)
    return Message(v, w)


def random_message_profile(rng: random.Random, n: int, *, specials: bool = True) -> MessageProfile:
    return MessageProfile(tuple(random_message(rng, specials=specials) for _ in range(n)))


def random_ctr(rng: random.Random, n: int, m: int, *, zeros: bool = True):
    return tuple(
        tuple(
            0.0 if zeros and rng.random() < 0.18 else round(rng.uniform(0.05, 1.0), 3)
            for _ in range(m)
        )
        for _ in range(n)
    )


def random_small_market(
    rng: random.Random, *, specials: bool = True
) -> tuple[Instance, MessageProfile]:
    """An oracle-sized market: n, m <= 3, mixed special entries.

    True agent types are the budgeted reading of the messages (irrelevant to
    the inner solve, which sees only messages and click rates).
    """
    n = rng.randint(1, 3)
    m = rng.randint(1, 3)
    ctr = random_ctr(rng, n, m, zeros=specials)
    profile = random_message_profile(rng, n, specials=specials)
    agents = tuple(
        AgentType(Linear(msg.v if msg.v < INF else 1.0), Identity(), msg.w) for msg in profile
    )
    return Instance(agents, ctr), profile


def random_agent(rng: random.Random) -> AgentType:
    """One agent across the preference families (for metagame/welfare sweeps)."""
    kind = rng.randrange(4)
    w = INF if rng.random() < 0.25 else round(rng.uniform(0.05, 2.0), 3)
    if kind == 0:
        return AgentType(Linear(round(rng.uniform(0.2, 3.0), 3)), Identity(), w)
    if kind == 1:
        val = Power(round(rng.uniform(0.3, 2.5), 3), round(rng.uniform(0.3, 1.0), 2))
        return AgentType(val, Identity(), w)
    if kind == 2:
        q1 = round(rng.uniform(0.2, 0.7), 2)
        s1 = round(rng.uniform(1.0, 4.0), 2)
        s2 = round(rng.uniform(0.0, s1), 2)
        val = PiecewiseLinearConcave(((0.0, 0.0), (q1, s1 * q1), (1.0, s1 * q1 + s2 * (1.0 - q1))))
        return AgentType(val, Identity(), w)
    cost = PowerCost(round(rng.uniform(0.5, 2.0), 2), round(rng.uniform(1.0, 2.5), 2))
    return AgentType(Linear(round(rng.uniform(0.2, 3.0), 3)), cost, w)


def random_single_item_instance(rng: random.Random, n_lo: int = 2, n_hi: int = 6) -> Instance:
    n = rng.randint(n_lo, n_hi)
    agents = tuple(random_agent(rng) for _ in range(n))
    return Instance(agents, tuple((1.0,) for _ in range(n)))


def random_budget_perturbation(
    rng: random.Random,
) -> tuple[Instance, MessageProfile, int, float]:
    """(market, profile, agent, budget raise) for monotonicity probes.

    The perturbed agent always has a finite reported budget.
    """
    while True:
        instance, profile = random_small_market(rng)
        finite = [i for i, msg in enumerate(profile) if msg.w < INF]
        if finite:
            break
    i = rng.choice(finite)
    delta = round(rng.uniform(0.01, 0.8), 3)
    return instance, profile, i, delta
