"""File-driven runs and the scenario command line.

Markets travel as JSON documents::

    {
      "agents": [
        {"valuation": {"kind": "linear", "v": 2.0},
         "money_cost": {"kind": "identity"},
         "budget": 0.5},
        {"valuation": {"kind": "power", "a": 1.0, "rho": 0.5},
         "budget": "inf"}
      ],
      "ctr": [[1.0], [0.8]],
      "seed": 7
    }

``money_cost`` defaults to identity; ``"inf"`` is the only accepted spelling
for an infinite budget (bare JSON ``Infinity`` is rejected); every other
number must be finite.  Message profiles and allocations arrive on the
command line as JSON arrays.  Reports render as JSON, CSV, or plain text;
JSON output is byte-stable for identical inputs and seed.

Exit codes: 0 all checks pass, 1 a check failed, 2 bad input, 3 the solver
gave up.
"""

from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import asdict

import click

from .agents import (
    AgentType,
    Identity,
    Instance,
    Linear,
    PiecewiseLinearConcave,
    PiecewiseLinearConvex,
    Power,
    PowerCost,
)
from .errors import ConvergenceError, InputError, InternalError
from .fppe import Message, MessageProfile, solve_fppe, verify_fppe
from .metagame import (
    MessageSpace,
    best_response_single_item,
    solve_pure_nash_single_item,
    verify_pure_nash,
)
from .numerics import DEFAULT_TOLS, INF
from .scenarios import SCENARIOS, run_scenario
from .welfare import liquid_welfare, optimal_liquid_welfare, poa_ratio

SPACES = {
    "full": MessageSpace.FULL,
    "budget-only": MessageSpace.BUDGET_ONLY,
    "budget-only-known-value": MessageSpace.BUDGET_ONLY_KNOWN_VALUE,
    "value-only": MessageSpace.VALUE_ONLY,
}


# ---------------------------------------------------------------------------
# instance files
# ---------------------------------------------------------------------------


def _reject_constant(token: str):
    raise InputError(f'non-finite JSON literal {token}: spell infinity as the string "inf"')


def _finite(raw, where: str) -> float:
    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise InputError(f"{where}: expected a number, got {raw!r}")
    value = float(raw)
    if not math.isfinite(value):
        raise InputError(f'{where}: expected a finite number, got {raw!r}')
    return value


def _money(raw, where: str) -> float:
    if raw == "inf":
        return INF
    if isinstance(raw, str):
        raise InputError(f'{where}: only "inf" may be spelled as a string, got {raw!r}')
    return _finite(raw, where)


def _params(raw: dict, where: str, required: tuple[str, ...]) -> dict:
    extra = set(raw) - {"kind", *required}
    if extra:
        raise InputError(f"{where}: unknown field(s) {sorted(extra)}")
    missing = [key for key in required if key not in raw]
    if missing:
        raise InputError(f"{where}: missing field(s) {missing}")
    return raw


def _points(raw, where: str) -> tuple[tuple[float, float], ...]:
    if not isinstance(raw, list) or not raw:
        raise InputError(f"{where}: expected a non-empty list of [x, y] pairs")
    out = []
    for k, pair in enumerate(raw):
        if not isinstance(pair, list) or len(pair) != 2:
            raise InputError(f"{where}[{k}]: expected an [x, y] pair, got {pair!r}")
        out.append((_finite(pair[0], f"{where}[{k}][0]"), _finite(pair[1], f"{where}[{k}][1]")))
    return tuple(out)


def _valuation(raw, where: str):
    if not isinstance(raw, dict) or "kind" not in raw:
        raise InputError(f"{where}: expected an object with a \"kind\" field")
    kind = raw["kind"]
    if kind == "linear":
        return Linear(_finite(_params(raw, where, ("v",))["v"], f"{where}.v"))
    if kind == "power":
        _params(raw, where, ("a", "rho"))
        return Power(_finite(raw["a"], f"{where}.a"), _finite(raw["rho"], f"{where}.rho"))
    if kind == "pwl_concave":
        _params(raw, where, ("points",))
        return PiecewiseLinearConcave(_points(raw["points"], f"{where}.points"))
    raise InputError(f"{where}.kind: expected linear, power, or pwl_concave, got {kind!r}")


def _money_cost(raw, where: str):
    if raw is None:
        return Identity()
    if not isinstance(raw, dict) or "kind" not in raw:
        raise InputError(f"{where}: expected an object with a \"kind\" field")
    kind = raw["kind"]
    if kind == "identity":
        _params(raw, where, ())
        return Identity()
    if kind == "power":
        _params(raw, where, ("a", "kappa"))
        return PowerCost(_finite(raw["a"], f"{where}.a"), _finite(raw["kappa"], f"{where}.kappa"))
    if kind == "pwl_convex":
        _params(raw, where, ("points",))
        return PiecewiseLinearConvex(_points(raw["points"], f"{where}.points"))
    raise InputError(f"{where}.kind: expected identity, power, or pwl_convex, got {kind!r}")


def instance_from_dict(doc) -> Instance:
    """Build an Instance from a parsed instance document."""
    if not isinstance(doc, dict):
        raise InputError("instance document: expected a JSON object")
    extra = set(doc) - {"agents", "ctr", "seed"}
    if extra:
        raise InputError(f"instance document: unknown field(s) {sorted(extra)}")
    agents_raw = doc.get("agents")
    if not isinstance(agents_raw, list) or not agents_raw:
        raise InputError("agents: expected a non-empty list")
    agents = []
    for i, entry in enumerate(agents_raw):
        where = f"agents[{i}]"
        if not isinstance(entry, dict):
            raise InputError(f"{where}: expected an object")
        extra = set(entry) - {"valuation", "money_cost", "budget"}
        if extra:
            raise InputError(f"{where}: unknown field(s) {sorted(extra)}")
        if "valuation" not in entry or "budget" not in entry:
            raise InputError(f"{where}: needs \"valuation\" and \"budget\"")
        try:
            agents.append(AgentType(
                _valuation(entry["valuation"], f"{where}.valuation"),
                _money_cost(entry.get("money_cost"), f"{where}.money_cost"),
                _money(entry["budget"], f"{where}.budget"),
            ))
        except InputError as exc:
            if str(exc).startswith(where):
                raise
            raise InputError(f"{where}: {exc}") from None
    ctr_raw = doc.get("ctr")
    if not isinstance(ctr_raw, list) or not ctr_raw:
        raise InputError("ctr: expected a non-empty list of rows")
    ctr = []
    for i, row in enumerate(ctr_raw):
        if not isinstance(row, list):
            raise InputError(f"ctr[{i}]: expected a list")
        ctr.append(tuple(_finite(x, f"ctr[{i}][{j}]") for j, x in enumerate(row)))
    if "seed" in doc and not isinstance(doc["seed"], int):
        raise InputError(f"seed: expected an integer, got {doc['seed']!r}")
    return Instance(tuple(agents), tuple(ctr))


def instance_to_dict(instance: Instance, seed: int | None = None) -> dict:
    """The inverse of instance_from_dict, with "inf" spelling restored."""
    agents = []
    for agent in instance.agents:
        val = agent.valuation
        if isinstance(val, Linear):
            valuation = {"kind": "linear", "v": val.v}
        elif isinstance(val, Power):
            valuation = {"kind": "power", "a": val.a, "rho": val.rho}
        else:
            valuation = {"kind": "pwl_concave", "points": [list(p) for p in val.points]}
        cost = agent.money_cost
        if isinstance(cost, Identity):
            money_cost = {"kind": "identity"}
        elif isinstance(cost, PowerCost):
            money_cost = {"kind": "power", "a": cost.a, "kappa": cost.kappa}
        else:
            money_cost = {"kind": "pwl_convex", "points": [list(p) for p in cost.points]}
        agents.append({
            "valuation": valuation,
            "money_cost": money_cost,
            "budget": _num(agent.budget),
        })
    doc = {"agents": agents, "ctr": [list(row) for row in instance.ctr]}
    if seed is not None:
        doc["seed"] = seed
    return doc


def load_instance(path: str) -> tuple[Instance, int | None]:
    try:
        with open(path, encoding="utf-8") as handle:
            doc = json.load(handle, parse_constant=_reject_constant)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    try:
        return instance_from_dict(doc), doc.get("seed") if isinstance(doc, dict) else None
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# command-line fragments
# ---------------------------------------------------------------------------


def _parse_json_flag(text: str, flag: str):
    try:
        return json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise InputError(f"{flag}: {exc.msg} at column {exc.colno}") from None


def parse_profile(text: str) -> MessageProfile:
    """Messages from a JSON array of [value, budget] pairs ("inf" allowed)."""
    data = _parse_json_flag(text, "--profile")
    if not isinstance(data, list) or not data:
        raise InputError("--profile: expected a non-empty JSON array of [value, budget] pairs")
    messages = []
    for i, pair in enumerate(data):
        if not isinstance(pair, list) or len(pair) != 2:
            raise InputError(f"--profile[{i}]: expected a [value, budget] pair, got {pair!r}")
        try:
            messages.append(Message(_money(pair[0], "value"), _money(pair[1], "budget")))
        except InputError as exc:
            raise InputError(f"--profile[{i}]: {exc}") from None
    return MessageProfile(tuple(messages))


def parse_allocation(text: str, instance: Instance):
    data = _parse_json_flag(text, "--allocation")
    if not isinstance(data, list) or not data:
        raise InputError("--allocation: expected a non-empty JSON array")
    if instance.m == 1 and all(not isinstance(x, list) for x in data):
        data = [[x] for x in data]  # flat shorthand for single-item markets
    rows = []
    for i, row in enumerate(data):
        if not isinstance(row, list):
            raise InputError(f"--allocation[{i}]: expected a list of shares")
        rows.append([_finite(x, f"--allocation[{i}][{j}]") for j, x in enumerate(row)])
    return rows


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


def _num(x: float):
    return "inf" if x == INF else x


def _msg_pair(msg: Message) -> list:
    return [_num(msg.v), _num(msg.w)]


def _interval(interval) -> dict:
    return {
        "lo": interval.lo,
        "hi": interval.hi,
        "lo_open": interval.lo_open,
        "hi_open": interval.hi_open,
        "empty": interval.is_empty,
    }


def _base(command: str, seed: int | None) -> dict:
    return {"command": command, "seed": seed, "tolerances": asdict(DEFAULT_TOLS)}


def run_file(path: str, subcommand: str, *, profile: str | None = None, eps: float | None = None,
             grid: int | None = None, space: str = "full", allocation: str | None = None,
             agent: int = 0, seed: int | None = None) -> tuple[dict, bool]:
    """Run one subcommand against an instance file.

    Returns the report payload and whether a check failed.  The profile,
    allocation, and space arguments arrive in their command-line spellings.
    """
    instance, file_seed = load_instance(path)
    seed = file_seed if seed is None else seed
    if space not in SPACES:
        raise InputError(f"--space: expected one of {', '.join(SPACES)}, got {space!r}")

    def need_profile() -> MessageProfile:
        if profile is None:
            raise InputError(f"{subcommand} needs --profile")
        prof = parse_profile(profile)
        if len(list(prof)) != instance.n:
            raise InputError(
                f"--profile: {len(list(prof))} messages for {instance.n} agents")
        return prof

    if subcommand == "fppe":
        prof = need_profile()
        out = solve_fppe(instance, prof)
        check = verify_fppe(instance, prof, out, eps if eps is not None else DEFAULT_TOLS.eps_fppe)
        payload = _base("fppe", seed) | {
            "prices": list(out.prices),
            "allocation": [list(row) for row in out.allocation],
            "payments": list(out.payments),
            "multipliers": list(out.multipliers),
            "revenue": out.revenue,
            "verification": {
                "ok": check.ok,
                "eps": check.eps,
                "scale": check.scale,
                "violations": dict(check.violations),
            },
        }
        return payload, not check.ok

    if subcommand == "best-response":
        prof = need_profile()
        if not 0 <= agent < instance.n:
            raise InputError(f"--agent: index {agent} outside 0..{instance.n - 1}")
        br = best_response_single_item(instance, prof, agent, SPACES[space])
        payload = _base("best-response", seed) | {
            "agent": agent,
            "space": space,
            "message": _msg_pair(br.message),
            "utility": br.utility,
            "attained": br.attained,
            "witness": br.witness,
        }
        return payload, False

    if subcommand == "verify-nash":
        prof = need_profile()
        report = verify_pure_nash(instance, prof, eps, SPACES[space],
                                  grid_points=grid if grid is not None else 2000)
        payload = _base("verify-nash", seed) | {
            "is_eps_nash": report.is_eps_nash,
            "eps": report.eps,
            "space": space,
            "worst_agent": report.worst_agent,
            "worst_deviation": None if report.worst_deviation is None
                               else _msg_pair(report.worst_deviation),
            "gain": report.gain,
            "method": report.method,
            "grid_points": report.grid_points,
        }
        return payload, not report.is_eps_nash

    if subcommand == "solve-nash":
        solution = solve_pure_nash_single_item(instance, eps=eps if eps is not None else 1e-6)
        points = [{
            "price": point.price,
            "kind": point.kind,
            "profile": [_msg_pair(m) for m in point.profile],
            "verified": point.report.is_eps_nash,
            "gain": point.report.gain,
            "boundary": point.boundary,
            "note": point.note,
        } for point in solution.points]
        payload = _base("solve-nash", seed) | {
            "points": points,
            "p_low": _interval(solution.p_low),
            "p_high": _interval(solution.p_high),
            "lowest_price": solution.lowest_price,
            "highest_price": solution.highest_price,
        }
        failed = any(not p["verified"] and not p["boundary"] for p in points)
        return payload, failed

    if subcommand == "welfare":
        if allocation is None:
            result = optimal_liquid_welfare(instance)
            mode = "optimal"
        else:
            result = liquid_welfare(instance, parse_allocation(allocation, instance))
            mode = "evaluate"
        payload = _base("welfare", seed) | {
            "mode": mode,
            "total": result.total,
            "per_agent_wtp": list(result.per_agent_wtp),
            "allocation": [list(row) for row in result.allocation],
        }
        return payload, False

    if subcommand == "poa":
        prof = need_profile()
        out = solve_fppe(instance, prof)
        opt = optimal_liquid_welfare(instance)
        eq = liquid_welfare(instance, out.allocation)
        ratio = poa_ratio(instance, out.allocation, optimal=opt)
        payload = _base("poa", seed) | {
            "ratio": _num(ratio),
            "welfare_eq": eq.total,
            "welfare_opt": opt.total,
            "prices": list(out.prices),
            "allocation": [list(row) for row in out.allocation],
        }
        if ratio == INF:
            payload["note"] = "equilibrium welfare is zero while the optimum is positive"
        return payload, False

    raise InputError(f"unknown subcommand {subcommand!r}")


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def _flatten(prefix: str, value, out: list[tuple[str, object]]):
    if isinstance(value, dict):
        for key, inner in value.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), inner, out)
    elif isinstance(value, (list, tuple)):
        for k, inner in enumerate(value):
            _flatten(f"{prefix}[{k}]", inner, out)
    else:
        out.append((prefix, value))


def render(payload: dict, fmt: str) -> str:
    """Render a report as stable JSON, CSV, or line-per-field text."""
    if fmt == "json":
        return json.dumps(payload, indent=2, sort_keys=True)
    rows = payload.get("rows") or payload.get("points")
    if fmt == "csv":
        buffer = io.StringIO()
        if isinstance(rows, list) and rows and all(isinstance(r, dict) for r in rows):
            fields: list[str] = []
            for row in rows:
                fields.extend(key for key in row if key not in fields)
            writer = csv.DictWriter(buffer, fieldnames=fields)
            writer.writeheader()
            for row in rows:
                writer.writerow({key: _csv_cell(row.get(key)) for key in fields})
        else:
            writer = csv.writer(buffer)
            writer.writerow(["field", "value"])
            flat: list[tuple[str, object]] = []
            _flatten("", payload, flat)
            writer.writerows(flat)
        return buffer.getvalue().rstrip("\n")
    flat = []
    _flatten("", payload, flat)
    width = max((len(key) for key, _ in flat), default=0)
    return "\n".join(f"{key.ljust(width)}  {value}" for key, value in flat)


def _csv_cell(value):
    if isinstance(value, (dict, list, tuple)):
        return json.dumps(value, sort_keys=True)
    return value


def _render_scenario_text(payload: dict) -> str:
    lines = [f"scenario: {payload['scenario']}"]
    for key, value in payload["inputs"].items():
        lines.append(f"  {key} = {value}")
    for check in payload["checks"]:
        verdict = "ok  " if check["passed"] else "FAIL"
        lines.append(f"[{verdict}] {check['name']}: {check['observed']} ({check['requirement']})")
        lines.append(f"       {check['provenance']}")
    status = "pass" if payload["passed"] else "FAIL"
    count = sum(1 for check in payload["checks"] if check["passed"])
    lines.append(f"{status}: {count}/{len(payload['checks'])} checks in {payload['elapsed_s']}s")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# the command group
# ---------------------------------------------------------------------------


def _emit(payload: dict, fmt: str, failed: bool, scenario: bool = False):
    if fmt == "text" and scenario:
        click.echo(_render_scenario_text(payload))
    else:
        click.echo(render(payload, fmt))
    if failed:
        sys.exit(1)


def _guard(body):
    try:
        return body()
    except InputError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except (ConvergenceError, InternalError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(3)


_instance_arg = click.argument("instance", type=click.Path(dir_okay=False))
_format_opt = click.option("--format", "fmt", type=click.Choice(("json", "csv", "text")),
                           default="text", show_default=True, help="Report rendering.")
_seed_opt = click.option("--seed", type=int, default=None,
                         help="Echoed into the report; overrides the file's seed.")
_profile_opt = click.option("--profile", "profile_text", default=None, metavar="JSON",
                            help='Reported [value, budget] pairs, e.g. \'[[2.0, 0.5], [1.0, "inf"]]\'.')
_eps_opt = click.option("--eps", type=float, default=None, help="Check tolerance.")
_space_opt = click.option("--space", type=click.Choice(tuple(SPACES)), default="full",
                          show_default=True, help="Deviation message space.")


@click.group()
def main():
    """First-price pacing equilibria, reporting games, and welfare checks."""


@main.command()
@_instance_arg
@_profile_opt
@_eps_opt
@_format_opt
@_seed_opt
def fppe(instance, profile_text, eps, fmt, seed):
    """Solve the pacing equilibrium for a reported profile."""
    payload, failed = _guard(lambda: run_file(
        instance, "fppe", profile=profile_text, eps=eps, seed=seed))
    _emit(payload, fmt, failed)


@main.command("best-response")
@_instance_arg
@_profile_opt
@click.option("--agent", type=int, default=0, show_default=True, help="Deviating agent index.")
@_space_opt
@_format_opt
@_seed_opt
def best_response(instance, profile_text, agent, space, fmt, seed):
    """Exact single-item best response for one agent."""
    payload, failed = _guard(lambda: run_file(
        instance, "best-response", profile=profile_text, agent=agent, space=space, seed=seed))
    _emit(payload, fmt, failed)


@main.command("verify-nash")
@_instance_arg
@_profile_opt
@_eps_opt
@_space_opt
@click.option("--grid", type=int, default=None, help="Deviation grid density for multi-item markets.")
@_format_opt
@_seed_opt
def verify_nash(instance, profile_text, eps, space, grid, fmt, seed):
    """Check whether a reported profile is an ε-equilibrium."""
    payload, failed = _guard(lambda: run_file(
        instance, "verify-nash", profile=profile_text, eps=eps, space=space, grid=grid, seed=seed))
    _emit(payload, fmt, failed)


@main.command("solve-nash")
@_instance_arg
@_eps_opt
@_format_opt
@_seed_opt
def solve_nash(instance, eps, fmt, seed):
    """Map the verified pure equilibria of a single-item market."""
    payload, failed = _guard(lambda: run_file(instance, "solve-nash", eps=eps, seed=seed))
    _emit(payload, fmt, failed)


@main.command()
@_instance_arg
@click.option("--allocation", default=None, metavar="JSON",
              help="Shares to evaluate; omit to optimize.")
@_format_opt
@_seed_opt
def welfare(instance, allocation, fmt, seed):
    """Evaluate or maximize liquid welfare."""
    payload, failed = _guard(lambda: run_file(
        instance, "welfare", allocation=allocation, seed=seed))
    _emit(payload, fmt, failed)


@main.command()
@_instance_arg
@_profile_opt
@_format_opt
@_seed_opt
def poa(instance, profile_text, fmt, seed):
    """Optimal over equilibrium liquid welfare for a reported profile."""
    payload, failed = _guard(lambda: run_file(instance, "poa", profile=profile_text, seed=seed))
    _emit(payload, fmt, failed)


@main.command(epilog="Scenarios: " + ", ".join(SCENARIOS) + ".")
@click.argument("name")
@click.option("--param", "-p", "params", multiple=True, metavar="NAME=VALUE",
              help="Scenario parameter override; repeatable.")
@click.option("--jobs", type=int, default=None, help="Worker processes for sweep scenarios.")
@_format_opt
def scenario(name, params, jobs, fmt):
    """Re-run a named scenario and check its expected numbers."""
    kv: dict[str, object] = {}
    for item in params:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise click.UsageError(f"--param needs NAME=VALUE, got {item!r}")
        kv[key] = _scalar(raw)
    if jobs is not None:
        kv["jobs"] = jobs
    report = _guard(lambda: run_scenario(name, **kv))
    _emit(report.to_dict(), fmt, not report.passed, scenario=True)


def _scalar(raw: str):
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw


if __name__ == "__main__":
    main()
