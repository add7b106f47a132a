"""Instance files, subcommand reports, rendering, and exit codes."""

import json

import pytest
from click.testing import CliRunner

from pacing import ConvergenceError, InputError
from pacing.agents import Identity, Instance, Linear, PiecewiseLinearConcave, Power
from pacing.cli import (
    instance_from_dict,
    instance_to_dict,
    load_instance,
    main,
    parse_profile,
    render,
    run_file,
)
from pacing.numerics import INF

CROSS = {
    "agents": [
        {"valuation": {"kind": "linear", "v": 1.0}, "money_cost": {"kind": "identity"},
         "budget": 0.5},
        {"valuation": {"kind": "linear", "v": 1.0}, "budget": 0.5},
    ],
    "ctr": [[1.0, 0.5], [0.5, 1.0]],
    "seed": 7,
}

PAIR = {
    "agents": [
        {"valuation": {"kind": "linear", "v": 1.0}, "budget": "inf"},
        {"valuation": {"kind": "linear", "v": 0.7}, "budget": "inf"},
    ],
    "ctr": [[1.0], [1.0]],
}

GAP = {
    "agents": [
        {"valuation": {"kind": "linear", "v": 100.0}, "budget": 1.0},
        {"valuation": {"kind": "linear", "v": 1.0}, "budget": "inf"},
    ],
    "ctr": [[1.0], [1.0]],
}


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, doc in (("cross", CROSS), ("pair", PAIR), ("gap", GAP)):
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(doc))
        paths[name] = str(path)
    return paths


# ---------------------------------------------------------------------------
# instance files
# ---------------------------------------------------------------------------


def test_documents_round_trip():
    doc = {
        "agents": [
            {"valuation": {"kind": "linear", "v": 2.0},
             "money_cost": {"kind": "identity"}, "budget": 0.5},
            {"valuation": {"kind": "power", "a": 1.3, "rho": 0.5},
             "money_cost": {"kind": "power", "a": 1.0, "kappa": 2.0}, "budget": "inf"},
            {"valuation": {"kind": "pwl_concave", "points": [[0.0, 0.0], [0.5, 2.0]]},
             "money_cost": {"kind": "pwl_convex", "points": [[0.0, 0.0], [1.0, 1.5]]},
             "budget": 1.25},
        ],
        "ctr": [[1.0, 0.5], [0.5, 1.0], [0.2, 0.9]],
    }
    inst = instance_from_dict(doc)
    assert isinstance(inst.agents[0].valuation, Linear)
    assert isinstance(inst.agents[1].valuation, Power)
    assert isinstance(inst.agents[2].valuation, PiecewiseLinearConcave)
    assert inst.agents[1].budget == INF
    assert instance_from_dict(instance_to_dict(inst)) == inst


def test_missing_money_cost_defaults_to_identity():
    inst = instance_from_dict(PAIR)
    assert isinstance(inst.agents[0].money_cost, Identity)


def test_file_seed_is_returned(tmp_path):
    path = tmp_path / "inst.json"
    path.write_text(json.dumps(CROSS))
    inst, seed = load_instance(str(path))
    assert isinstance(inst, Instance)
    assert seed == 7


def test_schema_diagnostics_carry_the_field_path():
    with pytest.raises(InputError, match=r"agents\[0\]\.valuation\.kind"):
        instance_from_dict({"agents": [{"valuation": {"kind": "cubic"}, "budget": 1.0}],
                            "ctr": [[1.0]]})
    with pytest.raises(InputError, match=r"agents\[0\]\.budget"):
        instance_from_dict({"agents": [{"valuation": {"kind": "linear", "v": 1.0},
                                        "budget": "Inf"}], "ctr": [[1.0]]})
    with pytest.raises(InputError, match=r"missing field\(s\) \['rho'\]"):
        instance_from_dict({"agents": [{"valuation": {"kind": "power", "a": 1.0},
                                        "budget": 1.0}], "ctr": [[1.0]]})
    with pytest.raises(InputError, match="unknown field"):
        instance_from_dict({"agents": [{"valuation": {"kind": "linear", "v": 1.0},
                                        "budget": 1.0, "bid": 3}], "ctr": [[1.0]]})


def test_bare_json_infinity_is_rejected(tmp_path):
    path = tmp_path / "inst.json"
    path.write_text('{"agents": [{"valuation": {"kind": "linear", "v": Infinity},'
                    ' "budget": 1.0}], "ctr": [[1.0]]}')
    with pytest.raises(InputError, match='"inf"'):
        load_instance(str(path))


def test_malformed_json_reports_line_and_column(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"agents": [,]}')
    with pytest.raises(InputError, match="line 1 column"):
        load_instance(str(path))


def test_profiles_parse_inf_and_reject_triples():
    prof = parse_profile('[[2.0, 0.5], [1.0, "inf"]]')
    assert list(prof)[1].w == INF
    with pytest.raises(InputError, match=r"--profile\[0\]"):
        parse_profile('[[1.0, 2.0, 3.0]]')
    with pytest.raises(InputError, match="--profile"):
        parse_profile('{"v": 1.0}')


# ---------------------------------------------------------------------------
# run_file reports
# ---------------------------------------------------------------------------


def test_fppe_report_on_the_split_interest_market(files):
    payload, failed = run_file(files["cross"], "fppe", profile="[[1.0, 0.5], [1.0, 0.5]]")
    assert not failed
    assert payload["prices"] == [0.5, 0.5]
    assert payload["allocation"] == [[1.0, 0.0], [0.0, 1.0]]
    assert payload["revenue"] == 1.0
    assert payload["verification"]["ok"]
    assert payload["seed"] == 7
    assert payload["tolerances"]["eps_fppe"] == 1e-8


def test_seed_flag_overrides_the_file_seed(files):
    payload, _ = run_file(files["cross"], "fppe", profile="[[1.0, 0.5], [1.0, 0.5]]", seed=99)
    assert payload["seed"] == 99


def test_verify_nash_passes_the_efficient_profile(files):
    payload, failed = run_file(files["pair"], "verify-nash",
                               profile="[[1.0, 0.7], [0.7, 0.7]]", eps=1e-7)
    assert not failed
    assert payload["is_eps_nash"] is True
    assert payload["gain"] == pytest.approx(0.0, abs=1e-12)
    assert payload["method"] == "exact_single_item"


def test_verify_nash_flags_a_refutable_profile(files):
    payload, failed = run_file(files["pair"], "verify-nash",
                               profile="[[1.0, 0.1], [0.7, 0.1]]")
    assert failed
    assert not payload["is_eps_nash"]
    assert payload["gain"] > 0


def test_best_response_report(files):
    payload, failed = run_file(files["pair"], "best-response",
                               profile="[[1.0, 0.7], [0.7, 0.7]]", agent=0)
    assert not failed
    assert payload["message"] == ["inf", 0.7]
    assert payload["utility"] == pytest.approx(0.3, abs=1e-12)
    assert payload["attained"] is True


def test_best_response_respects_the_space_flag(files):
    payload, _ = run_file(files["pair"], "best-response",
                          profile="[[1.0, 0.7], [0.7, 0.7]]", agent=1, space="value-only")
    assert payload["utility"] == 0.0


def test_best_response_checks_the_agent_index(files):
    with pytest.raises(InputError, match="--agent"):
        run_file(files["pair"], "best-response", profile="[[1.0, 0.7], [0.7, 0.7]]", agent=5)


def test_solve_nash_report(files):
    payload, failed = run_file(files["pair"], "solve-nash")
    assert not failed
    assert len(payload["points"]) == 9
    assert payload["lowest_price"] == pytest.approx(0.7 / 1.7, abs=1e-6)
    assert payload["p_low"]["empty"] is False
    assert {point["kind"] for point in payload["points"]} == {"low", "high"}
    assert all(point["verified"] for point in payload["points"])


def test_welfare_evaluates_a_given_allocation(files):
    payload, _ = run_file(files["gap"], "welfare", allocation="[0.01, 0.99]")
    assert payload["mode"] == "evaluate"
    assert payload["total"] == pytest.approx(1.99, abs=1e-12)


def test_welfare_optimizes_without_an_allocation(files):
    payload, _ = run_file(files["gap"], "welfare")
    assert payload["mode"] == "optimal"
    assert payload["total"] == pytest.approx(1.99, abs=1e-6)


def test_poa_report(files):
    payload, _ = run_file(files["gap"], "poa", profile='[["inf", 1.0], [1.0, "inf"]]')
    assert payload["ratio"] == pytest.approx(1.99, abs=1e-6)
    assert payload["welfare_eq"] == pytest.approx(1.0, abs=1e-9)
    assert payload["prices"] == [1.0]


def test_profile_length_must_match(files):
    with pytest.raises(InputError, match="2 agents"):
        run_file(files["pair"], "fppe", profile="[[1.0, 0.5]]")


def test_missing_profile_is_an_input_error(files):
    with pytest.raises(InputError, match="--profile"):
        run_file(files["pair"], "fppe")


def test_unknown_subcommand_is_rejected(files):
    with pytest.raises(InputError, match="subcommand"):
        run_file(files["pair"], "audit")


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------


def test_json_rendering_is_byte_stable(files):
    first, _ = run_file(files["cross"], "fppe", profile="[[1.0, 0.5], [1.0, 0.5]]")
    second, _ = run_file(files["cross"], "fppe", profile="[[1.0, 0.5], [1.0, 0.5]]")
    assert render(first, "json") == render(second, "json")


def test_text_rendering_flattens_nested_fields(files):
    payload, _ = run_file(files["cross"], "fppe", profile="[[1.0, 0.5], [1.0, 0.5]]")
    text = render(payload, "text")
    assert "prices[0]" in text and "verification.ok" in text


def test_csv_rendering_uses_rows_when_present(files):
    payload, _ = run_file(files["pair"], "solve-nash")
    lines = render(payload, "csv").splitlines()
    assert lines[0].startswith("price,kind,profile")
    assert len(lines) == 1 + len(payload["points"])


def test_csv_rendering_falls_back_to_field_value_pairs(files):
    payload, _ = run_file(files["cross"], "fppe", profile="[[1.0, 0.5], [1.0, 0.5]]")
    lines = render(payload, "csv").splitlines()
    assert lines[0] == "field,value"
    assert any(line.startswith("revenue,") for line in lines)


# ---------------------------------------------------------------------------
# the command group
# ---------------------------------------------------------------------------


def test_cli_fppe_json(files):
    result = CliRunner().invoke(main, ["fppe", files["cross"],
                                       "--profile", "[[1.0, 0.5], [1.0, 0.5]]",
                                       "--format", "json"])
    assert result.exit_code == 0, result.output
    doc = json.loads(result.output)
    assert doc["prices"] == [0.5, 0.5]


def test_cli_verify_nash_exit_codes(files):
    runner = CliRunner()
    ok = runner.invoke(main, ["verify-nash", files["pair"],
                              "--profile", "[[1.0, 0.7], [0.7, 0.7]]"])
    assert ok.exit_code == 0
    bad = runner.invoke(main, ["verify-nash", files["pair"],
                               "--profile", "[[1.0, 0.1], [0.7, 0.1]]"])
    assert bad.exit_code == 1


def test_cli_input_errors_exit_2(files, tmp_path):
    runner = CliRunner()
    missing = runner.invoke(main, ["fppe", str(tmp_path / "nope.json"),
                                   "--profile", "[[1.0, 1.0]]"])
    assert missing.exit_code == 2
    schema = tmp_path / "bad.json"
    schema.write_text('{"agents": [], "ctr": [[1.0]]}')
    empty = runner.invoke(main, ["fppe", str(schema), "--profile", "[[1.0, 1.0]]"])
    assert empty.exit_code == 2
    assert "agents" in empty.output


def test_cli_solver_failures_exit_3(files, monkeypatch):
    import pacing.cli as cli_module

    def explode(name, **params):
        raise ConvergenceError("multiplier search stalled")

    monkeypatch.setattr(cli_module, "run_scenario", explode)
    result = CliRunner().invoke(main, ["scenario", "table1"])
    assert result.exit_code == 3
    assert "stalled" in result.output


def test_cli_scenario_pass_and_params():
    runner = CliRunner()
    result = runner.invoke(main, ["scenario", "poa_lower_bound", "-p", "K=10",
                                  "--format", "json"])
    assert result.exit_code == 0, result.output
    doc = json.loads(result.output)
    assert doc["passed"] is True
    assert doc["inputs"]["K"] == 10.0
    bad = runner.invoke(main, ["scenario", "poa_lower_bound", "-p", "K"])
    assert bad.exit_code == 2
    unknown = runner.invoke(main, ["scenario", "nonsense"])
    assert unknown.exit_code == 2


def test_cli_scenario_text_report():
    result = CliRunner().invoke(main, ["scenario", "table1"])
    assert result.exit_code == 0
    assert result.output.startswith("scenario: table1")
    assert "[ok  ]" in result.output
    assert "pass:" in result.output.splitlines()[-1]


def test_cli_scenario_json_is_stable_apart_from_wall_clock():
    runner = CliRunner()
    args = ["scenario", "linear_efficient", "--format", "json"]
    one = json.loads(runner.invoke(main, args).output)
    two = json.loads(runner.invoke(main, args).output)
    one.pop("elapsed_s"), two.pop("elapsed_s")
    assert one == two


def test_cli_scenario_csv_rows():
    result = CliRunner().invoke(main, ["scenario", "table1", "--format", "csv"])
    lines = result.output.splitlines()
    assert lines[0].startswith("regime,")
    assert len(lines) == 4
