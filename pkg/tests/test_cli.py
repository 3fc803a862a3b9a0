import json
import subprocess
import sys
from pathlib import Path

import pytest

from bakry_emery.cli import main
from bakry_emery.scenario import (
    DEFAULT_TOLERANCES,
    ScenarioError,
    parse_scenario,
    run_checks,
    to_jsonable,
)

ROOT = Path(__file__).resolve().parents[1]

FAILING_TCD = {
    "name": "de_sitter_expect_holds",
    "spacetime": {"builtin": "de_sitter", "n": 4},
    "N": "inf",
    "checks": [{"type": "cd_check", "condition": "TCD", "lambda": 0, "points": 5, "expect": "holds"}],
}

PASSING = {
    "name": "flat",
    "spacetime": {"builtin": "minkowski", "n": 4},
    "checks": [
        {"type": "cd_check", "condition": "TCD", "points": 5, "expect": "holds"},
        {"type": "geodesic", "id": "g", "point": [0, 0, 0, 0], "velocity": [1.2, 0.3, 0.2, 0.1], "span": [0, 1]},
        {"type": "jacobi", "geodesic": "g", "expect_first": "none"},
    ],
}


def _write(tmp_path, data, name="s.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data, indent=2))
    return p


def test_exit_zero_and_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, PASSING)), "--output", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["exit_code"] == 0
    assert report["counts"]["pass"] == 3
    assert (out / "summary.txt").read_text().startswith("scenario: flat")
    csvs = sorted(p.name for p in out.glob("*.csv"))
    assert any(name.endswith("_path.csv") or "geodesic" in name for name in csvs)


def test_exit_one_on_failed_expectation(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, FAILING_TCD)), "--output", str(out)]) == 1
    report = json.loads((out / "report.json").read_text())
    check = report["checks"][0]
    assert check["status"] == "fail"
    assert check["payload"]["verdict"] == "violated"
    assert "FAIL" in capsys.readouterr().out


def test_runtime_error_is_isolated(tmp_path):
    data = {
        "name": "isolated",
        "spacetime": {"builtin": "minkowski", "n": 4},
        "checks": [
            {"type": "laplacian_comparison", "distance": "sqrt((2-t)^2 - x^2 - y^2 - z^2)",
             "q": [0, 0, 0, 0], "start": [2, 1, 0, 0]},
            {"type": "cd_check", "condition": "TCD", "points": 3, "expect": "holds"},
        ],
    }
    out = tmp_path / "out"
    assert main(["run", str(_write(tmp_path, data)), "--output", str(out)]) == 1
    report = json.loads((out / "report.json").read_text())
    assert [c["status"] for c in report["checks"]] == ["error", "pass"]
    assert "ValueError" in report["checks"][0]["message"]


def test_parse_error_reports_line(tmp_path, capsys):
    text = '{\n  "name": "bad",\n  "spacetime": {"builtin": "minkowski"},\n  "bogus": 1,\n  "checks": []\n}\n'
    p = tmp_path / "bad.json"
    p.write_text(text)
    assert main(["run", str(p)]) == 2
    err = capsys.readouterr().err
    assert "bogus" in err and "line 4" in err


def test_malformed_json(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"name": "x",\n "checks": [,]}')
    assert main(["run", str(p)]) == 2
    assert "line 2" in capsys.readouterr().err


@pytest.mark.parametrize("data,fragment", [
    ({"name": "x", "spacetime": {"builtin": "nope"}, "checks": []}, "nope"),
    ({"name": "x", "spacetime": {"builtin": "minkowski"}, "N": 4, "checks": []}, "N"),
    ({"name": "x", "spacetime": {"builtin": "minkowski"}, "checks": [{"type": "teleport"}]}, "teleport"),
    ({"name": "x", "spacetime": {"builtin": "minkowski"}, "checks": [{"type": "focusing", "jacobi": "j"}]}, "j"),
    ({"name": "x", "spacetime": {"builtin": "minkowski"}, "potential": "t +", "checks": []}, "potential"),
    ({"name": "x", "spacetime": {"builtin": "minkowski"}, "tolerances": {"wat": 1}, "checks": []}, "wat"),
])
def test_validation_errors(data, fragment):
    with pytest.raises(ScenarioError, match=fragment):
        parse_scenario(data)


def test_validate_only(tmp_path, capsys):
    assert main(["run", str(_write(tmp_path, PASSING)), "--validate-only"]) == 0
    assert "ok (3 checks)" in capsys.readouterr().out


def test_list_builtins(capsys):
    assert main(["--list-builtins"]) == 0
    out = capsys.readouterr().out
    for name in ("minkowski", "de_sitter", "anti_de_sitter", "einstein_static", "warped_product",
                 "twisted_product", "minkowski_with_f"):
        assert name + "(" in out


def test_usage_errors():
    assert main([]) == 2
    assert main(["run"]) == 2
    assert main(["frobnicate"]) == 2


def test_tolerance_scale_and_seed():
    sc = parse_scenario(PASSING, seed=9, tol_scale=10.0)
    assert sc.seed == 9
    assert sc.tolerances["trace"] == pytest.approx(10 * DEFAULT_TOLERANCES["trace"])


def test_reports_are_deterministic():
    a = json.dumps(to_jsonable(run_checks(parse_scenario(FAILING_TCD, seed=3)).to_dict()), sort_keys=True)
    b = json.dumps(to_jsonable(run_checks(parse_scenario(FAILING_TCD, seed=3)).to_dict()), sort_keys=True)
    assert a == b


def test_to_jsonable_non_finite():
    assert to_jsonable({"a": float("inf"), "b": [float("nan")]}) == {"a": "inf", "b": ["nan"]}


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bakry_emery.cli", "run", str(_write(tmp_path, FAILING_TCD)),
                           "--output", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 1


@pytest.mark.parametrize("path", sorted((ROOT / "scenarios").glob("*.json")), ids=lambda p: p.stem)
def test_shipped_scenarios_validate(path):
    assert main(["run", str(path), "--validate-only"]) == 0
