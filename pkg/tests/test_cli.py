import json

import jsonschema
import pytest

from subliyau import cli

FAST = {
    "verify-identities": ["--model", "su2", "--count", "4", "--points", "3"],
    "liyau-coeffs": ["--alpha", "3,4", "--rho", "0.5"],
    "check-liyau": ["--paths", "2000", "--step", "0.05", "--points", "3", "--f", "exp(x)"],
    "optimize-v": ["--mode", "family-scan"],
    "spectral-gap": ["--paths", "8000", "--step", "0.05", "--f", "re_a"],
    "cc-distance": ["--model", "heisenberg", "--y", "1,0,0", "--cells", "8", "--starts", "2"],
    "diameter": ["--n-pairs", "3", "--cells", "8", "--starts", "2"],
    "short-time": ["--paths", "40000", "--step", "0.01"],
}


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr().out
    return code, out


@pytest.mark.parametrize("command", sorted(FAST))
def test_every_command_matches_its_schema(command, capsys):
    code, out = run([command] + FAST[command], capsys)
    doc = json.loads(out)
    schema = json.loads(cli.schema_path(command).read_text())
    jsonschema.validate(doc, schema)
    assert doc["command"] == command
    assert code in (0, 1)
    assert code == (0 if doc["passed"] else 1)


def test_liyau_coeffs_reports_both_constants(capsys):
    code, out = run(["liyau-coeffs", "--alpha", "3", "--rho", "0", "--t", "1"], capsys)
    res = json.loads(out)["result"]
    rows = res if isinstance(res, list) else res.get("rows", [res])
    row = rows[0]
    assert row["quadrature"]["c_const"] == pytest.approx(16.0, rel=1e-8)
    assert row["closed_form_printed"]["c_const"] == pytest.approx(64.0)


def test_output_is_deterministic(tmp_path, capsys):
    argv = ["check-liyau", "--paths", "2000", "--step", "0.05", "--points", "3", "--seed", "7"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    cli.main(argv + ["--out", str(a)])
    cli.main(argv + ["--out", str(b), "--threads", "2"])
    assert a.read_bytes() == b.read_bytes()


def test_csv_output_and_plot(tmp_path):
    out = tmp_path / "scan.csv"
    assert cli.main(["optimize-v", "--mode", "decay", "--rho", "1", "--format", "csv", "--plot", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert "," in lines[0] and len(lines) > 2
    svg = out.with_suffix(".svg")
    assert svg.exists() and b"<svg" in svg.read_bytes()


def test_outdir_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTDIR_ENV, str(tmp_path))
    assert cli.main(["liyau-coeffs"]) in (0, 1)
    assert (tmp_path / "liyau-coeffs.json").exists()


@pytest.mark.parametrize(
    "argv",
    [
        ["no-such-command"],
        ["verify-identities"],
        ["liyau-coeffs", "--t", "-1"],
        ["liyau-coeffs", "--alpha", "x,y"],
        ["cc-distance", "--model", "so3", "--y", "1,0,0"],
    ],
)
def test_usage_errors_exit_two(argv):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == 2


def test_tabless_csv_is_a_usage_error(capsys):
    assert cli.main(["verify-identities", "--model", "heisenberg", "--count", "2", "--points", "2",
                     "--format", "csv"]) == 2


def test_out_of_range_family_parameter_is_a_usage_error(capsys):
    assert cli.main(["optimize-v", "--mode", "family-scan", "--eps", "1.5"]) == 2


def test_bad_expression_is_a_usage_error(capsys):
    assert cli.main(["check-liyau", "--f", "tan(x)", "--paths", "100"]) == 2


def test_numeric_failure_exits_three(capsys):
    # too few paths leave the density window nearly empty
    code, out = run(["short-time", "--paths", "200", "--step", "0.05"], capsys)
    assert code == 3
    doc = json.loads(out)
    assert doc["error"]["type"] == "NumericalError"
    jsonschema.validate(doc, json.loads(cli.schema_path("short-time").read_text()))


def test_schema_path_unknown():
    with pytest.raises(KeyError):
        cli.schema_path("nope")
