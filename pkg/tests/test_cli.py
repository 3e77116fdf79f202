import csv
import io
import json

import numpy as np
import pytest

from erlanga import cli
from erlanga.model import ModelParams
from erlanga.passage import mean_fpt_recurrence
from erlanga.transient import p_mm_inf_closed
from erlanga.validation import CheckResult


def run(capsys, *args):
    code = cli.main(list(args))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


# one quick invocation per table; checks the header and the JSON keys, not the values
SCHEMA_CASES = {
    "transient": ["transient", "--rho", "1.5", "--m", "2", "--eta", "0.5", "--n0", "1",
                  "--n", "0", "3", "--t", "1"],
    "limit": ["limit", "--model", "loss", "--rho", "2", "--m", "3", "--n0", "0", "--t", "1"],
    "steady": ["steady", "--rho", "1", "--m", "2", "--eta", "0.5", "--nmax", "5"],
    "busy": ["busy", "--rho", "1.5", "--m", "2", "--eta", "0.5", "--n0", "0", "--t", "1"],
    "fpt": ["fpt", "--rho", "1", "--m", "2", "--eta", "1.5", "--n0", "0", "--nstar", "4",
            "--t", "1"],
    "mean-fpt": ["mean-fpt", "--rho", "1", "--m", "2", "--eta", "0.5", "--nstar", "3"],
    "diffusion": ["diffusion", "--beta", "0.5", "--x", "-1", "--b", "1", "--theta", "1"],
    "diffusion-time": ["diffusion", "--beta", "0.5", "--x", "-1", "--b", "1", "--eta", "0.5",
                       "--t", "1"],
    "validate": ["validate", "--check", "wronskians", "busy_formulas_at_m"],
}

GOLDEN_HEADERS = {
    "transient": "n,t,value,error,flag",
    "limit": "n,t,value,error,flag",
    "steady": "n,value",
    "busy": "t,value,error,flag",
    "fpt": "t,density,density_error,cdf,cdf_error,flag",
    "mean-fpt": "n,value,recurrence",
    "diffusion": "theta_re,theta_im,value_re,value_im",
    "diffusion-time": "t,density,density_error,flag",
    "validate": "check,error,tolerance,status",
}


@pytest.mark.parametrize("key", sorted(SCHEMA_CASES))
def test_csv_header_is_stable(capsys, key):
    code, out, _ = run(capsys, *SCHEMA_CASES[key])
    assert code == 0
    assert out.splitlines()[0] == GOLDEN_HEADERS[key]
    assert ",".join(cli.COLUMNS[key]) == GOLDEN_HEADERS[key]


@pytest.mark.parametrize("key", sorted(SCHEMA_CASES))
def test_json_keys_are_stable(capsys, key):
    code, out, _ = run(capsys, *SCHEMA_CASES[key], "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert set(doc) == {"command", "params", "results", "status"}
    assert doc["status"] == "ok"
    assert doc["results"]
    for r in doc["results"]:
        assert list(r) == GOLDEN_HEADERS[key].split(",")


def test_oracle_columns_are_appended(capsys):
    code, out, _ = run(capsys, "transient", "--rho", "1.5", "--m", "2", "--eta", "0.5",
                       "--n0", "1", "--n", "0", "3", "--t", "1", "--oracle")
    assert code == 0
    assert out.splitlines()[0] == "n,t,value,error,flag,oracle"
    for r in rows(out):
        assert abs(float(r["value"]) - float(r["oracle"])) < 1e-8
    code, out, _ = run(capsys, *SCHEMA_CASES["fpt"], "--oracle")
    assert out.splitlines()[0] == "t,density,density_error,cdf,cdf_error,flag,oracle_cdf,oracle_density"
    r = rows(out)[0]
    assert abs(float(r["cdf"]) - float(r["oracle_cdf"])) < 1e-8
    assert abs(float(r["density"]) - float(r["oracle_density"])) < 1e-8


def test_steady_sums_to_one(capsys):
    code, out, _ = run(capsys, "steady", "--lambda", "0.8", "--mu", "1", "--m", "2", "--eta", "0.5")
    assert code == 0
    total = sum(float(r["value"]) for r in rows(out))
    assert abs(total - 1.0) < 1e-12


def test_transient_infinite_server_matches_closed_form(capsys):
    code, out, _ = run(capsys, "transient", "--eta", "1", "--rho", "1", "--n0", "0", "--t", "1")
    assert code == 0
    table = rows(out)
    assert len(table) > 5
    for r in table:
        assert abs(float(r["value"]) - p_mm_inf_closed(1.0, 0, int(r["n"]), 1.0)) < 1e-8


def test_mean_fpt_matches_recurrence(capsys):
    code, out, _ = run(capsys, "mean-fpt", "--rho", "1", "--m", "2", "--eta", "0.5", "--nstar", "6")
    assert code == 0
    ref = mean_fpt_recurrence(ModelParams.normalized(1.0, 2, 0.5), 6)
    got = np.array([float(r["value"]) for r in rows(out)])
    assert got.shape == ref.shape
    np.testing.assert_allclose(got[:-1], ref[:-1], rtol=1e-12)
    assert got[-1] == 0.0


def test_physical_units(capsys):
    # doubling both rates halves the time scale
    _, a, _ = run(capsys, "busy", "--lambda", "3", "--mu", "2", "--m", "2", "--eta", "1",
                  "--n0", "0", "--t", "0.5")
    _, b, _ = run(capsys, "busy", "--rho", "1.5", "--m", "2", "--eta", "0.5", "--n0", "0",
                  "--t", "1")
    assert abs(float(rows(a)[0]["value"]) - float(rows(b)[0]["value"])) < 1e-9


def test_output_file(capsys, tmp_path):
    path = tmp_path / "out.csv"
    code, out, _ = run(capsys, *SCHEMA_CASES["steady"], "--output", str(path))
    assert code == 0 and out == ""
    assert path.read_text().splitlines()[0] == "n,value"


def test_invalid_parameters_exit_2(capsys):
    code, out, err = run(capsys, "steady", "--rho", "3", "--m", "2")
    assert code == cli.EXIT_INVALID == 2
    assert "steady state" in err and out == ""
    code, _, _ = run(capsys, "transient", "--rho", "-1", "--m", "2", "--n0", "0", "--t", "1")
    assert code == 2
    code, _, _ = run(capsys, "fpt", "--rho", "1", "--m", "2", "--eta", "1", "--n0", "5",
                     "--nstar", "3", "--t", "1")
    assert code == 2


@pytest.mark.parametrize("argv", [
    [],
    ["nonsense"],
    ["transient", "--rho", "1"],
    ["steady", "--rho", "1", "--lambda", "1"],
    ["limit", "--model", "mmx", "--rho", "1", "--n0", "0", "--t", "1"],
    ["steady", "--rho", "abc"],
])
def test_usage_errors_exit_64(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        cli.main(argv)
    assert exc.value.code == cli.EXIT_USAGE == 64


def test_accuracy_failure_flags_rows_and_exits_3(capsys):
    # far too few terms for the requested target
    code, out, err = run(capsys, "busy", "--rho", "1.5", "--m", "2", "--eta", "0.5", "--n0", "0",
                         "--t", "1", "--terms", "4", "--max-terms", "4", "--target", "1e-14")
    assert code == cli.EXIT_ACCURACY == 3
    assert rows(out)[0]["flag"] == "inaccurate"
    assert "accuracy" in err


def test_validate_reports_failure_with_exit_2(capsys, monkeypatch):
    monkeypatch.setattr(cli, "run_checks", lambda names: [CheckResult("broken", 1.0, 1e-9)])
    code, out, _ = run(capsys, "validate")
    assert code == 2
    assert rows(out)[0]["status"] == "fail"


def test_contour_tolerance_override_is_scoped(capsys):
    from erlanga import special
    before = special.DEFAULT_CONTOUR
    code, out, _ = run(capsys, *SCHEMA_CASES["transient"], "--contour-tol", "1e-8")
    assert code == 0
    assert special.DEFAULT_CONTOUR is before


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv(cli.THREADS_ENV, "3")
    a = cli.build_parser().parse_args(SCHEMA_CASES["busy"])
    assert a.threads == 3


def test_validate_full_suite_passes(capsys):
    code, out, _ = run(capsys, "validate")
    assert code == 0
    table = rows(out)
    assert {r["check"] for r in table} == {c[0] for c in cli.CHECKS}
    assert all(r["status"] == "pass" for r in table)
