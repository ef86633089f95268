import csv
import io
import json

import pytest
from click.testing import CliRunner

from context import momentdet  # noqa: F401
from momentdet.cli import EXIT_INPUT, cli, fmt


@pytest.fixture
def runner():
    # keep standard error apart from the JSON and CSV on standard output
    try:
        return CliRunner(mix_stderr=False)
    except TypeError:
        return CliRunner()


@pytest.fixture
def spec_file(tmp_path):
    def write(document, name="spec.json"):
        path = tmp_path / name
        text = document if isinstance(document, str) else json.dumps(document, indent=2)
        path.write_text(text, encoding="utf-8")
        return str(path)

    return write


def rows_of(output: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(output)))


def test_fmt():
    assert fmt(None) == ""
    assert fmt(float("-inf")) == "-inf"
    assert fmt(1 / 3) == "0.333333333333"


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert momentdet.VERSION in result.stdout


def test_analyze_gaussian(runner, spec_file):
    result = runner.invoke(cli, ["analyze", "--spec", spec_file({"family": "gaussian", "params": {"sigma": 1.0}})])
    assert result.exit_code == 0, result.stderr
    analysis = json.loads(result.stdout)
    assert analysis["case"] == "hamburger"
    assert analysis["conclusion"] == "Determinate"
    assert "Thm1" in [r["rule"] for r in analysis["fired_rules"]]
    assert all(set(r) == {"rule", "premises"} for r in analysis["fired_rules"])
    assert list(analysis)[:4] == ["conclusion", "fired_rules", "corollaries", "conflicts"]
    assert [r["id"] for r in analysis["reports"]][:2] == ["KstarH", "UMonotoneH"]


def test_analyze_output_is_deterministic(runner, tmp_path):
    first = runner.invoke(cli, ["analyze", "--entry", "lognormal", "--json", str(tmp_path / "a.json")])
    second = runner.invoke(cli, ["analyze", "--entry", "lognormal"])
    assert first.exit_code == second.exit_code == 0
    assert first.stdout == second.stdout
    assert (tmp_path / "a.json").read_text(encoding="utf-8") == first.stdout
    assert json.loads(first.stdout)["conclusion"] == "Indeterminate"


def test_verbose_logging_stays_off_standard_output(runner):
    result = runner.invoke(cli, ["--verbose", "analyze", "--entry", "gaussian"])
    assert result.exit_code == 0, result.stderr
    assert json.loads(result.stdout)["conclusion"] == "Determinate"
    assert result.stderr


@pytest.mark.parametrize(
    "document",
    [
        '{"params": {"sigma": 1.0}}',
        '{"family": "cauchy"}',
        "{not json",
        '{"family": "gaussian", "threshold": 0.5}',
    ],
)
def test_bad_spec_files_exit_with_input_error(runner, spec_file, document):
    result = runner.invoke(cli, ["analyze", "--spec", spec_file(document)])
    assert result.exit_code == EXIT_INPUT
    assert "line" in result.stderr
    assert result.stdout == ""


def test_missing_spec_file(runner, tmp_path):
    result = runner.invoke(cli, ["analyze", "--spec", str(tmp_path / "nope.json")])
    assert result.exit_code == EXIT_INPUT


def test_spec_and_entry_are_exclusive(runner, spec_file):
    assert runner.invoke(cli, ["analyze"]).exit_code == EXIT_INPUT
    result = runner.invoke(cli, ["analyze", "--entry", "gaussian", "--spec", spec_file({"family": "gaussian"})])
    assert result.exit_code == EXIT_INPUT


def test_case_mismatch_is_an_input_error(runner):
    result = runner.invoke(cli, ["analyze", "--entry", "exp", "--case", "hamburger"])
    assert result.exit_code == EXIT_INPUT


def test_moments_csv(runner, spec_file):
    result = runner.invoke(cli, ["moments", "--spec", spec_file({"family": "exp"}), "--kmax", "12"])
    assert result.exit_code == 0, result.stderr
    rows = rows_of(result.stdout)
    assert list(rows[0]) == ["k", "ln_mk", "err", "carleman_term"]
    assert [int(r["k"]) for r in rows] == list(range(1, 13))
    # ln 10!
    assert float(rows[9]["ln_mk"]) == pytest.approx(15.1044125731, rel=1e-8)


def test_kmax_range_is_enforced(runner):
    assert runner.invoke(cli, ["moments", "--entry", "exp", "--kmax", "4"]).exit_code != 0


def test_trace_csv(runner, tmp_path):
    csv_path = tmp_path / "trace.csv"
    result = runner.invoke(cli, ["trace", "--entry", "gaussian", "--kmax", "10", "--csv", str(csv_path)])
    assert result.exit_code == 0, result.stderr
    rows = rows_of(result.stdout)
    assert list(rows[0]) == ["k", "x_k", "ln_peak_weight", "bound_slack"]
    row8 = next(r for r in rows if r["k"] == "8")
    assert float(row8["x_k"]) == pytest.approx(4.0, rel=1e-6)
    assert float(row8["bound_slack"]) >= -1e-8
    assert csv_path.read_text(encoding="utf-8") == result.stdout


def test_conditions_only(runner, spec_file):
    spec = spec_file({"family": "example1", "params": {"alpha": 1.0}})
    result = runner.invoke(cli, ["conditions", "--spec", spec, "--only", "KstarH,KreinH"])
    assert result.exit_code == 0, result.stderr
    rows = {r["condition"]: r for r in rows_of(result.stdout)}
    # KreinH brings its converse along
    assert set(rows) == {"KstarH", "KreinH", "ConverseKreinH"}
    assert rows["KstarH"]["verdict"] == "FailsToHold"
    assert rows["ConverseKreinH"]["verdict"] == "Holds"


def test_unknown_condition_id(runner):
    result = runner.invoke(cli, ["conditions", "--entry", "gaussian", "--only", "Nope"])
    assert result.exit_code == EXIT_INPUT
    result = runner.invoke(cli, ["conditions", "--entry", "gaussian", "--only", "PedersenDiscrete"])
    assert result.exit_code == EXIT_INPUT


def test_transform_pipeline_spec(runner, spec_file):
    document = {"family": "exp", "transforms": [{"op": "symmetrize_sqrt"}]}
    result = runner.invoke(cli, ["analyze", "--spec", spec_file(document)])
    assert result.exit_code == 0, result.stderr
    assert json.loads(result.stdout)["conclusion"] == "Determinate"


def test_setting_overrides(runner):
    result = runner.invoke(cli, ["--set", "tailfit.ratio=1.3", "moments", "--entry", "exp", "--kmax", "8"])
    assert result.exit_code == 0, result.stderr
    assert runner.invoke(cli, ["--set", "nonsense", "catalog", "list"]).exit_code == EXIT_INPUT


def test_catalog_list(runner):
    result = runner.invoke(cli, ["catalog", "list"])
    assert result.exit_code == 0
    for name in ("gaussian", "lognormal", "sym_sqrt_pmf"):
        assert name in result.stdout


def test_catalog_run_subset(runner):
    result = runner.invoke(cli, ["catalog", "run", "--only", "gaussian,geometric"])
    assert result.exit_code == 0, result.stderr
    assert "NO" not in result.stdout.split()


def test_catalog_run_unknown_entry(runner):
    assert runner.invoke(cli, ["catalog", "run", "--only", "cauchy"]).exit_code == EXIT_INPUT
