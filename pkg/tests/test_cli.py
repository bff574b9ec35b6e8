import csv
import io
import math

import numpy as np
import pytest

from specgap.cli import main
from specgap.config import ALL_METHODS, ConfigError, load_config, parse_config
from specgap.pipeline import CSV_COLUMNS, PLOT_SAMPLES, plot_columns, render, run_pipeline

SMALL_DRIFT = """\
# c-drift with c = 2 on a short interval
[problem]
kind = half_line
a = "1"
V = "-2*r"
R_max = 30

[bounds]
K = 0


[oracle]
n = 1500
"""


@pytest.fixture(scope="module")
def drift_report():
    return run_pipeline(parse_config(SMALL_DRIFT))


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


# ---------------------------------------------------------------------------
# configuration


def test_minimal_config_defaults():
    cfg = parse_config('[problem]\na = "1"\nV = "-2*r"\n')
    assert cfg.problem.kind == "half_line" and cfg.problem.r0 == 0.0 and cfg.problem.R_max == 60.0
    assert cfg.bounds.methods is None
    assert all(cfg.bounds.enabled(m) for m in ALL_METHODS)
    assert cfg.oracle.n == 4096 and cfg.output.format == "text"


def test_expression_error_reports_line():
    with pytest.raises(ConfigError) as info:
        parse_config('[problem]\na = "1"\nV = "exp("\n')
    assert info.value.line == 3
    assert "line 3" in str(info.value)


def test_method_selection():
    cfg = parse_config(SMALL_DRIFT.replace("K = 0", "K = 0\nmethods = [thm12, eq17]"))
    assert cfg.bounds.methods == ("thm12", "eq17")
    report = run_pipeline(cfg, ("bounds",))
    assert {b.method for b in report.bounds} == {"thm12", "eq17"}


@pytest.mark.parametrize("text,field", [
    ('[problem]\nkind = sphere\n', "kind"),
    ('[problem]\nR_max = -1\n', "R_max"),
    ('[problem]\nr0 = 5\nR_max = 2\n', "r0"),
    ('[problem]\n[bounds]\nmethods = [thm99]\n', "methods"),
    ('[problem]\n[bounds]\nbudget = 3\n', "budget"),
    ('[problem]\n[oracle]\nn = 8\n', "n"),
    ('[problem]\nkind = direct\ngamma = "-1"\n', "alpha"),
    ('[problem]\ncolour = "red"\n', "colour"),
])
def test_semantic_errors_name_the_field(text, field):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert field in str(info.value)


def test_missing_problem_section():
    with pytest.raises(ConfigError):
        parse_config("[oracle]\nn = 100\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_digest_ignores_layout_but_tracks_meaning():
    base = parse_config(SMALL_DRIFT)
    relaid = parse_config(SMALL_DRIFT.replace('V = "-2*r"', 'V   =   "-2 * r"   # same drift')
                          .replace("R_max = 30", "R_max = 30.0"))
    changed = parse_config(SMALL_DRIFT.replace('V = "-2*r"', 'V = "-3*r"'))
    assert base.digest() == relaid.digest()
    assert base.digest() != changed.digest()
    assert parse_config(SMALL_DRIFT.replace("n = 1500", "n = 1600")).digest() != base.digest()


# ---------------------------------------------------------------------------
# pipeline and rendering


def test_drift_pipeline_values(drift_report):
    lower = max(b.value for b in drift_report.bounds if b.direction == "lower" and b.quantity == "lambda1")
    upper = min(b.value for b in drift_report.bounds if b.direction == "upper")
    assert lower == pytest.approx(1.0, abs=1e-6)
    assert upper == pytest.approx(1.0, abs=2e-3)
    assert drift_report.oracle["lambda1"] == pytest.approx(1.0, abs=0.02)
    assert drift_report.checks and all(c.passed for c in drift_report.checks)
    assert drift_report.verdict.outcome == "gap_exists"


def test_every_bound_carries_citation(drift_report):
    assert all(b.citation for b in drift_report.bounds)


def test_text_report_starts_with_verdict(drift_report):
    text = render(drift_report, "text")
    assert text.splitlines()[0].startswith("Verdict: gap_exists")
    assert drift_report.provenance["digest"] in text


def test_csv_columns_and_rows(drift_report):
    rows = list(csv.reader(io.StringIO(render(drift_report, "csv"))))
    assert tuple(rows[0]) == CSV_COLUMNS
    table = {(r[0], r[1]): r for r in rows[1:]}
    assert float(table["thm12", "lower"][2]) == pytest.approx(1.0, abs=1e-6)
    assert float(table["eq17", "upper"][2]) == pytest.approx(1.0, abs=2e-3)
    for r in rows[1:]:
        v = r[2]
        assert v == "inf" or float(v) == float("%.17g" % float(v))
        assert "," not in v


def test_plotdata_shape(drift_report):
    cols = plot_columns(drift_report)
    assert len(cols["r"]) == PLOT_SAMPLES == 512
    assert np.all(np.diff(cols["r"]) > 0)
    rows = list(csv.reader(io.StringIO(render(drift_report, "plotdata"))))
    assert rows[0] == ["r", "gamma", "C", "ratio"] and len(rows) == 513
    assert np.allclose(cols["gamma"], -2.0)
    assert np.allclose(cols["C"], -2.0 * cols["r"], rtol=1e-12)


# ---------------------------------------------------------------------------
# command line


def test_cli_csv_is_byte_identical(tmp_path, capsys):
    path = write(tmp_path, SMALL_DRIFT)
    assert main(["bounds", path, "--format", "csv"]) == 0
    first = capsys.readouterr().out
    assert main(["bounds", path, "--format", "csv"]) == 0
    assert capsys.readouterr().out == first
    assert first.startswith(",".join(CSV_COLUMNS))


def test_cli_writes_files(tmp_path, capsys):
    path = write(tmp_path, SMALL_DRIFT.replace("K = 0", "K = 0\nmethods = [thm12, eq28]"))
    out = tmp_path / "out"
    assert main(["bounds", path, "--out", str(out)]) == 0
    assert (out / "report.txt").read_text().startswith("Verdict:")
    assert main(["bounds", path, "--out", str(out), "--format", "plotdata"]) == 0
    assert len((out / "plotdata.csv").read_text().splitlines()) == 513
    assert capsys.readouterr().out == ""


def test_cli_check_prints_checks(tmp_path, capsys):
    path = write(tmp_path, SMALL_DRIFT)
    assert main(["check", path]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines and all(line.startswith(("PASS", "FAIL")) for line in lines)


def test_cli_oracle_only(tmp_path, capsys):
    path = write(tmp_path, SMALL_DRIFT)
    assert main(["oracle", path]) == 0
    assert "Oracle: lambda1" in capsys.readouterr().out


def test_cli_config_error_exit_code(tmp_path, capsys):
    path = write(tmp_path, '[problem]\na = "1"\nV = "exp("\n')
    assert main(["estimate", path]) == 1
    assert "line 3" in capsys.readouterr().err
    assert main(["estimate", str(tmp_path / "absent.cfg")]) == 1
    assert main(["bounds", write(tmp_path, SMALL_DRIFT), "--tol", "-1"]) == 1


def test_cli_numerical_failure_exit_code(tmp_path, capsys):
    # the potential is undefined beyond r = 5, inside the truncation radius
    text = SMALL_DRIFT.replace('V = "-2*r"', 'V = "-2*r + sqrt(5-r)"')
    assert main(["bounds", write(tmp_path, text)]) == 2
    assert "numerical failure" in capsys.readouterr().err


def test_cli_inconclusive_run_still_succeeds(tmp_path, capsys):
    text = SMALL_DRIFT.replace('V = "-2*r"', 'V = "0"').replace("K = 0", "K = 0\nmethods = [thm12, cor13a]")
    assert main(["bounds", write(tmp_path, text)]) == 0
    assert capsys.readouterr().out.startswith("Verdict: inconclusive")


def test_cli_tolerance_override(tmp_path, capsys):
    path = write(tmp_path, SMALL_DRIFT.replace("K = 0", "K = 0\nmethods = [eq28]"))
    assert main(["bounds", path, "--format", "csv", "--tol", "1e-7", "--seed", "3"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[1][0] == "eq28" and math.isclose(float(rows[1][2]), 1.0, rel_tol=1e-12)
