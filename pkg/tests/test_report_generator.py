import json
import os

import pandas as pd
import pytest

from horocat.core.errors import NothingToPlot
from horocat.reports.report_generator import (SCHEMA_VERSION, ReportGenerator, RunReport, config_hash,
                                              emit_plot_data)


@pytest.fixture
def report():
    r = RunReport("distortion", {"command": "distortion", "preset": "free2", "word": "ab"}, seed=3)
    r.add_check("undistorted", True, residual=0.0)
    r.results["min_ratio"] = 2.0
    return r


def test_passed_follows_checks(report):
    assert report.passed
    report.add_check("bounded", False, residual=1.5, radius=4)
    assert not report.passed
    assert report.checks[-1] == {"name": "bounded", "passed": False, "residual": 1.5, "radius": 4}


def test_error_fails_report(report):
    report.error = {"reason": "BudgetExceeded", "message": "cap hit"}
    assert not report.passed
    assert report.to_json()["error"]["reason"] == "BudgetExceeded"


def test_to_json_schema(report):
    data = report.to_json()
    assert data["schema_version"] == SCHEMA_VERSION == 1
    assert data["command"] == "distortion"
    assert data["seed"] == 3
    assert data["config_hash"] == config_hash(report.config)
    assert "series" not in data and "timings" not in data
    assert json.loads(report.dumps()) == data


def test_config_hash_ignores_key_order():
    assert config_hash({"a": 1, "b": [1, 2]}) == config_hash({"b": [1, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert len(config_hash({})) == 16


def test_save_report(tmp_path, report):
    generator = ReportGenerator(report, str(tmp_path / "reports"))
    path = generator.save_report()
    assert os.path.basename(path) == f"horocat_distortion_{config_hash(report.config)}.json"
    with open(path) as f:
        assert json.load(f)["results"] == {"min_ratio": 2.0}

    explicit = generator.save_report(str(tmp_path / "nested" / "out.json"))
    assert os.path.exists(explicit)


def test_emit_plot_data_needs_series(tmp_path, report):
    with pytest.raises(NothingToPlot):
        emit_plot_data(report, str(tmp_path))
    report.add_series("empty", n=[], ratio=[])
    with pytest.raises(NothingToPlot):
        emit_plot_data(report, str(tmp_path))


def test_emit_plot_data_writes_csv(tmp_path, report):
    report.add_series("ratios", n=[1, 2, 3], ratio=[2.0, 2.0, 2.0])
    files = emit_plot_data(report, str(tmp_path), render=False)
    frame = pd.read_csv(files["csv:ratios"])
    assert list(frame.columns) == ["n", "ratio"]
    assert frame["n"].tolist() == [1, 2, 3]
    with open(files["series"]) as f:
        assert json.load(f)["ratios"][0] == {"n": 1, "ratio": 2.0}
    assert "png" not in files


def test_save_reports_renders_png(tmp_path, report):
    report.add_series("excess", kind="hist", excess=[-0.5, -0.25, -0.1])
    files = ReportGenerator(report, str(tmp_path)).save_reports()
    assert os.path.exists(files["json"])
    assert os.path.exists(files["png"])
