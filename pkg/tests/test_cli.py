import json
import math

import pytest

from horocat.cli.horocat_cli import ExperimentConfig, main
from horocat.core.errors import ConfigError


def run_json(capsys, argv):
    code = main(argv)
    return code, json.loads(capsys.readouterr().out)


def test_dist_in_ball(capsys):
    code, report = run_json(capsys, ["dist", "--model", "ball", "--point", "0,0", "--other", "0.5,0"])
    assert code == 0
    assert report["schema_version"] == 1
    assert report["results"]["distance"] == pytest.approx(math.log(3.0))


def test_convert_hyperboloid_to_ball(capsys):
    point = f"{5 / 3},{4 / 3},0"
    code, report = run_json(capsys, ["convert", "--from", point, "--to", "ball"])
    assert code == 0
    converted = report["results"]["converted"]
    assert converted["model"] == "ball"
    assert converted["coords"] == pytest.approx([0.5, 0.0], abs=1e-9)


def test_invalid_point_is_reported(capsys):
    code, report = run_json(capsys, ["dist", "--model", "ball", "--point", "1.5,0", "--other", "0,0"])
    assert code == 1
    assert report["error"]["reason"] == "InvalidPoint"
    assert report["passed"] is False


def test_classify_preset_aliases(capsys):
    code, report = run_json(capsys, ["classify", "--preset", "modular", "--word", "ST"])
    assert code == 0
    classification = report["results"]["classification"]
    assert classification["class"] == "elliptic"
    assert classification["order"] == 3
    assert report["config"]["preset"] == "modular"
    assert "output" not in report["config"]


def test_sampled_command_needs_seed(capsys):
    assert main(["burnside", "--preset", "torsion"]) == 2
    assert "--seed" in capsys.readouterr().err


def test_input_and_preset_conflict(tmp_path, capsys):
    path = tmp_path / "group.json"
    path.write_text(json.dumps({"gram": [[1, 0], [0, -2]], "generators": [[[3, 4], [2, 3]]]}))
    assert main(["classify", "--input", str(path), "--preset", "pell"]) == 2


@pytest.mark.parametrize("content", [
    "{not json",
    json.dumps({"generators": []}),
    json.dumps({"gram": [[1.5, 0], [0, -2]], "generators": []}),
    json.dumps({"gram": [[1, 0], [0, -2]], "generators": [[[0.5, 0], [0, 2]]]}),
])
def test_malformed_input(tmp_path, capsys, content):
    path = tmp_path / "group.json"
    path.write_text(content)
    code, report = run_json(capsys, ["classify", "--input", str(path)])
    assert code == 2
    assert report["error"]["reason"] == "ConfigError"


def test_input_file_group(tmp_path, capsys):
    path = tmp_path / "pell.json"
    path.write_text(json.dumps({"gram": [[1, 0], [0, -2]], "generators": [[[3, 4], [2, 3]]]}))
    code, report = run_json(capsys, ["classify", "--input", str(path), "--word", "a"])
    assert code == 0
    assert report["results"]["classification"]["class"] == "loxodromic"


def test_gens_is_an_alias_of_input(tmp_path, capsys):
    path = tmp_path / "pell.json"
    path.write_text(json.dumps({"gram": [[1, 0], [0, -2]], "generators": [[[3, 4], [2, 3]]]}))
    code, report = run_json(capsys, ["classify", "--gens", str(path), "--word", "a"])
    assert code == 0
    assert report["config"]["input"] == str(path)


def test_non_integral_generator_is_not_an_isometry(tmp_path, capsys):
    path = tmp_path / "half.json"
    path.write_text(json.dumps({"gram": [[1, 0], [0, -2]], "generators": [[["1/2", 0], [0, 2]]]}))
    code, report = run_json(capsys, ["classify", "--input", str(path)])
    assert code == 1
    assert report["error"]["reason"] == "NotAnIsometry"


def test_output_file(tmp_path, capsys):
    out = tmp_path / "out" / "report.json"
    code = main(["coxeter", "--rank", "3", "--classify-upto", "2", "--output", str(out)])
    assert code == 0
    assert capsys.readouterr().out == ""
    report = json.loads(out.read_text())
    assert report["command"] == "coxeter"
    assert report["checks"] == [{"name": "signature", "passed": True}]
    assert "classification" in report["results"]


def test_tits_cone_needs_vector(capsys):
    code, report = run_json(capsys, ["coxeter", "--rank", "3", "--tits-cone"])
    assert code == 2
    assert "--vector" in report["error"]["message"]


def test_unknown_command_exits():
    with pytest.raises(SystemExit) as info:
        main(["polish"])
    assert info.value.code == 2


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig("dist", radius=0).validate()
    with pytest.raises(ConfigError):
        ExperimentConfig("convert", target="sphere").validate()
    config = ExperimentConfig("tits", seed=1, output="x.json", timings=True).validate()
    assert set(config.to_json()) >= {"command", "seed", "radius"}
    assert "timings" not in config.to_json()


@pytest.mark.parametrize("argv", [
    ["dirichlet", "--preset", "modular", "--radius", "4", "--seed", "3", "--samples", "20"],
    ["cat0", "--preset", "modular", "--radius", "4", "--seed", "3", "--samples", "2", "--depth", "4"],
])
def test_reports_are_byte_identical_across_runs(tmp_path, capsys, argv):
    first, second = tmp_path / "first.json", tmp_path / "second.json"
    main(argv + ["--output", str(first)])
    main(argv + ["--output", str(second)])
    assert first.read_bytes() == second.read_bytes()
