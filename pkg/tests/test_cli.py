import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from wavespec.cli import main
from wavespec.config import ConfigError, load_config, parse_config
from wavespec.report import RunReport, csv_text, format_value, heatmap_svg, sha256_file

ROOT = Path(__file__).resolve().parents[1]


def run(tmp_path, *args):
    return main([*args, "--out", str(tmp_path)])


def report(path, command):
    return json.loads((Path(path) / f"{command}_report.json").read_text())


# --- config -----------------------------------------------------------------


def test_shipped_configs_parse():
    for p in sorted((ROOT / "configs").glob("*.yaml")):
        load_config(p)


def test_unknown_key_reports_line():
    text = "model:\n  kind: interval\n  N: 10\n  colour: red\n"
    with pytest.raises(ConfigError, match=r"line 4: model.colour"):
        parse_config(text)


def test_bad_value_reports_line():
    text = "seed: 1\ntime:\n  T_max: -1\n"
    with pytest.raises(ConfigError, match=r"line 3: time.T_max"):
        parse_config(text)


def test_kind_specific_fields():
    with pytest.raises(ConfigError, match="interval model needs N"):
        parse_config("model:\n  kind: interval\n")
    with pytest.raises(ConfigError, match="two entries"):
        parse_config("model:\n  kind: block\n  blocks: [{kind: interval, N: 5}]\n")


def test_yaml_syntax_error():
    with pytest.raises(ConfigError, match="YAML syntax"):
        parse_config("model: [unclosed\n")


def test_fault_alias_and_echo():
    cfg = parse_config("_fault:\n  corrupt_k: 0.01\n")
    assert cfg.fault.corrupt_k == 0.01
    assert cfg.echo()["_fault"]["corrupt_k"] == 0.01


def test_custom_matrix_paths_resolve(tmp_path):
    L = 4 * np.eye(4) - np.eye(4, k=1) - np.eye(4, k=-1)
    np.savetxt(tmp_path / "L.csv", L, delimiter=",")
    np.savetxt(tmp_path / "K.csv", np.array([[1.0], [0], [0], [0]]), delimiter=",")
    (tmp_path / "c.yaml").write_text(
        "model:\n  kind: custom-matrix\n  matrix_file: L.csv\n  k_file: K.csv\n"
        "checks:\n  prop1_samples: 3\n")
    assert run(tmp_path / "out", "controllability", "--config", str(tmp_path / "c.yaml")) == 0
    assert report(tmp_path / "out", "controllability")["body"]["verdict"] == "pass"


# --- exit codes ---------------------------------------------------------------


def test_config_error_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("model:\n  kind: interval\n  N: 3\n")
    assert run(tmp_path, "green-check", "--config", str(bad)) == 2
    assert "line 3" in capsys.readouterr().err


def test_missing_config_exit_2(tmp_path):
    assert run(tmp_path, "spectrum", "--config", str(tmp_path / "nope.yaml")) == 2


def test_reconstruct_rejects_block_model(tmp_path):
    assert run(tmp_path, "reconstruct", "--config", str(ROOT / "configs/spectrum_block.yaml")) == 2


def test_fault_injection_fails(tmp_path):
    assert run(tmp_path, "green-check", "--config", str(ROOT / "configs/green_fault.yaml")) == 1
    body = report(tmp_path, "green-check")["body"]
    status = {c["name"]: c["status"] for c in body["checks"]}
    assert status["green_identity"] == "fail"


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 2


@pytest.mark.parametrize("command", ["green-check", "controllability", "continuum", "spectrum", "reconstruct"])
def test_quick_runs_pass(tmp_path, command):
    assert run(tmp_path, command, "--quick") == 0
    body = report(tmp_path, command)["body"]
    assert body["verdict"] in ("pass", "warn")
    for art in body["artifacts"]:
        assert sha256_file(tmp_path / art["path"]) == art["sha256"]


def test_quick_repeat_is_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert run(tmp_path / d, "spectrum", "--quick", "--seed", "3") == 0
    for f in sorted((tmp_path / "a").iterdir()):
        if f.suffix in (".csv", ".svg"):
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
    ra, rb = report(tmp_path / "a", "spectrum"), report(tmp_path / "b", "spectrum")
    assert ra["body"] == rb["body"]


def test_seed_changes_green_artifacts(tmp_path):
    run(tmp_path / "a", "green-check", "--quick", "--seed", "1")
    run(tmp_path / "b", "green-check", "--quick", "--seed", "2")
    a = (tmp_path / "a/green_defects.csv").read_bytes()
    assert a != (tmp_path / "b/green_defects.csv").read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "wavespec", "continuum", "--quick", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip().endswith("verdict: pass")


# --- report helpers -------------------------------------------------------------


def test_report_statuses():
    r = RunReport("x", {})
    r.add("a", True)
    assert r.verdict == "pass" and r.exit_code == 0
    r.add("b", True, warn=True)
    assert r.verdict == "warn" and r.exit_code == 0
    r.add("c", None)
    r.add("d", False)
    assert r.verdict == "fail" and r.exit_code == 1
    assert [c.status for c in r.checks] == ["pass", "warn", "skip", "fail"]


def test_csv_and_values():
    text = csv_text(["a", "b"], [(1, float("inf")), (0.1, True)])
    assert text == "a,b\n1,inf\n0.1,true\n"
    assert format_value(np.float64(1 / 3)) == repr(1 / 3)


def test_heatmap_marks_unreachable():
    svg = heatmap_svg(np.array([[0.0, np.inf], [np.inf, 0.0]]))
    assert svg.count("#bbbbbb") == 2 and svg.startswith("<svg")


def test_report_json_separates_timing():
    r = RunReport("x", {"seed": 0})
    r.add("a", True, {"v": float("inf")}, wall_time=1.5)
    doc = json.loads(r.to_json())
    assert doc["timing"] == {"a": 1.5}
    assert doc["body"]["checks"][0]["measured"]["v"] == "inf"
