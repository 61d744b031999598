import csv
import json

import numpy as np
import pytest

from pawclock import cli
from pawclock.presets import preset
from pawclock.runner import run, verify


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# pawclock ") and "config-sha256=" in lines[0]
    rows = list(csv.reader(lines[1:]))
    return rows[0], np.array(rows[1:], dtype=float)


def test_conditional_trace_format(tmp_path):
    report = run(preset("two-level-clock"), tmp_path)
    assert report.exit_code == 0
    cols, data = read_csv(tmp_path / "00-conditional-trace.csv")
    assert cols[:6] == ["tau", "a", "re_0", "im_0", "re_1", "im_1"]
    assert cols[-2:] == ["sx_S", "sz_S"]
    assert np.allclose(data[:, 1], 1 / np.sqrt(2))
    _, prof = read_csv(tmp_path / "01-amplitude-profile.csv")
    assert np.allclose(prof[:, 1], 1 / np.sqrt(2))


def test_json_outputs_start_with_meta(tmp_path):
    run(preset("two-level-clock"), tmp_path)
    for path in tmp_path.glob("*.json"):
        data = json.loads(path.read_text())
        assert next(iter(data)) == "meta"
        assert data["meta"]["config_sha256"]


def test_transition_amplitude_preset(tmp_path):
    report = run(preset("two-spin-noninteracting"), tmp_path)
    assert report.exit_code == 0
    task = report.tasks[0]
    assert task.checks[0].invariant == "transition-amplitude-closed-form"
    cols, data = read_csv(tmp_path / "00-transition-amplitude.csv")
    assert data.shape == (16 ** 3, 5)
    closed = np.cos(data[:, 0] - data[:, 2]) * np.cos(0.5 * (data[:, 1] - data[:, 2]))
    assert np.max(np.abs(data[:, 3] - closed)) <= 1e-12
    local = [t for t in report.tasks if t.id == "02-conditional-trace"][0]
    assert local.results["amplitude_min"] == pytest.approx(1 / np.sqrt(2))


def test_tidit_sweep_flags_degenerate_point(tmp_path):
    report = run(preset("two-spin-tidit"), tmp_path)
    assert report.exit_code == 0
    sweep = [t for t in report.tasks if t.task == "tidit-sweep"][0]
    points = {p["g"]: p for p in sweep.results["points"]}
    assert points[1.0]["degenerate"] and "frozen" in points[1.0]
    assert points[1.0]["frozen"]["stationary_states"] == 1
    assert not points[0.3]["degenerate"]
    assert points[1.5]["route_infidelity"] <= 1e-8
    assert sorted(d["behaviour"] for d in points[1.5]["dilation"]) == ["forward", "reversed"]


def test_verify_exit_codes(tmp_path):
    assert verify(preset("three-spin-network"), tmp_path).exit_code == 0
    strict = verify(preset("three-spin-network"), tmp_path, tol_scale=1e-30)
    assert strict.exit_code == 1
    assert all(c.invariant for t in strict.tasks for c in t.checks)


def test_required_failure_skips_rest(tmp_path):
    cfg = preset("two-level-clock")
    cfg.data["tasks"][0]["required"] = True
    report = run(cfg, tmp_path, tol_scale=1e-30)
    assert report.exit_code == 1
    assert [t.status for t in report.tasks] == ["failed", "skipped", "skipped"]


def test_task_error_is_contained(tmp_path):
    cfg = preset("two-spin-tidit").with_value("couplings.A.B", 1.0)
    report = run(cfg, tmp_path)
    statuses = {t.task: t.status for t in report.tasks}
    assert statuses["time-dilated-trace"] == "error"
    assert statuses["tidit-sweep"] == "passed"
    assert report.exit_code == 0


def test_determinism(tmp_path):
    run(preset("two-spin-tidit"), tmp_path / "a")
    run(preset("two-spin-tidit"), tmp_path / "b")
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cli_run_and_presets(tmp_path, capsys):
    assert cli.main(["presets"]) == 0
    assert "two-spin-tidit" in capsys.readouterr().out
    assert cli.main(["presets", "--emit", "two-level-clock"]) == 0
    text = capsys.readouterr().out
    cfg_path = tmp_path / "c.yaml"
    cfg_path.write_text(text)
    assert cli.main(["run", str(cfg_path), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "report.json").exists()


def test_cli_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("PAWCLOCK_OUT", str(tmp_path / "env"))
    assert cli.main(["run", "preset:two-level-clock"]) == 0
    assert (tmp_path / "env" / "report.json").exists()


def test_cli_config_errors(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("clocks:\n  - {label: A, kind: spin, omega: 1}\ncouplings: {A: {A: 0.1}}\nsystem: {preset: zero}\n")
    assert cli.main(["run", str(bad)]) == 2
    assert cli.main(["run", str(tmp_path / "missing.yaml")]) == 2
    assert cli.main(["run", "preset:nope"]) == 2


def test_cli_verify_and_strict(tmp_path):
    assert cli.main(["verify", "preset:two-spin-tidit", "--out", str(tmp_path), "--seed", "3"]) == 0
    assert cli.main(["verify", "preset:two-spin-tidit", "--out", str(tmp_path), "--tol-scale", "1e-30"]) == 1


def test_cli_runtime_error(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("clocks: [{label: A, kind: spin, omega: 1.0}]\nsystem: {preset: zero, dim: 2}\n"
                   "tasks: [{task: verify}]\n")
    assert cli.main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 3


def test_cli_sweep(tmp_path):
    code = cli.main(["sweep", "preset:two-spin-tidit", "--param", "couplings.A.B",
                     "--values", "0.3,0.9", "--out", str(tmp_path)])
    assert code == 0
    data = json.loads((tmp_path / "sweep.json").read_text())
    assert [p["value"] for p in data["points"]] == [0.3, 0.9]
    assert (tmp_path / "couplings.A.B=0.3" / "report.json").exists()
