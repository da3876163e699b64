import csv
import json
from pathlib import Path

import pytest

from stiffnav.cli import STEPS_HEADER, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(Path(d).iterdir())}


def test_plan_goal_run_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["plan", "--config", str(CONFIGS / "triangle_goal.json"), "--out", str(out)]) == 0
    assert {"steps.csv", "summary.json", "atlas.json", "position_error.csv", "wrench_normalized.csv"} <= set(
        _files(out))
    with open(out / "steps.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == STEPS_HEADER
    summary = json.loads((out / "summary.json").read_text())
    assert summary["reached"] and summary["steps"] == len(rows) - 2
    assert main(["verify", str(out)]) == 0


def test_goal_equal_start(tmp_path):
    cfg = _write(tmp_path, "c.json", {"scenario": "planar_triangle", "goal": [0, 0, 0]})
    assert main(["plan", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    assert len((tmp_path / "o" / "steps.csv").read_text().splitlines()) == 2


def test_tiny_force_limit_exits_zero_with_stall(tmp_path):
    out = tmp_path / "o"
    assert main(["plan", "--config", str(CONFIGS / "triangle_tiny_limit.json"), "--out", str(out)]) == 0
    s = json.loads((out / "summary.json").read_text())
    assert s["termination"] == "boundary_stall" and s["reached"] is False


def test_plan_outputs_are_byte_identical_for_fixed_seed(tmp_path):
    cfg = _write(tmp_path, "c.json", {"scenario": "planar_triangle", "goal": [0.01, 0.01, 0.0],
                                      "sensor": {"noise_std": 0.05, "filter_window": 50}})
    for d in ("a", "b"):
        assert main(["plan", "--config", cfg, "--out", str(tmp_path / d), "--seed", "4", "--max-steps", "30"]) == 0
    assert _files(tmp_path / "a") == _files(tmp_path / "b")
    main(["plan", "--config", cfg, "--out", str(tmp_path / "c"), "--seed", "5", "--max-steps", "30"])
    assert _files(tmp_path / "a")["steps.csv"] != _files(tmp_path / "c")["steps.csv"]


def test_explore_static_pose(tmp_path, capsys):
    cfg = _write(tmp_path, "c.json", {"scenario": "membrane", "poses": [[0, 0, 0]]})
    assert main(["explore", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    atlas = json.loads((tmp_path / "o" / "atlas.json").read_text())
    assert len(atlas["regions"]) == 1 and len(atlas["regions"][0]["poses"]) == 1


def test_explore_reentry_script(tmp_path):
    out = tmp_path / "o"
    assert main(["explore", "--config", str(CONFIGS / "membrane_reentry.json"), "--out", str(out)]) == 0
    atlas = json.loads((out / "atlas.json").read_text())
    assert len(atlas["regions"]) == 2 and atlas["assignments"][-1] == 1


@pytest.mark.parametrize("fixture,label", [("line_spring", "LinearSpringConstraint"),
                                           ("flexible_hinge", "FlexibleHinge"), ("membrane", "Membrane")])
def test_identify_fixture(fixture, label, capsys):
    assert main(["identify", "--fixture", fixture]) == 0
    assert json.loads(capsys.readouterr().out)["label"] == label


def test_identify_eigendata_file_and_matrix_file(tmp_path, capsys):
    from stiffnav.classifier import load_fixture
    p = _write(tmp_path, "hinge.json", load_fixture("flexible_hinge"))
    assert main(["identify", p]) == 0
    assert json.loads(capsys.readouterr().out)["label"] == "FlexibleHinge"
    m = tmp_path / "K.txt"
    m.write_text("\n".join(" ".join(str(v) for v in row) for row in
                           [[1600 if i == j == 0 else (213 if i == j < 3 else (1.0 if i == j else 0))
                             for j in range(6)] for i in range(6)]))
    assert main(["identify", str(m)]) == 0
    assert json.loads(capsys.readouterr().out)["label"] == "LinearSpringConstraint"


@pytest.mark.parametrize("argv", [
    ["identify", "/nonexistent.json"],
    ["plan", "--config", "/nonexistent.json"],
])
def test_missing_inputs_exit_2(argv, capsys):
    assert main(argv) == 2


def test_malformed_inputs_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["identify", str(bad)]) == 2
    assert main(["plan", "--config", _write(tmp_path, "x.json", {"scenario": "planar_triangle"})]) == 2
    assert main(["plan", "--config", _write(tmp_path, "y.json", {"scenario": "nope", "goal": [0, 0, 0]})]) == 2
    assert main(["plan", "--config", _write(tmp_path, "z.json", {"scenario": "membrane", "goal": [0, 0, 0],
                                                                  "planner": {"speed": 1}})]) == 2
    assert main(["identify", _write(tmp_path, "k.json", {"K": [[1, 2], [3, 4]]})]) == 2


def test_diverged_run_exits_1(tmp_path, monkeypatch, capsys):
    import stiffnav.cli as cli
    from stiffnav.planner import RunResult

    real = cli.run

    def fake(*a, **k):
        res = real(*a, **k)
        res.termination = "diverged"
        return res
    monkeypatch.setattr(cli, "run", fake)
    assert main(["plan", "--config", str(CONFIGS / "triangle_goal.json"), "--out", str(tmp_path / "o")]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "run"


def test_verify_flags_violations(tmp_path, capsys):
    out = tmp_path / "o"
    main(["plan", "--config", str(CONFIGS / "triangle_goal.json"), "--out", str(out)])
    rows = (out / "steps.csv").read_text().splitlines()
    cells = rows[1].split(",")
    cells[STEPS_HEADER.index("c2")] = "inf"
    rows[1] = ",".join(cells)
    (out / "steps.csv").write_text("\n".join(rows) + "\n")
    assert main(["verify", str(out)]) == 1
