import csv
import json
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import small_scenario, square
from riskfield.cli import main
from riskfield.config import SimParams
from riskfield.imageio import read_pgm
from riskfield.perception import HazardDetection, PerceptionResponse
from riskfield.scene import Hazard


@pytest.fixture
def tiny(tmp_path):
    """A short scenario file with one pothole, cheap enough for CLI round trips."""
    s = small_scenario(
        [Hazard("p1", "pothole", square(12.0, 0.0, 1.5), depth_m=0.08, base_context_score=0.8)],
        goal=(25.0, 0.0),
        sim_params=SimParams(max_steps=200),
    )
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(s.to_dict()))
    return path


def test_run_writes_outputs(tmp_path, tiny, capsys):
    out = tmp_path / "run"
    code = main(["run", "--scenario", str(tiny), "--out", str(out), "--set", "riskmap.alpha_vlm=0.9",
                 "--provider", "oracle"])
    assert code == 0
    doc = json.loads((out / "result.json").read_text())
    assert doc["config"]["scenario"]["risk_params"]["alpha_vlm"] == 0.9
    assert doc["config"]["mode"] == "ours" and doc["config"]["provider"] == "oracle"
    rows = list(csv.reader(open(out / "trajectory.csv")))
    assert rows[0] == ["t", "x", "y", "theta", "v", "delta"]
    assert len(rows) == doc["result"]["steps"] + 2
    assert "termination=" in capsys.readouterr().out


def test_run_render_frames(tmp_path, tiny):
    out = tmp_path / "run"
    s = json.loads(tiny.read_text())
    s["simulation"]["max_steps"] = 3
    tiny.write_text(json.dumps(s))
    assert main(["run", "--scenario", str(tiny), "--out", str(out), "--render", "--provider", "oracle"]) == 0
    names = sorted(p.name for p in (out / "frames").iterdir())
    assert names[:4] == [
        "frame_0000_overlay.ppm", "frame_0000_risk.pgm", "frame_0000_risk.ppm", "frame_0000_scores.csv",
    ]
    assert len(names) == 12 and (out / "overlay.ppm").exists()


def test_bad_mode_is_usage_error(tiny):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--scenario", str(tiny), "--mode", "turbo"])
    assert exc.value.code == 2


@pytest.mark.parametrize(
    "extra",
    [
        ["--set", "riskmap.alpha_fun=1"],
        ["--set", "nosection=1"],
        ["--set", "weather.rain=1"],
        ["--provider", "external"],
    ],
)
def test_usage_errors_exit_2(tmp_path, tiny, extra, capsys):
    assert main(["run", "--scenario", str(tiny), "--out", str(tmp_path / "o")] + extra) == 2
    assert "error" in capsys.readouterr().err


def test_bad_override_value_is_data_error(tmp_path, tiny):
    assert main(["run", "--scenario", str(tiny), "--out", str(tmp_path), "--set", "riskmap.d_ref=0"]) == 1


def test_missing_scenario_is_data_error(tmp_path, capsys):
    assert main(["run", "--scenario", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 1
    assert capsys.readouterr().err


def test_batch_single_trial(tmp_path):
    out = tmp_path / "b1"
    start = time.perf_counter()
    assert main(["batch", "--trials", "1", "--out", str(out), "--workers", "1"]) == 0
    assert time.perf_counter() - start < 10.0
    rows = list(csv.reader(open(out / "batch.csv")))
    assert len(rows) == 1 + 9
    assert {(r[2], r[1]) for r in rows[1:]} == {
        (s, m) for s in ("scenario1", "scenario2", "scenario3") for m in ("ours", "no_vlm", "baseline")
    }
    assert len(list((out / "trajectories").iterdir())) == 9
    summary = json.loads((out / "summary.json").read_text())
    assert len(summary["batches"]) == 9 and summary["config"]["trials"] == 1


def test_batch_repeat_is_byte_identical(tmp_path, tiny):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["batch", "--scenario", str(tiny), "--trials", "3", "--seed", "7", "--out", str(out)]) == 0
    assert (outs[0] / "batch.csv").read_bytes() == (outs[1] / "batch.csv").read_bytes()
    for p in (outs[0] / "trajectories").iterdir():
        assert p.read_bytes() == (outs[1] / "trajectories" / p.name).read_bytes()


def test_batch_rejects_zero_trials(tmp_path, tiny):
    assert main(["batch", "--scenario", str(tiny), "--trials", "0", "--out", str(tmp_path)]) == 2


def test_render_hazard_free_is_zero(tmp_path):
    path = tmp_path / "empty.json"
    path.write_text(json.dumps(small_scenario().to_dict()))
    out = tmp_path / "r"
    assert main(["render", "--scenario", str(path), "--out", str(out)]) == 0
    assert not read_pgm(out / "risk.pgm").any()
    assert json.loads((out / "render.json").read_text())["detections"] == []


def test_render_scenario1(tmp_path):
    out = tmp_path / "r"
    assert main(["render", "--scenario", "scenario1", "--out", str(out)]) == 0
    doc = json.loads((out / "render.json").read_text())
    (det,) = doc["detections"]
    mask = read_pgm(out / f"mask_{det['hazard_id']}.pgm") > 0
    risk = read_pgm(out / "risk.pgm")
    assert mask.any() and det["pixels"] == int(mask.sum())
    assert risk[mask].min() == risk.max() > 0
    assert not risk[~mask].any()
    again = tmp_path / "r2"
    main(["render", "--scenario", "scenario1", "--out", str(again)])
    for p in out.iterdir():
        assert p.read_bytes() == (again / p.name).read_bytes()


def test_render_custom_state(tmp_path, capsys):
    assert main(["render", "--scenario", "scenario1", "--out", str(tmp_path), "--state", "40,-1.75,0,6"]) == 0
    assert "0 detection(s)" in capsys.readouterr().out
    assert main(["render", "--scenario", "scenario1", "--out", str(tmp_path), "--state", "1,2"]) == 2


def test_validate_scenario(tiny, capsys):
    assert main(["validate", str(tiny)]) == 0
    assert "1 hazard(s)" in capsys.readouterr().out
    assert main(["validate", "scenario3"]) == 0


def test_validate_invalid_scenario(tmp_path, tiny):
    doc = json.loads(tiny.read_text())
    doc["risk_params"]["c_max"] = -1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(doc))
    assert main(["validate", str(bad)]) == 1


def test_validate_response(tmp_path, capsys):
    mask = np.zeros((4, 6), dtype=np.uint8)
    mask[1, 1:4] = 1
    PerceptionResponse(6, 4, (HazardDetection("pot-7", "pothole", 0.5, 0.5, mask),)).write(tmp_path)
    assert main(["validate", str(tmp_path / "response.json")]) == 0
    assert "1 detection(s)" in capsys.readouterr().out
    doc = json.loads((tmp_path / "response.json").read_text())
    doc["width"] = 5
    (tmp_path / "response.json").write_text(json.dumps(doc))
    assert main(["validate", str(tmp_path)]) == 1
    assert "pot-7" in capsys.readouterr().err


def test_validate_missing_path(tmp_path):
    assert main(["validate", str(tmp_path / "absent.json")]) == 1


def test_external_provider_run_matches_oracle(tmp_path, tiny):
    endpoint = f"{sys.executable} -m riskfield.echo_provider"
    ext, orc = tmp_path / "ext", tmp_path / "orc"
    s = json.loads(tiny.read_text())
    s["simulation"]["max_steps"] = 5
    tiny.write_text(json.dumps(s))
    assert main(["run", "--scenario", str(tiny), "--out", str(ext), "--provider", "external",
                 "--endpoint", endpoint]) == 0
    assert main(["run", "--scenario", str(tiny), "--out", str(orc), "--provider", "oracle"]) == 0
    assert (ext / "trajectory.csv").read_bytes() == (orc / "trajectory.csv").read_bytes()


def test_console_entry_point(tiny):
    proc = subprocess.run([sys.executable, "-m", "riskfield", "validate", str(tiny)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "hazard(s)" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "riskfield", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "riskfield" in proc.stdout
