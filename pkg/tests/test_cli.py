import csv
import json
import os
import subprocess
import sys

import pytest

from rotaset.cli import run_command
from rotaset.geometry import ConvexRationalPolygon


@pytest.fixture
def maps(tmp_path):
    out = {}
    for name, cfg in {
        "shear": {"family": "shear", "params": {"r": 0.3}},
        "pinned": {"family": "pinned", "params": {"p0": 0, "p1": 1, "q": 2}},
        "translation": {"family": "translation", "params": {"a": 0.3, "b": 0.1}},
    }.items():
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(cfg))
        out[name] = str(p)
    return out


def run(argv, capsys):
    code = run_command([str(a) for a in argv])
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_pseudo_set_outputs_polygon(maps, tmp_path, capsys):
    out = tmp_path / "outer.json"
    code, _, _ = run(["pseudo-set", "--map", maps["shear"], "--delta", 0.1, "--grid", 32,
                      "--mode", "outer", "-o", out, "--edges", tmp_path / "g.bin"], capsys)
    assert code == 0
    d = json.loads(out.read_text())
    P = ConvexRationalPolygon.from_json(d)
    assert P.contains((0, 0)) and P.contains((0.3, 0))
    assert d["provenance"]["seed"] == 0 and d["map"]["family"] == "shear"
    assert (tmp_path / "g.bin").stat().st_size > 0


def test_reruns_are_byte_identical(maps, tmp_path, capsys):
    for cmd in (["orbit-hull", "--map", maps["shear"], "--samples", 8, "--n", 500],
                ["probe", "--map", maps["pinned"], "--delta", 0.1, "--grid", 32, "--samples", 8,
                 "--orbit-length", 2000],
                ["deviations", "--map", maps["shear"], "--polygon", None, "--n-max", 300,
                 "--delta", 0.05, "--trajectories", 4]):
        if None in cmd:
            poly = tmp_path / "p.json"
            assert run(["pseudo-set", "--map", maps["shear"], "--delta", 0.1, "--grid", 32,
                        "-o", poly], capsys)[0] == 0
            cmd[cmd.index(None)] = poly
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run(cmd + ["--seed", 7, "-o", a], capsys)[0] == 0
        assert run(cmd + ["--seed", 7, "-o", b], capsys)[0] == 0
        assert a.read_bytes() == b.read_bytes()


def test_probe_perturb_pipeline(maps, tmp_path, capsys):
    verdict = tmp_path / "v.json"
    code, _, _ = run(["probe", "--map", maps["pinned"], "--delta", 0.1, "--grid", 32,
                      "--samples", 16, "--orbit-length", 4000, "-o", verdict], capsys)
    assert code == 0
    v = json.loads(verdict.read_text())
    assert v["verdict"] == "evidence-stable"
    seg = tmp_path / "seg.json"
    seg.write_text(json.dumps({"vertices": [["0", "0"], ["1/2", "0"]]}))
    code, out, _ = run(["perturb", "--map", maps["pinned"], "--polygon", seg, "--vertex", "1/2,0"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["residual"] < 1e-9 and 0 < d["perturbation_size"] < d["budget"]


def test_lebesgue_and_verify(maps, capsys):
    code, out, _ = run(["lebesgue", "--map", maps["translation"], "--resolution", 16], capsys)
    assert code == 0
    assert json.loads(out)["vector"] == pytest.approx([0.3, 0.1], abs=1e-12)
    code, out, _ = run(["verify-map", "--map", maps["shear"], "--resolution", 16], capsys)
    assert code == 0 and json.loads(out)


def test_deviations_csv_and_plot(maps, tmp_path, capsys):
    seg = tmp_path / "seg.json"
    seg.write_text(json.dumps({"vertices": [["0", "0"], ["1/2", "0"]]}))
    trace = tmp_path / "trace.csv"
    code, out, _ = run(["deviations", "--map", maps["pinned"], "--polygon", seg, "--n-max", 2000,
                        "--delta", 0.025, "--epsilon", 0.05, "--csv", trace], capsys)
    assert code == 0
    s = json.loads(out)
    assert s["violations"] == 0 and s["bound_C"] > 0
    with open(trace) as fh:
        assert next(csv.reader(fh)) == ["n", "dev", "bound_C"]
    svg = tmp_path / "t.svg"
    assert run(["plot", trace, "-o", svg], capsys)[0] == 0
    assert svg.read_text().startswith("<svg")
    svg2 = tmp_path / "p.svg"
    assert run(["plot", seg, "-o", svg2], capsys)[0] == 0
    assert "<polyline" in svg2.read_text()


def test_polygon_json_round_trip(maps, tmp_path, capsys):
    out = tmp_path / "inner.json"
    assert run(["pseudo-set", "--map", maps["pinned"], "--delta", 0.1, "--grid", 32,
                "--mode", "inner", "-o", out], capsys)[0] == 0
    d = json.loads(out.read_text())
    P = ConvexRationalPolygon.from_json(d)
    assert ConvexRationalPolygon.from_json(json.loads(json.dumps(P.to_json()))).vertices == P.vertices


@pytest.mark.parametrize("argv", [
    ["pseudo-set", "--map", "X", "--delta", "-0.1"],
    ["pseudo-set", "--map", "X", "--delta", "0.1", "--grid", "0"],
    ["orbit-hull", "--map", "X", "--samples", "0"],
    ["no-such-command"],
    ["deviations", "--map", "X", "--polygon", "Y", "--bound", "1", "--epsilon", "0.5"],
    ["plot", "missing.json"],
])
def test_usage_errors_exit_2(argv, capsys):
    assert run_command(argv) == 2
    assert "usage" in capsys.readouterr().err


def test_computation_errors_exit_1(maps, tmp_path, capsys):
    code, _, err = run(["pseudo-set", "--map", maps["shear"], "--delta", 0.01, "--grid", 4], capsys)
    assert code == 1
    assert json.loads(err)["error"] == "ValueError"
    code, _, err = run(["lebesgue", "--map", tmp_path / "absent.json"], capsys)
    assert code == 1 and "message" in json.loads(err)
    seg = tmp_path / "seg.json"
    seg.write_text(json.dumps({"vertices": [["0", "0"], ["1/2", "0"]]}))
    code, _, err = run(["deviations", "--map", maps["shear"], "--polygon", seg, "--epsilon", 1.5,
                        "--n-max", 10], capsys)
    assert code == 1 and "epsilon" in json.loads(err)["message"]


def test_thread_setting(maps, monkeypatch, capsys):
    monkeypatch.setenv("ROTASET_THREADS", "1")
    assert run(["lebesgue", "--map", maps["translation"], "--resolution", 8], capsys)[0] == 0
    monkeypatch.setenv("ROTASET_THREADS", "many")
    assert run(["lebesgue", "--map", maps["translation"], "--resolution", 8], capsys)[0] == 2
    monkeypatch.delenv("ROTASET_THREADS")
    assert run(["lebesgue", "--map", maps["translation"], "--resolution", 8, "--threads", 0], capsys)[0] == 2


def test_console_entry_point(maps):
    r = subprocess.run([sys.executable, "-m", "rotaset.cli", "lebesgue", "--map", maps["translation"],
                        "--resolution", "8"], capture_output=True, text=True, timeout=60,
                       env={**os.environ})
    assert r.returncode == 0 and json.loads(r.stdout)["resolution"] == 8
