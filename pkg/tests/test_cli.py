import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from elastigraph.cli import main

DATA = Path(__file__).resolve().parent.parent / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def value(x):
    return x["decimal"] if isinstance(x, dict) else x


def test_harmonic_command(capsys):
    code, out, _ = run(capsys, "harmonic", DATA / "tripod.json")
    assert code == 0
    assert value(out["dirichlet"]) == pytest.approx(1.6)


def test_energy_command(capsys):
    code, out, _ = run(capsys, "energy", DATA / "figure_eight.json", "--p", "2", "--q", "2")
    assert code == 0 and value(out["energy"]) == pytest.approx(2)


def test_emb_command_writes_trace_and_certificate(capsys, tmp_path):
    trace, cert = tmp_path / "trace.jsonl", tmp_path / "cert.json"
    code, out, _ = run(capsys, "emb", DATA / "tripod.json", "--trace", trace, "--certificate", cert)
    assert code == 0
    assert value(out["value"]) == pytest.approx(0.6, abs=1e-6)
    lines = trace.read_text().splitlines()
    assert lines and all("ratio" in json.loads(line) for line in lines)
    assert json.loads(cert.read_text())["converged"]


def test_graph_commands(capsys):
    for cmd in ("mincut", "flows", "elcurves", "taut"):
        code, out, _ = run(capsys, cmd, DATA / "tripod.json")
        assert code == 0, cmd


def test_lip_search(capsys):
    code, out, _ = run(capsys, "lip", DATA / "tripod.json", "--search")
    assert code == 0
    assert value(out["lipschitz"]) == pytest.approx(value(out["map_lipschitz"]))


def test_electrical_actions(capsys, tmp_path):
    code, out, _ = run(capsys, "electrical", "reduce", DATA / "y_network.json")
    assert code == 0 and len(out["graph"]["edges"]) == 3
    code, out, _ = run(capsys, "electrical", "response", DATA / "y_network.json")
    assert code == 0 and len(out["matrix"]) == 3
    p = tmp_path / "yd.json"
    p.write_text(json.dumps({"values": ["1", "1", "1"], "inverse": True}))
    code, out, _ = run(capsys, "electrical", "ydelta", p)
    assert code == 0 and [v["exact"] for v in out["values"]] == ["1/3"] * 3


def test_malformed_json_exits_2(capsys, tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"domain": {')
    code, out, err = run(capsys, "harmonic", p)
    assert code == 2 and out is None
    assert "bad.json:1:" in err


def test_missing_edge_exits_2(capsys, tmp_path):
    data = json.loads((DATA / "tripod.json").read_text())
    data["domain"]["edges"][0]["ends"] = ["a1", "nowhere"]
    p = tmp_path / "dangling.json"
    p.write_text(json.dumps(data))
    code, _, err = run(capsys, "harmonic", p)
    assert code == 2 and "dangling endpoint" in err


def test_non_convergence_exits_3(capsys):
    code, out, _ = run(capsys, "emb", DATA / "figure_eight.json", "--max-iters", "1")
    assert code == 3 and out["error"] == "not converged"


def test_directory_input_in_parallel(capsys, tmp_path):
    for name in ("tripod.json", "figure_eight.json"):
        shutil.copy(DATA / name, tmp_path / name)
    code, out, _ = run(capsys, "emb", tmp_path, "--jobs", "2")
    assert code == 0 and set(out) == {"tripod.json", "figure_eight.json"}


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "elastigraph", "energy", str(DATA / "tripod.json")],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0, proc.stderr
    assert "energy" in json.loads(proc.stdout)
