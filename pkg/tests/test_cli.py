import json
import math
import subprocess
import sys

import pytest

from warpcone.cli import EXIT_CONFIG, EXIT_NUMERIC, main
from warpcone.geometry import loads_net
from warpcone.graphs import deserialize
from warpcone.harness import COLUMNS, read_csv


def run(capsysbinary, *argv):
    code = main(list(argv))
    out = capsysbinary.readouterr()
    return code, out.out, out.err.decode()


def test_net_text_round_trips(capsysbinary):
    code, out, _ = run(capsysbinary, "net", "--space", "circle", "--r", "0.5", "--seed", "1")
    assert code == 0
    net = loads_net(out.decode())
    assert len(net) >= 7
    assert net.r == 0.5


def test_net_json(capsysbinary):
    code, out, _ = run(capsysbinary, "net", "--action", "s2_free_rotations", "--r", "0.4", "--format", "json")
    assert code == 0
    info = json.loads(out)
    assert info["r"] == 0.4 and info["size"] > 10


def test_partition_summary(capsysbinary):
    code, out, _ = run(capsysbinary, "partition", "--space", "torus2:1,1", "--r", "0.2", "--seed", "3")
    assert code == 0
    summary = json.loads(out)
    assert summary["seed"] == 3 and summary["Q"] >= 1


def test_graph_edgelist_and_json(capsysbinary, tmp_path):
    path = tmp_path / "g.edgelist"
    args = ("graph", "--action", "circle_golden_rotation", "--r", "0.3", "--seed", "2")
    assert run(capsysbinary, *args, "--out", str(path))[0] == 0
    graph = deserialize(path.read_bytes())
    code, out, _ = run(capsysbinary, *args, "--format", "json")
    assert code == 0
    assert json.loads(out)["num_edges"] == graph.m

    code, out, _ = run(capsysbinary, "spectra", str(path))
    assert code == 0
    report = json.loads(out)
    assert report["cheeger_lower"] <= report["cheeger_upper"]
    assert report["sigma2"] is None


def test_spectra_from_action(capsysbinary):
    code, out, _ = run(capsysbinary, "spectra", "--action", "torus_translations", "--r", "0.3")
    assert code == 0
    report = json.loads(out)
    assert 0 <= report["sigma2"] <= 1
    if "cheeger_exact" in report:
        assert report["cheeger_lower"] <= report["cheeger_exact"] <= report["cheeger_upper"] + 1e-12


def test_warp_writes_scale(capsysbinary):
    code, out, _ = run(capsysbinary, "warp", "--action", "circle_golden_rotation", "--t", "5")
    assert code == 0
    assert out.splitlines()[1] == b"t 5"
    assert deserialize(out).n > 10


def test_expand(capsysbinary):
    code, out, _ = run(capsysbinary, "expand", "--action", "circle_golden_rotation", "--r", "0.3")
    assert code == 0
    report = json.loads(out)
    assert report["alpha_hat"] > 0
    assert set(report) == {"alpha_hat", "witness_cells", "families", "slack"}


def test_schreier(capsysbinary):
    code, out, _ = run(capsysbinary, "schreier", "--action", "schreier_cyclic:8", "--format", "json")
    assert code == 0
    info = json.loads(out)
    assert info["num_vertices"] == 8
    assert info["lambda2"] == pytest.approx(1 - math.cos(2 * math.pi / 8), abs=1e-9)


def test_experiment_csv_to_stdout(capsysbinary):
    code, out, _ = run(capsysbinary, "experiment", "--action", "circle_golden_rotation",
                       "--schedule", "0.4,0.2", "--seed", "4")
    assert code == 0
    assert out.decode().splitlines()[0] == ",".join(COLUMNS)
    assert len(read_csv(out)) == 2


def test_experiment_config_file(capsysbinary, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"action": "schreier_cyclic", "schedule": [4, 8], "seed": 0,
                               "mode": "schreier", "outputs": ["csv", "json", "edgelist", "svg"]}))
    out_dir = tmp_path / "run"
    code, _, _ = run(capsysbinary, "experiment", "--config", str(cfg), "--out", str(out_dir))
    assert code == 0
    assert sorted(p.name for p in out_dir.iterdir()) == [
        "experiment.csv", "experiment.json", "experiment.svg", "step00.edgelist", "step01.edgelist"]


@pytest.mark.parametrize("argv", [
    ("graph", "--action", "hyperbolic_flow", "--r", "0.3"),
    ("graph", "--action", "s2_free_rotations"),
    ("graph", "--action", "s2_free_rotations", "--space", "circle", "--r", "0.3"),
    ("net", "--r", "0.3"),
    ("net", "--space", "klein", "--r", "0.3"),
    ("schreier", "--action", "circle_golden_rotation"),
    ("experiment", "--action", "circle_golden_rotation", "--schedule", "0.2,0.3,0.1"),
    ("experiment", "--action", "circle_golden_rotation", "--schedule", "a,b"),
    ("experiment", "--config", "/nonexistent/cfg.json"),
])
def test_config_errors_exit_2(capsysbinary, argv):
    code, out, err = run(capsysbinary, *argv)
    assert code == EXIT_CONFIG
    assert "config error" in err
    assert out == b""


def test_bad_edge_list_exits_2(capsysbinary, tmp_path):
    path = tmp_path / "bad.edgelist"
    path.write_bytes(b"# warpcone-graph v1\nn 3 m 1\n2 1\n")
    code, _, err = run(capsysbinary, "spectra", str(path))
    assert code == EXIT_CONFIG
    assert "line 3" in err


def test_numeric_failure_exits_3(capsysbinary):
    # a single net point leaves no second eigenvalue to compute
    code, _, err = run(capsysbinary, "spectra", "--action", "circle_golden_rotation", "--r", "50")
    assert code == EXIT_NUMERIC
    assert "numeric failure" in err


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "warpcone.cli", "schreier", "--action", "schreier_cyclic:4"],
                          capture_output=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout == b"# warpcone-graph v1\nn 4 m 4\n0 1\n0 3\n1 2\n2 3\n"
