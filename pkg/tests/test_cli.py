import io
import json
import subprocess
import sys

import pytest

from polyagraph.cli import main


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_simulate_csv():
    code, out, _ = run("simulate", "--graph", "complete:3", "--alpha", "1", "--steps", "100000", "--seed", "7")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "step,x_1,x_2,x_3"
    assert lines[-1].startswith("100000,")
    assert lines[1].startswith("0,0.33333333333333331,")


def test_simulate_is_deterministic():
    a = run("simulate", "--graph", "star:3", "--alpha", "2", "--steps", "1000")
    b = run("simulate", "--graph", "star:3", "--alpha", "2", "--steps", "1000")
    assert a == b and a[0] == 0


def test_simulate_out_dir(tmp_path):
    code, _, _ = run("simulate", "--graph", "cycle:4", "--steps", "500", "--out", str(tmp_path))
    assert code == 0
    assert (tmp_path / "spec.json").exists()
    assert (tmp_path / "trajectories" / "trajectory.csv").read_text().startswith("step,x_1,x_2,x_3,x_4\n")
    assert (tmp_path / "trajectories" / "noise.csv").read_text().startswith("step,M_1,")
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert sum(summary["final_counts"]) == 4 + 500 * 4


def test_disconnected_file(tmp_path):
    bad = tmp_path / "bad.edges"
    bad.write_text("4\n1 2\n3 4\n")
    code, out, err = run("simulate", "--graph", str(bad), "--steps", "10")
    assert code == 1 and "disconnected" in err and out == ""


@pytest.mark.parametrize("argv, needle", [
    (("simulate", "--graph", "cycle:2"), "invalid size"),
    (("simulate", "--graph", "complete:3", "--alpha", "-1"), "exponent"),
    (("simulate", "--graph", "complete:3", "--hypergraph", "x"), "exactly one"),
    (("simulate",), "graph source"),
    (("montecarlo", "--graph", "complete:3", "--target", "omega", "--trials", "2", "--steps", "10"), "regular bipartite"),
])
def test_validation_errors(argv, needle):
    code, _, err = run(*argv)
    assert code == 1 and needle in err


def test_alpha_table(tmp_path):
    table = tmp_path / "alpha.txt"
    table.write_text("# per-edge\n1-3 = 0.5\n2-3 = 2\n")
    code, out, _ = run("equilibria", "--graph", "star:3", "--alpha-table", str(table), "--json")
    assert code == 0
    assert json.loads(out)["equilibria"]
    table.write_text("1-3 = 0.5\n")
    code, _, err = run("equilibria", "--graph", "star:3", "--alpha-table", str(table))
    assert code == 1 and "edge set" in err


def test_equilibria_k3():
    code, out, _ = run("equilibria", "--graph", "complete:3", "--alpha", "1")
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == "support,x_1,x_2,x_3,classification,max_real_part_nonzero_eig"
    assert len(lines) == 5
    assert sum(",unstable," in ln for ln in lines) == 3


def test_equilibria_c4_continuum_and_flags():
    code, out, _ = run("equilibria", "--graph", "cycle:4", "--alpha", "1", "--json")
    doc = json.loads(out)
    assert code == 0
    assert any(c["support"] == [1, 2, 3, 4] for c in doc["continua"])
    assert all(chk["all_ok"] for chk in doc["omega"]["spectral_checks"])


def test_equilibria_star5(tmp_path):
    code, _, _ = run("equilibria", "--graph", "star:5", "--alpha", "0.5", "--full-support", "--out", str(tmp_path))
    assert code == 0
    rows = (tmp_path / "equilibria.csv").read_text().splitlines()
    assert len(rows) == 2
    vals = [float(v) for v in rows[1].split(",")[1:6]]
    assert vals == pytest.approx([0.05] * 4 + [0.8], abs=1e-12)
    doc = json.loads((tmp_path / "summary.json").read_text())
    assert doc["star_closed_form"] == pytest.approx([0.05] * 4 + [0.8], abs=1e-15)


def test_montecarlo_targets():
    code, out, _ = run("montecarlo", "--graph", "complete:3", "--alpha", "1", "--trials", "8",
                       "--steps", "2000", "--target", "uniform")
    doc = json.loads(out)
    assert code == 0 and "point" in doc["fraction_within_tol"]
    assert doc["unstable_avoidance"]["enforced"] is True
    code, out, _ = run("montecarlo", "--graph", "cycle:4", "--trials", "8", "--steps", "2000", "--target", "omega")
    assert "q50" in json.loads(out)["distance_quantiles"]
    code, out, _ = run("montecarlo", "--graph", "star:3", "--alpha", "2", "--trials", "20", "--steps", "2000")
    doc = json.loads(out)
    assert set(doc["fraction_within_tol"]) == {"centre", "leaves"}
    assert sum(doc["hit_counts"].values()) == 20


def test_montecarlo_out_dir_and_bytes(tmp_path):
    args = ("montecarlo", "--graph", "complete:3", "--trials", "6", "--steps", "3000", "--seed", "9")
    run(*args, "--out", str(tmp_path / "a"))
    run(*args, "--out", str(tmp_path / "b"), "--workers", "3")
    for name in ("spec.json", "summary.json", "trajectories/trials.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "trajectories" / "trials.csv").read_text().startswith("# master_seed=9 ")


def test_ode_csv():
    code, out, _ = run("ode", "--graph", "complete:3", "--x0", "0.6,0.3,0.1", "--t-end", "60", "--every", "1000")
    lines = out.splitlines()
    assert code == 0 and lines[0] == "t,x_1,x_2,x_3"
    assert abs(float(lines[-1].split(",")[1]) - 1 / 3) < 1e-6


def test_verify_hypergraph():
    code, out, _ = run("verify", "--graph", "hyper:one-edge:4", "--quick")
    assert code == 0
    assert "PASS [hyper:one-edge:4 hypergraph] continuum reported on the full face" in out


def test_verify_cycle6_flags():
    code, out, _ = run("verify", "--graph", "cycle:6", "--alpha", "1", "--quick")
    assert code == 0
    assert out.count("spectral flags") == 5 and "FAIL" not in out


@pytest.mark.slow
def test_verify_quick_default_grid():
    code, out, _ = run("verify", "--quick")
    assert code == 0, out


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "polyagraph.cli", "equilibria", "--graph", "complete:2"],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.splitlines()[0] == "support,x_1,x_2,classification,max_real_part_nonzero_eig"
