import json
import subprocess
import sys

import numpy as np
import pytest

from qndinterface import sweep_cli as cli
from qndinterface.phase_space import matrix_from_json, paper_matrix_u
from qndinterface.wigner_calculus import GaussPolyWigner, evaluate, single_photon_wigner


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestVerifyDeterministic:
    def test_default_passes(self, capsys):
        code, out, _ = run(["verify-deterministic"], capsys)
        assert code == 0
        assert "FAIL" not in out and "PASS" in out

    def test_wrong_kappa3_branch(self, capsys):
        code, out, _ = run(["verify-deterministic", "--kappa3-sign", "-1"], capsys)
        assert code == 1
        assert "FAIL" in out

    def test_feed_forward_disabled(self, capsys):
        code, out, err = run(["verify-deterministic", "--gamma-x", "0"], capsys)
        assert code == 1
        assert "non-ideal gains" in err
        assert "FAIL" in out

    @pytest.mark.parametrize("k", ["0.05", "1.0"])
    def test_other_gains(self, capsys, k):
        assert run(["verify-deterministic", "--kappa", k], capsys)[0] == 0


class TestValidation:
    @pytest.mark.parametrize(
        "argv",
        [
            ["sweep-q", "--q", "25"],
            ["sweep-q", "--start", "0", "--stop", "1"],
            ["sweep-q", "--start", "1", "--stop", "0.5"],
            ["sweep-kappa", "--ps-target", "1.5"],
            ["sweep-kappa", "--stop", "2"],
            ["sweep-va", "--start", "0.2"],
            ["sweep-va", "--vm", "0.1"],
            ["sweep-q", "--kappa", "-0.5"],
            ["sweep-q", "--order", "1"],
            ["sweep-q", "--jobs", "0"],
            ["dump"],
        ],
    )
    def test_rejected_before_any_output(self, argv, tmp_path, capsys):
        out = tmp_path / "res.csv"
        code, _, err = run(argv + ["--out", str(out)], capsys)
        assert code == 2
        assert err.startswith("error:")
        assert not out.exists()

    def test_unknown_config_key(self, tmp_path, capsys):
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"kapa": 0.3}))
        assert run(["sweep-q", "--config", str(conf)], capsys)[0] == 2


class TestSweeps:
    def test_sweep_q_csv(self, tmp_path, capsys):
        out = tmp_path / "q.csv"
        code, _, _ = run(
            ["sweep-q", "--start", "1e-3", "--stop", "2", "--points", "5", "--out", str(out)], capsys
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "swept,q,ps,fidelity,negativity"
        rows = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
        assert rows.shape == (5, 5)
        np.testing.assert_array_equal(rows[:, 0], rows[:, 1])
        assert np.all(np.diff(rows[:, 0]) > 0)
        assert np.all(np.diff(rows[:, 2]) > 0)
        assert rows[0, 3] > 0.999

    def test_single_q_point(self, capsys):
        code, out, _ = run(["sweep-q", "--q", "0.1"], capsys)
        assert code == 0
        assert len(out.splitlines()) == 2

    def test_deterministic_across_runs_and_jobs(self, tmp_path, capsys):
        texts = []
        for jobs in ("1", "2", "1"):
            out = tmp_path / f"r{len(texts)}.csv"
            args = ["sweep-q", "--points", "4", "--jobs", jobs, "--out", str(out)]
            assert run(args, capsys)[0] == 0
            texts.append(out.read_bytes())
        assert texts[0] == texts[1] == texts[2]

    def test_sweep_kappa_files_per_target(self, tmp_path, capsys):
        out = tmp_path / "k.csv"
        argv = ["sweep-kappa", "--start", "0.3", "--stop", "0.5", "--points", "2",
                "--ps-target", "1e-2", "1e-3", "--out", str(out)]
        assert run(argv, capsys)[0] == 0
        assert (tmp_path / "k_ps0.01.csv").exists()
        assert (tmp_path / "k_ps0.001.csv").exists()

    def test_unreachable_points_are_null(self, capsys):
        # below PS at the smallest bracketed window -> empty cells, run continues
        code, out, err = run(
            ["sweep-kappa", "--start", "0.5", "--stop", "0.5", "--points", "1", "--ps-target", "1e-20"],
            capsys,
        )
        row = out.splitlines()[1].split(",")
        assert row[0] == repr(0.5)
        assert row[3] == "" and row[4] == ""
        assert code == 3
        assert err

    def test_sweep_va_json(self, tmp_path, capsys):
        out = tmp_path / "va.json"
        argv = ["sweep-va", "--start", "0.5", "--stop", "5", "--points", "2", "--ps-target", "1e-2",
                "--format", "json", "--out", str(out)]
        assert run(argv, capsys)[0] == 0
        obj = json.loads(out.read_text())
        meta = obj["metadata"]
        assert {"command", "engine_version", "quadrature_order", "config", "wall_time_s"} <= set(meta)
        f = [r["fidelity"] for r in obj["records"]]
        assert f[0] >= f[1]

    def test_config_file_and_override(self, tmp_path, capsys):
        conf = tmp_path / "c.json"
        conf.write_text(json.dumps({"kappa": 0.3, "points": 3, "format": "json"}))
        out = tmp_path / "o.json"
        argv = ["sweep-q", "--config", str(conf), "--points", "2", "--out", str(out)]
        assert run(argv, capsys)[0] == 0
        obj = json.loads(out.read_text())
        assert len(obj["records"]) == 2
        assert obj["metadata"]["config"]["kappa1"] == 0.3

    def test_svg(self, tmp_path, capsys):
        svg = tmp_path / "p.svg"
        assert run(["sweep-q", "--points", "3", "--svg", str(svg)], capsys)[0] == 0
        text = svg.read_text()
        assert text.startswith("<svg") and text.count("<polyline") == 3


class TestDump:
    def test_sequential_matrix(self, capsys):
        code, out, _ = run(["dump", "--dump-matrix", "sequential", "--kappa", "0.5"], capsys)
        assert code == 0
        obj = json.loads(out)["matrix"]
        assert len(obj["data"]) == 36
        assert obj["ordering"][0] == "x_L"

    def test_published_matrix_round_trip(self, capsys):
        _, out, _ = run(["dump", "--dump-matrix", "published", "--kappa1", "0.3", "--kappa2", "0.7"], capsys)
        S = matrix_from_json(json.dumps(json.loads(out)["matrix"]))
        np.testing.assert_array_equal(S, paper_matrix_u(0.3, 0.7))

    def test_single_photon_state(self, capsys):
        _, out, _ = run(["dump", "--dump-state", "single-photon"], capsys)
        obj = json.loads(out)["state"]
        w = GaussPolyWigner.from_dict(obj)
        assert w.poly.terms == {(2, 0): 2.0, (0, 2): 2.0, (0, 0): -1.0}
        np.testing.assert_array_equal(w.A, 2 * np.eye(2))
        pt = [0.3, -0.8]
        assert evaluate(w, pt) == pytest.approx(evaluate(single_photon_wigner(), pt), rel=1e-14)

    def test_to_file(self, tmp_path, capsys):
        out = tmp_path / "s.json"
        assert run(["dump", "--dump-state", "thermal", "--va", "2", "--out", str(out)], capsys)[0] == 0
        assert json.loads(out.read_text())["state"]["name"] == "thermal"


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "qndinterface.sweep_cli", "verify-deterministic"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
