"""Exit codes, artifacts, and determinism of the batch front end."""

import json
import math

import pytest

from kgperiodic.cli import (
    EXIT_BAD_CONFIG,
    EXIT_INSUFFICIENT_DATA,
    EXIT_NO_CONVERGENCE,
    EXIT_NO_ORBIT,
    EXIT_OK,
    EXIT_RESONANT,
    main,
)

RESONANT_EPS = 0.1396532019663832   # center of the (k=2, j=12) window, a = 0.9


def run_cli(tmp_path, command, cfg=None, name="cfg.json"):
    argv = [command]
    if cfg is not None:
        path = tmp_path / name
        path.write_text(json.dumps(cfg))
        argv.append(str(path))
    return main(argv)


class TestLimitOrbit:
    def test_writes_orbit_json(self, tmp_path):
        code = run_cli(tmp_path, "limit-orbit",
                       {"amplitude": 1.0, "out_dir": str(tmp_path)})
        assert code == EXIT_OK
        doc = json.loads((tmp_path / "orbit.json").read_text())
        assert doc["config"]["command"] == "limit-orbit"
        assert doc["orbit"]["period"] == pytest.approx(6.008794252858908,
                                                       abs=1e-10)
        assert doc["monodromy"]["nondegenerate"] is True

    def test_zero_cubic_rejected_as_config(self, tmp_path, capsys):
        # c3 = 0 degenerates the limit equation: flagged at config time
        cfg = {"model": {"model": "custom", "odd_coeffs": [0.0]},
               "amplitude": 1.0, "out_dir": str(tmp_path)}
        assert run_cli(tmp_path, "limit-orbit", cfg) == EXIT_BAD_CONFIG
        assert "model" in capsys.readouterr().err

    def test_unknown_model_key_rejected(self, tmp_path, capsys):
        cfg = {"model": {"model": "custom", "coefficients": [1.0]},
               "amplitude": 1.0, "out_dir": str(tmp_path)}
        assert run_cli(tmp_path, "limit-orbit", cfg) == EXIT_BAD_CONFIG
        assert "coefficients" in capsys.readouterr().err

    def test_unbounded_level_set_exits_3(self, tmp_path):
        # f3 < 0 caps the periodic amplitudes at sqrt(-8/f3)
        cfg = {"model": {"model": "custom", "odd_coeffs": [-1.0]},
               "amplitude": 3.0, "out_dir": str(tmp_path)}
        assert run_cli(tmp_path, "limit-orbit", cfg) == EXIT_NO_ORBIT
        assert not (tmp_path / "orbit.json").exists()

    def test_missing_amplitude_exits_1(self, tmp_path, capsys):
        assert run_cli(tmp_path, "limit-orbit",
                       {"out_dir": str(tmp_path)}) == EXIT_BAD_CONFIG
        assert "amplitude" in capsys.readouterr().err


class TestDivisors:
    def test_csv_layout_and_spot_value(self, tmp_path):
        cfg = {"k_max": 3, "j_max": 50, "out_dir": str(tmp_path)}
        assert run_cli(tmp_path, "divisors", cfg) == EXIT_OK
        lines = (tmp_path / "divisors.csv").read_text().splitlines()
        assert lines[0].startswith("# config: ")
        assert lines[1] == "k,j,eps_kj,window_lo,window_hi"
        rows = [line.split(",") for line in lines[2:]]
        assert len(rows) == 2 * 50
        keys = [(int(r[0]), int(r[1])) for r in rows]
        assert keys == sorted(keys)
        by_key = {k: r for k, r in zip(keys, rows)}
        eps = float(by_key[(2, 50)][2])
        # zero potential, period 2 pi: divisor equation residual vanishes
        assert abs(-4.0 + 1.0 / (1.0 + eps**2) + eps**2 * 2500.0) < 1e-11
        lo, hi = float(by_key[(2, 50)][3]), float(by_key[(2, 50)][4])
        assert hi - lo == pytest.approx(2.0 * 2.0**0.25 / 50**2.5, rel=1e-12)

    def test_j_max_zero_header_only(self, tmp_path):
        cfg = {"k_max": 4, "j_max": 0, "out_dir": str(tmp_path)}
        assert run_cli(tmp_path, "divisors", cfg) == EXIT_OK
        lines = (tmp_path / "divisors.csv").read_text().splitlines()
        assert len(lines) == 2

    def test_k_max_below_2_exits_1(self, tmp_path, capsys):
        cfg = {"k_max": 1, "j_max": 10, "out_dir": str(tmp_path)}
        assert run_cli(tmp_path, "divisors", cfg) == EXIT_BAD_CONFIG
        assert "k_max" in capsys.readouterr().err

    def test_unknown_field_exits_1(self, tmp_path, capsys):
        cfg = {"k_max": 3, "j_max": 5, "bogus": 1, "out_dir": str(tmp_path)}
        assert run_cli(tmp_path, "divisors", cfg) == EXIT_BAD_CONFIG
        assert "bogus" in capsys.readouterr().err

    def test_byte_identical_reruns(self, tmp_path):
        cfg = {"k_max": 4, "j_max": 80, "out_dir": str(tmp_path)}
        run_cli(tmp_path, "divisors", cfg)
        first = (tmp_path / "divisors.csv").read_bytes()
        run_cli(tmp_path, "divisors", cfg, name="cfg2.json")
        assert (tmp_path / "divisors.csv").read_bytes() == first


class TestSolve:
    def test_corrupt_config_exits_1(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["solve", str(bad)]) == EXIT_BAD_CONFIG
        assert "invalid config" in capsys.readouterr().err

    def test_unknown_solver_field_exits_1(self, tmp_path, capsys):
        cfg = {"eps": 0.1, "solver": {"bogus": 3}, "out_dir": str(tmp_path)}
        assert run_cli(tmp_path, "solve", cfg) == EXIT_BAD_CONFIG
        assert "bogus" in capsys.readouterr().err

    def test_nonpositive_eps_exits_1(self, tmp_path):
        cfg = {"eps": -0.1, "out_dir": str(tmp_path)}
        assert run_cli(tmp_path, "solve", cfg) == EXIT_BAD_CONFIG

    def test_resonant_eps_exits_2(self, tmp_path, capsys):
        cfg = {"eps": RESONANT_EPS, "out_dir": str(tmp_path)}
        assert run_cli(tmp_path, "solve", cfg) == EXIT_RESONANT
        err = capsys.readouterr().err
        assert "resonant" in err and "k=2" in err

    def test_nonconvergence_writes_diagnostics(self, tmp_path):
        # without averaging steps one Newton iteration cannot reach the
        # (unreachable) tolerance, so the stage budget of 1 must trip
        cfg = {"eps": 0.1, "out_dir": str(tmp_path),
               "solver": {"schedule": [6], "N_tau": 8, "nf_steps": 0,
                          "residual_tol": 1e-16, "max_stage_iters": 1}}
        assert run_cli(tmp_path, "solve", cfg) == EXIT_NO_CONVERGENCE
        diag = json.loads((tmp_path / "diagnostics.json").read_text())
        assert "NonConvergenceError" in diag["error"]
        assert diag["config"]["solver"]["max_stage_iters"] == 1

    def test_canonical_point_full_artifacts(self, tmp_path):
        cfg = {"eps": 0.1, "amplitude": 0.9, "out_dir": str(tmp_path)}
        assert run_cli(tmp_path, "solve", cfg) == EXIT_OK
        doc = json.loads((tmp_path / "solve.json").read_text())
        assert doc["closure"]["closed"] is True
        assert doc["solution"]["pde_residual_128"] < 1e-10
        assert doc["solution"]["max_u_over_eps"] == pytest.approx(
            0.9621246777948442, abs=1e-9)
        assert doc["config"]["eps"] == 0.1
        field = json.loads((tmp_path / "w_field.json").read_text())["field"]
        vdoc = json.loads((tmp_path / "v_traj.json").read_text())
        assert field["period"] == vdoc["trajectory"]["period"]
        samples = vdoc["trajectory"]["samples"]
        assert len(samples) == 256 and len(samples[0]) == 3
        assert samples[0][1] == pytest.approx(0.9 + vdoc["delta1"], abs=1e-12)


class TestSweep:
    def test_all_resonant_exits_5(self, tmp_path, capsys):
        cfg = {"eps_list": [RESONANT_EPS], "out_dir": str(tmp_path)}
        assert run_cli(tmp_path, "sweep", cfg) == EXIT_INSUFFICIENT_DATA
        lines = (tmp_path / "sweep.csv").read_text().splitlines()
        assert lines[1] == ("eps,resonant_skip,residual,max_u_over_eps,"
                            "tail,delta1,converged")
        cells = lines[2].split(",")
        assert cells[1] == "1" and cells[-1] == "0"
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["n_converged"] == 0
        assert "insufficient" in summary["note"]

    def test_bad_eps_list_exits_1(self, tmp_path):
        for eps_list in ([], [0.1, -0.2], "0.1", [0.1, True]):
            cfg = {"eps_list": eps_list, "out_dir": str(tmp_path)}
            assert run_cli(tmp_path, "sweep", cfg) == EXIT_BAD_CONFIG


class TestSelftest:
    def test_default_run_passes(self, capsys):
        assert main(["selftest"]) == EXIT_OK
        out = capsys.readouterr().out
        assert out.count("[PASS]") == 10
        assert "[FAIL]" not in out
        assert "10/10 properties hold" in out

    def test_config_and_artifact(self, tmp_path):
        cfg = {"seed": 7, "n_fields": 50, "out_dir": str(tmp_path)}
        assert run_cli(tmp_path, "selftest", cfg) == EXIT_OK
        doc = json.loads((tmp_path / "selftest.json").read_text())
        assert doc["ok"] is True
        assert len(doc["results"]) == 10
        assert doc["config"]["seed"] == 7
