"""
命令行端到端：退出码、产物格式与确定性
@author Color2333
"""

from __future__ import annotations

import csv
import json

import pytest

from apps.cli.main import main


def _write(tmp_path, payload, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def _read_csv(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# config: ")
    return list(csv.reader(lines[1:]))


class TestExitCodes:
    def test_unknown_subcommand(self):
        assert main(["frobnicate"]) == 2

    def test_missing_flux(self, tmp_path, capsys):
        code = main(["solve-linear", "--out", str(tmp_path / "out")])
        assert code == 2
        error = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert error["error"] == "config_error"

    def test_unknown_key(self, tmp_path):
        config = _write(tmp_path, {"fluxx": 1e4})
        assert main(["solve-linear", "--config", config, "--out", str(tmp_path)]) == 2

    def test_incompatible_zero_swirl(self, tmp_path):
        config = _write(tmp_path, {"flux": 10.0, "mode": 0, "forcing": {"modes": [{"n": 0, "theta": [0, 1]}]}})
        assert main(["solve-swirl", "--config", config, "--out", str(tmp_path)]) == 2

    def test_decompose_outside_regime(self, tmp_path):
        config = _write(tmp_path, {"flux": 1e5, "slip": 50.0, "mode": 1, "grid_size": 32})
        assert main(["decompose", "--config", config, "--out", str(tmp_path)]) == 1

    def test_decompose_honors_flux_threshold(self, tmp_path):
        payload = {"flux": 1e5, "slip": 1.0, "mode": 2, "grid_size": 160}
        assert main(["decompose", "--config", _write(tmp_path, payload), "--out", str(tmp_path / "a")]) == 0
        payload["large_flux_threshold"] = 1e6
        assert main(["decompose", "--config", _write(tmp_path, payload), "--out", str(tmp_path / "b")]) == 1


class TestCommands:
    def test_solve_linear_csv(self, tmp_path):
        config = _write(tmp_path, {"flux": 50.0, "slip": 1.0, "mode": 1, "grid_size": 32})
        out = tmp_path / "out"
        assert main(["solve-linear", "--config", config, "--out", str(out)]) == 0
        rows = _read_csv(out / "solve_linear.csv")
        assert rows[0][:3] == ["r", "psi_re", "psi_im"]
        assert len(rows) == 1 + 33
        summary = json.loads((out / "solve_linear.json").read_text(encoding="utf-8"))
        assert summary["summary"]["passed"] is True
        assert summary["config"]["flux"] == 50.0

    def test_solve_swirl_json(self, tmp_path):
        config = _write(tmp_path, {"flux": 50.0, "slip": 2.0, "mode": 0, "grid_size": 32})
        out = tmp_path / "out"
        assert main(["solve-swirl", "--config", config, "--out", str(out), "--format", "json"]) == 0
        document = json.loads((out / "solve_swirl.json").read_text(encoding="utf-8"))
        assert document["columns"] == ["r", "vtheta_re", "vtheta_im"]
        assert len(document["rows"]) == 33
        assert not (out / "solve_swirl.csv").exists()

    def test_sweep_columns(self, tmp_path):
        config = _write(tmp_path, {"sweep": {"estimate": "zero_mode", "modes": [0], "grid_size": 24}})
        out = tmp_path / "out"
        assert main(["sweep-estimates", "--config", config, "--out", str(out), "--jobs", "2"]) == 0
        rows = _read_csv(out / "sweep_estimates.csv")
        assert rows[0] == ["estimate_id", "phi", "alpha", "n", "ratio", "fitted_exponent", "pass"]
        assert len(rows) == 1 + 4 * 5

    def test_sweep_requires_section(self, tmp_path):
        assert main(["sweep-estimates", "--out", str(tmp_path)]) == 2

    def test_nonlinear_zero_forcing(self, tmp_path):
        config = _write(
            tmp_path,
            {"flux": 50.0, "slip": 1.0, "forcing": {}, "nonlinear": {"truncation": 2, "grid_size": 16}},
        )
        out = tmp_path / "out"
        assert main(["solve-nonlinear", "--config", config, "--out", str(out)]) == 0
        rows = _read_csv(out / "solve_nonlinear.csv")
        assert rows[0] == ["step", "update_norm", "rhs_norm"]
        assert len(rows) == 2
        summary = json.loads((out / "solve_nonlinear.json").read_text(encoding="utf-8"))["summary"]
        assert summary["iterations"] == 1
        assert summary["converged"] is True

    def test_specfun(self, tmp_path):
        config = _write(tmp_path, {"specfun": {"function": "airy_ai", "points": [0.0], "complex_points": [[1.0, 1.0]]}})
        out = tmp_path / "out"
        assert main(["specfun-eval", "--config", config, "--out", str(out)]) == 0
        rows = _read_csv(out / "specfun_eval.csv")
        assert len(rows) == 3
        assert float(rows[1][3]) == pytest.approx(0.3550280538878172, rel=1e-13)

    def test_inequalities_deterministic(self, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        for out in (first, second):
            assert main(["test-inequalities", "--samples", "200", "--seed", "7", "--out", str(out)]) in (0, 1)
        for name in ("test_inequalities.csv", "test_inequalities.json"):
            assert (first / name).read_bytes() == (second / name).read_bytes()

    def test_inequalities_sample_floor(self, tmp_path):
        assert main(["test-inequalities", "--samples", "10", "--out", str(tmp_path)]) == 2

    def test_sweep_honors_flux_threshold(self, tmp_path):
        payload = {
            "large_flux_threshold": 5e4,
            "sweep": {"estimate": "swirl_decay", "phis": [1e4, 1e5, 1e6], "alphas": [0.0], "modes": [1], "grid_size": 24},
        }
        out = tmp_path / "out"
        main(["sweep-estimates", "--config", _write(tmp_path, payload), "--out", str(out)])
        summary = json.loads((out / "sweep_estimates.json").read_text(encoding="utf-8"))["summary"]
        assert [e["phi"] for e in summary["excluded"]] == [1e4]
        assert summary["excluded"][0]["regime"] == "small_flux"

    def test_solve_linear_picks_grid_from_flux(self, tmp_path):
        config = _write(tmp_path, {"flux": 1e5, "slip": 1.0, "mode": 1})
        out = tmp_path / "out"
        assert main(["solve-linear", "--config", config, "--out", str(out), "--format", "json"]) == 0
        summary = json.loads((out / "solve_linear.json").read_text(encoding="utf-8"))["summary"]
        assert summary["grid_size"] == 112
        assert summary["stream_residual"] <= 1e-8
        assert summary["swirl_residual"] <= 1e-8

    @pytest.mark.slow
    def test_nonlinear_defaults_at_large_flux(self, tmp_path):
        config = _write(tmp_path, {"flux": 1e5, "slip": 1.0})
        out = tmp_path / "out"
        assert main(["solve-nonlinear", "--config", config, "--out", str(out)]) == 0
        summary = json.loads((out / "solve_nonlinear.json").read_text(encoding="utf-8"))["summary"]
        assert summary["grid_size"] == 112
        assert summary["final_residual"] <= 1e-6
