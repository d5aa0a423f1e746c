import json

import pytest
import yaml

from crackfield.ui.cli_app import EXIT_CONFIG, EXIT_OK, create_app
from crackfield.utils.config import RunConfig, default_window


def _run(*argv):
    return create_app().run(list(argv))


def test_defaults():
    run = RunConfig()
    assert (run.radius, run.k, run.tol, run.order) == (256.0, 0.4, 1e-8, 0)
    assert run.fit_window == (16.0, 64.0)
    assert default_window(64) == (8.0, 16.0)


def test_converge_rejects_single_radius(tmp_path):
    assert _run("converge", "--radii", "32", "--output", str(tmp_path)) == EXIT_CONFIG


def test_order_two_needs_c2(tmp_path):
    assert _run("solve", "--order", "2", "--output", str(tmp_path)) == EXIT_CONFIG


def test_invalid_window(tmp_path):
    assert _run("solve", "--window", "8", "4", "--output", str(tmp_path)) == EXIT_CONFIG


def test_solve_zero_load(tmp_path):
    assert _run("solve", "--radius", "16", "--k", "0", "--output", str(tmp_path)) == EXIT_OK
    for name in ("corrector_gradient", "forces", "linear_residual"):
        data = json.loads((tmp_path / f"{name}.json").read_text(encoding="utf-8"))
        assert "slope" in data
        assert max(shell["max"] for shell in data["shells"]) <= 1e-10
    assert (tmp_path / "corrector.csv").exists()
    summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert summary["solve"]["converged"]


def test_solve_csv_reports(tmp_path):
    code = _run("solve", "--radius", "16", "--potential", "quadratic", "--format", "csv", "--output", str(tmp_path))
    assert code == EXIT_OK
    assert (tmp_path / "forces.csv").exists()


def test_config_file_with_override(tmp_path):
    config = tmp_path / "run.yaml"
    config.write_text(yaml.safe_dump({"radius": 16, "k": 0.3, "tol": 1e-9}), encoding="utf-8")
    out = tmp_path / "out"
    assert _run("solve", "--config", str(config), "--k", "0", "--output", str(out)) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert summary["meta"]["K"] == 0.0
    assert summary["meta"]["R"] == 16
    assert summary["meta"]["tol"] == 1e-9


def test_greens_command(tmp_path):
    assert _run("greens", "--radius", "48", "--mu", "off", "--output", str(tmp_path)) == EXIT_OK
    summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert summary["residual_linf"] <= 1e-8
    assert summary["meta"]["mu"] is False
    assert summary["symmetry"]["mirror_asymmetry"] <= 1e-7
    assert (tmp_path / "g_hat1_m_gradient.json").exists()


def test_greens_command_writes_corrected_remainder(tmp_path):
    assert _run("greens", "--radius", "48", "--mu", "on", "--output", str(tmp_path)) == EXIT_OK
    summary = json.loads((tmp_path / "summary.json").read_text(encoding="utf-8"))
    assert summary["meta"]["mu"] is True
    assert (tmp_path / "gbar0.csv").exists()
    assert (tmp_path / "gbar1_mu.csv").exists()


def test_stability_command(tmp_path):
    code = _run("stability", "--radius", "12", "--k-values", "0.1", "0.3", "--seed", "7", "--output", str(tmp_path))
    assert code == EXIT_OK
    summary = json.loads((tmp_path / "stability.json").read_text(encoding="utf-8"))
    assert [row["K"] for row in summary["rows"]] == [0.1, 0.3]


@pytest.mark.slow
def test_solve_smoke_at_radius_64(tmp_path):
    assert _run("solve", "--radius", "64", "--k", "0.4", "--order", "0", "--output", str(tmp_path)) == EXIT_OK
    for name in ("corrector_gradient", "forces", "linear_residual"):
        data = json.loads((tmp_path / f"{name}.json").read_text(encoding="utf-8"))
        assert data["slope"] is not None


@pytest.mark.slow
def test_converge_fast_mode(tmp_path):
    assert _run("converge", "--fast", "--orders", "0", "--output", str(tmp_path)) == EXIT_OK
    data = json.loads((tmp_path / "convergence.json").read_text(encoding="utf-8"))
    assert data["fitted_orders"]["order0"] < 0
