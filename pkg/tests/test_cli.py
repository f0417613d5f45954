import json

import numpy as np
import pytest

from subrad.cli import EXIT_CONFIG, EXIT_OK, EXIT_VALIDATION, main


def _write(path, text):
    path.write_text(text)
    return path


def test_spectrum(tmp_path, capsys):
    out = tmp_path / "spec"
    assert main(["spectrum", "--n", "51", "--a", "0.08", "--out", str(out)]) == EXIT_OK
    rows = (out / "spectrum.csv").read_text().splitlines()
    assert len(rows) == 52
    doc = json.loads((out / "summary.json").read_text())
    assert doc["subradiant_fraction"] == pytest.approx(42 / 51)
    assert doc["magic_angle_rad"] == pytest.approx(1.006277885559879, abs=1e-12)
    assert "subradiant_fraction" in capsys.readouterr().out


def test_two_atom_spectrum_decay_rates_sum_to_n(tmp_path):
    out = tmp_path / "n2"
    assert main(["spectrum", "--n", "2", "--a", "0.1", "--out", str(out)]) == EXIT_OK
    data = np.genfromtxt(out / "spectrum.csv", delimiter=",", names=True)
    cols = data.dtype.names
    rates = data[[c for c in cols if "gamma" in c.lower()][0]]
    assert rates.sum() == pytest.approx(2.0, abs=1e-12)


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SUBRAD_OUTPUT_ROOT", str(tmp_path))
    assert main(["spectrum", "--n", "5", "--a", "0.1"]) == EXIT_OK
    assert list(tmp_path.glob("spectrum_n5_*/spectrum.csv"))


@pytest.mark.parametrize("argv", [
    ["spectrum", "--a", "0.08"],
    ["spectrum", "--n", "1", "--a", "0.08"],
    ["spectrum", "--n", "5", "--a", "-1"],
    ["frobnicate"],
    [],
])
def test_bad_arguments(argv, tmp_path, monkeypatch):
    monkeypatch.setenv("SUBRAD_OUTPUT_ROOT", str(tmp_path))
    assert main(argv) == EXIT_CONFIG


def test_run_fig2(tmp_path):
    cfg = _write(tmp_path / "fig2.toml", 'preset = "fig2"\nn = 51\na_over_lambda = 0.08\nt_final = 6.0\n')
    out = tmp_path / "run"
    assert main(["run", str(cfg), "--out", str(out)]) == EXIT_OK
    data = np.loadtxt(out / "series.csv", delimiter=",", skiprows=1)
    p = data[:, 1]
    assert p[0] == pytest.approx(1.0) and np.all(np.diff(p) <= 1e-12)
    doc = json.loads((out / "summary.json").read_text())
    assert doc["plateau"] == pytest.approx(42 / 51, abs=0.05)


def test_run_fig5_detects_t_min(tmp_path):
    cfg = _write(tmp_path / "fig5.json", json.dumps({
        "preset": "fig5", "n": 25, "a_over_lambda": 0.08, "t_final": 4.0, "switch": {"t_min": "auto"}}))
    out = tmp_path / "run"
    assert main(["run", str(cfg), "--out", str(out)]) == EXIT_OK
    doc = json.loads((out / "summary.json").read_text())
    assert doc["meta"]["t_min"] == pytest.approx(1.79, abs=0.01)
    assert doc["meta"]["theta_f"] == pytest.approx(1.006277885559879, abs=1e-12)


def test_run_ensemble_layout(tmp_path):
    cfg = _write(tmp_path / "fig6.toml", 'preset = "fig2"\nn = 21\na_over_lambda = 0.08\nt_final = 2.0\n'
                 'sigma_over_a = 0.03\nrealizations = 3\nseed = 5\n')
    out = tmp_path / "run"
    assert main(["run", str(cfg), "--out", str(out), "--threads", "2"]) == EXIT_OK
    subs = sorted(p.name for p in (out / "realizations").iterdir())
    assert subs == ["r000", "r001", "r002"]
    head = (out / "realizations" / "r001" / "series.csv").read_text().splitlines()[0]
    assert head == "t,P_sur,K"
    assert json.loads((out / "summary.json").read_text())["ensemble"]["realizations"] == 3


def test_run_is_deterministic(tmp_path):
    cfg = _write(tmp_path / "d.toml", 'preset = "fig2"\nn = 21\na_over_lambda = 0.08\nt_final = 2.0\n'
                 'sigma_over_a = 0.05\nrealizations = 2\nseed = 11\n')
    for name in ("a", "b"):
        assert main(["run", str(cfg), "--out", str(tmp_path / name)]) == EXIT_OK
    assert (tmp_path / "a" / "series.csv").read_bytes() == (tmp_path / "b" / "series.csv").read_bytes()


def test_run_engine_override(tmp_path):
    cfg = _write(tmp_path / "c.toml", 'preset = "fig4"\nn = 10\na_over_lambda = 0.08\nt_final = 1.0\n')
    for eng in ("spectral", "integrator"):
        assert main(["run", str(cfg), "--out", str(tmp_path / eng), "--engine", eng]) == EXIT_OK
    a = np.loadtxt(tmp_path / "spectral" / "series.csv", delimiter=",", skiprows=1)
    b = np.loadtxt(tmp_path / "integrator" / "series.csv", delimiter=",", skiprows=1)
    assert np.max(np.abs(a - b)) <= 1e-8


@pytest.mark.parametrize("text", ['preset = "fig9"\nn = 5\na_over_lambda = 0.1\nt_final = 1\n',
                                  'preset = "fig2"\nn = 5\n',
                                  'this is not toml'])
def test_run_bad_config(tmp_path, text):
    cfg = _write(tmp_path / "bad.toml", text)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_run_missing_config(tmp_path):
    assert main(["run", str(tmp_path / "nope.toml")]) == EXIT_CONFIG


def test_validate(capsys):
    assert main(["validate"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "FAIL" not in out and "checks passed" in out


def test_validate_catches_corrupted_dissipator(capsys):
    assert main(["validate", "--corrupt-gamma"]) == EXIT_VALIDATION
    assert "FAIL" in capsys.readouterr().out
