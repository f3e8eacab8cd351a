import csv
import os

import pytest

import oracles
from nscert.cli import main
from nscert.config import ConfigError, parse_config_text
from nscert.vtk import vtk_text

MINIMAL = "mesh = 2\ntau = 0.01\nT = 0.1\nmu = 1\nu0 = sine_catalog\n"


def test_minimal_config():
    cfg = parse_config_text(MINIMAL)
    assert cfg.mesh == (2, 2, 2) and cfg.N == 10 and cfg.solver_tol == 1e-10
    assert "forcing = none" in cfg.echo()


def test_round_trip():
    cfg = parse_config_text(MINIMAL + "[ledger]\nC9 = 0.5\n[convergence]\nlevels = 1, 2, 3\n")
    again = parse_config_text(cfg.echo())
    assert again == cfg
    assert again.echo() == cfg.echo()


@pytest.mark.parametrize(
    "text, match",
    [
        ("tau = -1\nT = 1\n", "tau"),
        ("taw = 0.01\nT = 1\n", "did you mean 'tau'"),
        ("tau = 0.03\nT = 0.1\n", "integer multiple"),
        ("tau = 0.01\n", "T or N"),
        ("tau = 0.01\nT = 0.1\nmu = 0\n", "mu"),
        ("tau = abc\nT = 1\n", "tau"),
        ("tau = 0.1\nT = 1\nu0 = nonsense(\n", "u0"),
        ("tau = 0.1\nT = 1\n[ledger]\nC10 = 1\n", "C10"),
        ("tau = 0.1\nT = 1\n[extra]\nx = 1\n", "section"),
        ("tau = 0.1\nT = 1\nN = 3\n", "disagrees"),
        ("tau = 0.1\nT = 1\nextents = 0, 0, 0, 1, 0, 1\n", "extents"),
    ],
)
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config_text(text)


def test_N_instead_of_T():
    cfg = parse_config_text("tau = 0.25\nN = 4\n")
    assert cfg.T == 1.0 and cfg.N == 4


def test_manufactured_config():
    cfg = parse_config_text("tau = 0.1\nT = 0.2\nforcing = manufactured\n")
    assert cfg.u0 == "manufactured"
    with pytest.raises(ConfigError):
        parse_config_text("tau = 0.1\nT = 0.2\nforcing = manufactured\nu0 = sine\n")


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_run_zero(tmp_path):
    cfg = _write(tmp_path, "mesh = 2\ntau = 0.1\nT = 0.3\nu0 = zero\nsnapshot_stride = 2\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "o"), "--threads", "1"]) == 0
    rows = _rows(tmp_path / "o" / "diagnostics.csv")
    assert len(rows) == 4 and all(float(r["energy"]) == 0.0 for r in rows)
    assert sorted(os.listdir(tmp_path / "o")) == [
        "config_echo.ini", "diagnostics.csv", "snapshot_00000.vtk", "snapshot_00002.vtk", "snapshot_00003.vtk"]


def test_run_sine_energy_monotone(tmp_path):
    cfg = _write(tmp_path, "mesh = 2\ntau = 0.01\nT = 0.05\nu0 = sine\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 0
    e = [float(r["energy"]) for r in _rows(tmp_path / "diagnostics.csv")]
    assert all(b <= a for a, b in zip(e, e[1:]))


def test_run_manufactured_error_column(tmp_path):
    cfg = _write(tmp_path, "mesh = 2\ntau = 0.01\nT = 0.02\nforcing = manufactured\n")
    assert main(["run", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "diagnostics.csv")
    assert "error_l2" in rows[0] and float(rows[-1]["error_l2"]) > 0


def test_certify_default_and_generous(tmp_path, capsys):
    box = "mesh = 2\nextents = 0, 0, 0, 0.1, 0.1, 0.1\ntau = 0.01\nT = 0.03\nu0 = zero\n"
    assert main(["certify", "--config", _write(tmp_path, box), "--out", str(tmp_path / "a")]) == 0
    text = (tmp_path / "a" / "certificate.txt").read_text()
    assert "verdict: conditions not met: tau >= tau_M" in text
    assert "error_bound: " in text
    h = 0.1 * 3**0.5 / 2
    led = oracles.generous_ledger(1.0, 0.01, h)
    extra = "[ledger]\n" + "".join(f"{k} = {getattr(led, k)!r}\n" for k in ("C0", "C1", "C1star", "C2", "C3", "C9"))
    assert main(["certify", "--config", _write(tmp_path, box + extra, "g.ini"), "--out", str(tmp_path / "b")]) == 0
    text = (tmp_path / "b" / "certificate.txt").read_text()
    assert "verdict: certified\n" in text
    assert "verdict: certified" in capsys.readouterr().out


def test_exit_codes(tmp_path, capsys):
    assert main(["run", "--config", _write(tmp_path, "taw = 1\n"), "--out", str(tmp_path)]) == 2
    assert "did you mean 'tau'" in capsys.readouterr().err
    assert main(["run", "--out", str(tmp_path)]) == 2


def test_mesh_info_and_project(tmp_path, capsys):
    assert main(["mesh-info", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "tets: 48" in out and "diameter_ratio: 1.0" in out
    assert main(["project", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "projection.csv").exists()


def test_convergence_interpolation(tmp_path):
    assert main(["convergence", "--study", "interpolation", "--levels", "1,2,4", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "convergence_interpolation.csv").read_text().splitlines()
    assert lines[0].startswith("h,velocity_l2") and lines[-1].startswith("order,")


def test_vtk(cube1):
    from nscert import catalog
    from nscert.fespace import interpolate

    text = vtk_text(cube1, interpolate(catalog.constant(), cube1))
    lines = text.splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0" and "DATASET UNSTRUCTURED_GRID" in lines
    assert "POINTS 8 double" in lines and "CELLS 6 30" in lines
    assert lines.count("10") == 6
    i = lines.index("VECTORS velocity double")
    assert lines[i + 1] == "1.0 2.0 2.0"
