import csv
import io
import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import oracles
from stabpoly import cli, optimizer
from stabpoly.errors import SolverError
from stabpoly.polybasis import StabilityPolynomial
from stabpoly.region import eval_poly, verify_feasible
from stabpoly.spectra import convex_hull, load_spectrum

DATA = Path(__file__).parent / "data"


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def usage_exit(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main([str(a) for a in argv])
    return exc.value.code, capsys.readouterr().err


@pytest.fixture
def taylor4_file(tmp_path):
    path = tmp_path / "rk4.json"
    path.write_text(json.dumps(StabilityPolynomial.taylor(4).to_dict()))
    return path


# -- spectrum ------------------------------------------------------------------------


def test_spectrum_real(capsys):
    code, out, err = run(["spectrum", "--builtin", "real", "--n", 400], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "re,im" and len(lines) == 401
    assert "400 points" in err


def test_spectrum_upwind_json(capsys):
    code, out, _ = run(["spectrum", "--builtin", "upwind", "--N", 20, "--dx", 1, "--format", "json"],
                       capsys)
    z = np.array([complex(a, b) for a, b in json.loads(out)])
    assert len(z) == 20
    assert np.allclose(np.abs(z + 1), 1)


def test_spectrum_hull(capsys):
    code, out, _ = run(["spectrum", "--file", DATA / "pseudospectrum.csv", "--hull"], capsys)
    assert code == 0
    rows = [tuple(map(float, line.split(","))) for line in out.strip().splitlines()[1:]]
    want = convex_hull(load_spectrum(DATA / "pseudospectrum.csv")).full_points()
    assert sorted(rows) == pytest.approx(sorted((w.real, w.imag) for w in want))


def test_unknown_builtin_is_usage_error(capsys):
    code, err = usage_exit(["spectrum", "--builtin", "spiral"], capsys)
    assert code == 2 and "invalid choice" in err


@pytest.mark.parametrize("argv", [
    ["spectrum", "--builtin", "real", "--file", "x.csv"],
    ["spectrum"],
    ["spectrum", "--file", "x.csv", "--n", "10"],
    ["spectrum", "--builtin", "real", "--spectrum-format", "csv"],
])
def test_conflicting_spectrum_flags(argv, capsys):
    code, _ = usage_exit(argv, capsys)
    assert code == 2


def test_hull_points_needs_hull(capsys):
    code, _ = usage_exit(["spectrum", "--builtin", "disk", "--hull-points", "10"], capsys)
    assert code == 2


def test_missing_file_exits_2(capsys, tmp_path):
    code, _, err = run(["spectrum", "--file", tmp_path / "none.csv"], capsys)
    assert code == 2 and err


# -- optimize --------------------------------------------------------------------------


def test_optimize_real(capsys):
    code, out, _ = run(["optimize", "--builtin", "real", "--n", 400, "-s", 10, "-p", 1,
                        "--basis", "chebyshev"], capsys)
    assert code == 0
    rep = json.loads(out)
    assert rep["schema"] == 1
    assert rep["H_over_s2"] == pytest.approx(2.0, abs=1e-3)
    lo, hi = rep["bracket"]
    assert lo == rep["H"] and hi > lo
    assert all(h["feasible"] == (h["r"] < rep["eps_feas"]) for h in rep["history"])


def test_optimize_imaginary(capsys):
    _, out, _ = run(["optimize", "--builtin", "imaginary", "--n", 400, "-s", 7, "-p", 1,
                     "--basis", "rotated"], capsys)
    assert json.loads(out)["H_over_s"] == pytest.approx(0.857, abs=2e-3)


def test_optimize_disk(capsys):
    _, out, _ = run(["optimize", "--builtin", "disk", "--n", 256, "-s", 5, "-p", 1,
                     "--basis", "binomial"], capsys)
    assert json.loads(out)["H"] == pytest.approx(5.0, abs=0.05)


def test_optimize_is_deterministic(capsys):
    argv = ["optimize", "--builtin", "disk", "--n", 64, "-s", 3, "-p", 1]
    reps = []
    for _ in range(2):
        _, out, _ = run(argv, capsys)
        rep = json.loads(out)
        assert set(rep.pop("log")) == {"elapsed_seconds", "finished_utc"}
        reps.append(json.dumps(rep, sort_keys=True))
    assert reps[0] == reps[1]


def test_optimize_solver_failure_exits_3(capsys, monkeypatch):
    def broken(*args, **kwargs):
        raise SolverError("least-deviation solve failed at h=1.0 (numerical-failure)")

    monkeypatch.setattr(optimizer, "_solve_at", broken)
    code, out, err = run(["optimize", "--builtin", "real", "--n", 20, "-s", 2, "-p", 1], capsys)
    assert code == 3
    assert out == "" and "h=1.0" in err


def test_optimize_invalid_order_exits_2(capsys):
    code, _, err = run(["optimize", "--builtin", "real", "--n", 20, "-s", 2, "-p", 3], capsys)
    assert code == 2 and err


def test_optimize_verify_round_trip(capsys, tmp_path):
    rep_path = tmp_path / "opt.json"
    for argv in (["--builtin", "upwind", "--N", 20, "--dx", 1, "-s", 10, "-p", 4],
                 ["--builtin", "imaginary", "--n", 200, "-s", 5, "-p", 2],
                 ["--builtin", "gap", "--alpha", 20, "--n", 256, "-s", 6, "-p", 1]):
        code, _, _ = run(["optimize", *argv, "-o", rep_path], capsys)
        assert code == 0
        H = json.loads(rep_path.read_text())["H"]
        spec_args = [a for a in argv if a not in ("-s", "-p")][: len(argv) - 4]
        code, out, err = run(["verify", "--poly", rep_path, *spec_args, "--h", repr(H)], capsys)
        assert code == 0
        assert json.loads(out)["feasible"], err


# -- sip and rectangle -------------------------------------------------------------------


def test_sip_disk(capsys):
    code, out, _ = run(["sip", "--family", "disk", "-s", 3, "-p", 1, "--basis", "binomial"],
                       capsys)
    rep = json.loads(out)
    assert code == 0 and rep["certified"]
    assert rep["H"] == pytest.approx(3.0, abs=5e-3)


def test_sip_rectangle_needs_dimensions(capsys):
    code, _ = usage_exit(["sip", "--family", "rectangle", "-s", 3, "-p", 1], capsys)
    assert code == 2


def test_rectangle_degenerate(capsys):
    code, out, _ = run(["rectangle", "--h", 1.0, "--beta", 0.0, "-s", 5, "-p", 1, "--n", 256],
                       capsys)
    assert code == 0
    assert json.loads(out)["kappa"] == pytest.approx(50.0, rel=1e-3)


# -- sweep ---------------------------------------------------------------------------------


def test_sweep_table(capsys, tmp_path):
    out_path = tmp_path / "t.csv"
    code, _, _ = run(["sweep", "--family", "real", "--s", "1-4", "--p", "1,2", "--n", 200,
                      "--jobs", 1, "-o", out_path], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out_path.read_text())))
    assert rows[0] == ["s", "1", "2"]
    assert [r[0] for r in rows[1:]] == ["1", "2", "3", "4"]
    assert rows[1][2] == ""  # p > s
    for r in rows[1:]:
        assert float(r[1]) == pytest.approx(2.0, abs=1e-3)


def test_sweep_disk_units(capsys):
    code, out, _ = run(["sweep", "--family", "disk", "--s", "3,4", "--p", "1,2", "--n", 128,
                        "--jobs", 1], capsys)
    rows = list(csv.reader(io.StringIO(out)))
    assert float(rows[1][1]) == pytest.approx(3.0, abs=5e-2)
    assert float(rows[2][2]) == pytest.approx(3.0, abs=5e-2)


def test_sweep_partial_failure_exits_4(capsys, monkeypatch, tmp_path):
    real = optimizer.optimize_h

    def flaky(spec, s, p, **kw):
        if s == 2:
            raise SolverError("least-deviation solve failed at h=3.0")
        return real(spec, s, p, **kw)

    monkeypatch.setattr(optimizer, "optimize_h", flaky)
    log = tmp_path / "fail.jsonl"
    code, out, err = run(["sweep", "--family", "real", "--s", "1-3", "--p", "1", "--n", 50,
                          "--jobs", 1, "--failure-log", log], capsys)
    assert code == 4
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[2] == ["2", ""]
    assert rows[3][1] != ""
    assert json.loads(log.read_text())["s"] == 2
    assert "s=2" in err


@pytest.mark.parametrize("bad", ["", "a-b", "0-3"])
def test_sweep_bad_lists(bad, capsys):
    code, _ = usage_exit(["sweep", "--family", "real", "--s", bad, "--p", "1"], capsys)
    assert code == 2


# -- verify and region --------------------------------------------------------------------


def test_verify_taylor4_upwind(capsys, taylor4_file):
    base = ["verify", "--poly", taylor4_file, "--builtin", "upwind", "--N", 20, "--dx", 1]
    code, out, err = run(base + ["--h", 1.39], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["feasible"] and err.startswith("feasible")
    assert rep["max_stable_step"] == pytest.approx(1.39, abs=0.01)
    code, out, err = run(base + ["--h", 1.5], capsys)
    rep = json.loads(out)
    assert code == 0 and not rep["feasible"]
    assert rep["worst_point"] == pytest.approx([-2.0, 0.0], abs=1e-12)
    assert "infeasible" in err


@pytest.mark.parametrize("content", [
    "not json",
    "[1, 2, 3]",
    '{"s": 2, "p": 1}',
    '{"s": 2, "p": 1, "coeffs": [1, 1]}',
    '{"s": 1, "p": 1, "coeffs": [1, 2]}',
])
def test_malformed_polynomial_exits_2(content, capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(content)
    argv = ["verify", "--poly", path, "--builtin", "real", "--n", 10, "--h", 1]
    try:
        code, _, _ = run(argv, capsys)
    except SystemExit as exc:
        code = exc.code
    assert code == 2


def test_region_contour(capsys, tmp_path, taylor4_file):
    contour = tmp_path / "c.csv"
    code, out, _ = run(["region", "--poly", taylor4_file, "--re", -5, 1, "--im", -4, 4,
                        "--res", 121, 161, "--contour", contour], capsys)
    assert code == 0
    rep = json.loads(out)
    assert len(rep["values"]) == 121 * 161
    rows = list(csv.reader(io.StringIO(contour.read_text())))[1:]
    pts = np.array([complex(float(r[1]), float(r[2])) for r in rows])
    axis = pts[np.abs(pts.imag) < 1e-9].real
    assert np.min(np.abs(axis - oracles.taylor4_real_boundary())) < 1e-3


def test_region_degenerate_range(capsys, taylor4_file):
    code, _, err = run(["region", "--poly", taylor4_file, "--re", 1, 1, "--im", -1, 1], capsys)
    assert code == 2 and err


# -- pseudospectrum pipeline ---------------------------------------------------------------


def test_pseudospectrum_pipeline(capsys, tmp_path):
    rep_path = tmp_path / "opt.json"
    src = ["--file", DATA / "pseudospectrum.csv", "--hull", "--hull-points", 256]
    code, _, _ = run(["optimize", *src, "-s", 8, "-p", 2, "-o", rep_path], capsys)
    assert code == 0
    rep = json.loads(rep_path.read_text())
    poly = StabilityPolynomial.from_dict(rep["polynomial"])
    assert poly.order_residual() <= 1e-9
    assert rep["H"] > 0
    # feasible on the full ingested point set, not just its hull
    full = load_spectrum(DATA / "pseudospectrum.csv")
    assert verify_feasible(poly, full, rep["H"], tol=1e-6)[0]
    code, out, _ = run(["verify", "--poly", rep_path, "--file", DATA / "pseudospectrum.csv",
                        "--h", repr(rep["H"])], capsys)
    assert code == 0 and json.loads(out)["feasible"]


# -- entry points ----------------------------------------------------------------------------


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "stabpoly", "spectrum", "--builtin", "disk",
                           "--n", "8"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert len(proc.stdout.strip().splitlines()) == 9


def test_module_usage_exit_code():
    proc = subprocess.run([sys.executable, "-m", "stabpoly", "optimize"], capture_output=True,
                          text=True, check=False)
    assert proc.returncode == 2
