import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from stabpoly.errors import InvalidParameterError
from stabpoly.optimizer import optimize_h
from stabpoly.polybasis import StabilityPolynomial
from stabpoly.region import eval_poly, max_stable_step, region_grid, verify_feasible
from stabpoly.spectra import (
    Spectrum,
    half_plane_reduce,
    disk_boundary,
    imaginary_interval,
    real_interval,
    upwind_advection,
)

TAYLOR4 = StabilityPolynomial.taylor(4)
EULER = StabilityPolynomial(1, 1, np.array([1.0, 1.0]))


# -- evaluation ---------------------------------------------------------------------


def test_eval_examples():
    assert eval_poly(TAYLOR4, 0.0) == 1.0
    assert eval_poly(EULER, -2.0) == -1.0
    assert eval_poly(TAYLOR4, -1.0) == pytest.approx(0.375, abs=1e-15)


def test_eval_vectorised_matches_scalar(rng):
    z = rng.standard_normal(20) + 1j * rng.standard_normal(20)
    vec = eval_poly(TAYLOR4, z)
    assert vec == pytest.approx([eval_poly(TAYLOR4, complex(w)) for w in z])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=9),
       st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False))
def test_conjugate_symmetry(tail, z):
    poly = StabilityPolynomial(len(tail), 0, np.array([1.0] + tail))
    assert abs(eval_poly(poly, z.conjugate())) == abs(eval_poly(poly, z))


# -- verification ---------------------------------------------------------------------


def test_verify_at_zero_step():
    ok, viol, _ = verify_feasible(TAYLOR4, upwind_advection(20), 0.0)
    assert ok and viol == 0.0


def test_verify_names_violator():
    ok, viol, worst = verify_feasible(EULER, Spectrum([-1.0], False), 3.0)
    assert not ok
    assert viol == pytest.approx(1.0)
    assert worst == -1.0


def test_verify_uses_mirrored_points():
    # a reduced spectrum carries only Im >= 0 but must verify like the full one
    poly = StabilityPolynomial(1, 0, np.array([1.0, 0.5]))
    spec = Spectrum([-1.0 + 3j, -1.0 - 3j, -0.5], True)
    ok_full, v_full, _ = verify_feasible(poly, spec, 1.0)
    ok_red, v_red, _ = verify_feasible(poly, half_plane_reduce(spec), 1.0)
    assert ok_full == ok_red and v_full == pytest.approx(v_red)


# -- maximum stable step ----------------------------------------------------------------


def test_taylor4_real_boundary():
    h = max_stable_step(TAYLOR4, Spectrum([-1.0], False))
    assert h == pytest.approx(oracles.taylor4_real_boundary() * -1, abs=1e-3)
    assert h == pytest.approx(2.7853, abs=1e-3)


def test_taylor4_imaginary_boundary():
    h = max_stable_step(TAYLOR4, Spectrum([1j, -1j], False))
    assert h == pytest.approx(oracles.taylor4_imag_boundary(), abs=1e-3)
    assert h == pytest.approx(2 * math.sqrt(2), abs=1e-3)


def test_taylor4_upwind():
    assert max_stable_step(TAYLOR4, upwind_advection(20, 1.0)) == pytest.approx(1.39, abs=0.01)


def test_forward_euler_disk():
    # |1 + h lambda| <= 1 on the unit disk centred at -1 exactly for h <= 1
    assert max_stable_step(EULER, disk_boundary(64)) == pytest.approx(1.0, rel=1e-5)


def test_sentinels():
    # R = 1 is stable for every step
    const = StabilityPolynomial(1, 0, np.array([1.0, 0.0]))
    assert max_stable_step(const, Spectrum([-1.0], False)) == math.inf
    # |1 + z| > 1 for any small step along +x
    assert max_stable_step(EULER, Spectrum([1.0], False)) == 0.0


@pytest.fixture(scope="module")
def family_polys():
    cases = [
        (real_interval(200), 5, 1, "chebyshev"),
        (imaginary_interval(200), 4, 2, "rotated"),
        (disk_boundary(128), 4, 1, "binomial"),
        (upwind_advection(20, 1.0), 10, 4, "binomial"),
    ]
    out = []
    for spec, s, p, b in cases:
        res = optimize_h(spec, s, p, basis_kind=b)
        out.append((spec, res.polynomial, res.H))
    return out


def test_stable_step_consistency(family_polys):
    for spec, poly, _ in family_polys + [(upwind_advection(20, 1.0), TAYLOR4, None)]:
        h = max_stable_step(poly, spec)
        assert 0 < h < math.inf
        assert verify_feasible(poly, spec, 0.999 * h, tol=1e-12)[0]
        assert not verify_feasible(poly, spec, 1.001 * h, tol=1e-12)[0]


def test_stable_step_covers_optimised_h(family_polys):
    # feasibility is only enforced on the sampled points at H itself; between
    # samples |R| overshoots by the discretisation error, so the scan reaches H
    # once its tolerance covers that overshoot (measured densely here)
    for spec, poly, H in family_polys:
        assert verify_feasible(poly, spec, H, tol=1e-6)[0]
        pts = spec.full_points()
        t = np.linspace(0.0, H, 2001)[:, None]
        overshoot = float(np.max(np.abs(eval_poly(poly, t * pts[None, :])))) - 1
        assert max_stable_step(poly, spec, tol=max(overshoot, 0) + 1e-9) >= H * (1 - 1e-6)


# -- grids and contours -------------------------------------------------------------------


def test_grid_value_at_origin():
    g = region_grid(TAYLOR4, (-5, 1), (-4, 4), 61, 81)
    i = int(np.argmin(np.abs(g.x)))
    j = int(np.argmin(np.abs(g.y)))
    assert g.x[i] == 0 and g.y[j] == 0
    assert g.values[i, j] == 1.0
    assert np.all(g.values >= 0)


def test_euler_contour_is_unit_circle():
    g = region_grid(EULER, (-2.5, 0.5), (-1.5, 1.5), 61, 61)
    spacing = 3.0 / 60
    pts = np.concatenate(g.contour)
    assert len(g.contour) > 20
    assert np.max(np.abs(np.abs(pts + 1) - 1)) <= 2 * spacing


def test_contour_points_on_level_set():
    g = region_grid(TAYLOR4, (-5, 1), (-4, 4), 121, 161)
    pts = np.concatenate(g.contour)
    assert np.max(np.abs(np.abs(eval_poly(TAYLOR4, pts)) - 1)) <= 1e-6


def test_taylor4_contour_crosses_real_axis():
    g = region_grid(TAYLOR4, (-5, 1), (-4, 4), 121, 161)
    pts = np.concatenate(g.contour)
    near_axis = pts[np.abs(pts.imag) < 1e-9]
    assert np.min(np.abs(near_axis.real + 2.7853)) < 1e-3


def test_contour_serialisation():
    g = region_grid(EULER, (-2.5, 0.5), (-1.5, 1.5), 11, 11)
    lines = g.contour_csv().strip().splitlines()
    assert lines[0] == "segment,re,im"
    assert len(lines) == 1 + 2 * len(g.contour)
    d = g.to_dict()
    assert d["schema"] == 1 and len(d["values"]) == 121


@pytest.mark.parametrize("args", [
    ((0, 1), (0, 1), 1, 5),
    ((1, 0), (0, 1), 5, 5),
    ((0, 1), (2, 2), 5, 5),
    ((0, math.inf), (0, 1), 5, 5),
])
def test_grid_validation(args):
    with pytest.raises(InvalidParameterError):
        region_grid(EULER, *args)


def test_effective_step_ratio():
    h4 = max_stable_step(TAYLOR4, upwind_advection(20, 1.0))
    res = optimize_h(upwind_advection(20, 1.0), 10, 4, basis_kind="binomial")
    assert (res.H / 10) / (h4 / 4) >= 1.85
