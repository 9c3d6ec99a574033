import math

import numpy as np
import pytest

from stabpoly.certificate import certify, restricted_numerator
from stabpoly.polybasis import KINDS, eval_basis, make_basis
from stabpoly.spectra import arc, family, segment


def chebyshev_t(s, h):
    basis = make_basis("shifted-chebyshev", s, -h)
    a = np.zeros(s + 1)
    a[s] = 1.0
    return basis, a


def test_chebyshev_certified_up_to_its_interval():
    basis, a = chebyshev_t(5, 50.0)
    pieces = family("real").pieces
    assert certify(basis, a, pieces, 50.0).certified
    # same polynomial, longer interval: T_5 leaves [-1, 1] past the end
    out = certify(basis, a, pieces, 50.01)
    assert not out.certified
    assert out.violation is not None
    z = 50.01 * out.violation
    assert abs(eval_basis(basis, z) @ a) > 1 + 1e-9


def test_binomial_disk():
    h = 4.0
    basis = make_basis("binomial", 4, h)
    a = np.array([0, 0, 0, 0, 1.0])
    pieces = family("disk").pieces
    assert certify(basis, a, pieces, 4.0).certified
    assert not certify(basis, a, pieces, 4.01).certified


@pytest.mark.parametrize("kind", KINDS)
def test_numerator_identity(kind, rng):
    s = 6
    basis = make_basis(kind, s, -3.0 if "shifted" in kind else 3.0)
    a = rng.standard_normal(s + 1)
    A, B, C, D = (rng.standard_normal(3) + 1j * rng.standard_normal(3) for _ in range(4))
    N = restricted_numerator(basis, a, A, B, C, D)
    v = 0.37
    for k in range(3):
        E = C[k] + D[k] * v
        want = E**s * (eval_basis(basis, (A[k] + B[k] * v) / E) @ a)
        got = np.polynomial.polynomial.polyval(v, N[k])
        assert got == pytest.approx(want, rel=1e-10)


def test_pieces_parameterise_their_curves():
    seg = segment(-2.0, 1j)
    assert seg(seg.u0) == pytest.approx(-2.0)
    assert seg(seg.u1) == pytest.approx(1j)
    c = arc(-1.0, 1.0, 0.0, math.pi)
    u = np.linspace(c.u0, c.u1, 41)
    z = c(u)
    assert np.abs(z + 1) == pytest.approx(np.ones_like(u))
    assert z[0] == pytest.approx(0.0, abs=1e-15) and z[-1] == pytest.approx(-2.0)
    assert np.all(np.diff(np.angle(z + 1)) > 0)


@pytest.mark.parametrize("seed", range(10))
def test_agrees_with_dense_sampling(seed):
    rng = np.random.default_rng(seed)
    s = 4
    h = 3.0
    basis = make_basis("binomial", s, h)
    z = h * family("disk").sample(20000).full_points()
    a = rng.standard_normal(s + 1)
    # put the maximum of |R| within half a percent of 1, on either side
    a *= rng.uniform(0.995, 1.005) / np.max(np.abs(eval_basis(basis, z) @ a))
    out = certify(basis, a, family("disk").pieces, h)
    dense = np.max(np.abs(eval_basis(basis, z) @ a))
    if out.certified:
        assert dense <= 1 + 1e-9
    else:
        assert out.violation is not None
        assert abs(eval_basis(basis, h * out.violation) @ a) > 1 + 1e-9


def test_budget_exhaustion_is_not_a_certificate():
    # |R| touches 1 + tol tangentially inside the cells, so no decision is possible
    basis, a = chebyshev_t(5, 50.0)
    out = certify(basis, a, family("real").pieces, 50.0, tol=0.0, max_cells=64)
    assert not out.certified
