"""Independent reference computations used by several test modules."""

import math

import numpy as np
import pytest
from numpy.polynomial import Chebyshev, Polynomial
from numpy.polynomial.chebyshev import chebvander


def chebyshev_rows(points, s, hx):
    """Values and monomial coefficients of T_j(1 + 2z/|hx|), straight from numpy.polynomial."""
    w = 1.0 + 2.0 * np.asarray(points, dtype=complex) / abs(hx)
    V = chebvander(w, s)
    B = np.zeros((s + 1, s + 1))
    for j in range(s + 1):
        coef = Chebyshev.basis(j, domain=[-abs(hx), 0.0]).convert(kind=Polynomial).coef
        B[j, : len(coef)] = coef
    return V, B


def least_deviation(points, s, p, rows=None):
    """min max_k |R(z_k)| - 1 subject to the order conditions, via cvxpy/Clarabel.

    ``rows = (V, B)`` supplies basis values ``V[k, j] = Q_j(z_k)`` and the
    monomial coefficients ``B[j, k]`` of each ``Q_j``; the default is the
    monomial basis.  Returns ``(r, monomial coefficients)``.
    """
    cp = pytest.importorskip("cvxpy")
    pts = np.asarray(points, dtype=complex)
    if rows is None:
        V, B = np.vander(pts, s + 1, increasing=True), np.eye(s + 1)
    else:
        V, B = rows
    a = cp.Variable(s + 1)
    t = cp.Variable()
    target = np.array([1.0 / math.factorial(j) for j in range(p + 1)])
    cons = [(B.T @ a)[: p + 1] == target,
            cp.SOC(t * np.ones(len(pts)), cp.vstack([V.real @ a, V.imag @ a]), axis=0)]
    prob = cp.Problem(cp.Minimize(t), cons)
    prob.solve(solver="CLARABEL")
    return float(prob.value) - 1.0, B.T @ a.value


def taylor4_real_boundary():
    """Negative x closest to 0 with |R(x)| = 1 for the degree-4 Taylor polynomial, by root scan."""
    R = Polynomial([1, 1, 1 / 2, 1 / 6, 1 / 24])
    roots = np.concatenate([(R - 1).roots(), (R + 1).roots()])
    real = [r.real for r in roots if abs(r.imag) < 1e-9 and r.real < -1e-9]
    return max(real)


def taylor4_imag_boundary():
    """Smallest y > 0 with |R(iy)| = 1 for the degree-4 Taylor polynomial."""
    c = np.array([1, 1, 1 / 2, 1 / 6, 1 / 24])
    re = Polynomial([c[0], 0, -c[2], 0, c[4]])
    im = Polynomial([0, c[1], 0, -c[3]])
    coef = (re * re + im * im - 1).coef
    # |R(iy)|^2 - 1 has a multiple root at y = 0; divide it out before root finding
    coef[np.abs(coef) < 1e-14] = 0.0
    first = int(np.nonzero(coef)[0][0])
    roots = Polynomial(coef[first:]).roots()
    pos = sorted(r.real for r in roots if abs(r.imag) < 1e-9 and r.real > 0)
    return pos[0]
