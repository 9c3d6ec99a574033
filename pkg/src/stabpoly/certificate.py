"""Rigorous-in-exact-arithmetic bound of ``|R|`` over continuous spectrum pieces.

For a piece ``gamma(u) = (A + B u)/(C + D u)`` and a cell ``[u0, u1]`` the
substitution ``u = u0 + (u1 - u0) v`` gives

    (C' + D' v)^s R(gamma(v)) = N(v),

a polynomial of degree ``s`` in ``v``.  Hence ``|R| <= 1 + tol`` on the cell
iff ``g(v) = |N(v)|^2 - (1 + tol)^2 |C' + D' v|^{2s} <= 0`` on ``[0, 1]``, and
``g`` is a real polynomial of degree ``2s``.  Its Bernstein coefficients bound
it from above; cells where the bound is inconclusive are bisected.  ``N`` is
built by running the basis recurrence in truncated power series, so nothing
is ever expanded in monomials about the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .polybasis import recurrence

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class Certificate:
    certified: bool
    violation: Optional[complex]
    max_sampled: float
    cells: int


def _pmul(a, b):
    """Batched product of polynomials stored along the last axis."""
    out = np.zeros(a.shape[:-1] + (a.shape[-1] + b.shape[-1] - 1,), dtype=np.result_type(a, b))
    for k in range(b.shape[-1]):
        out[..., k : k + a.shape[-1]] += a * b[..., k : k + 1]
    return out


def _pad(a, n):
    if a.shape[-1] >= n:
        return a
    return np.concatenate([a, np.zeros(a.shape[:-1] + (n - a.shape[-1],), dtype=a.dtype)], axis=-1)


def restricted_numerator(basis, a, A, B, C, D):
    """Coefficients of ``N(v) = (C + D v)^s sum_j a_j Q_j((A + B v)/(C + D v))``."""
    s = basis.degree
    E = np.stack([C, D], axis=-1).astype(complex)
    Z = np.stack([A, B], axis=-1).astype(complex)
    (a1, b1), (al, be, ga) = recurrence(basis)
    K = E.shape[0]
    epow = [np.ones((K, 1), dtype=complex)]
    for _ in range(s):
        epow.append(_pmul(epow[-1], E))
    N = a[0] * epow[s]
    if s == 0:
        return N
    q_prev = np.ones((K, 1), dtype=complex)
    q = a1 * E + b1 * Z
    N = N + a[1] * _pmul(q, epow[s - 1])
    L = al * E + be * Z
    E2 = _pmul(E, E)
    for j in range(1, s):
        nxt = _pmul(L, q)
        if ga != 0:
            nxt = nxt + ga * _pad(_pmul(E2, q_prev), nxt.shape[-1])
        q_prev, q = q, nxt
        N = N + a[j + 1] * _pmul(q, epow[s - j - 1])
    return N


def _bernstein_matrix(d):
    M = np.zeros((d + 1, d + 1))
    for k in range(d + 1):
        for j in range(k + 1):
            M[k, j] = math.comb(k, j) / math.comb(d, j)
    return M


def _cell_polys(basis, a, piece, lo, hi, tol):
    w = hi - lo
    A = piece.A + piece.B * lo
    B = piece.B * w
    C = piece.C + piece.D * lo
    D = piece.D * w * np.ones_like(lo)
    N = restricted_numerator(basis, a, A, B, C, D)
    mod2 = _pmul(N, N.conj()).real
    E = np.stack([C, D], axis=-1).astype(complex)
    e2 = _pmul(E, E.conj()).real
    den = np.ones((len(lo), 1))
    for _ in range(basis.degree):
        den = _pmul(den, e2)
    return mod2 - (1.0 + tol) ** 2 * den


def certify(basis, a, pieces, h, tol=DEFAULT_TOL, init_cells=64, max_cells=1 << 17):
    """Decide whether ``|sum_j a_j Q_j(h gamma)| <= 1 + tol`` on every piece.

    Returns a :class:`Certificate`.  ``violation`` is a point ``h gamma(u)``
    where the bound is exceeded, if one was met while subdividing; when the
    cell budget runs out without a decision both ``certified`` is false and
    ``violation`` is ``None``.  The bound is exact up to floating-point
    rounding in the coefficient arithmetic, which is far below ``tol`` for the
    degrees and scales handled here.
    """
    a = np.asarray(a, dtype=float)
    d = 2 * basis.degree
    M = _bernstein_matrix(d)
    mid_w = 0.5 ** np.arange(d + 1)
    used = 0
    worst = -math.inf
    for piece in pieces:
        piece = piece.scaled(h)
        edges = np.linspace(piece.u0, piece.u1, init_cells + 1)
        lo, hi = edges[:-1], edges[1:]
        while lo.size:
            used += lo.size
            g = _cell_polys(basis, a, piece, lo, hi, tol)
            samples = np.stack([g[:, 0], g.sum(axis=1), g @ mid_w], axis=1)
            worst = max(worst, float(samples.max()))
            bad = np.nonzero(samples.max(axis=1) > 0)[0]
            if bad.size:
                k = bad[0]
                which = int(np.argmax(samples[k]))
                u = lo[k] + (hi[k] - lo[k]) * (0.0, 1.0, 0.5)[which]
                return Certificate(False, complex(piece(u)), _excess(worst, tol), used)
            open_cells = (g @ M.T).max(axis=1) > 0
            if not np.any(open_cells):
                break
            if used > max_cells:
                return Certificate(False, None, _excess(worst, tol), used)
            lo, hi = lo[open_cells], hi[open_cells]
            mid = 0.5 * (lo + hi)
            lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    return Certificate(True, None, _excess(worst, tol), used)


def _excess(worst, tol):
    """Translate the largest sampled ``g`` back to ``max |R|`` (approximately)."""
    if not math.isfinite(worst):
        return math.nan
    return math.sqrt(max(worst + (1.0 + tol) ** 2, 0.0))
