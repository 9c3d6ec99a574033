"""Stability regions of fixed polynomials: grids, contours, step limits."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .polybasis import horner

SCAN_FACTOR = 1.01
STABLE_TOL = 1e-12


def eval_poly(poly, z):
    """``R(z)`` by Horner's rule; scalar in, scalar out."""
    out = horner(poly.monomial_coeffs, z)
    return complex(out) if np.ndim(out) == 0 else out


def _deriv(poly, z):
    return horner(poly.derivative_coeffs(), z)


@dataclass(frozen=True, eq=False)
class RegionGrid:
    """``values[i, j] = |R(x_i + i y_j)|`` on a regular grid, plus the ``|R| = 1`` contour.

    ``contour`` holds two-point segments ``[z_a, z_b]`` from marching squares.
    """

    re_range: tuple
    im_range: tuple
    nx: int
    ny: int
    values: np.ndarray = field(repr=False)
    contour: list = field(repr=False)

    @property
    def x(self):
        return np.linspace(self.re_range[0], self.re_range[1], self.nx)

    @property
    def y(self):
        return np.linspace(self.im_range[0], self.im_range[1], self.ny)

    def to_dict(self):
        return {
            "schema": 1,
            "re_range": list(self.re_range),
            "im_range": list(self.im_range),
            "nx": self.nx,
            "ny": self.ny,
            # row-major over (re index, im index)
            "values": [float(v) for v in self.values.ravel()],
        }

    def to_json(self):
        return json.dumps(self.to_dict())

    def contour_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["segment", "re", "im"])
        for k, seg in enumerate(self.contour):
            for z in seg:
                w.writerow([k, repr(float(z.real)), repr(float(z.imag))])
        return buf.getvalue()


NEWTON_STEPS = 4


def _refine(poly, za, zb, t):
    """Newton steps for ``|R|^2 = 1`` along the edges ``za + t (zb - za)``.

    The first step already gives plot accuracy; the extra steps only matter
    where the level set runs nearly parallel to an edge.
    """
    d = zb - za
    for _ in range(NEWTON_STEPS):
        z = za + t * d
        r = horner(poly.monomial_coeffs, z)
        phi = np.abs(r) ** 2 - 1.0
        if np.all(np.abs(phi) <= 1e-12):
            break
        dphi = 2.0 * np.real(np.conj(r) * _deriv(poly, z) * d)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dphi != 0, phi / dphi, 0.0)
        t = np.clip(t - step, 0.0, 1.0)
    return za + t * d


def _edge_points(poly, f, za, zb, fa, fb):
    """Crossing points on edges with a sign change (NaN elsewhere)."""
    cross = (fa <= 0) != (fb <= 0)
    out = np.full(za.shape, np.nan + 0j)
    if np.any(cross):
        t = fa[cross] / (fa[cross] - fb[cross])
        out[cross] = _refine(poly, za[cross], zb[cross], t)
    return out


def region_grid(poly, re_range, im_range, nx, ny):
    """Evaluate ``|R|`` on a grid and extract the unit level set."""
    nx = int(nx)
    ny = int(ny)
    if nx < 2 or ny < 2:
        raise InvalidParameterError(f"grid needs nx, ny >= 2, got {nx}x{ny}")
    x0, x1 = map(float, re_range)
    y0, y1 = map(float, im_range)
    if not (x1 > x0 and y1 > y0) or not all(map(math.isfinite, (x0, x1, y0, y1))):
        raise InvalidParameterError(f"degenerate ranges {re_range} x {im_range}")
    x = np.linspace(x0, x1, nx)
    y = np.linspace(y0, y1, ny)
    Z = x[:, None] + 1j * y[None, :]
    values = np.abs(horner(poly.monomial_coeffs, Z))
    f = values - 1.0

    # crossings on edges along x (index i -> i+1) and along y (j -> j+1)
    ex = _edge_points(poly, f, Z[:-1, :], Z[1:, :], f[:-1, :], f[1:, :])
    ey = _edge_points(poly, f, Z[:, :-1], Z[:, 1:], f[:, :-1], f[:, 1:])

    contour = []
    inside = f <= 0
    code = (inside[:-1, :-1].astype(int) | inside[1:, :-1] << 1
            | inside[1:, 1:] << 2 | inside[:-1, 1:] << 3)
    for i, j in zip(*np.nonzero((code != 0) & (code != 15))):
        # edges in cyclic order: bottom, right, top, left
        pts = [ex[i, j], ey[i + 1, j], ex[i, j + 1], ey[i, j]]
        hits = [p for p in pts if not np.isnan(p.real)]
        if len(hits) == 2:
            contour.append(np.array(hits))
        elif len(hits) == 4:
            centre = abs(horner(poly.monomial_coeffs, Z[i, j] + 0.5 * (Z[i + 1, j + 1] - Z[i, j])))
            # pair the crossings so that the centre's side stays connected
            if (centre <= 1.0) == bool(inside[i, j]):
                contour += [np.array([pts[0], pts[1]]), np.array([pts[2], pts[3]])]
            else:
                contour += [np.array([pts[3], pts[0]]), np.array([pts[1], pts[2]])]
    return RegionGrid((x0, x1), (y0, y1), nx, ny, values, contour)


def _points(spectrum):
    pts = np.asarray(spectrum.points, dtype=complex)
    if getattr(spectrum, "half_plane_reduced", False):
        pts = np.concatenate([pts, np.conj(pts[pts.imag > 0])])
    return pts


def verify_feasible(poly, spectrum, h, tol=1e-6):
    """``(ok, max |R(h lambda)| - 1, worst lambda)``."""
    pts = _points(spectrum)
    mod = np.abs(horner(poly.monomial_coeffs, float(h) * pts))
    k = int(np.argmax(mod))
    viol = float(mod[k] - 1.0)
    return viol <= tol, viol, complex(pts[k])


def max_stable_step(poly, spectrum, factor=SCAN_FACTOR, rtol=1e-6, tol=STABLE_TOL):
    """Largest ``h`` with ``|R(t lambda)| <= 1 + tol`` for all ``t <= h`` on the scan.

    A geometric scan with ratio ``factor`` from ``1e-12 * scale`` to
    ``1e6 * scale`` (``scale = 2 s^2 / max|lambda|``) brackets the first
    violation, then bisection refines it to relative ``rtol``.  Returns 0 if
    the first scan point already fails and ``inf`` if no violation is found.
    """
    pts = _points(spectrum)
    m = float(np.max(np.abs(pts)))
    if m == 0:
        return math.inf
    scale = 2.0 * poly.stages ** 2 / m
    coeffs = poly.monomial_coeffs

    def stable(h):
        return bool(np.all(np.abs(horner(coeffs, h * pts)) <= 1.0 + tol))

    h_lo = 1e-12 * scale
    if not stable(h_lo):
        return 0.0
    nsteps = int(math.ceil(math.log(1e18) / math.log(factor)))
    hs = h_lo * factor ** np.arange(1, nsteps + 1)
    bad = None
    # chunks keep memory bounded for large spectra
    chunk = max(1, 200000 // max(len(pts), 1))
    for start in range(0, nsteps, chunk):
        block = hs[start : start + chunk]
        mod = np.abs(horner(coeffs, block[:, None] * pts[None, :]))
        viol = np.nonzero(np.any(mod > 1.0 + tol, axis=1))[0]
        if viol.size:
            bad = start + int(viol[0])
            break
    if bad is None:
        return math.inf
    lo = h_lo if bad == 0 else hs[bad - 1]
    hi = hs[bad]
    while hi - lo > rtol * lo:
        mid = 0.5 * (lo + hi)
        if stable(mid):
            lo = mid
        else:
            hi = mid
    return float(lo)
