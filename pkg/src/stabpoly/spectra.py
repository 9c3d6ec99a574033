"""Spectrum generators, file ingestion and point-set preprocessing.

Every generator returns points in nondimensional form; the step size ``h``
is applied downstream.  Curve families are sampled equispaced in their
natural parameter (angle or arc length).  With ``nested=True`` the sample at
``2n`` contains the sample at ``n`` exactly, as the refinement loop of the
semi-infinite bisection requires.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import FormatError, InvalidInputError, InvalidParameterError, InvalidStateError

CONJ_TOL = 1e-12
LHP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Spectrum:
    """A finite point set in the complex plane.

    ``half_plane_reduced`` means only points with ``Im >= 0`` are stored and
    their conjugates are implied.  ``nu`` is the largest distance from a point
    of the underlying continuous set to the sample, when the generator knows it.
    """

    points: np.ndarray
    closed_under_conjugation: bool
    meta: str = ""
    nu: Optional[float] = None
    half_plane_reduced: bool = False
    status: str = "ok"

    def __post_init__(self):
        pts = np.array(self.points, dtype=complex).ravel()
        if pts.size == 0:
            raise InvalidInputError("spectrum must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise InvalidInputError("spectrum contains NaN or infinite entries")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size

    @property
    def max_abs(self):
        return float(np.max(np.abs(self.points)))

    def full_points(self):
        """All points, with implied conjugates materialised."""
        if not self.half_plane_reduced:
            return self.points
        upper = self.points[self.points.imag > 0]
        return np.concatenate([self.points, np.conj(upper)])


def _check_int(name, value, minimum):
    if int(value) != value or value < minimum:
        raise InvalidParameterError(f"{name} must be an integer >= {minimum}, got {value}")
    return int(value)


def is_conjugate_closed(points, tol=CONJ_TOL):
    """True when every point has its conjugate in the set within ``tol``."""
    pts = np.asarray(points, dtype=complex)
    if pts.size == 0:
        return True
    order = np.lexsort((pts.imag, pts.real))
    srt = pts[order]
    conj = np.conj(pts)
    # nearest-neighbour search through real-part sorting keeps this O(n log n)
    idx = np.searchsorted(srt.real, conj.real - tol, side="left")
    for c, i in zip(conj, idx):
        found = False
        while i < srt.size and srt[i].real <= c.real + tol:
            if abs(srt[i] - c) <= tol:
                found = True
                break
            i += 1
        if not found:
            return False
    return True


def _mirror(upper):
    """Symmetric set from points with ``Im >= 0``; exact conjugates."""
    upper = np.asarray(upper, dtype=complex)
    lower = np.conj(upper[upper.imag > 0])
    return np.concatenate([upper, lower])


def _snap(z, tol=1e-15):
    z = np.asarray(z, dtype=complex)
    re = np.where(np.abs(z.real) < tol, 0.0, z.real)
    im = np.where(np.abs(z.imag) < tol, 0.0, z.imag)
    return re + 1j * im


def real_interval(n, nested=False):
    """Equispaced points on ``[-1, 0]``.

    Plain mode returns ``n`` points with both endpoints.  Nested mode treats
    ``n`` as the number of subintervals and returns the ``n + 1`` points
    ``-k/n`` so that doubling ``n`` keeps every old point.
    """
    if nested:
        n = _check_int("n", n, 1)
        pts = -np.arange(n + 1) / n
        nu = 1.0 / (2 * n)
    else:
        n = _check_int("n", n, 2)
        pts = np.linspace(-1.0, 0.0, n)
        nu = 1.0 / (2 * (n - 1))
    return Spectrum(pts.astype(complex), True, f"real_interval(n={n})", nu)


def imaginary_interval(n, nested=False):
    """Equispaced points on the segment ``[0, i]``; conjugates are implied."""
    if nested:
        n = _check_int("n", n, 1)
        t = np.arange(n + 1) / n
        nu = 1.0 / (2 * n)
    else:
        n = _check_int("n", n, 2)
        t = np.linspace(0.0, 1.0, n)
        nu = 1.0 / (2 * (n - 1))
    return Spectrum(1j * t, True, f"imaginary_interval(n={n})", nu, half_plane_reduced=True)


def _circle(center, radius, q):
    """``q`` points at angles ``2 pi k / q`` on a circle, conjugate-exact."""
    k = np.arange(q // 2 + 1)
    theta = 2 * np.pi * k / q
    upper = _snap(np.cos(theta) + 1j * np.sin(theta))
    return center + radius * _mirror(upper)


def disk_boundary(n, nested=False):
    """``n`` angle-equispaced points on ``|1 + z| = 1`` (contains ``0``).

    Doubling ``n`` is always nested, so ``nested`` only exists for a uniform
    generator signature.  ``-2`` is a sample when ``n`` is even.
    """
    n = _check_int("n", n, 3)
    # angle 0 maps to z = 0
    pts = _circle(-1.0, 1.0, n)
    return Spectrum(pts, True, f"disk_boundary(n={n})", 2 * math.sin(math.pi / (2 * n)))


def gap_spectrum(alpha, n=512, nested=False, closed=False):
    """Left unit semicircle plus the unit circle centred at ``-alpha``.

    Half of the points go to each piece.  Both pieces are built from their
    upper halves and mirrored so the set is exactly conjugate-closed.  With
    ``closed=True`` the segment ``[-i, i]`` is sampled as well, so the first
    piece becomes the boundary of the closed left half-disk.
    """
    alpha = float(alpha)
    if not alpha > 0 or not math.isfinite(alpha):
        raise InvalidParameterError(f"alpha must be positive, got {alpha}")
    n = _check_int("n", n, 8)
    half = n // 2
    # plain mode: `half` points incl. both ends; nested: `half` subintervals
    m = half if nested else half - 1
    k = np.arange(m // 2 + 1)
    theta = np.pi / 2 + np.pi * k / m
    semi = _mirror(_snap(np.cos(theta) + 1j * np.sin(theta)))
    circ = _circle(-alpha, 1.0, half)
    pts = np.concatenate([semi, circ])
    nu = max(2 * math.sin(math.pi / (4 * m)), 2 * math.sin(math.pi / (2 * half)))
    if closed:
        # interior samples of [0, i) with spacing matching the arc; i is on the arc
        q = m if nested else max(half - 1, 1)
        seg = _mirror(1j * np.arange(q) / q)
        pts = np.concatenate([pts, seg])
        nu = max(nu, 1.0 / (2 * q))
    status = "ok" if alpha >= 1 else "warning: points in the right half-plane"
    meta = f"gap_spectrum(alpha={alpha}, n={n}{', closed' if closed else ''})"
    return Spectrum(pts, True, meta, nu, status=status)


def _edge_counts(lengths, n, perimeter, nested):
    counts = []
    for length, vertical in lengths:
        c = max(1, math.ceil(length * n / perimeter - 1e-12))
        if nested:
            c = 1 << (c - 1).bit_length()
        if vertical and c % 2:
            c += 1
        counts.append(c)
    return counts


def rectangle(beta, kappa, n=512, nested=False):
    """Boundary of ``[-kappa, 0] x [-beta, beta]``.

    Spacing is at most ``perimeter / n``; the four corners and the edge
    midpoints ``0`` and ``-kappa`` are always included.  ``beta = 0``
    degenerates to ``kappa`` times :func:`real_interval`.
    """
    beta = float(beta)
    kappa = float(kappa)
    if not (beta >= 0 and math.isfinite(beta)):
        raise InvalidParameterError(f"beta must be >= 0, got {beta}")
    if not (kappa > 0 and math.isfinite(kappa)):
        raise InvalidParameterError(f"kappa must be > 0, got {kappa}")
    n = _check_int("n", n, 8)
    meta = f"rectangle(beta={beta}, kappa={kappa}, n={n})"
    if beta == 0:
        base = real_interval(n, nested=nested)
        return Spectrum(kappa * base.points, True, meta, kappa * base.nu)

    perimeter = 4 * beta + 2 * kappa
    m_v, m_h = _edge_counts([(2 * beta, True), (kappa, False)], n, perimeter, nested)
    # upper half: right edge 0 -> i beta, top edge, left edge i beta -> -kappa
    jv = np.arange(m_v // 2 + 1)
    right = 1j * beta * (2 * jv) / m_v
    jh = np.arange(1, m_h + 1)
    top = -kappa * jh / m_h + 1j * beta
    left = -kappa + 1j * beta * (2 * np.arange(m_v // 2 - 1, -1, -1)) / m_v
    upper = np.concatenate([right, top, left])
    pts = _mirror(upper)
    nu = max(beta / m_v, kappa / (2 * m_h))
    return Spectrum(pts, True, meta, nu)


def upwind_advection(N, dx=1.0):
    """Eigenvalues ``(exp(-2 pi i k / N) - 1) / dx`` of periodic first-order upwinding."""
    N = _check_int("N", N, 2)
    dx = float(dx)
    if not (dx > 0 and math.isfinite(dx)):
        raise InvalidParameterError(f"dx must be positive, got {dx}")
    pts = _circle(-1.0, 1.0, N) / dx
    # exact zero for the constant mode
    pts[0] = 0.0
    return Spectrum(pts, True, f"upwind_advection(N={N}, dx={dx})", 0.0)


def _finalize_loaded(pts, source):
    if pts.size == 0:
        raise InvalidInputError(f"{source}: no points")
    closed = is_conjugate_closed(pts)
    status = "ok"
    if np.any(pts.real > LHP_TOL):
        status = "warning: points in the right half-plane"
        warnings.warn(f"{source}: spectrum has points with positive real part", stacklevel=3)
    return Spectrum(pts, closed, f"file:{source}", None, status=status)


def _parse_float(text, line):
    try:
        v = float(text)
    except ValueError as exc:
        raise FormatError(f"cannot parse {text.strip()!r} as a number", line) from exc
    if not math.isfinite(v):
        raise FormatError(f"non-finite value {text.strip()!r}", line)
    return v


def parse_csv(text, source="<csv>"):
    rows = []
    for lineno, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row or all(not c.strip() for c in row) or row[0].lstrip().startswith("#"):
            continue
        if len(row) != 2:
            raise FormatError(f"expected 2 columns (re,im), got {len(row)}", lineno)
        if not rows and lineno == 1:
            try:
                float(row[0])
            except ValueError:
                continue  # header
        rows.append(complex(_parse_float(row[0], lineno), _parse_float(row[1], lineno)))
    return _finalize_loaded(np.array(rows, dtype=complex), source)


def parse_json(text, source="<json>"):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(exc.msg, exc.lineno) from exc
    if isinstance(data, dict) and "points" in data:
        data = data["points"]
    if not isinstance(data, list):
        raise FormatError("expected a JSON array of [re, im] pairs", 1)
    pts = []
    for i, item in enumerate(data):
        if not isinstance(item, (list, tuple)) or len(item) != 2:
            raise FormatError(f"entry {i} is not an [re, im] pair", 1)
        try:
            re, im = (float(v) for v in item)
        except (TypeError, ValueError) as exc:
            raise FormatError(f"entry {i}: {exc}", 1) from exc
        if not (math.isfinite(re) and math.isfinite(im)):
            raise FormatError(f"entry {i} is not finite", 1)
        pts.append(complex(re, im))
    return _finalize_loaded(np.array(pts, dtype=complex), source)


def load_spectrum(path, fmt=None):
    """Read a spectrum from a CSV (``re,im`` rows) or JSON (``[[re, im], ...]``) file."""
    path = Path(path)
    if fmt is None:
        fmt = "json" if path.suffix.lower() == ".json" else "csv"
    if fmt not in ("csv", "json"):
        raise InvalidParameterError(f"unknown spectrum format {fmt!r}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    if not text.strip():
        raise InvalidInputError(f"{path}: empty file")
    parse = parse_json if fmt == "json" else parse_csv
    return parse(text, str(path))


def write_spectrum(spec, path=None, fmt="csv"):
    """Serialise the full (conjugate-expanded) point set; returns the text."""
    pts = spec.full_points()
    if fmt == "json":
        text = json.dumps([[float(z.real), float(z.imag)] for z in pts]) + "\n"
    elif fmt == "csv":
        buf = io.StringIO()
        buf.write("re,im\n")
        for z in pts:
            buf.write(f"{float(z.real)!r},{float(z.imag)!r}\n")
        text = buf.getvalue()
    else:
        raise InvalidParameterError(f"unknown spectrum format {fmt!r}")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _cross(o, a, b):
    return (a.real - o.real) * (b.imag - o.imag) - (a.imag - o.imag) * (b.real - o.real)


def hull_vertices(points):
    """Counterclockwise convex hull vertices (monotone chain, collinear dropped)."""
    pts = sorted(set((float(z.real), float(z.imag)) for z in np.asarray(points, dtype=complex)))
    pts = [complex(x, y) for x, y in pts]
    if len(pts) <= 2:
        return pts
    lower = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper = []
    for p in reversed(pts):
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    return hull if len(hull) >= 2 else hull[:1]


def convex_hull(spec):
    """Spectrum made of the convex hull vertices of ``spec`` (full point set)."""
    verts = np.array(hull_vertices(spec.full_points()), dtype=complex)
    return Spectrum(
        verts,
        is_conjugate_closed(verts),
        f"convex_hull({spec.meta})",
        None,
        status=spec.status,
    )


def hull_boundary(spec, n):
    """About ``n`` points along the convex hull perimeter, vertices included.

    Stability on the hull boundary implies stability inside it (maximum
    modulus), which the vertices alone do not give.  Edges get points in
    proportion to their length; conjugate-closed input stays closed.
    """
    _check_int("n", n, 3)
    verts = np.array(hull_vertices(spec.full_points()), dtype=complex)
    if len(verts) < 2:
        return convex_hull(spec)
    nxt = np.roll(verts, -1)
    lengths = np.abs(nxt - verts)
    if len(verts) == 2:
        lengths[1] = 0.0  # a segment, not a two-edge loop
    per = lengths / lengths.sum() * n
    pts = [verts]
    for a, b, m in zip(verts, nxt, per):
        k = int(math.ceil(m))
        if k > 1:
            pts.append(a + (b - a) * (np.arange(1, k) / k))
    z = np.concatenate(pts)
    closed = spec.closed_under_conjugation or is_conjugate_closed(verts)
    if closed:
        up = z[z.imag >= 0]
        z = np.concatenate([up, np.conj(up[up.imag > 0])])
    return Spectrum(z, closed, f"hull_boundary({spec.meta}, n={n})", None, status=spec.status)


def half_plane_reduce(spec):
    """Keep only ``Im >= 0``; conjugates become implied."""
    if spec.half_plane_reduced:
        return spec
    if not spec.closed_under_conjugation:
        raise InvalidStateError("half_plane_reduce needs a conjugate-closed spectrum")
    keep = spec.points[spec.points.imag >= 0]
    return replace(spec, points=keep, half_plane_reduced=True)


# -- families for the semi-infinite bisection --------------------------------


@dataclass(frozen=True)
class Piece:
    """Curve ``gamma(u) = (A + B u) / (C + D u)`` for real ``u`` in ``[u0, u1]``.

    Möbius images of an interval are segments and circular arcs, which is all
    the built-in continuous spectra need.  Restricting a polynomial to such a
    piece gives a rational function of ``u`` with an explicit denominator,
    which is what the stability certificate works with.
    """

    A: complex
    B: complex
    C: complex
    D: complex
    u0: float
    u1: float

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        return (self.A + self.B * u) / (self.C + self.D * u)

    def scaled(self, h):
        return replace(self, A=h * self.A, B=h * self.B)


def segment(a, b):
    """Straight piece from ``a`` to ``b``."""
    a = complex(a)
    b = complex(b)
    return Piece(a, b - a, 1.0, 0.0, 0.0, 1.0)


def arc(center, radius, theta0, theta1):
    """Counter-clockwise arc of angular span below ``2 pi``."""
    span = theta1 - theta0
    if not 0 < span < 2 * math.pi:
        raise InvalidParameterError(f"arc span must lie in (0, 2 pi), got {span}")
    c = complex(center)
    w = radius * complex(math.cos((theta0 + theta1) / 2), math.sin((theta0 + theta1) / 2))
    # (1 + iu)/(1 - iu) = exp(2i atan u)
    umax = math.tan(span / 4)
    return Piece(c + w, 1j * (w - c), 1.0, -1j, -umax, umax)


@dataclass(frozen=True)
class SpectrumFamily:
    """A continuous conjugate-closed spectrum with nested discretisations.

    ``sample(n)`` must satisfy ``sample(n) ⊂ sample(2n)`` and carry ``nu``.
    ``pieces`` cover the closed upper half of the continuous set; the lower
    half follows by conjugation, which real-coefficient polynomials respect.
    """

    name: str
    sample: Callable[[int], Spectrum]
    pieces: tuple


def family(name, **params):
    """Built-in nested families: ``real``, ``imaginary``, ``disk``, ``gap``, ``rectangle``."""
    if name == "real":
        return SpectrumFamily("real", lambda n: real_interval(n, nested=True),
                              (segment(-1.0, 0.0),))
    if name == "imaginary":
        return SpectrumFamily("imaginary", lambda n: imaginary_interval(n, nested=True),
                              (segment(0.0, 1j),))
    if name == "disk":
        return SpectrumFamily("disk", lambda n: disk_boundary(n, nested=True),
                              (arc(-1.0, 1.0, 0.0, math.pi),))
    if name == "gap":
        alpha = float(params.get("alpha", 20.0))
        closed = bool(params.get("closed", True))
        pieces = (arc(0.0, 1.0, math.pi / 2, math.pi), arc(-alpha, 1.0, 0.0, math.pi))
        if closed:
            pieces += (segment(0.0, 1j),)
        return SpectrumFamily(
            "gap", lambda n: gap_spectrum(alpha, max(n, 8), nested=True, closed=closed), pieces)
    if name == "rectangle":
        beta = float(params["beta"])
        kappa = float(params["kappa"])
        if beta == 0:
            pieces = (segment(-kappa, 0.0),)
        else:
            pieces = (segment(0.0, 1j * beta), segment(1j * beta, -kappa + 1j * beta),
                      segment(-kappa + 1j * beta, -kappa))
        return SpectrumFamily("rectangle",
                              lambda n: rectangle(beta, kappa, max(n, 8), nested=True), pieces)
    raise InvalidParameterError(f"unknown spectrum family {name!r}")


BUILTINS = {
    "real": lambda n=400, **_: real_interval(n),
    "imaginary": lambda n=400, **_: imaginary_interval(n),
    "disk": lambda n=256, **_: disk_boundary(n),
    "gap": lambda n=512, alpha=20.0, closed=True, **_: gap_spectrum(alpha, n, closed=closed),
    "rectangle": lambda n=512, beta=1.0, kappa=1.0, **_: rectangle(beta, kappa, n),
    "upwind": lambda N=20, dx=1.0, **_: upwind_advection(N, dx),
}


def builtin(name, **params):
    """Build one of the named spectra with keyword overrides."""
    try:
        maker = BUILTINS[name]
    except KeyError:
        raise InvalidParameterError(
            f"unknown builtin spectrum {name!r}; choose from {sorted(BUILTINS)}"
        ) from None
    return maker(**{k: v for k, v in params.items() if v is not None})
