"""Step-size optimization: bisection on ``h`` over the least-deviation solve.

``optimize_h`` is plain bisection on a fixed sample of the spectrum.
``optimize_h_sip`` treats the spectrum as a continuous set given by a
:class:`~stabpoly.spectra.SpectrumFamily` and accepts a step only with a
certificate that the polynomial is stable on the whole set, refining the
sample when neither acceptance nor rejection can be justified.
``max_kappa`` bisects on the depth of a rectangle at fixed ``h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .certificate import DEFAULT_TOL as CERT_TOL
from .certificate import certify
from .errors import InfeasibleInputError, InvalidInputError, InvalidParameterError, SolverError
from .leastdev import SolverOptions, assemble, solve_least_deviation
from .polybasis import KINDS, StabilityPolynomial, make_basis
from .spectra import Spectrum, rectangle

EPS_FEAS = 1e-7
# relative default for eps_bisect
EPS_BISECT_REL = 1e-4
MAX_DOUBLINGS = 60
# the SIP search rejects h once r is positive beyond solver accuracy
REJECT_TOL = 1e-9
N_CAP = 1 << 20

BASIS_ALIASES = {
    "chebyshev": "shifted-chebyshev",
    "shifted": "shifted-chebyshev",
    "rotated": "rotated-chebyshev",
    "auto": "auto",
}
BASIS_ALIASES.update({k: k for k in KINDS})


@dataclass(frozen=True, eq=False)
class BisectionResult:
    H: float
    polynomial: StabilityPolynomial
    bracket: tuple
    history: list
    eps_bisect: float
    eps_feas: float
    certified: Optional[bool] = None
    n_final: Optional[int] = None
    basis_kind: str = ""
    probes: list = field(default_factory=list)
    solution: object = field(default=None, repr=False)
    log: list = field(default_factory=list, repr=False)


@dataclass(frozen=True, eq=False)
class RectangleResult:
    kappa: float
    polynomial: StabilityPolynomial
    bracket: tuple
    history: list
    eps_bisect: float
    eps_feas: float
    h: float
    beta: float
    probes: list = field(default_factory=list)


def _all_points(spectrum):
    pts = spectrum.points
    if spectrum.half_plane_reduced:
        pts = np.concatenate([pts, np.conj(pts[pts.imag > 0])])
    return pts


def choose_basis(points):
    """Heuristic basis kind for an arbitrary spectrum.

    Chebyshev if the set is dominated by the negative real axis, rotated
    Chebyshev if dominated by the imaginary axis, binomial if the points lie
    within 1% on a circle through the origin centred on the real axis.
    """
    pts = np.asarray(points, dtype=complex)
    # circle first: sampled circles miss the top point, so the real-axis rule
    # would otherwise win by a hair
    x = pts.real
    denom = 2.0 * float(np.sum(x * x))
    if denom > 0:
        # |z + rho| = rho  <=>  |z|^2 + 2 rho Re z = 0
        rho = -float(np.sum(np.abs(pts) ** 2 * x)) / denom
        if rho > 0 and np.max(np.abs(np.abs(pts + rho) - rho)) <= 0.01 * rho:
            return "binomial"
    min_re = float(np.min(pts.real))
    max_im = float(np.max(np.abs(pts.imag)))
    if min_re < -2.0 * max_im:
        return "shifted-chebyshev"
    if max_im > 2.0 * abs(min_re):
        return "rotated-chebyshev"
    return "shifted-chebyshev"


def resolve_basis_kind(kind, spectrum):
    try:
        kind = BASIS_ALIASES[kind]
    except KeyError:
        raise InvalidParameterError(
            f"unknown basis {kind!r}; choose from {sorted(BASIS_ALIASES)}"
        ) from None
    if kind == "auto":
        kind = choose_basis(_all_points(spectrum))
    return kind


def basis_for(kind, s, h, spectrum):
    """Basis of the given kind scaled to ``h`` times the spectrum.

    Chebyshev: ``h min Re(lambda)``; rotated: ``h max |Im(lambda)|``;
    binomial: ``h max|lambda| / 2``, the radius of a disk through the origin
    containing the points.  Degenerate scales fall back to ``h max|lambda|``.
    """
    if h == 0 or kind == "monomial":
        return make_basis("monomial", s)
    pts = _all_points(spectrum)
    m = float(np.max(np.abs(pts)))
    if kind == "shifted-chebyshev":
        x = float(np.min(pts.real))
        scale = h * (x if x < 0 else -m)
    elif kind == "rotated-chebyshev":
        x = float(np.max(np.abs(pts.imag)))
        scale = h * (x if x > 0 else m)
    else:
        scale = h * m / 2.0
    return make_basis(kind, s, scale)


def initial_hmax(spectrum, s):
    """``2 s^2 / max|lambda|``, the first upper bound tried for ``h``."""
    m = float(np.max(np.abs(spectrum.points)))
    if m == 0:
        raise InvalidInputError("spectrum has no nonzero point; no step bound exists")
    return 2.0 * s * s / m


def lipschitz_bound(poly, rho):
    """``sum_j j |a_j| rho^(j-1)``, bounding ``|R'|`` on the disk ``|z| <= rho``."""
    a = np.abs(np.asarray(poly.monomial_coeffs, dtype=float))
    j = np.arange(1, len(a))
    return float(np.sum(j * a[1:] * float(rho) ** (j - 1)))


def mu_scaled(poly, mu):
    """Coefficients ``a_j mu^(1-j)`` (``a_0`` kept), i.e. ``R_mu(mu z) = 1 + mu (R(z) - 1)``.

    For a first-order polynomial stable at ``h`` this is stable at ``mu h``
    for every ``mu`` in ``(0, 1]`` by convexity of the modulus.
    """
    mu = float(mu)
    if not 0 < mu <= 1:
        raise InvalidParameterError(f"mu must lie in (0, 1], got {mu}")
    a = np.array(poly.monomial_coeffs, dtype=float)
    j = np.arange(len(a))
    a[1:] = a[1:] * mu ** (1 - j[1:])
    return StabilityPolynomial(poly.stages, min(poly.order, 1), a)


def _check_sp(s, p):
    s = int(s)
    p = int(p)
    if not 1 <= p <= s:
        raise InvalidParameterError(f"need s >= p >= 1, got s={s}, p={p}")
    return s, p


def _solve_at(spectrum, h, s, p, kind, opts):
    """Solve at ``h``; on failure retry once with the LP outer approximation."""
    problem = assemble(spectrum, h, basis_for(kind, s, h, spectrum), s, p)
    sol = solve_least_deviation(problem, opts)
    if sol.status == "solved":
        return sol
    retry = solve_least_deviation(problem, replace(opts, formulation="lp"))
    if retry.status == "solved":
        return retry
    raise SolverError(
        f"least-deviation solve failed at h={h!r} ({sol.status}; LP fallback {retry.status})",
        h=h,
        diagnostics={"socp": sol.diagnostics, "lp": retry.diagnostics},
    )


def _find_upper(evaluate, h0, infeasible):
    """Double ``h`` from ``h0`` until ``infeasible(evaluate(h))``."""
    probes = []
    h = h0
    last_ok = None
    for _ in range(MAX_DOUBLINGS + 1):
        out = evaluate(h)
        bad = infeasible(out)
        probes.append((h, out, not bad))
        if bad:
            return h, last_ok, probes
        last_ok = (h, out)
        h *= 2.0
    raise InvalidInputError(
        f"no infeasible step found after {MAX_DOUBLINGS} doublings from {h0}; "
        "the spectrum does not bound the step size"
    )


def optimize_h(spectrum, s, p, basis_kind="auto", eps_bisect=None, eps_feas=EPS_FEAS,
               solver_opts=None, callback=None):
    """Largest ``h`` (to ``eps_bisect``) with ``r(h) < eps_feas`` on the sample."""
    s, p = _check_sp(s, p)
    if eps_bisect is not None and not eps_bisect > 0:
        raise InvalidParameterError(f"eps_bisect must be positive, got {eps_bisect}")
    opts = solver_opts or SolverOptions()
    kind = resolve_basis_kind(basis_kind, spectrum)

    def evaluate(h):
        sol = _solve_at(spectrum, h, s, p, kind, opts)
        if callback:
            callback(h, sol)
        return sol

    h_max, last_ok, probes = _find_upper(evaluate, initial_hmax(spectrum, s),
                                         lambda sol: not sol.r < eps_feas)
    h_min, best = (0.0, None) if last_ok is None else last_ok
    if eps_bisect is None:
        eps_bisect = EPS_BISECT_REL * (h_max - h_min)
    history = []
    while h_max - h_min > eps_bisect:
        h = 0.5 * (h_min + h_max)
        sol = evaluate(h)
        ok = sol.r < eps_feas
        history.append((h, sol.r, ok))
        if ok:
            h_min, best = h, sol
        else:
            h_max = h
    if best is None:
        best = _solve_at(spectrum, 0.0, s, p, kind, opts)
    return BisectionResult(
        H=h_min, polynomial=best.polynomial, bracket=(h_min, h_max), history=history,
        eps_bisect=eps_bisect, eps_feas=eps_feas, basis_kind=kind,
        probes=[(h, sol.r, ok) for h, sol, ok in probes], solution=best,
    )


def optimize_h_sip(family, s, p, basis_kind="auto", eps_bisect=None, n0=64, n_cap=N_CAP,
                   cert_tol=CERT_TOL, reject_tol=REJECT_TOL, solver_opts=None,
                   upper_factor=1.1, callback=None):
    """Bisection with certified acceptance on a continuous spectrum.

    At each midpoint the problem is solved on ``family.sample(n)``.  The step
    is rejected when ``r > reject_tol`` (a sample of the set is already
    unstable), accepted when the returned polynomial is certified to satisfy
    ``|R| <= 1 + cert_tol`` on every piece of the continuous set, and
    otherwise ``n`` is doubled and the midpoint re-solved.  Exceeding
    ``n_cap`` ends the search with ``certified=False``.

    The quick test ``r + h nu L <= cert_tol`` with ``L`` from
    :func:`lipschitz_bound` is tried before the piecewise certificate; it can
    only fire for spectra that avoid the origin.
    """
    s, p = _check_sp(s, p)
    if eps_bisect is not None and not eps_bisect > 0:
        raise InvalidParameterError(f"eps_bisect must be positive, got {eps_bisect}")
    n = int(n0)
    if n < 1:
        raise InvalidParameterError(f"n0 must be positive, got {n0}")
    opts = solver_opts or SolverOptions()
    spec0 = family.sample(n)
    kind = resolve_basis_kind(basis_kind, spec0)
    log = []

    def solve(h, spec):
        sol = _solve_at(spec, h, s, p, kind, opts)
        if callback:
            callback(h, sol)
        return sol

    # upper bound: a positive r on a sample is a sound rejection
    h0 = initial_hmax(spec0, s) * upper_factor
    h_max, _, probes = _find_upper(lambda h: solve(h, spec0), h0,
                                   lambda sol: sol.r > reject_tol)
    h_min = 0.0
    if eps_bisect is None:
        eps_bisect = EPS_BISECT_REL * h_max
    best = None
    history = []
    certified = True
    while h_max - h_min > eps_bisect:
        h = 0.5 * (h_min + h_max)
        while True:
            spec = family.sample(n)
            sol = solve(h, spec)
            entry = {"h": h, "n": n, "r": sol.r, "nu": spec.nu}
            if sol.r > reject_tol:
                entry["decision"] = "reject"
                log.append(entry)
                history.append((h, sol.r, False))
                h_max = h
                break
            L = lipschitz_bound(sol.polynomial, h * (spec.max_abs + spec.nu))
            entry["L"] = L
            quick = sol.r + h * spec.nu * L <= cert_tol
            cert = None
            if not quick:
                basis = basis_for(kind, s, h, spec)
                cert = certify(basis, sol.coeffs_basis, family.pieces, h, cert_tol)
                entry["cells"] = cert.cells
                entry["violation"] = cert.violation
            if quick or cert.certified:
                entry["decision"] = "accept"
                log.append(entry)
                history.append((h, sol.r, True))
                h_min, best = h, sol
                break
            entry["decision"] = "refine"
            log.append(entry)
            if 2 * n > n_cap:
                certified = False
                break
            n *= 2
        if not certified:
            break
    if best is None:
        best = _solve_at(spec0, 0.0, s, p, kind, opts)
        certified = False
    return BisectionResult(
        H=h_min, polynomial=best.polynomial, bracket=(h_min, h_max), history=history,
        eps_bisect=eps_bisect, eps_feas=reject_tol, certified=certified, n_final=n,
        basis_kind=kind, probes=[(h, sol.r, ok) for h, sol, ok in probes], solution=best,
        log=log,
    )


def max_kappa(h, beta, s, p, eps_bisect=None, eps_feas=EPS_FEAS, n=4096, solver_opts=None):
    """Largest ``kappa`` such that ``h`` times the rectangle ``[-kappa,0]x[-beta,beta]`` is stable."""
    s, p = _check_sp(s, p)
    h = float(h)
    beta = float(beta)
    if not (h > 0 and math.isfinite(h)):
        raise InvalidParameterError(f"h must be positive, got {h}")
    if not (beta >= 0 and math.isfinite(beta)):
        raise InvalidParameterError(f"beta must be >= 0, got {beta}")
    opts = solver_opts or SolverOptions()

    def evaluate(kappa):
        spec = rectangle(beta, kappa, n)
        # chebyshev map over the larger of the two extents keeps it bounded
        scale = -h * max(kappa, beta)
        problem = assemble(spec, h, make_basis("shifted-chebyshev", s, scale), s, p)
        sol = solve_least_deviation(problem, opts)
        if sol.status != "solved":
            sol = solve_least_deviation(problem, replace(opts, formulation="lp"))
            if sol.status != "solved":
                raise SolverError(f"least-deviation solve failed at kappa={kappa!r}", h=h,
                                  diagnostics=sol.diagnostics)
        return sol

    k_lo = 1e-6 * max(beta, 1.0 / h)
    sol_lo = evaluate(k_lo)
    if not sol_lo.r < eps_feas:
        raise InfeasibleInputError(
            f"no {s}-stage order-{p} polynomial is stable on the segment "
            f"[-{beta}i, {beta}i] scaled by h={h} (r={sol_lo.r:.3e})"
        )
    k_hi, last_ok, probes = _find_upper(evaluate, 2.0 * s * s / h,
                                        lambda sol: not sol.r < eps_feas)
    k_lo, best = (k_lo, sol_lo) if last_ok is None else last_ok
    if eps_bisect is None:
        eps_bisect = EPS_BISECT_REL * (k_hi - k_lo)
    history = []
    while k_hi - k_lo > eps_bisect:
        k = 0.5 * (k_lo + k_hi)
        sol = evaluate(k)
        ok = sol.r < eps_feas
        history.append((k, sol.r, ok))
        if ok:
            k_lo, best = k, sol
        else:
            k_hi = k
    return RectangleResult(
        kappa=k_lo, polynomial=best.polynomial, bracket=(k_lo, k_hi), history=history,
        eps_bisect=eps_bisect, eps_feas=eps_feas, h=h, beta=beta,
        probes=[(k, sol.r, ok) for k, sol, ok in probes],
    )
