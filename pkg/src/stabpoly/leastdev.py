"""The convex least-deviation problem at a fixed step size.

For scaled points ``z_k = h lambda_k`` and a basis ``Q_0 .. Q_s`` we solve::

    minimize  max_k |sum_j a_j Q_j(z_k)|   subject to the order conditions

and report ``r = t* - 1``.  The order conditions are eliminated first
(``a = a_part + N y``), then the free coordinates are whitened by an SVD of the
stacked constraint rows so that the cone program handed to the interior-point
solver has an orthonormal constraint matrix.  All ill-conditioning of the
original basis is confined to those two factorizations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import linprog

from .errors import InvalidInputError, InvalidParameterError
from .polybasis import StabilityPolynomial, eval_basis, order_condition_system, to_monomial
from .socp import solve_socp
from .spectra import half_plane_reduce

STATUSES = ("solved", "max-iterations", "numerical-failure")

# singular values of the whitened system below this fraction are dropped
_WHITEN_RTOL = 1e-13
# order-condition drift tolerated before the monomial snap is refused
_SNAP_TOL = 1e-6


@dataclass(frozen=True)
class SolverOptions:
    """Knobs for :func:`solve_least_deviation`.

    ``formulation`` is ``"socp"`` (exact modulus constraints) or ``"lp"``
    (regular ``lp_sides``-gon outer approximation solved by HiGHS).
    """

    solver_tol: float = 1e-9
    max_iter: int = 200
    formulation: str = "socp"
    lp_sides: int = 64


@dataclass(frozen=True, eq=False)
class LeastDevProblem:
    scaled_points: np.ndarray
    basis: object
    s: int
    p: int
    order_system: object

    @property
    def rows(self):
        """Complex constraint rows ``Q_j(z_k)``, shape ``(K, s+1)``."""
        return eval_basis(self.basis, self.scaled_points)

    def constraint_matrix(self):
        """Real form of :attr:`rows`: real parts stacked over imaginary parts."""
        rows = self.rows
        return np.vstack([rows.real, rows.imag])


@dataclass(frozen=True, eq=False)
class LeastDevSolution:
    r: float
    coeffs_basis: np.ndarray
    coeffs_monomial: StabilityPolynomial
    status: str
    gap: float
    iterations: int
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def polynomial(self):
        return self.coeffs_monomial


def assemble(spectrum, h, basis, s, p):
    """Build the least-deviation problem for ``spectrum`` at step ``h``."""
    h = float(h)
    if not math.isfinite(h) or h < 0:
        raise InvalidParameterError(f"step size must be finite and >= 0, got {h}")
    s = int(s)
    p = int(p)
    if not 0 <= p <= s:
        raise InvalidParameterError(f"need s >= p >= 0, got s={s}, p={p}")
    if basis.degree != s:
        raise InvalidParameterError(f"basis degree {basis.degree} does not match s={s}")
    if len(spectrum.points) == 0:
        raise InvalidInputError("spectrum is empty")
    if spectrum.closed_under_conjugation and not spectrum.half_plane_reduced:
        spectrum = half_plane_reduce(spectrum)
    pts = h * spectrum.points
    pts.setflags(write=False)
    return LeastDevProblem(pts, basis, s, p, order_condition_system(basis, p))


def _null_space_split(system):
    """Particular solution and orthonormal null-space basis of the order system."""
    A = np.asarray(system.matrix)
    b = np.asarray(system.rhs)
    d = 1.0 / np.linalg.norm(A, axis=1)
    U, sv, Vt = np.linalg.svd(d[:, None] * A)
    m = A.shape[0]
    a_part = Vt[:m].T @ ((U.T @ (d * b)) / sv)
    # one refinement sweep against the unscaled equations
    res = b - A @ a_part
    a_part += Vt[:m].T @ ((U.T @ (d * res)) / sv)
    return a_part, Vt[m:].T


def _snap_monomial(c, p):
    """Replace ``c[:p+1]`` by the exact Taylor values; returns the drift removed."""
    c = np.array(c, dtype=float)
    target = np.array([1.0 / math.factorial(j) for j in range(p + 1)])
    drift = float(np.max(np.abs(c[: p + 1] - target)))
    c[: p + 1] = target
    return c, drift


def _modulus_max(rows, a):
    return float(np.max(np.abs(rows @ a)))


def _socp(v, Wt, opts):
    K, nf = Wt.shape
    G = np.zeros((K, 3, nf + 1))
    G[:, 0, nf] = -1.0
    G[:, 1, :nf] = -Wt.real
    G[:, 2, :nf] = -Wt.imag
    hvec = np.zeros((K, 3))
    hvec[:, 1] = v.real
    hvec[:, 2] = v.imag
    c = np.zeros(nf + 1)
    c[nf] = 1.0
    x0 = np.zeros(nf + 1)
    x0[nf] = 1.0 + float(np.max(np.abs(v)))
    z0 = np.zeros((K, 3))
    z0[:, 0] = 1.0 / K
    res = solve_socp(c, G, hvec, x0=x0, z0=z0, abstol=opts.solver_tol,
                     feastol=opts.solver_tol, max_iter=opts.max_iter)
    diag = {"primal_residual": res.primal_residual, "dual_residual": res.dual_residual,
            "primal_objective": res.primal_objective, "dual_objective": res.dual_objective}
    return res.x[:nf], res.status, res.gap, res.iterations, diag


def _lp(v, Wt, opts):
    K, nf = Wt.shape
    m = int(opts.lp_sides)
    if m < 3:
        raise InvalidParameterError(f"lp_sides must be >= 3, got {m}")
    theta = 2.0 * np.pi * np.arange(m) / m
    ct, st = np.cos(theta), np.sin(theta)
    # Re(w e^{-i theta}) = Re(w) cos + Im(w) sin  <=  t
    A = (Wt.real[:, None, :] * ct[None, :, None] + Wt.imag[:, None, :] * st[None, :, None])
    A = np.concatenate([A.reshape(K * m, nf), -np.ones((K * m, 1))], axis=1)
    b = -(v.real[:, None] * ct + v.imag[:, None] * st).ravel()
    c = np.zeros(nf + 1)
    c[nf] = 1.0
    res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * (nf + 1), method="highs")
    if res.status == 0:
        status = "solved"
    elif res.status == 1:
        status = "max-iterations"
    else:
        status = "numerical-failure"
    x = res.x if res.x is not None else np.zeros(nf + 1)
    diag = {"lp_objective": float(x[nf]) if res.x is not None else math.nan,
            "lp_message": res.message}
    return x[:nf], status, 0.0, int(getattr(res, "nit", 0)), diag


def solve_least_deviation(problem, opts=None):
    """Globally minimize ``max_k |R(z_k)|`` under the order conditions."""
    opts = opts or SolverOptions()
    if opts.formulation not in ("socp", "lp"):
        raise InvalidParameterError(f"unknown formulation {opts.formulation!r}")
    rows = problem.rows
    a_part, N = _null_space_split(problem.order_system)
    diagnostics = {"formulation": opts.formulation, "free_variables": N.shape[1]}
    status, gap, iterations = "solved", 0.0, 0

    if N.shape[1] == 0:
        a = a_part
    else:
        W = rows @ N
        v = rows @ a_part
        # whiten: W = U diag(sv) Vt, y = Vt.T diag(1/sv) yhat
        _, sv, Vt = np.linalg.svd(np.vstack([W.real, W.imag]), full_matrices=False)
        keep = sv > _WHITEN_RTOL * (sv[0] if sv.size else 0.0)
        if not np.any(keep):
            a = a_part
        else:
            T = Vt[keep].T / sv[keep]
            Wt = W @ T
            inner = _socp if opts.formulation == "socp" else _lp
            yhat, status, gap, iterations, extra = inner(v, Wt, opts)
            diagnostics.update(extra)
            a = a_part + N @ (T @ yhat)

    r = _modulus_max(rows, a) - 1.0
    mono, drift = _snap_monomial(to_monomial(problem.basis, a), problem.p)
    diagnostics["order_drift"] = drift
    if not np.all(np.isfinite(a)) or drift > _SNAP_TOL:
        status = "numerical-failure"
        if not np.all(np.isfinite(mono)):
            mono = np.zeros(problem.s + 1)
            mono[: problem.p + 1] = [1.0 / math.factorial(j) for j in range(problem.p + 1)]
    if status != "solved":
        diagnostics["condition_estimate"] = estimate_condition(problem)
    poly = StabilityPolynomial(problem.s, problem.p, mono)
    return LeastDevSolution(float(r), np.array(a), poly, status, float(gap), int(iterations),
                            diagnostics)


def condition_estimate(A, tol=1e-8, max_iter=500):
    """2-norm condition estimate of a real matrix by power iterations.

    Largest singular value: power iteration on ``A^T A``.  Smallest: inverse
    power iteration using the triangular factor of a QR decomposition.
    Returns ``inf`` when ``A`` is singular to working precision.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[1]
    if not np.all(np.isfinite(A)) or A.shape[0] < n:
        return math.inf
    x = np.ones(n) / math.sqrt(n)
    smax = 0.0
    for _ in range(max_iter):
        y = A.T @ (A @ x)
        norm = np.linalg.norm(y)
        if norm == 0:
            return math.inf
        x = y / norm
        done = abs(norm - smax) <= tol * norm
        smax = norm
        if done:
            break
    smax = math.sqrt(smax)
    R = np.linalg.qr(A, mode="r")
    d = np.abs(np.diag(R))
    if d.min() <= n * np.finfo(float).eps * d.max():
        return math.inf
    x = np.ones(n) / math.sqrt(n)
    inv = 0.0
    for _ in range(max_iter):
        y = scipy.linalg.solve_triangular(R, scipy.linalg.solve_triangular(R, x, trans="T"))
        norm = np.linalg.norm(y)
        if not math.isfinite(norm) or norm == 0:
            return math.inf
        x = y / norm
        done = abs(norm - inv) <= tol * norm
        inv = norm
        if done:
            break
    smin = 1.0 / math.sqrt(inv)
    if smin <= np.finfo(float).eps * smax:
        return math.inf
    return smax / smin


def estimate_condition(problem):
    """Condition estimate of the problem's inequality-constraint matrix."""
    return condition_estimate(problem.constraint_matrix())
