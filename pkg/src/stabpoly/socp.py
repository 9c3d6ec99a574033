"""Primal-dual interior-point solver for products of 3-dimensional Lorentz cones.

Solves the conic program::

    minimize    c @ x
    subject to  G x + s = h,   s in K

where ``K`` is a product of ``N`` second-order cones
``{(u0, u1, u2) : u0 >= sqrt(u1**2 + u2**2)}``, with ``G`` of shape
``(N, 3, nx)`` and ``h`` of shape ``(N, 3)``.  There are no equality
constraints; callers eliminate them beforehand.

The method is the standard infeasible-start path-following scheme with
Nesterov-Todd scaling and a Mehrotra predictor-corrector step.  Every Newton
system reduces to a dense ``nx x nx`` positive definite solve, so the cost per
iteration is linear in ``N``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

STEP_FRACTION = 0.99
_EXPON = 3
_REFINE = 2


@dataclass
class SOCPResult:
    x: np.ndarray
    s: np.ndarray
    z: np.ndarray
    status: str
    iterations: int
    primal_objective: float
    dual_objective: float
    gap: float
    primal_residual: float
    dual_residual: float
    history: list = field(default_factory=list, repr=False)


# -- cone algebra (arrays of shape (..., 3)) --------------------------------


def _jnorm(u):
    """sqrt(u0^2 - |u1|^2), computed as a product to limit cancellation."""
    r = np.hypot(u[..., 1], u[..., 2])
    return np.sqrt(np.maximum((u[..., 0] - r) * (u[..., 0] + r), 0.0))


def cone_product(u, v):
    out = np.empty(np.broadcast(u, v).shape)
    out[..., 0] = np.sum(u * v, axis=-1)
    out[..., 1:] = u[..., :1] * v[..., 1:] + v[..., :1] * u[..., 1:]
    return out


def cone_divide(lam, r):
    """Solve ``lam o u = r`` for ``u``."""
    l0 = lam[..., 0]
    l1 = lam[..., 1:]
    det = _jnorm(lam) ** 2
    u = np.empty_like(r)
    u[..., 0] = (l0 * r[..., 0] - np.sum(l1 * r[..., 1:], axis=-1)) / det
    u[..., 1:] = (r[..., 1:] - u[..., :1] * l1) / l0[..., None]
    return u


def _hyper(w, v, inverse=False):
    """Apply the hyperbolic rotation ``Wbar(w)`` (or its inverse) to ``v``.

    ``w`` has shape ``(N, 3)`` with ``w0^2 - |w1|^2 = 1``; ``v`` has shape
    ``(N, 3)`` or ``(N, 3, k)``.
    """
    mat = v.ndim == 3
    if not mat:
        v = v[..., None]
    w0 = w[:, 0][:, None]
    w1 = w[:, 1:][:, :, None]
    v0 = v[:, :1, :]
    v1 = v[:, 1:, :]
    w1v1 = np.sum(w1 * v1, axis=1, keepdims=True)
    sgn = -1.0 if inverse else 1.0
    out = np.empty_like(v)
    out[:, :1, :] = w0[:, :, None] * v0 + sgn * w1v1
    out[:, 1:, :] = sgn * w1 * v0 + v1 + w1 * w1v1 / (1.0 + w0[:, :, None])
    return out if mat else out[..., 0]


def max_step(lam, d):
    """Largest ``a >= 0`` with ``lam + a d`` in the cone, for interior ``lam``."""
    ln = _jnorm(lam)
    lbar = lam / ln[:, None]
    rho = _hyper(lbar, d, inverse=True) / ln[:, None]
    denom = np.hypot(rho[:, 1], rho[:, 2]) - rho[:, 0]
    denom = np.max(denom)
    return np.inf if denom <= 0 else 1.0 / denom


def _nt_matrices(s, z):
    """Symmetric Nesterov-Todd scaling of interior pairs ``(s, z)``.

    Returns ``(W, Winv, lam)`` with ``W z = Winv s = lam``, matrices of shape
    ``(N, 3, 3)``.
    """
    sn = _jnorm(s)
    zn = _jnorm(z)
    sbar = s / sn[:, None]
    zbar = z / zn[:, None]
    gamma = np.sqrt((1.0 + np.sum(sbar * zbar, axis=1)) / 2.0)
    w = sbar.copy()
    w[:, 0] += zbar[:, 0]
    w[:, 1:] -= zbar[:, 1:]
    w /= (2.0 * gamma)[:, None]
    beta = np.sqrt(sn / zn)
    eye = np.broadcast_to(np.eye(3), (len(s), 3, 3))
    W = beta[:, None, None] * _hyper(w, eye)
    Winv = _hyper(w, eye, inverse=True) / beta[:, None, None]
    lam = np.einsum("nij,nj->ni", W, z)
    return W, Winv, lam


def _interior_shift(u):
    """Push vectors into the cone interior (CVXOPT's initial-point rule)."""
    t = np.max(np.hypot(u[:, 1], u[:, 2]) - u[:, 0])
    if t >= -1e-8 * max(np.linalg.norm(u), 1.0):
        u = u.copy()
        u[:, 0] += 1.0 + t
    return u


def solve_socp(c, G, h, x0=None, z0=None, abstol=1e-9, reltol=0.0, feastol=1e-9,
               max_iter=200, keep_history=False):
    """Solve the cone program above; see module docstring.

    ``x0``/``z0`` may supply a start; the primal slack is derived from ``x0``
    and shifted into the cone interior when necessary.  The returned status is
    ``"solved"``, ``"max-iterations"`` or ``"numerical-failure"``; in the
    last two cases the best iterate found is returned.
    """
    c = np.asarray(c, dtype=float)
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    N, _, nx = G.shape
    Gf = G.reshape(3 * N, nx)
    hnorm = max(1.0, float(np.linalg.norm(h)))
    cnorm = max(1.0, float(np.linalg.norm(c)))

    if x0 is None:
        x = np.linalg.lstsq(Gf, h.ravel(), rcond=None)[0]
    else:
        x = np.array(x0, dtype=float)
    s = _interior_shift(h - np.einsum("nij,j->ni", G, x))
    if z0 is None:
        z = -np.linalg.lstsq(Gf.T, c, rcond=None)[0].reshape(N, 3)
        z = _interior_shift(z)
    else:
        z = _interior_shift(np.array(z0, dtype=float).reshape(N, 3))

    W, Winv, lam = _nt_matrices(s, z)
    e = np.zeros((N, 3))
    e[:, 0] = 1.0
    history = []
    best = None
    status = "max-iterations"
    it = 0
    for it in range(max_iter + 1):
        rx = Gf.T @ z.ravel() + c
        rz = np.einsum("nij,j->ni", G, x) + s - h
        gap = float(np.sum(s * z))
        pcost = float(c @ x)
        dcost = float(-np.sum(h * z))
        pres = float(np.linalg.norm(rz)) / hnorm
        dres = float(np.linalg.norm(rx)) / cnorm
        if keep_history:
            history.append((it, pcost, dcost, gap, pres, dres))
        if not np.all(np.isfinite([gap, pcost, dcost, pres, dres])):
            status = "numerical-failure"
            break
        score = max(gap, pres, dres)
        if best is None or score < best[0]:
            best = (score, x.copy(), s.copy(), z.copy(), gap, pcost, dcost, pres, dres)
        relgap = gap / abs(pcost) if pcost < 0 else (gap / abs(dcost) if dcost > 0 else np.inf)
        if pres <= feastol and dres <= feastol and (gap <= abstol or relgap <= reltol):
            status = "solved"
            break
        if it == max_iter:
            break

        # scaled coordinates: lam = W z = W^{-T} s; W is carried as a product
        # of well-conditioned updates rather than recomputed from (s, z)
        WinvT = np.swapaxes(Winv, 1, 2)
        M = np.einsum("nij,njk->nik", WinvT, G).reshape(3 * N, nx)
        H = M.T @ M
        try:
            factor = scipy.linalg.cho_factor(H, check_finite=True)
        except (np.linalg.LinAlgError, ValueError):
            status = "numerical-failure"
            break

        def reduced(bx, bz, bs):
            u = cone_divide(lam, bs)
            q = u - np.einsum("nij,nj->ni", WinvT, bz)
            rhs = bx - M.T @ q.ravel()
            dx = scipy.linalg.cho_solve(factor, rhs)
            dzt = (M @ dx).reshape(N, 3) + q
            return dx, u - dzt, dzt

        def newton(bx, bz, bs):
            # iterative refinement against the unreduced linearized equations
            dx, dst, dzt = reduced(bx, bz, bs)
            for _ in range(_REFINE):
                ex = bx - Gf.T @ np.einsum("nij,nj->ni", Winv, dzt).ravel()
                ez = bz - np.einsum("nij,j->ni", G, dx) - np.einsum("nji,nj->ni", W, dst)
                es = bs - cone_product(lam, dst + dzt)
                cx, cst, czt = reduced(ex, ez, es)
                dx, dst, dzt = dx + cx, dst + cst, dzt + czt
            return dx, dst, dzt

        mu = gap / N
        lamsq = cone_product(lam, lam)
        dx_a, dst_a, dzt_a = newton(-rx, -rz, -lamsq)
        a_aff = min(1.0, max_step(lam, dst_a), max_step(lam, dzt_a))
        mu_aff = float(np.sum((lam + a_aff * dst_a) * (lam + a_aff * dzt_a))) / N
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** _EXPON

        bs = -lamsq - cone_product(dst_a, dzt_a) + sigma * mu * e
        dx, dst, dzt = newton(-rx, -rz, bs)
        a_max = min(max_step(lam, dst), max_step(lam, dzt))
        alpha = min(1.0, STEP_FRACTION * a_max)
        if not np.isfinite(alpha) or alpha < 1e-12:
            status = "numerical-failure"
            break
        x = x + alpha * dx
        st = lam + alpha * dst
        zt = lam + alpha * dzt
        Wt, Wtinv, lam = _nt_matrices(st, zt)
        s = np.einsum("nji,nj->ni", W, st)
        z = np.einsum("nij,nj->ni", Winv, zt)
        W = np.einsum("nij,njk->nik", Wt, W)
        Winv = np.einsum("nij,njk->nik", Winv, Wtinv)

    if status != "solved" and best is not None:
        _, x, s, z, gap, pcost, dcost, pres, dres = best
    return SOCPResult(x, s, z, status, it, pcost, dcost, gap, pres, dres, history)
