"""Polynomial bases used to condition the least-deviation problem.

A basis of degree ``s`` is a family ``Q_0 .. Q_s`` with ``deg Q_j = j``.  It
is stored as a lower-triangular matrix ``b`` with ``Q_j(z) = sum_k b[j, k] z**k``,
but values are always computed by recurrence on the argument, never through
``b``: the expansion is badly conditioned once ``|z|`` is large.

Four kinds are supported:

``monomial``
    ``Q_j(z) = z**j``.
``shifted-chebyshev``
    ``Q_j(z) = T_j(1 + 2 z / |scale|)``; bounded by one on ``[scale, 0]``
    when ``scale < 0`` (the usual choice ``scale = h min Re(lambda)``).
``rotated-chebyshev``
    ``Q_j(z) = i**j T_j(i z / scale)``, real-coefficient and bounded by one on
    the imaginary segment ``[-i scale, i scale]``.
``binomial``
    ``Q_j(z) = (1 + z / scale)**j``, a shifted monomial suited to disks
    ``|1 + z/scale| <= 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidParameterError, RankDeficientError

KINDS = ("monomial", "shifted-chebyshev", "rotated-chebyshev", "binomial")

# absolute tolerance on a_j - 1/j! for j <= p
ORDER_TOL = 1e-9

_RANK_RTOL = 1e-10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Basis:
    kind: str
    degree: int
    scale: float
    coeffs: np.ndarray = field(repr=False)

    @property
    def s(self):
        return self.degree

    def __call__(self, z):
        return eval_basis(self, z)


@dataclass(frozen=True, eq=False)
class StabilityPolynomial:
    """Monomial-form stability polynomial ``R(z) = sum_j a_j z**j``.

    ``order`` records the accuracy the coefficients were constrained to;
    construction checks ``|a_j - 1/j!| <= ORDER_TOL`` for ``j <= order``
    unless ``validate=False``.
    """

    stages: int
    order: int
    monomial_coeffs: np.ndarray
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        coeffs = np.asarray(self.monomial_coeffs)
        if np.iscomplexobj(coeffs):
            if np.any(coeffs.imag != 0):
                raise InvalidParameterError("stability polynomial coefficients must be real")
            coeffs = coeffs.real
        coeffs = _frozen(coeffs)
        object.__setattr__(self, "monomial_coeffs", coeffs)
        if coeffs.ndim != 1 or len(coeffs) != self.stages + 1:
            raise InvalidParameterError(
                f"expected {self.stages + 1} coefficients, got shape {coeffs.shape}"
            )
        if not 0 <= self.order <= self.stages:
            raise InvalidParameterError(f"order {self.order} outside [0, {self.stages}]")
        if not np.all(np.isfinite(coeffs)):
            raise InvalidParameterError("stability polynomial coefficients must be finite")
        if self.validate and self.order_residual() > ORDER_TOL:
            raise InvalidParameterError(
                f"order conditions violated by {self.order_residual():.3e}"
            )

    @property
    def coeffs(self):
        return self.monomial_coeffs

    def order_residual(self):
        """Largest ``|a_j - 1/j!|`` over ``j <= order``."""
        target = np.array([1.0 / math.factorial(j) for j in range(self.order + 1)])
        return float(np.max(np.abs(self.monomial_coeffs[: self.order + 1] - target)))

    def __call__(self, z):
        return horner(self.monomial_coeffs, z)

    def derivative_coeffs(self):
        a = self.monomial_coeffs
        return a[1:] * np.arange(1, len(a))

    def to_dict(self):
        return {"s": self.stages, "p": self.order, "coeffs": [float(c) for c in self.monomial_coeffs]}

    @classmethod
    def from_dict(cls, data, validate=True):
        try:
            s = int(data["s"])
            p = int(data["p"])
            coeffs = [float(c) for c in data["coeffs"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidParameterError(f"malformed polynomial record: {exc}") from exc
        return cls(s, p, np.array(coeffs), validate=validate)

    @classmethod
    def taylor(cls, s):
        """Degree-``s`` Taylor polynomial of ``exp`` (order ``s``)."""
        return cls(s, s, np.array([1.0 / math.factorial(j) for j in range(s + 1)]))


@dataclass(frozen=True, eq=False)
class OrderConditionSystem:
    """Equality rows ``matrix @ a = rhs`` enforcing ``sum_j a_j b_jk = 1/k!``."""

    matrix: np.ndarray
    rhs: np.ndarray
    rank: int

    @property
    def p(self):
        return self.matrix.shape[0] - 1


def _int_poly_recurrence(s, first, mult):
    """Integer coefficient lists for ``P_{j+1} = mult(v) P_j + sign P_{j-1}``.

    ``first`` is the coefficient list of ``P_1`` and ``mult`` a pair
    ``(c0, c1, sign)`` meaning ``P_{j+1} = (c0 + c1 v) P_j + sign P_{j-1}``.
    Python ints keep every entry exact.
    """
    c0, c1, sign = mult
    rows = [[1]]
    if s >= 1:
        rows.append(list(first))
    for j in range(1, s):
        prev, cur = rows[j - 1], rows[j]
        nxt = [0] * (j + 2)
        for k, c in enumerate(cur):
            nxt[k] += c0 * c
            nxt[k + 1] += c1 * c
        for k, c in enumerate(prev):
            nxt[k] += sign * c
        rows.append(nxt)
    return rows


def _coeff_matrix(int_rows, unit):
    """Scale integer rows in ``v = z * unit`` into a float matrix in ``z``."""
    s = len(int_rows) - 1
    b = np.zeros((s + 1, s + 1))
    powers = unit ** np.arange(s + 1, dtype=float)
    for j, row in enumerate(int_rows):
        for k, c in enumerate(row):
            b[j, k] = float(c) * powers[k]
    return b


def make_basis(kind, s, scale=1.0):
    """Construct a degree-``s`` basis of the given kind.

    ``scale`` is ``h*x`` for the Chebyshev kinds and the disk radius for
    ``binomial``; it is ignored for ``monomial``.
    """
    if kind not in KINDS:
        raise InvalidParameterError(f"unknown basis kind {kind!r}; expected one of {KINDS}")
    s = int(s)
    if s < 0:
        raise InvalidParameterError(f"degree must be nonnegative, got {s}")
    if kind == "monomial":
        return Basis(kind, s, 1.0, _frozen(np.eye(s + 1)))
    scale = float(scale)
    if scale == 0.0 or not math.isfinite(scale):
        raise InvalidParameterError(f"{kind} basis needs a finite nonzero scale, got {scale}")

    if kind == "shifted-chebyshev":
        # T_j(1 + u), u = 2 z / |scale|
        rows = _int_poly_recurrence(s, [1, 1], (2, 2, -1))
        b = _coeff_matrix(rows, 2.0 / abs(scale))
    elif kind == "rotated-chebyshev":
        # i^j T_j(i v), v = z / scale:  Q_1 = -v,  Q_{j+1} = -2 v Q_j + Q_{j-1}
        rows = _int_poly_recurrence(s, [0, -1], (0, -2, 1))
        b = _coeff_matrix(rows, 1.0 / scale)
    else:
        rows = [[math.comb(j, k) for k in range(j + 1)] for j in range(s + 1)]
        b = _coeff_matrix(rows, 1.0 / scale)
    return Basis(kind, s, scale, _frozen(b))


def eval_basis(basis, z):
    """Values ``Q_0(z) .. Q_s(z)`` along a new trailing axis.

    Works for scalar or array ``z``; the result has shape ``z.shape + (s+1,)``.
    """
    z = np.asarray(z, dtype=complex)
    s = basis.degree
    out = np.empty(z.shape + (s + 1,), dtype=complex)
    out[..., 0] = 1.0
    if s == 0:
        return out
    kind = basis.kind
    if kind == "monomial":
        for j in range(1, s + 1):
            out[..., j] = out[..., j - 1] * z
        return out
    if kind == "binomial":
        w = 1.0 + z / basis.scale
        for j in range(1, s + 1):
            out[..., j] = out[..., j - 1] * w
        return out
    if kind == "shifted-chebyshev":
        w = 1.0 + 2.0 * z / abs(basis.scale)
        out[..., 1] = w
        for j in range(1, s):
            out[..., j + 1] = 2.0 * w * out[..., j] - out[..., j - 1]
        return out
    # rotated-chebyshev
    v = z / basis.scale
    out[..., 1] = -v
    for j in range(1, s):
        out[..., j + 1] = -2.0 * v * out[..., j] + out[..., j - 1]
    return out


def recurrence(basis):
    """Affine three-term recurrence generating the basis.

    Returns ``((a1, b1), (a, b, g))`` meaning ``Q_1 = a1 + b1 z`` and
    ``Q_{j+1} = (a + b z) Q_j + g Q_{j-1}`` for ``j >= 1``.
    """
    kind = basis.kind
    if kind == "monomial":
        return (0.0, 1.0), (0.0, 1.0, 0.0)
    sc = basis.scale
    if kind == "binomial":
        return (1.0, 1.0 / sc), (1.0, 1.0 / sc, 0.0)
    if kind == "shifted-chebyshev":
        return (1.0, 2.0 / abs(sc)), (2.0, 4.0 / abs(sc), -1.0)
    return (0.0, -1.0 / sc), (0.0, -2.0 / sc, 1.0)


def to_monomial(basis, a):
    """Monomial coefficients ``c_k = sum_j a_j b_jk`` of ``sum_j a_j Q_j``."""
    a = np.asarray(a, dtype=float)
    if a.shape != (basis.degree + 1,):
        raise InvalidParameterError(
            f"expected {basis.degree + 1} basis coefficients, got shape {a.shape}"
        )
    if basis.kind == "monomial":
        return a.copy()
    return a @ basis.coeffs


def from_monomial(basis, c):
    """Inverse of :func:`to_monomial` by back-substitution on ``b``."""
    c = np.asarray(c, dtype=float)
    s = basis.degree
    if c.shape != (s + 1,):
        raise InvalidParameterError(f"expected {s + 1} coefficients, got shape {c.shape}")
    b = basis.coeffs
    a = np.zeros(s + 1)
    for k in range(s, -1, -1):
        a[k] = (c[k] - a[k + 1 :] @ b[k + 1 :, k]) / b[k, k]
    return a


def order_condition_system(basis, p):
    """Rows enforcing the order conditions up to ``p`` in basis coordinates."""
    s = basis.degree
    p = int(p)
    if p < 0 or p > s:
        raise InvalidParameterError(f"order p={p} must satisfy 0 <= p <= s={s}")
    matrix = np.ascontiguousarray(basis.coeffs[:, : p + 1].T)
    rhs = np.array([1.0 / math.factorial(k) for k in range(p + 1)])
    # row scaling leaves the rank unchanged and removes the (2/scale)^k spread
    norms = np.linalg.norm(matrix, axis=1)
    norms[norms == 0] = 1.0
    sv = np.linalg.svd(matrix / norms[:, None], compute_uv=False)
    rank = int(np.sum(sv > _RANK_RTOL * sv[0]))
    if rank < p + 1:
        raise RankDeficientError(
            f"order-condition system has rank {rank} < {p + 1}", rank=rank, singular_values=sv
        )
    matrix.setflags(write=False)
    rhs.setflags(write=False)
    return OrderConditionSystem(matrix, rhs, rank)


def horner(coeffs: Sequence[float], z):
    """Evaluate ``sum_k coeffs[k] z**k`` by Horner's rule."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros_like(z)
    for c in np.asarray(coeffs)[::-1]:
        out = out * z + c
    return out
