"""Pointwise algebra of symmetric 3x3 Schouten data.

Everything here is specialised to dimension three.  Matrices are accepted
either as :class:`SymMatrix3` or as array-likes of shape ``(3, 3)``;
eigenvalue triples as :class:`SymTriple` or array-likes whose last axis has
length three (so whole grids can be fed at once).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateCone

__all__ = [
    "SymTriple",
    "SymMatrix3",
    "sigma_k",
    "sigma_k_matrix",
    "cone_membership",
    "newton_transform",
    "quotient_F",
    "quotient_gradient",
    "quotient_hessian_form",
]


class SymTriple(NamedTuple):
    """Eigenvalues of the Schouten endomorphism at one point."""

    lam1: float
    lam2: float
    lam3: float

    def check(self) -> "SymTriple":
        if not all(np.isfinite(self)):
            raise ValueError(f"non-finite eigenvalue in {tuple(self)}")
        return self


@dataclass(frozen=True)
class SymMatrix3:
    """Symmetric 3x3 matrix, each off-diagonal entry stored once."""

    xx: float
    yy: float
    zz: float
    xy: float = 0.0
    xz: float = 0.0
    yz: float = 0.0

    @classmethod
    def from_array(cls, a, atol: float = 0.0) -> "SymMatrix3":
        a = np.asarray(a, dtype=float)
        if a.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {a.shape}")
        if np.max(np.abs(a - a.T)) > atol:
            raise ValueError("matrix is not symmetric")
        return cls(a[0, 0], a[1, 1], a[2, 2], a[0, 1], a[0, 2], a[1, 2])

    @classmethod
    def diag(cls, d1: float, d2: float, d3: float) -> "SymMatrix3":
        return cls(d1, d2, d3)

    @classmethod
    def identity(cls) -> "SymMatrix3":
        return cls(1.0, 1.0, 1.0)

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                [self.xx, self.xy, self.xz],
                [self.xy, self.yy, self.yz],
                [self.xz, self.yz, self.zz],
            ]
        )

    def eigenvalues(self) -> SymTriple:
        return SymTriple(*np.linalg.eigvalsh(self.as_array()))


def _matrix(W) -> np.ndarray:
    if isinstance(W, SymMatrix3):
        return W.as_array()
    a = np.asarray(W, dtype=float)
    if a.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {a.shape}")
    return a


def _check_k(k: int) -> int:
    if k not in (1, 2, 3):
        raise ValueError(f"k must be 1, 2 or 3, got {k!r}")
    return k


def sigma_k(lams, k: int):
    """Elementary symmetric function of order ``k`` of three eigenvalues.

    ``lams`` may carry leading batch axes; the result then has the batch
    shape.
    """
    _check_k(k)
    lam = np.asarray(lams, dtype=float)
    l1, l2, l3 = lam[..., 0], lam[..., 1], lam[..., 2]
    if k == 1:
        out = l1 + l2 + l3
    elif k == 2:
        out = l1 * l2 + l1 * l3 + l2 * l3
    else:
        out = l1 * l2 * l3
    return float(out) if np.ndim(out) == 0 else out


def sigma_k_matrix(W, k: int) -> float:
    """sigma_k of the eigenvalues of ``W``, from trace invariants (no eigensolve)."""
    _check_k(k)
    a = _matrix(W)
    tr = np.trace(a)
    if k == 1:
        return float(tr)
    if k == 2:
        return float(0.5 * (tr * tr - np.sum(a * a.T)))
    return float(np.linalg.det(a))


def cone_membership(W, k: int) -> bool:
    """True iff sigma_j(W) > 0 for every j <= k (open Garding cone)."""
    _check_k(k)
    return all(sigma_k_matrix(W, j) > 0.0 for j in range(1, k + 1))


def newton_transform(W) -> SymMatrix3:
    """First Newton transformation ``sigma_1(W) I - W``."""
    a = _matrix(W)
    return SymMatrix3.from_array(np.trace(a) * np.eye(3) - a, atol=np.inf)


def _sigma1_positive(a: np.ndarray) -> float:
    s1 = float(np.trace(a))
    if not s1 > 0.0:
        raise DegenerateCone(f"sigma_1(W) = {s1!r} is not positive")
    return s1


def quotient_F(W, nu: float = 0.0) -> float:
    """``(sigma_2(W) - nu) / sigma_1(W)``."""
    a = _matrix(W)
    s1 = _sigma1_positive(a)
    return (sigma_k_matrix(a, 2) - nu) / s1


def quotient_gradient(W, nu: float = 0.0) -> SymMatrix3:
    """Matrix of first derivatives of :func:`quotient_F` in the entries of W.

    The directional derivative of F along a symmetric R is ``trace(G @ R)``.
    """
    a = _matrix(W)
    s1 = _sigma1_positive(a)
    s2 = sigma_k_matrix(a, 2)
    T = s1 * np.eye(3) - a
    G = (s1 * T - (s2 - nu) * np.eye(3)) / (s1 * s1)
    return SymMatrix3.from_array(G, atol=np.inf)


def quotient_hessian_form(W, R) -> float:
    """Second derivative of ``sigma_2/sigma_1`` at W in direction R (closed form).

    Equal to ``-|sigma_1(W) R - sigma_1(R) W|^2 / sigma_1(W)^3``; never
    positive on the first cone and zero exactly when R is a multiple of W.
    This is the ``nu = 0`` quotient; a positive nu only adds the further
    concave term ``-2 nu sigma_1(R)^2 / sigma_1(W)^3``.
    """
    a = _matrix(W)
    r = _matrix(R)
    s1 = _sigma1_positive(a)
    d = s1 * r - np.trace(r) * a
    return -float(np.sum(d * d)) / s1**3
