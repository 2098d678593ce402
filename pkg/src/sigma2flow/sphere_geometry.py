"""Axisymmetric discretisation of the round unit 3-sphere.

A conformal factor ``u(psi)`` represents the metric ``g = exp(-2u) g0`` with
``g0 = dpsi^2 + sin(psi)^2 g_{S^2}``.  Nodes sit at half-integer points
``psi_i = (i - 1/2) h`` so the coordinate poles are never sampled; smoothness
at the poles is imposed through even reflection of ``u`` (``u'(0) = u'(pi) = 0``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .curvature_algebra import sigma_k

__all__ = [
    "Grid",
    "ConformalFactor",
    "SchoutenField",
    "SPHERE_SCHOUTEN",
    "derivatives",
    "schouten_field",
    "curvatures_of_g",
    "quadrature",
    "warped_oracle",
    "oracle_curvatures",
]

#: Schouten eigenvalue of the round unit S^3: Ric = 2 g, R = 6, S = Ric - R/4 g.
SPHERE_SCHOUTEN = 0.5


@dataclass(frozen=True)
class Grid:
    n_cells: int

    def __post_init__(self):
        if int(self.n_cells) != self.n_cells or self.n_cells < 16:
            raise ValueError(f"n_cells must be an integer >= 16, got {self.n_cells!r}")

    @property
    def h(self) -> float:
        return np.pi / self.n_cells

    @cached_property
    def nodes(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.h

    @cached_property
    def sin2(self) -> np.ndarray:
        return np.sin(self.nodes) ** 2

    @cached_property
    def cot(self) -> np.ndarray:
        return 1.0 / np.tan(self.nodes)

    @cached_property
    def weights(self) -> np.ndarray:
        """Midpoint weights of the round volume form, ``4 pi sin^2(psi) h``."""
        return 4.0 * np.pi * self.sin2 * self.h

    @cached_property
    def d1(self) -> sp.csr_matrix:
        """First-derivative stencil with even reflection, as a sparse matrix."""
        n, h = self.n_cells, self.h
        D = sp.lil_matrix((n, n))
        for i in range(n):
            lo, hi = max(i - 1, 0), min(i + 1, n - 1)
            D[i, hi] += 0.5 / h
            D[i, lo] -= 0.5 / h
        return D.tocsr()

    @cached_property
    def d2(self) -> sp.csr_matrix:
        n, h = self.n_cells, self.h
        D = sp.lil_matrix((n, n))
        for i in range(n):
            lo, hi = max(i - 1, 0), min(i + 1, n - 1)
            D[i, hi] += 1.0 / h**2
            D[i, lo] += 1.0 / h**2
            D[i, i] -= 2.0 / h**2
        return D.tocsr()


@dataclass(frozen=True)
class ConformalFactor:
    """Grid samples of ``u`` with ``g = exp(-2u) g0``."""

    grid: Grid
    u: np.ndarray = field(repr=False)

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        if u.shape != (self.grid.n_cells,):
            raise ValueError(f"u has shape {u.shape}, expected ({self.grid.n_cells},)")
        if not np.all(np.isfinite(u)):
            raise ValueError("u must be finite at every node")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @classmethod
    def constant(cls, grid: Grid, c: float = 0.0) -> "ConformalFactor":
        return cls(grid, np.full(grid.n_cells, float(c)))

    @classmethod
    def from_cos_poly(cls, grid: Grid, coeffs) -> "ConformalFactor":
        """``u(psi) = sum_j coeffs[j] cos(psi)^j``; smooth on S^3 for any coefficients."""
        c = np.asarray(coeffs, dtype=float)
        return cls(grid, np.polynomial.polynomial.polyval(np.cos(grid.nodes), c))

    def shifted(self, c: float) -> "ConformalFactor":
        return ConformalFactor(self.grid, self.u + c)


def _derivs(u: np.ndarray, h: float):
    g = np.empty(u.size + 2)
    g[1:-1] = u
    g[0], g[-1] = u[0], u[-1]
    up = (g[2:] - g[:-2]) / (2.0 * h)
    upp = (g[2:] - 2.0 * u + g[:-2]) / (h * h)
    return up, upp


def derivatives(cf: ConformalFactor):
    """Second-order central differences ``(u', u'')`` with ghost nodes by even reflection."""
    return _derivs(cf.u, cf.grid.h)


@dataclass(frozen=True)
class SchoutenField:
    """Per-node eigenvalues of W in a g0-orthonormal frame.

    The radial eigenvalue ``lam_psi`` is simple, the tangential ``lam_tau``
    has multiplicity two.
    """

    lam_psi: np.ndarray
    lam_tau: np.ndarray
    exp_u: np.ndarray
    exp_mu: np.ndarray
    exp_m3u: np.ndarray

    @property
    def triples(self) -> np.ndarray:
        return np.stack([self.lam_psi, self.lam_tau, self.lam_tau], axis=-1)

    @property
    def sigma1(self) -> np.ndarray:
        return self.lam_psi + 2.0 * self.lam_tau

    @property
    def sigma2(self) -> np.ndarray:
        return self.lam_tau * (2.0 * self.lam_psi + self.lam_tau)


def schouten_eigenvalues(u, up, upp, cot):
    lam_psi = upp + 0.5 * up * up + SPHERE_SCHOUTEN
    lam_tau = cot * up - 0.5 * up * up + SPHERE_SCHOUTEN
    return lam_psi, lam_tau


def schouten_field(cf: ConformalFactor) -> SchoutenField:
    """Assemble ``W = Hess u + du (x) du - |du|^2/2 g0 + S_{g0}`` node by node."""
    up, upp = derivatives(cf)
    lam_psi, lam_tau = schouten_eigenvalues(cf.u, up, upp, cf.grid.cot)
    emu = np.exp(-cf.u)
    return SchoutenField(lam_psi, lam_tau, 1.0 / emu, emu, emu**3)


def curvatures_of_g(sf: SchoutenField, cf: ConformalFactor):
    """Pointwise ``(sigma_1(g), sigma_2(g))``; ``g^{-1} = e^{2u} g0^{-1}`` scales eigenvalues by ``e^{2u}``."""
    e2 = sf.exp_u**2
    return e2 * sf.sigma1, e2 * e2 * sf.sigma2


def quadrature(f, where, weight="background") -> float:
    """Midpoint rule on the grid.

    ``where`` is a :class:`Grid` or :class:`ConformalFactor`.  ``weight`` is
    ``"background"`` (dv(g0)), ``"conformal"`` (dv(g) = e^{-3u} dv(g0)) or a
    number ``p`` for the weight ``e^{p u} dv(g0)``.
    """
    if isinstance(where, ConformalFactor):
        grid, u = where.grid, where.u
    else:
        grid, u = where, None
    f = np.broadcast_to(np.asarray(f, dtype=float), (grid.n_cells,))
    if isinstance(weight, str) and weight == "background":
        return float(grid.weights @ f)
    if u is None:
        raise ValueError("a conformal weight needs a ConformalFactor")
    p = -3.0 if (isinstance(weight, str) and weight == "conformal") else float(weight)
    return float(grid.weights @ (f * np.exp(p * u)))


def _reflected_derivs(f: np.ndarray, h: float, parity: int):
    g = np.empty(f.size + 2)
    g[1:-1] = f
    g[0], g[-1] = parity * f[0], parity * f[-1]
    return (g[2:] - g[:-2]) / (2.0 * h), (g[2:] - 2.0 * f + g[:-2]) / (h * h)


def warped_oracle(cf: ConformalFactor):
    """Ricci endomorphism eigenvalues ``(ric_radial, ric_tangential)`` of g, computed directly.

    Writes ``g = a(psi)^2 dpsi^2 + b(psi)^2 g_{S^2}`` with ``a = e^{-u}`` and
    ``b = a sin(psi)``, differentiates ``a`` itself by finite differences, and
    applies the rotationally symmetric formulas in arc length ``r``:
    ``Ric_rr = -2 b_rr / b`` and ``Ric_tt = -b_rr / b + (1 - b_r^2) / b^2``.
    No Schouten transformation law is used, so agreement with
    :func:`schouten_field` is a genuine O(h^2) consistency check.
    """
    psi = cf.grid.nodes
    s, c = np.sin(psi), np.cos(psi)
    a = np.exp(-cf.u)
    ap, app = _reflected_derivs(a, cf.grid.h, parity=+1)
    b = a * s
    bp = ap * s + a * c
    bpp = app * s + 2.0 * ap * c - a * s
    b_r = bp / a
    b_rr = (bpp * a - bp * ap) / a**3
    ric_rad = -2.0 * b_rr / b
    # 1 - b_r^2 cancels to O(h^2) near the poles; expand it to keep precision.
    one_minus = (1.0 - b_r) * (1.0 + b_r)
    ric_tan = -b_rr / b + one_minus / b**2
    return ric_rad, ric_tan


def oracle_curvatures(cf: ConformalFactor):
    """``(sigma_1(g), sigma_2(g))`` from :func:`warped_oracle` via ``S = Ric - (R/4) g``."""
    ric_rad, ric_tan = warped_oracle(cf)
    R = ric_rad + 2.0 * ric_tan
    lams = np.stack([ric_rad, ric_tan, ric_tan], axis=-1) - (R / 4.0)[:, None]
    return sigma_k(lams, 1), sigma_k(lams, 2)
