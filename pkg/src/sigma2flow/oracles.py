"""Independent numerical oracles for the closed-form algebra.

Finite differences of ``sigma_2/sigma_1`` are evaluated in exact rational
arithmetic, so a 1e-5 step carries no round-off at all; fourth-order central
stencils keep the truncation error near ``h^4``.  Eigenvalues come from a
dense symmetric eigensolver.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .curvature_algebra import (
    quotient_gradient,
    quotient_hessian_form,
    sigma_k,
    sigma_k_matrix,
)

FD_STEP = 1e-5

# (offset, weight) pairs of the fourth-order central stencils
_D1 = ((-2, Fraction(1, 12)), (-1, Fraction(-2, 3)), (1, Fraction(2, 3)), (2, Fraction(-1, 12)))
_D2 = ((-2, Fraction(-1, 12)), (-1, Fraction(4, 3)), (0, Fraction(-5, 2)), (1, Fraction(4, 3)), (2, Fraction(-1, 12)))


def _scaled_ints(*mats):
    """Common power-of-two scaling that turns every entry into an exact integer."""
    flat = [float(x) for A in mats for x in np.asarray(A, float).ravel()]
    shift = max(x.as_integer_ratio()[1].bit_length() - 1 for x in flat)
    ints = [int(Fraction(x) * (1 << shift)) for x in flat]
    return [np.array(ints[9 * i:9 * i + 9], dtype=object).reshape(3, 3) for i in range(len(mats))], shift


def _line_poly(W, R):
    # sigma_1 and sigma_2 of W + tR as exact polynomials in t
    (Wi, Ri), shift = _scaled_ints(W, R)
    a, b = int(np.trace(Wi)), int(np.trace(Ri))
    ww, wr, rr = int((Wi * Wi.T).sum()), int((Wi * Ri.T).sum()), int((Ri * Ri.T).sum())
    q1, q2 = Fraction(1, 1 << shift), Fraction(1, 1 << (2 * shift))
    return a * q1, b * q1, Fraction(a * a - ww, 2) * q2, (a * b - wr) * q2, Fraction(b * b - rr, 2) * q2


def _stencil(W, R, nu, h, weights, order):
    a, b, c, d, e = _line_poly(W, R)
    h, nu = Fraction(h), Fraction(float(nu))
    acc = Fraction(0)
    for k, w in weights:
        t = k * h
        acc += w * (c + t * (d + t * e) - nu) / (a + t * b)
    return float(acc / h**order)


def fd_directional(W, R, nu=0.0, h=FD_STEP) -> float:
    """Central difference of ``F(W + tR)`` at ``t = 0``."""
    return _stencil(W, R, nu, h, _D1, 1)


def fd_gradient(W, nu=0.0, h=FD_STEP) -> np.ndarray:
    """Entrywise gradient by central differences along symmetric unit directions.

    Off-diagonal entries are perturbed in symmetric pairs, so the directional
    derivative there is twice the matrix entry.
    """
    G = np.zeros((3, 3))
    for i in range(3):
        for j in range(i, 3):
            E = np.zeros((3, 3))
            E[i, j] = E[j, i] = 1.0
            d = fd_directional(W, E, nu, h)
            G[i, j] = G[j, i] = d if i == j else 0.5 * d
    return G


def fd_hessian_form(W, R, h=FD_STEP) -> float:
    """Second central difference of ``sigma_2/sigma_1`` along R."""
    return _stencil(W, R, 0.0, h, _D2, 2)


def random_symmetric(rng: np.random.Generator) -> np.ndarray:
    A = rng.standard_normal((3, 3))
    return 0.5 * (A + A.T)


def random_cone1(rng: np.random.Generator) -> np.ndarray:
    """A random symmetric matrix with positive trace (rejection sampling)."""
    while True:
        W = random_symmetric(rng)
        if np.trace(W) > 0.0:
            return W


def sigma_via_eigen(W, k: int) -> float:
    return sigma_k(np.linalg.eigvalsh(np.asarray(W, float)), k)


def algebra_check(n: int = 100, seed: int = 0, rtol: float = 1e-6) -> dict:
    """Closed-form gradient and Hessian form vs finite differences on random data.

    Returns the worst relative errors and a ``passed`` flag.
    """
    rng = np.random.Generator(np.random.Philox(seed))
    worst_grad = worst_hess = worst_sigma = 0.0
    for _ in range(n):
        W = random_cone1(rng)
        R = random_symmetric(rng)
        nu = float(rng.uniform(0.0, 2.0))
        G = quotient_gradient(W, nu).as_array()
        G_fd = fd_gradient(W, nu)
        floor = 1e-8 * np.max(np.abs(G))
        worst_grad = max(worst_grad, float(np.max(np.abs(G - G_fd) / np.maximum(np.abs(G), floor))))
        H = quotient_hessian_form(W, R)
        H_fd = fd_hessian_form(W, R)
        worst_hess = max(worst_hess, abs(H - H_fd) / abs(H))
        for k in (1, 2, 3):
            a, b = sigma_k_matrix(W, k), sigma_via_eigen(W, k)
            worst_sigma = max(worst_sigma, abs(a - b) / max(abs(b), 1e-300))
    return {
        "n": n,
        "max_rel_err_gradient": worst_grad,
        "max_rel_err_hessian": worst_hess,
        "max_rel_err_sigma": worst_sigma,
        "passed": bool(worst_grad <= rtol and worst_hess <= rtol),
    }
