"""Global functionals of a conformal metric on the round 3-sphere.

All integrals are midpoint quadratures against ``dv(g0)``, using the
conformal weights ``dv(g) = e^{-3u} dv(g0)``, ``sigma_1(g) = e^{2u} sigma_1(W)``
and ``sigma_2(g) = e^{4u} sigma_2(W)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple

import numpy as np

from .errors import NotAdmissible, NotInCone
from .sphere_geometry import ConformalFactor, curvatures_of_g, schouten_field

__all__ = [
    "FunctionalReport",
    "Integrals",
    "PerturbationCoefficients",
    "integrals",
    "kcoef",
    "perturbation_coefficients",
    "perturbed_energy",
    "report",
    "coefficient_limits",
    "el_residual_new",
    "el_residual_perturbed",
    "perturbed_el_field",
    "dlt_sides",
    "DLTSides",
    "lemma4_bounds",
    "lemma3_ratio",
    "lemma6_bound",
    "conjecture_functionals",
]


class Integrals(NamedTuple):
    vol: float
    I1: float
    I2: float
    I4: float
    Ieps: float
    umax: float
    min_sigma1W: float


def integrals(cf: ConformalFactor, eps: float = 0.0) -> Integrals:
    sf = schouten_field(cf)
    w = cf.grid.weights
    emu = sf.exp_mu
    return Integrals(
        vol=float(w @ sf.exp_m3u),
        I1=float(w @ (emu * sf.sigma1)),
        I2=float(w @ (sf.exp_u * sf.sigma2)),
        I4=float(w @ sf.exp_u),
        Ieps=float(w @ np.exp((eps - 3.0) * cf.u)),
        umax=float(np.max(cf.u)),
        min_sigma1W=float(np.min(sf.sigma1)),
    )


def kcoef(A: float, A_half: float, eps: float) -> float:
    """``k = A_half / (A_half - eps A)`` with ``A = I2 - eps I4``, ``A_half = I2 - eps/2 I4``."""
    return A_half / (A_half - eps * A)


class PerturbationCoefficients(NamedTuple):
    A: float
    A_half: float
    B: float
    k: float
    nu1: float
    nu2: float
    mu: float


def perturbation_coefficients(I1, I2, I4, Ieps, eps) -> PerturbationCoefficients:
    """Coefficients of the perturbed Euler-Lagrange equation from the global integrals.

    ``A = I2 - eps I4``, ``A_half = I2 - eps/2 I4`` and
    ``B = Ieps - eps I1^(3-eps)``; the formulas are meaningful on C_{1,eps}
    (all three positive) but are evaluated wherever they are finite.
    """
    A = I2 - eps * I4
    A_half = I2 - 0.5 * eps * I4
    B = Ieps - eps * I1 ** (3.0 - eps)
    k = kcoef(A, A_half, eps)
    nu1 = (3.0 - eps) * k * A / B
    nu2 = eps * k * (1.0 - eps * A / (2.0 * A_half))
    mu = k * A * (2.0 / I1 + eps * (3.0 - eps) * I1 ** (2.0 - eps) / B)
    return PerturbationCoefficients(A, A_half, B, k, nu1, nu2, mu)


def perturbed_energy(I1, I2, I4, Ieps, eps) -> float:
    A = I2 - eps * I4
    A_half = I2 - 0.5 * eps * I4
    B = Ieps - eps * I1 ** (3.0 - eps)
    if not A_half > 0.0:
        return math.nan
    return A * B / (A_half**eps * I1**2)


@dataclass(frozen=True)
class FunctionalReport:
    """Every global quantity of one metric at one instant.

    Field names double as JSON keys and CSV headers.
    """

    vol: float
    I1: float
    I2: float
    I4: float
    Ieps: float
    umax: float
    E: float
    Eeps: float
    r2: float
    s: float
    nu1: float
    nu2: float
    mu: float
    kcoef: float
    in_C1: bool
    in_C1eps: bool
    eps: float

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def _membership(it: Integrals, coeffs: PerturbationCoefficients, margin: float):
    in_c1 = it.min_sigma1W > margin
    in_c1eps = bool(in_c1 and coeffs.A > 0.0 and coeffs.B > 0.0)
    return bool(in_c1), in_c1eps


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps!r}")
    return eps


def report(cf: ConformalFactor, eps: float, cone_margin: float = 0.0) -> FunctionalReport:
    """All functionals of ``cf`` for the perturbation parameter ``eps``.

    Membership flags use strict inequalities; ``cone_margin`` tightens the
    C_1 test to ``min sigma_1(W) > cone_margin``.
    """
    eps = _check_eps(eps)
    it = integrals(cf, eps)
    c = perturbation_coefficients(it.I1, it.I2, it.I4, it.Ieps, eps)
    in_c1, in_c1eps = _membership(it, c, cone_margin)
    return FunctionalReport(
        vol=it.vol,
        I1=it.I1,
        I2=it.I2,
        I4=it.I4,
        Ieps=it.Ieps,
        umax=it.umax,
        E=it.vol * it.I2 / it.I1**2,
        Eeps=perturbed_energy(it.I1, it.I2, it.I4, it.Ieps, eps),
        r2=it.I2 / it.vol,
        s=it.I2 / it.I1,
        nu1=c.nu1,
        nu2=c.nu2,
        mu=c.mu,
        kcoef=c.k,
        in_C1=in_c1,
        in_C1eps=in_c1eps,
        eps=eps,
    )


def _pointwise_g(cf: ConformalFactor):
    sf = schouten_field(cf)
    if not np.min(sf.sigma1) > 0.0:
        raise NotInCone(f"min sigma_1(W) = {np.min(sf.sigma1)!r} <= 0")
    s1g, s2g = curvatures_of_g(sf, cf)
    return sf, s1g, s2g


def el_residual_new(cf: ConformalFactor) -> float:
    """Sup-norm of ``(sigma_2(g) - 3 r_2) / sigma_1(g) + 2 s``."""
    sf, s1g, s2g = _pointwise_g(cf)
    it = integrals(cf)
    r2, s = it.I2 / it.vol, it.I2 / it.I1
    return float(np.max(np.abs((s2g - 3.0 * r2) / s1g + 2.0 * s)))


def perturbed_el_field(cf: ConformalFactor, eps: float, require_admissible: bool = True):
    """Pointwise left side of the perturbed Euler-Lagrange equation, in g-terms."""
    eps = _check_eps(eps)
    sf, s1g, s2g = _pointwise_g(cf)
    rep = report(cf, eps)
    if require_admissible and not rep.in_C1eps:
        raise NotAdmissible(f"metric is not in C_(1,eps) for eps={eps}")
    e4 = sf.exp_u**4
    return (s2g - rep.nu1 * np.exp(eps * cf.u) - rep.nu2 * e4) / s1g + rep.mu


def el_residual_perturbed(cf: ConformalFactor, eps: float, require_admissible: bool = True) -> float:
    return float(np.max(np.abs(perturbed_el_field(cf, eps, require_admissible))))


def coefficient_limits(cf: ConformalFactor, eps_values, strict: bool = True) -> list[dict]:
    """Distance of ``(nu1, nu2, mu)`` from their eps -> 0 limits ``(3 r2, 0, 2 s)``.

    One row per eps, in the given order; ``ratio_nu1`` is the quotient of
    successive ``|nu1 - 3 r2|`` values (about 1/ratio of the eps values when
    the approach is linear).  With ``strict`` an eps outside C_(1,eps) raises.
    """
    rows = []
    prev = None
    for eps in eps_values:
        rep = report(cf, eps)
        if not rep.in_C1:
            raise NotInCone("metric is not in C_1")
        if strict and not rep.in_C1eps:
            raise NotAdmissible(f"metric is not in C_(1,eps) for eps={eps}")
        d_nu1 = abs(rep.nu1 - 3.0 * rep.r2)
        rows.append(
            {
                "eps": rep.eps,
                "in_C1eps": rep.in_C1eps,
                "nu1": rep.nu1,
                "three_r2": 3.0 * rep.r2,
                "err_nu1": d_nu1,
                "mu": rep.mu,
                "two_s": 2.0 * rep.s,
                "err_mu": abs(rep.mu - 2.0 * rep.s),
                "nu2": rep.nu2,
                "ratio_nu1": (prev / d_nu1) if prev is not None and d_nu1 > 0 else math.nan,
            }
        )
        prev = d_nu1
    return rows


class DLTSides(NamedTuple):
    lhs: float
    rhs: float
    identity_residual: float


def dlt_sides(cf: ConformalFactor) -> DLTSides:
    """Both sides of the De Lellis-Topping inequality with constant 9.

    The Ricci endomorphism is ``A = e^{2u} W + sigma_1(g) I`` (n = 3,
    R = 4 sigma_1(g)).  ``identity_residual`` measures
    ``(rhs - lhs) - 16/(3 vol) (I1^2 - 3 vol I2)``, which vanishes identically.
    """
    sf = schouten_field(cf)
    s1g, _ = curvatures_of_g(sf, cf)
    e2 = sf.exp_u**2
    a_psi = e2 * sf.lam_psi + s1g
    a_tau = e2 * sf.lam_tau + s1g
    R = 4.0 * s1g
    w = cf.grid.weights * sf.exp_m3u
    vol = float(w.sum())
    I1 = float(w @ s1g)
    I2 = float(w @ (e2 * e2 * sf.sigma2))
    Rbar = 4.0 * I1 / vol

    def tracefree_sq(c):
        return (a_psi - c) ** 2 + 2.0 * (a_tau - c) ** 2

    lhs = float(w @ tracefree_sq(Rbar / 3.0))
    rhs = 9.0 * float(w @ tracefree_sq(R / 3.0))
    resid = abs((rhs - lhs) - 16.0 / (3.0 * vol) * (I1 * I1 - 3.0 * vol * I2))
    return DLTSides(lhs, rhs, resid)


def lemma4_bounds(cf: ConformalFactor):
    """``(I4 <= e^{max u} vol(g0), I4 / e^{max u})``; the ratio is the empirical C0."""
    it = integrals(cf)
    cap = math.exp(it.umax)
    vol0 = float(cf.grid.weights.sum())
    return bool(it.I4 <= cap * vol0), it.I4 / cap


def lemma3_ratio(rep: FunctionalReport):
    """``(nu1 / mu, 1 / (eps I1^(2-eps)))``: the first never exceeds the second on C_(1,eps)."""
    return rep.nu1 / rep.mu, 1.0 / (rep.eps * rep.I1 ** (2.0 - rep.eps))


def lemma6_bound(eps: float, C0: float) -> float:
    """``(2 / (C0 eps))^eps / (3 (1 - eps))``; tends to 1/3 as eps -> 0."""
    return (2.0 / (C0 * eps)) ** eps / (3.0 * (1.0 - eps))


def conjecture_functionals(cf: ConformalFactor):
    """``(J, J2, yamabe_quotient) = (I1 I2, vol^(1/3) I2, I1 / vol^(1/3))``."""
    it = integrals(cf)
    v3 = it.vol ** (1.0 / 3.0)
    return it.I1 * it.I2, v3 * it.I2, it.I1 / v3
