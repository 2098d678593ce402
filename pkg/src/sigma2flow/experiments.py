"""Scenarios, deterministic metric sampling and the batch studies.

Scenario files are line-oriented ``key=value`` text::

    # comments and blank lines are ignored
    name=bump
    coeffs=0,0.2          # u(psi) = 0 + 0.2 cos(psi)
    grid_n=256
    eps=0.2,0.1,0.05
    t_max=200

Random metrics use numpy's Philox counter-based generator.  The 64-bit seed
is the Philox key and the sample index is placed in the top counter word, so
sample ``i`` of seed ``s`` is reproducible on its own, independent of how
many other samples were drawn.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ParseError, RejectionExhausted, ValidationError
from .functionals import (
    conjecture_functionals,
    dlt_sides,
    lemma3_ratio,
    lemma4_bounds,
    report,
)
from .oracles import algebra_check
from .sphere_geometry import (
    ConformalFactor,
    Grid,
    curvatures_of_g,
    oracle_curvatures,
    schouten_field,
    warped_oracle,
)

MAX_DEGREE = 12
CONFIG_KEYS = ("name", "coeffs", "grid_n", "eps", "dt_safety", "t_max", "residual_tol")
OVERRIDE_KEYS = ("dt_safety", "t_max", "residual_tol")


# --------------------------------------------------------------------------- scenarios


@dataclass(frozen=True)
class Scenario:
    """Initial data ``u = sum_j coeffs[j] cos(psi)^j`` plus grid, eps values and flow overrides."""

    name: str = "unnamed"
    coeffs: tuple = (0.0,)
    grid_n: int = 256
    eps: tuple = (0.05,)
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.coeffs) == 0:
            raise ValidationError("coeffs", "at least one coefficient is required")
        if len(self.coeffs) - 1 > MAX_DEGREE:
            raise ValidationError("coeffs", f"degree {len(self.coeffs) - 1} exceeds {MAX_DEGREE}")
        if not all(math.isfinite(c) for c in self.coeffs):
            raise ValidationError("coeffs", "coefficients must be finite")
        n = self.grid_n
        if n < 16 or n & (n - 1):
            raise ValidationError("grid_n", f"must be a power of two >= 16, got {n}")
        if not self.eps:
            raise ValidationError("eps", "at least one value is required")
        for e in self.eps:
            if not 0.0 < e < 1.0:
                raise ValidationError("eps", f"values must lie in (0, 1), got {e}")
        for key, val in self.overrides.items():
            if key not in OVERRIDE_KEYS:
                raise ValidationError(key, "not a flow override")
            if not val > 0.0:
                raise ValidationError(key, "must be positive")

    @property
    def grid(self) -> Grid:
        return Grid(self.grid_n)

    def initial(self, grid_n: int | None = None) -> ConformalFactor:
        return ConformalFactor.from_cos_poly(Grid(grid_n or self.grid_n), self.coeffs)


def _float_list(key, text):
    try:
        vals = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ValidationError(key, f"expected a comma-separated list of numbers, got {text!r}") from None
    return vals


def _scalar(key, text, kind):
    try:
        return kind(text)
    except ValueError:
        raise ValidationError(key, f"expected {kind.__name__}, got {text!r}") from None


def parse_config(text: str) -> Scenario:
    """Parse the ``key=value`` scenario format.

    Raises
    ------
    ParseError
        Malformed line, unknown or repeated key (carries the line number).
    ValidationError
        A value of the right shape that violates a constraint (names the field).
    """
    seen: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep:
            raise ParseError(lineno, f"expected key=value, got {raw.strip()!r}")
        if key not in CONFIG_KEYS:
            raise ParseError(lineno, f"unknown key {key!r}")
        if key in seen:
            raise ParseError(lineno, f"duplicate key {key!r}")
        if not val:
            raise ParseError(lineno, f"empty value for {key!r}")
        seen[key] = val

    kwargs: dict = {}
    if "name" in seen:
        kwargs["name"] = seen["name"]
    if "coeffs" in seen:
        kwargs["coeffs"] = _float_list("coeffs", seen["coeffs"])
    if "grid_n" in seen:
        kwargs["grid_n"] = _scalar("grid_n", seen["grid_n"], int)
    if "eps" in seen:
        kwargs["eps"] = _float_list("eps", seen["eps"])
    kwargs["overrides"] = {k: _scalar(k, seen[k], float) for k in OVERRIDE_KEYS if k in seen}
    return Scenario(**kwargs)


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return parse_config(fh.read())


# --------------------------------------------------------------------------- sampling


def philox(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator keyed by ``seed`` with ``stream`` in the top counter word."""
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, 0, 0, stream]))


class Sample(NamedTuple):
    cf: ConformalFactor
    coeffs: np.ndarray
    rejections: int


def draw_sample(seed: int, amplitude: float, degree: int, grid: Grid, stream: int = 0,
                max_rejections: int = 1000) -> Sample:
    """Draw ``a_j ~ U[-amplitude, amplitude] / (j+1)^2`` until ``min sigma_1(W) > 0``."""
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"degree must lie in [0, {MAX_DEGREE}]")
    rng = philox(seed, stream)
    decay = 1.0 / (np.arange(degree + 1) + 1.0) ** 2
    for rejected in range(max_rejections + 1):
        coeffs = rng.uniform(-amplitude, amplitude, size=degree + 1) * decay
        cf = ConformalFactor.from_cos_poly(grid, coeffs)
        if np.min(schouten_field(cf).sigma1) > 0.0:
            return Sample(cf, coeffs, rejected)
    raise RejectionExhausted(
        f"no C_1 sample after {max_rejections} rejections (seed={seed}, stream={stream})"
    )


def sample_metric(seed: int, amplitude: float, degree: int, grid: Grid, stream: int = 0,
                  max_rejections: int = 1000) -> ConformalFactor:
    """A deterministic random metric in C_1; see :func:`draw_sample`."""
    return draw_sample(seed, amplitude, degree, grid, stream, max_rejections).cf


# --------------------------------------------------------------------------- audit


EQUALITY_TOL = 1e-10 * math.pi**4

AUDIT_COLUMNS = (
    "kind", "seed", "stream", "rejections", "in_C1", "in_C1eps", "E", "dlt_lhs", "dlt_rhs",
    "identity_residual", "scale", "equality", "J", "J2", "J_ratio", "J2_ratio", "yamabe_quotient",
    "lemma4_upper_ok", "C0", "lemma3_eps", "lemma3_applicable", "lemma3_ratio", "lemma3_bound",
    "lemma3_ok",
)


@dataclass
class AuditReport:
    """Per-sample rows (keys :data:`AUDIT_COLUMNS`), a summary and the violations found."""

    samples: list
    summary: dict
    violations: list

    @property
    def passed(self) -> bool:
        return not self.violations

    def rows(self):
        return [[s[c] for c in AUDIT_COLUMNS] for s in self.samples]

    def as_dict(self) -> dict:
        return {"summary": self.summary, "violations": self.violations, "samples": self.samples}


def _round_reference(grid: Grid):
    J, J2, _ = conjecture_functionals(ConformalFactor.constant(grid))
    return J, J2


def audit_metric(cf: ConformalFactor, lemma3_eps: float = 1e-4, tol_E: float = 1e-6,
                 tol_dlt: float = 1e-8, reference=None) -> dict:
    """All audit quantities for one metric, with pass flags."""
    rep = report(cf, lemma3_eps)
    sides = dlt_sides(cf)
    scale = max(abs(sides.lhs), abs(sides.rhs), 1.0)
    J, J2, yq = conjecture_functionals(cf)
    J_ref, J2_ref = reference or _round_reference(cf.grid)
    upper_ok, C0 = lemma4_bounds(cf)
    if rep.in_C1eps:
        ratio, bound = lemma3_ratio(rep)
        l3_ok = bool(ratio <= bound * (1.0 + 1e-12))
    else:
        ratio = bound = math.nan
        l3_ok = None
    return {
        "in_C1": rep.in_C1,
        "in_C1eps": rep.in_C1eps,
        "E": rep.E,
        "dlt_lhs": sides.lhs,
        "dlt_rhs": sides.rhs,
        "identity_residual": sides.identity_residual,
        "scale": scale,
        "equality": bool(abs(sides.lhs) <= EQUALITY_TOL and abs(sides.rhs) <= EQUALITY_TOL),
        "J": J,
        "J2": J2,
        "J_ratio": J / J_ref,
        "J2_ratio": J2 / J2_ref,
        "yamabe_quotient": yq,
        "lemma4_upper_ok": upper_ok,
        "C0": C0,
        "lemma3_eps": lemma3_eps,
        "lemma3_applicable": rep.in_C1eps,
        "lemma3_ratio": ratio,
        "lemma3_bound": bound,
        "lemma3_ok": l3_ok,
        "dlt_ok": bool(sides.lhs <= sides.rhs + tol_dlt * scale),
        "identity_ok": bool(sides.identity_residual <= tol_dlt * scale),
        "E_ok": bool(rep.E <= 1.0 / 3.0 + tol_E),
    }


def audit(n_samples: int = 100, seed: int = 0, amplitude: float = 0.3, degree: int = 4,
          grid_n: int = 256, lemma3_eps: float = 1e-4, include_round: bool = True,
          tol_E: float = 1e-6, tol_dlt: float = 1e-8, max_rejections: int = 1000) -> AuditReport:
    """Check the integral inequalities on random C_1 metrics.

    Sample ``i`` is drawn from stream ``i`` of ``seed``.  With
    ``include_round`` the round metric is audited as an extra first row, where
    both sides vanish and the equality flag must be raised.

    A sample is a violation when ``lhs > rhs + tol_dlt*scale``, the identity
    residual exceeds ``tol_dlt*scale``, ``E > 1/3 + tol_E``, the volume bound
    ``I4 <= e^{max u} vol(g0)`` fails, or the coefficient ratio bound fails
    where it applies (``scale = max(|lhs|, |rhs|, 1)``).
    """
    grid = Grid(grid_n)
    reference = _round_reference(grid)
    rows, violations = [], []

    def add(kind, stream, sample):
        row = {"kind": kind, "seed": seed, "stream": stream, "rejections": sample.rejections}
        row.update(audit_metric(sample.cf, lemma3_eps, tol_E, tol_dlt, reference))
        checks = {
            "dlt": row.pop("dlt_ok"),
            "identity": row.pop("identity_ok"),
            "E": row.pop("E_ok"),
            "lemma4": row["lemma4_upper_ok"],
            "lemma3": row["lemma3_ok"] is not False,
        }
        for name, ok in checks.items():
            if not ok:
                violations.append({"stream": stream, "kind": kind, "check": name})
        rows.append(row)

    if include_round:
        add("round", -1, Sample(ConformalFactor.constant(grid), np.zeros(1), 0))
    for i in range(n_samples):
        add("random", i, draw_sample(seed, amplitude, degree, grid, i, max_rejections))

    rand = [r for r in rows if r["kind"] == "random"]
    draws = sum(r["rejections"] + 1 for r in rand)
    summary = {
        "n_samples": len(rows),
        "n_random": len(rand),
        "acceptance_rate": len(rand) / draws if draws else math.nan,
        "amplitude": amplitude,
        "degree": degree,
        "grid_n": grid_n,
        "seed": seed,
        "max_E": max(r["E"] for r in rows) if rows else math.nan,
        "max_dlt_excess": max((r["dlt_lhs"] - r["dlt_rhs"]) / r["scale"] for r in rows) if rows else math.nan,
        "max_identity_residual": max(r["identity_residual"] / r["scale"] for r in rows) if rows else math.nan,
        "n_equality": sum(r["equality"] for r in rows),
        "n_lemma3_applicable": sum(r["lemma3_applicable"] for r in rows),
        "min_C0": min(r["C0"] for r in rows) if rows else math.nan,
        "max_J2_ratio": max(r["J2_ratio"] for r in rows) if rows else math.nan,
        "min_J2_ratio": min(r["J2_ratio"] for r in rows) if rows else math.nan,
        "n_violations": len(violations),
    }
    return AuditReport(rows, summary, violations)


# --------------------------------------------------------------------------- refinement


REFINE_COLUMNS = ("n_cells", "err_sigma1", "err_sigma2", "err", "ratio")


@dataclass
class RefineReport:
    rows: list
    passed: bool
    final_error: float

    def as_dict(self) -> dict:
        return {"rows": self.rows, "passed": self.passed, "final_error": self.final_error}


def oracle_disagreement(cf: ConformalFactor):
    """Max-norm relative gap ``(sigma_1, sigma_2)`` between the Schouten and warped-product routes."""
    sf = schouten_field(cf)
    s1, s2 = curvatures_of_g(sf, cf)
    o1, o2 = oracle_curvatures(cf)
    rel = lambda a, b: float(np.max(np.abs(a - b)) / np.max(np.abs(b)))
    return rel(s1, o1), rel(s2, o2)


def refine_study(coeffs=(0.0, 0.3), grids=(128, 256, 512, 1024), max_error: float = 1e-4,
                 ratio_band: tuple = (3.5, 4.5)) -> RefineReport:
    """Oracle disagreement under grid doubling; second order means ratios near 4."""
    rows, prev = [], None
    for n in grids:
        e1, e2 = oracle_disagreement(ConformalFactor.from_cos_poly(Grid(n), coeffs))
        err = max(e1, e2)
        rows.append({
            "n_cells": n, "err_sigma1": e1, "err_sigma2": e2, "err": err,
            "ratio": prev / err if prev is not None else math.nan,
        })
        prev = err
    ratios = [r["ratio"] for r in rows[1:]]
    ok = rows[-1]["err"] < max_error and all(ratio_band[0] <= q <= ratio_band[1] for q in ratios)
    return RefineReport(rows, bool(ok), rows[-1]["err"])


def oracle_check(seed: int = 0, n: int = 100) -> dict:
    """Algebra oracles on random matrices plus the curvature oracle study."""
    alg = algebra_check(n=n, seed=seed)
    ref = refine_study()
    const = ConformalFactor.constant(Grid(64), 0.3)
    ric = np.concatenate(warped_oracle(const))
    const_ok = bool(np.max(np.abs(ric - 2.0 * math.exp(0.6))) <= 1e-10 * math.exp(0.6))
    return {
        "algebra": alg,
        "refine": ref.as_dict(),
        "constant_ricci_ok": const_ok,
        "passed": bool(alg["passed"] and ref.passed and const_ok),
    }
