"""Method-of-lines integration of the normalised perturbed flow.

The flow is written in the weight-reduced form

    du/dt = (sigma_2(W) - nu) / sigma_1(W) + mu e^{-2u} + m,
    nu    = nu1 e^{-(4-eps) u} + nu2,

with the global coefficients ``nu1, nu2, mu`` taken from the current
integrals and ``m`` fixed by conservation of ``I1 = int sigma_1(g) dv(g)``.
Time stepping is classical RK4 with a parabolic step ``dt ~ h^2``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConeExit, FlowOverflow, NotAdmissible, NotInCone, RetryExhausted
from .functionals import FunctionalReport, lemma4_bounds, lemma6_bound, perturbation_coefficients
from .sphere_geometry import ConformalFactor, Grid, _derivs, schouten_eigenvalues

log = logging.getLogger(__name__)

__all__ = [
    "FlowConfig",
    "FlowState",
    "TimeSeries",
    "Verdict",
    "RunResult",
    "EpsSweepReport",
    "flow_rhs",
    "diffusivity",
    "initial_state",
    "step",
    "run",
    "eps_sweep",
]

NORMALIZATIONS = ("discrete", "quadrature")


@dataclass(frozen=True)
class FlowConfig:
    """Integration parameters.

    ``normalization`` selects how ``m`` is fixed: ``"discrete"`` makes the
    semi-discrete flow conserve the quadrature value of I1 exactly (m is
    taken against the exact gradient of the discrete I1); ``"quadrature"``
    imposes ``int sigma_1(g) du/dt dv(g) = 0`` in the midpoint rule, which
    conserves I1 only up to O(h^2).
    """

    eps: float
    dt_safety: float = 0.4
    t_max: float = 50.0
    residual_tol: float = 1e-7
    cone_floor: float = 0.0
    recompute_coeffs_per_stage: bool = True
    normalization: str = "discrete"
    require_admissible: bool = True
    max_retries: int = 20
    record_every: int = 10
    max_steps: int | None = None

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps!r}")
        if not 0.0 < self.dt_safety <= 1.0:
            raise ValueError(f"dt_safety must lie in (0, 1], got {self.dt_safety!r}")
        if not self.t_max > 0.0:
            raise ValueError("t_max must be positive")
        if not self.residual_tol > 0.0:
            raise ValueError("residual_tol must be positive")
        if self.cone_floor < 0.0:
            raise ValueError("cone_floor must be non-negative")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")


class _Coeffs(NamedTuple):
    nu1: float
    nu2: float
    mu: float
    k: float
    A: float
    A_half: float
    B: float


class _Eval(NamedTuple):
    """Everything known about one state after a full evaluation."""

    rhs: np.ndarray
    m: float
    coeffs: _Coeffs
    min_sigma1W: float
    residual: float
    diffusivity: float
    vol: float
    I1: float
    I2: float
    I4: float
    Ieps: float
    Eeps: float
    dEeps_dt: float


class _Kernel:
    """Pointwise and global pieces of the right-hand side on one grid."""

    def __init__(self, grid: Grid, eps: float, normalization: str = "discrete"):
        self.grid = grid
        self.eps = eps
        self.normalization = normalization
        self.h = grid.h
        self.w = grid.weights
        self.cot = grid.cot
        self.two_cot = 2.0 * grid.cot
        self.d1T = grid.d1.T.tocsr()
        self.d2T = grid.d2.T.tocsr()

    def _pointwise(self, u):
        up, upp = _derivs(u, self.h)
        lp, lt = schouten_eigenvalues(u, up, upp, self.cot)
        s1 = lp + 2.0 * lt
        s2 = lt * (2.0 * lp + lt)
        emu = np.exp(-u)
        eeps = np.exp(self.eps * u)
        return up, lp, lt, s1, s2, emu, eeps

    def _coeffs(self, s1, s2, emu, eeps):
        w, eps = self.w, self.eps
        eu = 1.0 / emu
        e3 = emu * emu * emu
        I1 = float(w @ (emu * s1))
        I2 = float(w @ (eu * s2))
        I4 = float(w @ eu)
        Ieps = float(w @ (e3 * eeps))
        c = perturbation_coefficients(I1, I2, I4, Ieps, eps)
        return _Coeffs(c.nu1, c.nu2, c.mu, c.k, c.A, c.A_half, c.B), I1, I2, I4, Ieps, float(w @ e3)

    def _m(self, u, up, s1, emu, pw, I1):
        a = self.w * emu
        if self.normalization == "quadrature":
            return -float(a @ (s1 * pw)) / I1
        # exact gradient of the discrete I1 with respect to the node values
        grad = -a * s1 + self.d2T @ a + self.d1T @ (a * (self.two_cot - up))
        return -float(grad @ pw) / float(grad.sum())

    def light(self, u, frozen: tuple[_Coeffs, float] | None = None):
        """Right-hand side and min sigma_1(W) only; used for inner RK stages.

        ``frozen = (coeffs, m)`` reuses the global coefficients of the step's
        first stage instead of recomputing them.
        """
        up, lp, lt, s1, s2, emu, eeps = self._pointwise(u)
        e2 = emu * emu
        if frozen is None:
            c, I1 = self._coeffs(s1, s2, emu, eeps)[:2]
            pw = (s2 - c.nu1 * e2 * e2 * eeps - c.nu2) / s1 + c.mu * e2
            m = self._m(u, up, s1, emu, pw, I1)
        else:
            c, m = frozen
            pw = (s2 - c.nu1 * e2 * e2 * eeps - c.nu2) / s1 + c.mu * e2
        return pw + m, float(s1.min())

    def full(self, u) -> _Eval:
        up, lp, lt, s1, s2, emu, eeps = self._pointwise(u)
        c, I1, I2, I4, Ieps, vol = self._coeffs(s1, s2, emu, eeps)
        e2 = emu * emu
        nu = c.nu1 * e2 * e2 * eeps + c.nu2
        pw = (s2 - nu) / s1 + c.mu * e2
        m = self._m(u, up, s1, emu, pw, I1)
        phi = pw / e2
        s1sq = s1 * s1
        f_psi = (s1 * (s1 - lp) - s2 + nu) / s1sq
        f_tau = (s1 * (s1 - lt) - s2 + nu) / s1sq
        eeps_val = c.A * c.B / (c.A_half**self.eps * I1 * I1) if c.A_half > 0 else math.nan
        num = float(self.w @ (e2 * emu * s1 * phi * phi))
        return _Eval(
            rhs=pw + m,
            m=m,
            coeffs=c,
            min_sigma1W=float(s1.min()),
            residual=float(np.max(np.abs(phi))),
            diffusivity=float(max(f_psi.max(), f_tau.max())),
            vol=vol,
            I1=I1,
            I2=I2,
            I4=I4,
            Ieps=Ieps,
            Eeps=eeps_val,
            dEeps_dt=eeps_val * num / (c.k * c.A),
        )


def flow_rhs(cf: ConformalFactor, eps: float, normalization: str = "discrete",
             require_admissible: bool = True) -> np.ndarray:
    """Pointwise ``du/dt`` at ``cf``.

    Raises :class:`NotInCone` when sigma_1(W) <= 0 somewhere and, unless
    ``require_admissible`` is false, :class:`NotAdmissible` outside C_(1,eps).
    """
    ev = _Kernel(cf.grid, eps, normalization).full(cf.u)
    _check_state(ev, require_admissible, eps)
    return ev.rhs


def diffusivity(cf: ConformalFactor, eps: float) -> float:
    """Largest second-order coefficient of the linearised flow (drives the step size).

    The radial entry ``F^{psi psi}`` multiplies ``u''``; near the poles the
    tangential entry acts on ``cot(psi) u' ~ u''`` as well, so the maximum
    of both is used.
    """
    return _Kernel(cf.grid, eps).full(cf.u).diffusivity


def _check_state(ev: _Eval, require_admissible: bool, eps: float):
    if not ev.min_sigma1W > 0.0:
        raise NotInCone(f"min sigma_1(W) = {ev.min_sigma1W!r} <= 0")
    if require_admissible and not (ev.coeffs.A > 0.0 and ev.coeffs.B > 0.0):
        raise NotAdmissible(
            f"state is not in C_(1,eps) for eps={eps}: "
            f"I2 - eps I4 = {ev.coeffs.A:.6g}, Ieps - eps I1^(3-eps) = {ev.coeffs.B:.6g}"
        )


@dataclass(frozen=True)
class FlowState:
    t: float
    cf: ConformalFactor
    report: FunctionalReport
    last_dt: float
    last_m: float
    residual: float = math.nan
    min_sigma1W: float = math.nan
    dEeps_dt_formula: float = math.nan
    diffusivity: float = math.nan


def _state_from_eval(t, cf, ev: _Eval, eps, last_dt, cone_margin=0.0) -> FlowState:
    c = ev.coeffs
    in_c1 = ev.min_sigma1W > cone_margin
    rep = FunctionalReport(
        vol=ev.vol,
        I1=ev.I1,
        I2=ev.I2,
        I4=ev.I4,
        Ieps=ev.Ieps,
        umax=float(cf.u.max()),
        E=ev.vol * ev.I2 / ev.I1**2,
        Eeps=ev.Eeps,
        r2=ev.I2 / ev.vol,
        s=ev.I2 / ev.I1,
        nu1=c.nu1,
        nu2=c.nu2,
        mu=c.mu,
        kcoef=c.k,
        in_C1=bool(in_c1),
        in_C1eps=bool(in_c1 and c.A > 0.0 and c.B > 0.0),
        eps=eps,
    )
    return FlowState(t, cf, rep, last_dt, ev.m, ev.residual, ev.min_sigma1W, ev.dEeps_dt, ev.diffusivity)


def initial_state(cf: ConformalFactor, config: FlowConfig) -> FlowState:
    ev = _Kernel(cf.grid, config.eps, config.normalization).full(cf.u)
    return _state_from_eval(0.0, cf, ev, config.eps, 0.0)


def _rk4(kernel: _Kernel, u, dt, k1, config: FlowConfig, frozen):
    floor = config.cone_floor
    stages = []
    k_prev = k1
    for a in (0.5, 0.5, 1.0):
        ui = u + a * dt * k_prev
        ki, mins = kernel.light(ui, frozen)
        if not np.all(np.isfinite(ki)):
            raise FlowOverflow("non-finite right-hand side inside a Runge-Kutta stage")
        if not mins > floor:
            raise ConeExit(f"stage min sigma_1(W) = {mins:.6g} <= floor {floor}")
        stages.append(ki)
        k_prev = ki
    k2, k3, k4 = stages
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _advance(kernel: _Kernel, state: FlowState, ev: _Eval, config: FlowConfig):
    """One accepted RK4 step with dt halving; returns the new state and its evaluation."""
    h = kernel.h
    dt = config.dt_safety * h * h / ev.diffusivity
    frozen = None
    if not config.recompute_coeffs_per_stage:
        frozen = (ev.coeffs, ev.m)
    u = state.cf.u
    for _ in range(config.max_retries):
        try:
            u_new = _rk4(kernel, u, dt, ev.rhs, config, frozen)
            if not np.all(np.isfinite(u_new)):
                raise FlowOverflow("non-finite conformal factor after a step")
            ev_new = kernel.full(u_new)
            if not ev_new.min_sigma1W > config.cone_floor:
                raise ConeExit(f"min sigma_1(W) = {ev_new.min_sigma1W:.6g} <= floor {config.cone_floor}")
            if not (math.isfinite(ev_new.I1) and math.isfinite(ev_new.diffusivity)):
                raise FlowOverflow("non-finite integrals after a step")
        except ConeExit as exc:
            log.debug("step rejected at t=%g, dt=%g: %s", state.t, dt, exc)
            dt *= 0.5
            continue
        cf_new = ConformalFactor(state.cf.grid, u_new)
        return _state_from_eval(state.t + dt, cf_new, ev_new, config.eps, dt), ev_new
    raise RetryExhausted(
        f"step rejected {config.max_retries} times at t={state.t:.6g}; last dt={dt * 2:.3e}"
    )


def step(state: FlowState, config: FlowConfig) -> FlowState:
    """Advance ``state`` by one RK4 step (with dt halving on cone exit)."""
    kernel = _Kernel(state.cf.grid, config.eps, config.normalization)
    ev = kernel.full(state.cf.u)
    _check_state(ev, config.require_admissible, config.eps)
    return _advance(kernel, state, ev, config)[0]


TIMESERIES_COLUMNS = (
    "t", "Eeps", "E", "I1", "I2", "vol", "min_sigma1W", "residual", "m",
    "nu1", "nu2", "mu", "kcoef", "dt", "dEeps_dt_formula", "dEeps_dt_numeric",
)


@dataclass
class TimeSeries:
    rows: list = field(default_factory=list)
    columns: tuple = TIMESERIES_COLUMNS

    def append(self, state: FlowState, numeric: float):
        r = state.report
        row = (
            state.t, r.Eeps, r.E, r.I1, r.I2, r.vol, state.min_sigma1W, state.residual,
            state.last_m, r.nu1, r.nu2, r.mu, r.kcoef, state.last_dt,
            state.dEeps_dt_formula, numeric,
        )
        if self.rows and not row[0] > self.rows[-1][0]:
            raise ValueError("time series rows must have strictly increasing t")
        self.rows.append(row)

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([row[j] for row in self.rows], dtype=float)

    def __len__(self):
        return len(self.rows)


class Verdict(str, Enum):
    CONVERGED = "Converged"
    TIMED_OUT = "TimedOut"
    ABORTED = "Aborted"


@dataclass
class RunResult:
    """Outcome of :func:`run` with the per-step monitors.

    The monitors are updated on every accepted step, not only on recorded
    rows: ``max_I1_drift`` is relative to the initial I1, ``max_Eeps_decrease``
    is the largest single-step drop of Eeps (0 when monotone).
    """

    series: TimeSeries
    final: FlowState
    verdict: Verdict
    reason: str = ""
    steps: int = 0
    max_I1_drift: float = 0.0
    max_Eeps_decrease: float = 0.0
    min_sigma1W: float = math.inf
    max_c2_norm: float = 0.0
    max_formula_gap: float = 0.0
    left_C1eps: bool = False

    @property
    def converged(self) -> bool:
        return self.verdict is Verdict.CONVERGED

    def summary(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "reason": self.reason,
            "steps": self.steps,
            "t_final": self.final.t,
            "residual_final": self.final.residual,
            "max_I1_drift": self.max_I1_drift,
            "max_Eeps_decrease": self.max_Eeps_decrease,
            "min_sigma1W": self.min_sigma1W,
            "max_c2_norm": self.max_c2_norm,
            "max_formula_gap": self.max_formula_gap,
            "left_C1eps": self.left_C1eps,
        }


def _c2_norm(cf: ConformalFactor) -> float:
    up, upp = _derivs(cf.u, cf.grid.h)
    return float(np.abs(cf.u).max() + np.abs(up).max() + np.abs(upp).max())


def run(cf0: ConformalFactor, config: FlowConfig,
        progress: Callable[[FlowState], None] | None = None) -> RunResult:
    """Integrate until the perturbed Euler-Lagrange residual drops below ``residual_tol``.

    Never raises for numerical trouble: cone exit after exhausted retries,
    overflow, or an inadmissible start end the run with verdict ``Aborted``
    and the reason, keeping the last good state as ``final``.
    """
    kernel = _Kernel(cf0.grid, config.eps, config.normalization)
    ev = kernel.full(cf0.u)
    state = _state_from_eval(0.0, cf0, ev, config.eps, 0.0)
    series = TimeSeries()
    series.append(state, math.nan)
    res = RunResult(series, state, Verdict.ABORTED, min_sigma1W=state.min_sigma1W,
                    max_c2_norm=_c2_norm(cf0))
    try:
        _check_state(ev, config.require_admissible, config.eps)
    except NotInCone as exc:
        res.reason = f"initial state rejected: {exc}"
        return res
    I1_0 = state.report.I1
    n = 0
    while True:
        if state.residual <= config.residual_tol:
            res.verdict = Verdict.CONVERGED
            break
        if state.t >= config.t_max or (config.max_steps is not None and n >= config.max_steps):
            res.verdict = Verdict.TIMED_OUT
            res.reason = f"t={state.t:.6g} residual={state.residual:.3e}"
            break
        try:
            new, ev = _advance(kernel, state, ev, config)
        except (RetryExhausted, FlowOverflow) as exc:
            res.reason = f"{type(exc).__name__}: {exc}"
            break
        n += 1
        numeric = (new.report.Eeps - state.report.Eeps) / new.last_dt
        res.max_Eeps_decrease = max(res.max_Eeps_decrease, state.report.Eeps - new.report.Eeps)
        res.max_I1_drift = max(res.max_I1_drift, abs(new.report.I1 - I1_0) / abs(I1_0))
        res.min_sigma1W = min(res.min_sigma1W, new.min_sigma1W)
        res.max_formula_gap = max(
            res.max_formula_gap,
            abs(numeric - 0.5 * (new.dEeps_dt_formula + state.dEeps_dt_formula)),
        )
        if not new.report.in_C1eps:
            res.left_C1eps = True
        state = new
        if n % config.record_every == 0 or state.residual <= config.residual_tol:
            res.max_c2_norm = max(res.max_c2_norm, _c2_norm(state.cf))
            series.append(state, numeric)
            if progress is not None:
                progress(state)
    if series.rows[-1][0] != state.t:
        series.append(state, math.nan if n == 0 else numeric)
    res.final = state
    res.steps = n
    return res


@dataclass
class EpsSweepReport:
    """Converged energies per eps with the bound ``(2/(C0 eps))^eps / (3(1-eps))``."""

    rows: list
    E_values: list
    E_trend_monotone: bool
    all_converged: bool
    all_E_below_third: bool
    all_bounds_hold: bool

    def as_dict(self) -> dict:
        return {
            "rows": self.rows,
            "E_values": self.E_values,
            "E_trend_monotone": self.E_trend_monotone,
            "all_converged": self.all_converged,
            "all_E_below_third": self.all_E_below_third,
            "all_bounds_hold": self.all_bounds_hold,
        }


def eps_sweep(cf0: ConformalFactor, eps_list, config: FlowConfig, tol_third: float = 1e-6,
              progress=None) -> tuple[EpsSweepReport, dict]:
    """Run the flow from ``cf0`` once per eps (largest eps first).

    Returns the report and the individual :class:`RunResult` objects keyed by eps.
    """
    rows, results = [], {}
    for eps in sorted(eps_list, reverse=True):
        res = run(cf0, replace(config, eps=float(eps)), progress)
        results[float(eps)] = res
        fin = res.final
        _, C0 = lemma4_bounds(fin.cf)
        bound = lemma6_bound(eps, C0)
        rows.append(
            {
                "eps": float(eps),
                "verdict": res.verdict.value,
                "reason": res.reason,
                "t_final": fin.t,
                "residual": fin.residual,
                "Eeps": fin.report.Eeps,
                "E": fin.report.E,
                "C0": C0,
                "lemma6_bound": bound,
                "bound_ok": bool(res.converged and fin.report.Eeps <= bound),
                "max_I1_drift": res.max_I1_drift,
                "max_Eeps_decrease": res.max_Eeps_decrease,
            }
        )
    E_values = [r["E"] for r in rows]
    d = np.diff(E_values)
    monotone = bool(np.all(d >= -1e-12) or np.all(d <= 1e-12))
    rep = EpsSweepReport(
        rows=rows,
        E_values=E_values,
        E_trend_monotone=monotone,
        all_converged=all(r["verdict"] == Verdict.CONVERGED.value for r in rows),
        all_E_below_third=all(r["E"] <= 1.0 / 3.0 + tol_third for r in rows),
        all_bounds_hold=all(r["bound_ok"] for r in rows),
    )
    return rep, results
