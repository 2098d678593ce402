import math
from dataclasses import replace

import numpy as np
import pytest

from sigma2flow.errors import NotAdmissible, NotInCone, RetryExhausted
from sigma2flow.flow_engine import (
    TIMESERIES_COLUMNS,
    FlowConfig,
    TimeSeries,
    Verdict,
    diffusivity,
    eps_sweep,
    flow_rhs,
    initial_state,
    run,
    step,
)
from sigma2flow.functionals import report
from sigma2flow.sphere_geometry import ConformalFactor, Grid, curvatures_of_g, schouten_field

# Inside the admissible set.  Reflection-symmetric data avoid the slowly decaying
# conformal (cos psi) mode, so the runs finish at t ~ 1.
EPS = 5e-4
SYMMETRIC = [-0.03, 0.0, 0.12]


@pytest.fixture(scope="module")
def bench64():
    cf0 = ConformalFactor.from_cos_poly(Grid(64), SYMMETRIC)
    return cf0, run(cf0, FlowConfig(eps=EPS, record_every=1))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(eps=0.0),
        dict(eps=1.0),
        dict(eps=0.1, dt_safety=0.0),
        dict(eps=0.1, dt_safety=1.5),
        dict(eps=0.1, t_max=0.0),
        dict(eps=0.1, residual_tol=0.0),
        dict(eps=0.1, cone_floor=-1.0),
        dict(eps=0.1, normalization="other"),
        dict(eps=0.1, record_every=0),
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        FlowConfig(**kwargs)


def test_config_defaults():
    cfg = FlowConfig(eps=0.1)
    assert (cfg.dt_safety, cfg.residual_tol, cfg.cone_floor) == (0.4, 1e-7, 0.0)
    assert cfg.recompute_coeffs_per_stage and cfg.max_retries == 20


@pytest.mark.parametrize("c", [0.0, 0.5, -1.2])
@pytest.mark.parametrize("normalization", ["discrete", "quadrature"])
def test_constants_are_fixed_points(c, normalization):
    cf = ConformalFactor.constant(Grid(128), c)
    assert np.max(np.abs(flow_rhs(cf, EPS, normalization))) <= 1e-12


@pytest.mark.parametrize("eps", [0.05, 0.2])
def test_constants_fixed_outside_admissible_set(eps):
    cf = ConformalFactor.constant(Grid(128), 0.3)
    with pytest.raises(NotAdmissible):
        flow_rhs(cf, eps)
    assert np.max(np.abs(flow_rhs(cf, eps, require_admissible=False))) <= 1e-12


def test_one_step_from_constant_is_noop():
    cf = ConformalFactor.constant(Grid(64), 0.2)
    cfg = FlowConfig(eps=EPS)
    new = step(initial_state(cf, cfg), cfg)
    assert new.t > 0
    assert np.max(np.abs(new.cf.u - cf.u)) <= 1e-12


def test_rhs_requires_cone():
    cf = ConformalFactor.from_cos_poly(Grid(64), [0, 0, 0, 3.0])
    with pytest.raises(NotInCone):
        flow_rhs(cf, EPS)


def test_quadrature_normalization_identity():
    cf = ConformalFactor.from_cos_poly(Grid(128), [0.05, 0.1, -0.08])
    rhs = flow_rhs(cf, EPS, normalization="quadrature")
    s1g, _ = curvatures_of_g(schouten_field(cf), cf)
    w = cf.grid.weights * np.exp(-3 * cf.u)
    assert abs(w @ (s1g * rhs)) <= 1e-12 * (w @ (s1g * np.abs(rhs)))


def test_one_step_conserves_I1():
    cf = ConformalFactor.from_cos_poly(Grid(128), SYMMETRIC)
    cfg = FlowConfig(eps=EPS)
    s0 = initial_state(cf, cfg)
    s1 = step(s0, cfg)
    assert abs(s1.report.I1 - s0.report.I1) / s0.report.I1 <= 1e-9


def test_diffusivity_positive():
    cf = ConformalFactor.from_cos_poly(Grid(64), [0, 0.1, 0.05])
    assert diffusivity(cf, EPS) > 0


def test_retry_exhausted_on_impossible_floor():
    cf = ConformalFactor.from_cos_poly(Grid(32), SYMMETRIC)
    cfg = FlowConfig(eps=EPS, cone_floor=100.0)
    with pytest.raises(RetryExhausted, match="20 times"):
        step(initial_state(cf, cfg), cfg)
    res = run(cf, cfg)
    assert res.verdict is Verdict.ABORTED and "RetryExhausted" in res.reason


def test_inadmissible_start_is_aborted():
    cf = ConformalFactor.from_cos_poly(Grid(64), [0, 0.2])
    res = run(cf, FlowConfig(eps=0.05))
    assert res.verdict is Verdict.ABORTED
    assert "not in C_(1,eps)" in res.reason
    assert len(res.series) == 1 and res.steps == 0


def test_round_converges_at_time_zero():
    res = run(ConformalFactor.constant(Grid(64)), FlowConfig(eps=EPS))
    assert res.converged and res.steps == 0
    assert len(res.series) == 1 and res.series.rows[0][0] == 0.0


def test_timed_out_verdict():
    cf = ConformalFactor.from_cos_poly(Grid(32), SYMMETRIC)
    res = run(cf, FlowConfig(eps=EPS, max_steps=5))
    assert res.verdict is Verdict.TIMED_OUT and res.steps == 5


def test_timeseries_columns_and_ordering(bench64):
    _, res = bench64
    assert res.series.columns == TIMESERIES_COLUMNS
    assert np.all(np.diff(res.series.column("t")) > 0)
    ts = TimeSeries()
    ts.append(res.final, 0.0)
    with pytest.raises(ValueError):
        ts.append(res.final, 0.0)


def test_benchmark_converges(bench64):
    _, res = bench64
    assert res.converged
    assert res.final.residual <= 1e-7
    assert report(res.final.cf, EPS).in_C1eps


def test_benchmark_conserves_I1(bench64):
    _, res = bench64
    assert res.max_I1_drift <= 1e-12


def test_benchmark_monotone(bench64):
    _, res = bench64
    assert res.max_Eeps_decrease <= 1e-9
    assert np.all(np.diff(res.series.column("Eeps")) >= -1e-9)
    assert np.all(res.series.column("dEeps_dt_formula") >= 0)


def test_benchmark_cone_and_limit(bench64):
    _, res = bench64
    assert res.min_sigma1W > 0 and not res.left_C1eps
    assert res.final.report.E <= 1 / 3 + 1e-6
    assert res.final.report.E == pytest.approx(1 / 3, abs=1e-6)


def test_derivative_formula_matches_difference_quotient(bench64):
    # gap ~ C (dt + h^2); halving h should cut it by about 4
    _, res64 = bench64
    cf32 = ConformalFactor.from_cos_poly(Grid(32), SYMMETRIC)
    res32 = run(cf32, FlowConfig(eps=EPS))
    scale = np.nanmax(np.abs(res64.series.column("dEeps_dt_formula")))
    assert res64.max_formula_gap <= 0.05 * scale
    assert res32.max_formula_gap / res64.max_formula_gap == pytest.approx(4, rel=0.25)


def test_frozen_coefficients_ablation():
    cf = ConformalFactor.from_cos_poly(Grid(64), SYMMETRIC)
    res = run(cf, FlowConfig(eps=EPS, recompute_coeffs_per_stage=False))
    assert res.converged
    assert 1e-12 < res.max_I1_drift <= 1e-4


def test_eps_sweep_admissible():
    cf = ConformalFactor.from_cos_poly(Grid(32), SYMMETRIC)
    rep, results = eps_sweep(cf, [2.5e-4, 5e-4], FlowConfig(eps=EPS))
    assert [r["eps"] for r in rep.rows] == [5e-4, 2.5e-4]
    assert rep.all_converged and rep.all_E_below_third
    assert all(r["lemma6_bound"] > 1 / 3 for r in rep.rows)
    assert rep.all_bounds_hold
    assert set(results) == {5e-4, 2.5e-4}


def test_eps_sweep_reports_inadmissible():
    cf = ConformalFactor.from_cos_poly(Grid(32), [0, 0.2])
    rep, _ = eps_sweep(cf, [0.1], FlowConfig(eps=0.1))
    assert not rep.all_converged
    assert rep.rows[0]["verdict"] == "Aborted" and not rep.rows[0]["bound_ok"]


def test_outside_admissible_set_energy_is_negative_and_falls():
    # With enforcement off the equations still integrate, but Eeps < 0 there and
    # the same derivative formula makes it decrease.
    cf = ConformalFactor.from_cos_poly(Grid(32), [0, 0.2])
    res = run(cf, FlowConfig(eps=0.05, require_admissible=False, max_steps=300))
    eeps = res.series.column("Eeps")
    assert res.verdict is Verdict.TIMED_OUT
    assert np.all(eeps < 0)
    assert res.max_Eeps_decrease > 1e-9
    assert np.all(res.series.column("dEeps_dt_formula") < 0)
    assert res.max_I1_drift <= 1e-12
