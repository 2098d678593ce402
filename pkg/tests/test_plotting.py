import pytest

from sigma2flow.experiments import audit, refine_study
from sigma2flow.flow_engine import FlowConfig, eps_sweep, run
from sigma2flow.plotting import plot_audit, plot_refine, plot_sweep, plot_timeseries
from sigma2flow.sphere_geometry import ConformalFactor, Grid

PNG = b"\x89PNG"


@pytest.fixture(scope="module")
def short_run():
    cf = ConformalFactor.from_cos_poly(Grid(32), [-0.03, 0, 0.12])
    return run(cf, FlowConfig(eps=5e-4, max_steps=50))


def test_timeseries_figure(tmp_path, short_run):
    p = plot_timeseries(short_run.series.columns, short_run.series.rows, tmp_path / "t.png", "x")
    assert p.read_bytes()[:4] == PNG


def test_sweep_figure_with_abort(tmp_path):
    cf = ConformalFactor.from_cos_poly(Grid(32), [0, 0.2])
    rep, _ = eps_sweep(cf, [0.1, 0.05], FlowConfig(eps=0.1))
    assert plot_sweep(rep.rows, tmp_path / "s.png").read_bytes()[:4] == PNG


def test_audit_and_refine_figures(tmp_path):
    rep = audit(5, grid_n=32)
    assert plot_audit(rep.samples, tmp_path / "a.png").read_bytes()[:4] == PNG
    ref = refine_study(grids=(32, 64))
    assert plot_refine(ref.rows, tmp_path / "r.png").read_bytes()[:4] == PNG
