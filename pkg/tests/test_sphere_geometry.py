import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sigma2flow.sphere_geometry import (
    SPHERE_SCHOUTEN,
    ConformalFactor,
    Grid,
    curvatures_of_g,
    derivatives,
    oracle_curvatures,
    quadrature,
    schouten_field,
    warped_oracle,
)

TWO_PI2 = 2 * math.pi**2


@pytest.mark.parametrize("n", [16, 17, 64, 256, 1000])
def test_grid_nodes_strictly_inside(n):
    g = Grid(n)
    assert g.nodes[0] > 0 and g.nodes[-1] < math.pi
    assert g.h * n == pytest.approx(math.pi, rel=1e-15)
    np.testing.assert_allclose(np.diff(g.nodes), g.h, rtol=1e-12)


@pytest.mark.parametrize("n", [0, 8, 15, 16.5])
def test_grid_rejects_small_or_fractional(n):
    with pytest.raises(ValueError):
        Grid(n)


def test_conformal_factor_validation(grid256):
    with pytest.raises(ValueError):
        ConformalFactor(grid256, np.zeros(10))
    u = np.zeros(256)
    u[3] = np.inf
    with pytest.raises(ValueError):
        ConformalFactor(grid256, u)


def test_conformal_factor_is_read_only(grid256):
    src = np.zeros(256)
    cf = ConformalFactor(grid256, src)
    src[0] = 1.0
    assert cf.u[0] == 0.0
    with pytest.raises(ValueError):
        cf.u[0] = 2.0


def test_from_cos_poly(grid256):
    cf = ConformalFactor.from_cos_poly(grid256, [0.1, 0.2, -0.3])
    c = np.cos(grid256.nodes)
    np.testing.assert_allclose(cf.u, 0.1 + 0.2 * c - 0.3 * c**2, rtol=1e-14, atol=1e-16)


@pytest.mark.parametrize("c", [0.0, -1.3, 2.5])
def test_derivatives_of_constant(grid256, c):
    up, upp = derivatives(ConformalFactor.constant(grid256, c))
    assert np.all(up == 0.0) and np.all(upp == 0.0)


def test_derivatives_of_cos_second_order():
    errs = []
    for n in (128, 256, 512):
        g = Grid(n)
        up, upp = derivatives(ConformalFactor.from_cos_poly(g, [0, 1]))
        psi = g.nodes
        errs.append(max(np.abs(up + np.sin(psi)).max(), np.abs(upp + np.cos(psi)).max()))
    assert errs[-1] < 1e-4
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)


def test_reflection_first_node_derivative_decays():
    vals = []
    for n in (64, 128, 256):
        g = Grid(n)
        up, _ = derivatives(ConformalFactor.from_cos_poly(g, [0, 0, 1]))
        vals.append(abs(up[0]))
    # u'(h/2) = -sin(h) -> 0, and the reflected stencil tracks it to O(h^2)
    for n, v in zip((64, 128, 256), vals):
        h = math.pi / n
        assert abs(v - math.sin(h)) < 2 * h**2
    assert vals[0] > vals[1] > vals[2]


def test_round_schouten_value_from_ricci():
    # Ric = 2 g and R = 6 on the unit 3-sphere, S = Ric - R/4 g
    assert 2.0 - 6.0 / 4.0 == SPHERE_SCHOUTEN


@pytest.mark.parametrize("c", [0.0, 0.7, -2.0])
def test_schouten_of_constant_is_half(grid256, c):
    sf = schouten_field(ConformalFactor.constant(grid256, c))
    assert np.all(sf.triples == 0.5)


@pytest.mark.parametrize("c", [0.0, 0.4, -1.0])
def test_curvatures_of_constant(grid256, c):
    cf = ConformalFactor.constant(grid256, c)
    s1, s2 = curvatures_of_g(schouten_field(cf), cf)
    np.testing.assert_allclose(s1, 1.5 * math.exp(2 * c), rtol=1e-15)
    np.testing.assert_allclose(s2, 0.75 * math.exp(4 * c), rtol=1e-15)


@given(st.lists(st.floats(-0.3, 0.3), min_size=1, max_size=6))
def test_newton_inequality_pointwise(coeffs):
    cf = ConformalFactor.from_cos_poly(Grid(64), coeffs)
    s1, s2 = curvatures_of_g(schouten_field(cf), cf)
    assert np.all(s2 <= s1**2 / 3 + 1e-12 * (1 + s1**2))


def test_two_equal_tangential_eigenvalues(grid256):
    sf = schouten_field(ConformalFactor.from_cos_poly(grid256, [0, 0.2, 0.1]))
    t = sf.triples
    assert np.array_equal(t[:, 1], t[:, 2])


@pytest.mark.parametrize("n", [16, 33, 256, 1024])
def test_quadrature_of_one(n):
    assert quadrature(1.0, Grid(n)) == pytest.approx(TWO_PI2, rel=1e-12)


def test_quadrature_round_sigma1(round256):
    sf = schouten_field(round256)
    assert quadrature(sf.sigma1, round256) == pytest.approx(3 * math.pi**2, rel=1e-12)


@pytest.mark.parametrize("c", [-0.5, 0.3])
def test_quadrature_conformal_constant(grid256, c):
    cf = ConformalFactor.constant(grid256, c)
    assert quadrature(1.0, cf, "conformal") == pytest.approx(math.exp(-3 * c) * TWO_PI2, rel=1e-12)
    assert quadrature(1.0, cf, 1.0) == pytest.approx(math.exp(c) * TWO_PI2, rel=1e-12)


def test_quadrature_conformal_needs_factor(grid256):
    with pytest.raises(ValueError):
        quadrature(1.0, grid256, "conformal")


@pytest.mark.parametrize("c", [0.0, 0.5, -0.8])
def test_warped_oracle_constant(grid256, c):
    rad, tan = warped_oracle(ConformalFactor.constant(grid256, c))
    # Ric endomorphism of e^{-2c} g0 is 2 e^{2c}
    np.testing.assert_allclose(rad, 2 * math.exp(2 * c), rtol=1e-10)
    np.testing.assert_allclose(tan, 2 * math.exp(2 * c), rtol=1e-10)


def _oracle_gap(n, coeffs):
    cf = ConformalFactor.from_cos_poly(Grid(n), coeffs)
    s1, s2 = curvatures_of_g(schouten_field(cf), cf)
    o1, o2 = oracle_curvatures(cf)
    return max(np.abs(s1 - o1).max() / np.abs(o1).max(), np.abs(s2 - o2).max() / np.abs(o2).max())


@pytest.mark.parametrize("coeffs", [[0, 0.3], [0.1, -0.2, 0.15], [0, 0, 0, 0.1]])
def test_oracle_agreement_second_order(coeffs):
    e = [_oracle_gap(n, coeffs) for n in (128, 256, 512, 1024)]
    assert e[-1] < 1e-4
    for a, b in zip(e, e[1:]):
        assert a / b == pytest.approx(4.0, rel=0.1)
