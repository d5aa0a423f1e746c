import math

import numpy as np
import pytest

from crackfield.core.lattice import Site
from crackfield.core.predictors import (
    PredictorSpec,
    SinclairSeries,
    div_H,
    flux_H,
    flux_H_polar,
    grad_u_hat0,
    omega,
    omega2_field,
    predictor_field,
    sinclair_eval,
    sinclair_field,
    u_hat0,
    u_hat1,
    u_hat1_pde_residual,
    u_hat2,
    u_hat2_profile,
)

SPEC = PredictorSpec(K=0.4)


def test_omega_values():
    assert omega((1.0, 0.0)) == pytest.approx((1.0, 0.0))
    assert omega((0.0, 4.0)) == pytest.approx((math.sqrt(2), math.sqrt(2)))
    w1, w2 = omega(Site(0, 0))
    assert w1 > 0 and w2 < 0


def test_omega_undefined_on_crack():
    with pytest.raises(ValueError):
        omega((-1.0, 0.0))
    with pytest.raises(ValueError):
        omega((0.0, 0.0))


def test_u_hat0_example():
    assert u_hat0((0.0, 1.0), SPEC) == pytest.approx(0.4 * math.sin(math.pi / 4))


def test_u_hat1_example():
    # 前置系数 -(0.4^3/64)(-18) = 0.018
    assert SPEC.u1_prefactor == pytest.approx(0.018)
    assert u_hat1((0.0, 1.0), SPEC) == pytest.approx(0.018 * math.sin(1.25 * math.pi) / 6)


def test_u_hat1_undefined_at_tip():
    with pytest.raises(ValueError):
        u_hat1((0.0, 0.0), SPEC)


def test_u_hat2_requires_c2():
    with pytest.raises(ValueError):
        u_hat2((1.0, 1.0), SPEC)
    assert u_hat2((0.0, 4.0), SPEC.with_c2(0.2)) == pytest.approx(0.2 * 0.5 * math.sin(math.pi / 4))
    with pytest.raises(ValueError):
        predictor_field(None, SPEC.with_order(2))


def test_spec_validation():
    with pytest.raises(ValueError):
        PredictorSpec(K=-0.1)
    with pytest.raises(ValueError):
        PredictorSpec(order=3)


def test_predictors_are_mirror_antisymmetric(medium_domain):
    spec = PredictorSpec(K=0.4, C2=0.1, order=2)
    for field in (predictor_field(medium_domain, spec), omega2_field(medium_domain)):
        np.testing.assert_allclose(field.mirror().values, -field.values, atol=1e-12)


def test_predictor_orders_are_cumulative(small_domain):
    spec = PredictorSpec(K=0.4, C2=0.1)
    u0 = predictor_field(small_domain, spec.with_order(0)).values
    u1 = predictor_field(small_domain, spec.with_order(1)).values
    u2 = predictor_field(small_domain, spec.with_order(2)).values
    np.testing.assert_allclose(u1 - u0, u_hat1((small_domain.x1, small_domain.x2), spec), atol=1e-14)
    np.testing.assert_allclose(u2 - u1, u_hat2((small_domain.x1, small_domain.x2), spec), atol=1e-14)


def test_sinclair_leading_terms():
    points = (np.array([3.0, -2.0, 0.5]), np.array([1.5, 4.0, -7.0]))
    np.testing.assert_allclose(sinclair_eval(points, SinclairSeries((0.4,))), u_hat0(points, SPEC))
    c1_only = sinclair_eval(points, SinclairSeries((0.0, 0.3)))
    np.testing.assert_allclose(c1_only, -0.3 * u_hat2_profile(points))


def test_sinclair_series_coefficients():
    series = SinclairSeries((0.4,)).with_coefficient(2, 0.1)
    assert series.coefficients == (0.4, 0.0, 0.1)
    assert series.length == 2


def test_sinclair_field_is_antisymmetric(small_domain):
    field = sinclair_field(small_domain, SinclairSeries((0.4, 0.2, -0.05)))
    np.testing.assert_allclose(field.mirror().values, -field.values, atol=1e-12)


def test_grad_u_hat0_against_finite_differences():
    x1, x2, h = 2.0, 3.0, 1e-6
    g1, g2 = grad_u_hat0((x1, x2), SPEC)
    assert g1 == pytest.approx((u_hat0((x1 + h, x2), SPEC) - u_hat0((x1 - h, x2), SPEC)) / (2 * h), rel=1e-7)
    assert g2 == pytest.approx((u_hat0((x1, x2 + h), SPEC) - u_hat0((x1, x2 - h), SPEC)) / (2 * h), rel=1e-7)


@pytest.mark.parametrize("theta", [0.3, 1.0, math.pi / 2, 2.5, -1.7])
def test_flux_polar_components(theta):
    r = 3.0
    point = (r * math.cos(theta), r * math.sin(theta))
    h1, h2 = flux_H(point, SPEC)
    g_r, g_theta = flux_H_polar(r, theta, SPEC)
    assert g_r == pytest.approx(h1 * math.cos(theta) + h2 * math.sin(theta), rel=1e-10)
    assert g_theta == pytest.approx(-h1 * math.sin(theta) + h2 * math.cos(theta), rel=1e-10)


def test_div_H_against_finite_differences():
    x1, x2, h = 3.0, 2.0, 1e-4
    fd = ((flux_H((x1 + h, x2), SPEC)[0] - flux_H((x1 - h, x2), SPEC)[0])
          + (flux_H((x1, x2 + h), SPEC)[1] - flux_H((x1, x2 - h), SPEC)[1])) / (2 * h)
    assert fd == pytest.approx(div_H((x1, x2), SPEC), rel=1e-6)


@pytest.mark.parametrize("point", [(3.0, 4.0), (-4.0, 3.0), (2.0, -5.0)])
def test_u_hat1_solves_continuum_equation(point):
    scale = abs(div_H(point, SPEC))
    coarse = abs(u_hat1_pde_residual(point, SPEC, 0.02))
    fine = abs(u_hat1_pde_residual(point, SPEC, 0.01))
    assert coarse < 1e-2 * scale
    assert 3.0 < coarse / fine < 5.0


def test_omega_squared_norm_is_radius(rng):
    x1, x2 = rng.uniform(-50.0, 50.0, size=(2, 200))
    w1, w2 = omega((x1, x2))
    np.testing.assert_allclose(w1 ** 2 + w2 ** 2, np.hypot(x1, x2), rtol=1e-14)


@pytest.mark.parametrize("theta", [math.pi, -math.pi])
def test_flux_has_no_normal_component_on_crack(theta):
    for r in (0.5, 3.0, 40.0):
        assert flux_H_polar(r, theta, SPEC)[1] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("side", [1.0, -1.0])
def test_u_hat1_satisfies_neumann_condition_on_crack(side):
    r, h = 4.0, 1e-3

    def along_circle(theta):
        return u_hat1((r * math.cos(theta), r * math.sin(theta)), SPEC)

    edge = side * math.pi
    # 单侧二阶差分，从区域内部逼近裂纹面
    derivative = (3 * along_circle(edge) - 4 * along_circle(edge - side * h)
                  + along_circle(edge - 2 * side * h)) / (2 * h)
    assert abs(derivative) < 1e-6
