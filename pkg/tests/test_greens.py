import math

import numpy as np
import pytest

from crackfield.core.analysis import shell_decay
from crackfield.core.lattice import LatticeDomain, Site, divergence, grad_field, mirror
from crackfield.core.predictors import omega2_field
from crackfield.core.greens import (
    CutoffProfile,
    g_hat0,
    g_hat0_field,
    g_hat0_mixed_bound,
    g_hat1,
    g_hat1_amplitude,
    g_hat1_m,
    g_hat1_mu_field,
    g_hat1_s,
    g_hom_diff,
    g_hom_diff_trapezoid,
    gbar1_diagnostic,
    gbar1_scaling,
    greens_symmetry_report,
    mu_cutoff,
    solve_crack_green,
)
from crackfield.core.solver import SolveSettings

EULER_GAMMA = 0.5772156649015329


def test_homogeneous_green_known_values():
    assert g_hom_diff((0, 0)) == 0.0
    assert g_hom_diff((1, 0)) == pytest.approx(0.25, abs=1e-10)
    assert g_hom_diff((0, -1)) == pytest.approx(0.25, abs=1e-10)
    assert g_hom_diff((1, 1)) == pytest.approx(1.0 / math.pi, abs=1e-8)


def test_homogeneous_green_symmetries():
    value = g_hom_diff((3, 1))
    for m in [(1, 3), (-3, 1), (3, -1), (-1, -3)]:
        assert g_hom_diff(m) == pytest.approx(value, abs=1e-12)


def test_homogeneous_green_far_field():
    # G(0) - G(m) ~ (log|m| + γ + 3/2 log 2) / 2π
    expected = (math.log(10.0) + EULER_GAMMA + 1.5 * math.log(2.0)) / (2 * math.pi)
    assert g_hom_diff((10, 0)) == pytest.approx(expected, abs=1e-3)


def test_trapezoid_cross_check():
    assert g_hom_diff_trapezoid((2, 1), n=256) == pytest.approx(g_hom_diff((2, 1)), abs=5e-3)
    with pytest.raises(ValueError):
        g_hom_diff_trapezoid((1, 0), n=7)


def test_cutoff_profile():
    eta = CutoffProfile()
    assert eta(0.0) == 1.0 and eta(0.5) == 1.0
    assert eta(1.0) == 0.0 and eta(3.0) == 0.0
    assert eta(0.75) == pytest.approx(0.5)
    t = np.linspace(0, 1.2, 121)
    assert np.all(np.diff(eta(t)) <= 0)
    assert eta.derivative(0.5) == 0.0 and eta.derivative(1.0) == 0.0
    with pytest.raises(ValueError):
        CutoffProfile(alpha=0.0)


def test_mu_cutoff_scale():
    # |s|^{1/2} = 8：|m| <= 4 时为1，|m| >= 8 时为0
    assert mu_cutoff((3.0, 0.0), (0.0, 64.0)) == 1.0
    assert mu_cutoff((0.0, 9.0), (0.0, 64.0)) == 0.0


def test_g_hat0_is_symmetric_and_singular_on_diagonal():
    m, s = Site(3, 4), Site(-5, 2)
    assert g_hat0(m, s) == pytest.approx(g_hat0(s, m), rel=1e-14)
    assert g_hat0(mirror(m), mirror(s)) == pytest.approx(g_hat0(m, s), rel=1e-14)
    with pytest.raises(ValueError):
        g_hat0(m, m)


def test_g_hat0_field_matches_pointwise(small_domain):
    s = Site(1, 3)
    field = g_hat0_field(small_domain, s)
    assert field.at(s) == 0.0
    for m in small_domain.sites()[::7]:
        if m != s:
            assert field.at(m) == pytest.approx(g_hat0(m, s), rel=1e-12)


def test_g_hat1_s_value():
    assert g_hat1_s((0.0, 4.0)) == pytest.approx(-math.sqrt(2) / 2)
    assert g_hat1_s(Site(1, 1)) == pytest.approx(-2 * math.sin(math.pi / 8) / math.sqrt(math.sqrt(0.5)))


def test_crack_green_residual(tight):
    domain = LatticeDomain(24)
    column = solve_crack_green(Site(1, 6), domain, tight)
    assert column.residual_linf() <= 1e-9
    outside = ~domain.interior
    np.testing.assert_array_equal(column.values.values[outside], column.g_hat0.values[outside])
    assert np.all(column.remainder.values[outside] == 0.0)


def test_crack_green_source_checks():
    domain = LatticeDomain(24)
    with pytest.raises(ValueError):
        solve_crack_green(Site(1, 14), domain)
    with pytest.raises(ValueError):
        solve_crack_green(Site(40, 1), domain)


def test_crack_green_mirror_symmetry(tight):
    report = greens_symmetry_report(LatticeDomain(24), [Site(2, 5), Site(-3, 3), Site(4, -2)], tight)
    assert report["mirror_asymmetry"] <= 1e-8
    assert np.isfinite(report["max_asymmetry"])


def test_g_hat1_m_is_odd(medium_domain, tight):
    field = g_hat1_m(medium_domain, tight)
    np.testing.assert_allclose(field.mirror().values, -field.values, atol=1e-9)
    assert not np.any(field.values[~medium_domain.interior])


def test_g_hat1_product_structure(medium_domain, tight):
    s = Site(2, 5)
    field = g_hat1(medium_domain, s, tight)
    lhs = divergence(grad_field(field)).values
    rhs = g_hat1_s(s) * (-divergence(grad_field(omega2_field(medium_domain)))).values
    interior = medium_domain.interior
    scale = np.max(np.abs(rhs[interior]))
    assert np.max(np.abs(lhs - rhs)[interior]) <= 1e-8 * scale


def test_g_hat1_amplitude_is_log_kernel_slope():
    # ω(m) = (ε, ±ε) 处的中心差分给出 Ĝ0(·, s) 在 ω2 方向的斜率
    s = Site(3, 20)
    eps = 1e-3
    upper, lower = (0.0, 2 * eps * eps), (0.0, -2 * eps * eps)
    slope = (g_hat0(upper, s) - g_hat0(lower, s)) / (2 * eps)
    assert slope == pytest.approx(g_hat1_amplitude(s), rel=1e-2)
    assert g_hat1_amplitude(s) == pytest.approx(-g_hat1_s(s) / (4 * math.pi))


def test_g_hat1_mu_field_is_localised(medium_domain, tight):
    s = Site(1, 10)
    g1m = g_hat1_m(medium_domain, tight)
    field = g_hat1_mu_field(medium_domain, s, g1m)
    far = medium_domain.r >= math.sqrt(s.radius)
    near = medium_domain.r <= 0.5 * math.sqrt(s.radius)
    assert not np.any(field.values[far])
    np.testing.assert_allclose(field.values[near], g_hat1_amplitude(s) * g1m.values[near], rtol=1e-14)


def test_mixed_derivative_bound_is_scale_invariant():
    pairs = [(Site(2 * k, k), Site(-k, 2 * k)) for k in (2, 4, 8, 16)]
    ratios = g_hat0_mixed_bound(pairs)["ratios"]
    assert max(ratios) / min(ratios) < 3.0
    with pytest.raises(ValueError):
        g_hat0_mixed_bound([(Site(3, 3), Site(4, 3))])


def test_gbar1_diagnostic_requires_far_source(medium_domain):
    with pytest.raises(ValueError):
        gbar1_diagnostic(Site(1, 5), medium_domain)


@pytest.fixture(scope="module")
def g1m_desk():
    domain = LatticeDomain(128)
    return domain, g_hat1_m(domain)


@pytest.mark.slow
def test_g_hat1_m_gradient_decay(g1m_desk):
    _, field = g1m_desk
    report = shell_decay(grad_field(field), (8, 32), "g_hat1_m_gradient")
    assert report.slope == pytest.approx(-1.5, abs=0.3)


@pytest.mark.slow
def test_g_hat1_m_value_decay(g1m_desk):
    _, field = g1m_desk
    assert shell_decay(field, (8, 32), "g_hat1_m_value").slope == pytest.approx(-0.5, abs=0.3)


@pytest.mark.slow
def test_g_hat1_m_source_term_decay(g1m_desk):
    domain, _ = g1m_desk
    rhs = divergence(grad_field(omega2_field(domain))).with_zero_exterior()
    assert shell_decay(rhs, (8, 32), "div_d_omega2").slope == pytest.approx(-3.5, abs=0.3)


@pytest.mark.slow
def test_crack_green_symmetry_at_desk_scale():
    report = greens_symmetry_report(LatticeDomain(128), [Site(1, 20), Site(15, 10), Site(-20, 5)],
                                    SolveSettings(linear_rtol=1e-12))
    assert report["max_asymmetry"] <= 1e-4


@pytest.mark.slow
def test_gbar1_correction_improves_remainder():
    domain = LatticeDomain(140)
    with_mu = gbar1_scaling(domain, [32, 48, 64], use_mu=True)
    without_mu = gbar1_scaling(domain, [32, 48, 64], use_mu=False)
    for corrected, plain in zip(with_mu["statistic"], without_mu["statistic"]):
        assert corrected < 0.1 * plain
    assert without_mu["slope"] == pytest.approx(-1.5, abs=0.25)
    assert with_mu["slope"] < without_mu["slope"]
