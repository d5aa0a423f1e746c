import math

import numpy as np
import pytest

from crackfield.core.lattice import (
    E1,
    E2,
    MINUS_E1,
    MINUS_E2,
    FieldClamp,
    LatticeDomain,
    ScalarField,
    Site,
    bond_active,
    divergence,
    grad,
    grad_field,
    hdot1_norm,
    mirror,
    site_count_report,
    site_near,
    sites_in_ball,
    stencil,
)


def test_site_position_has_half_offset():
    assert Site(0, 0).x == (-0.5, -0.5)
    assert Site(1, 1).x == (0.5, 0.5)
    assert Site(3, 1).radius == pytest.approx(math.hypot(2.5, 0.5))


def test_site_near_rounds_to_nearest_site():
    assert site_near(0.4, 0.6) == Site(1, 1)
    assert site_near(-3.0, 2.5) == Site(-2, 3)


def test_smallest_ball_has_four_sites():
    assert sorted(sites_in_ball(1)) == [Site(0, 0), Site(0, 1), Site(1, 0), Site(1, 1)]


def test_ball_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        sites_in_ball(0)
    with pytest.raises(ValueError):
        LatticeDomain(-1)


def test_ball_count_close_to_area():
    report = site_count_report(40)
    assert report["count"] == len(LatticeDomain(40).sites())
    assert report["count"] / report["pi_r2"] == pytest.approx(1.0, rel=0.02)


def test_stencil_on_crack_faces():
    assert stencil(Site(0, 1)) == {E1, E2, MINUS_E1}
    assert stencil(Site(-5, 0)) == {E1, MINUS_E1, MINUS_E2}
    assert stencil(Site(1, 1)) == {E1, E2, MINUS_E1, MINUS_E2}
    assert stencil(Site(1, 0)) == {E1, E2, MINUS_E1, MINUS_E2}


def test_bond_activity_is_symmetric():
    for m in sites_in_ball(6):
        for rho in (E1, E2, MINUS_E1, MINUS_E2):
            assert bond_active(m, rho) == bond_active(m.shift(rho), (-rho[0], -rho[1]))


def test_mirror_is_involution_and_swaps_faces():
    assert mirror(Site(0, 1)) == Site(0, 0)
    for m in sites_in_ball(5):
        assert mirror(mirror(m)) == m
        assert m.on_upper_face == mirror(m).on_lower_face


def test_domain_index_round_trip(small_domain):
    for m in small_domain.sites():
        assert small_domain.contains(m)
        i, j = small_domain.index(m)
        assert small_domain.x1[i, j] == m.x[0]
        assert small_domain.x2[i, j] == m.x[1]
    assert not small_domain.contains(Site(100, 0))


def test_crack_faces_lie_on_negative_axis(small_domain):
    upper, lower = small_domain.crack_faces()
    assert upper and len(upper) == len(lower)
    assert all(m.a <= 0 and m.b == 1 for m in upper)
    assert [mirror(m) for m in upper] == sorted(lower, key=lambda s: (s.a, -s.b))


def test_halo_touches_interior_only_through_active_bonds(small_domain):
    halo = small_domain.halo
    assert not np.any(halo & small_domain.interior)
    offset = 1 - small_domain.half_width
    for i, j in zip(*np.nonzero(halo)):
        m = Site(int(i + offset), int(j + offset))
        assert any(small_domain.contains(m.shift(rho)) for rho in stencil(m))


def test_grad_ignores_severed_bond(small_domain):
    # 裂纹上方取1，下方取0
    u = ScalarField.from_function(small_domain, lambda x1, x2: (x2 > 0).astype(float))
    assert np.all(grad(u, Site(-2, 1)) == 0.0)
    assert grad(u, Site(2, 0))[1] == 1.0


def test_grad_field_matches_pointwise_grad(small_domain, rng):
    u = ScalarField(small_domain, rng.standard_normal(small_domain.shape))
    field = grad_field(u)
    for m in small_domain.sites():
        np.testing.assert_allclose(field.at(m), grad(u, m))


def test_summation_by_parts(medium_domain, rng):
    u = ScalarField(medium_domain, rng.standard_normal(medium_domain.shape))
    v = ScalarField(medium_domain, rng.standard_normal(medium_domain.shape))
    lhs = grad_field(u).dot(grad_field(v))
    rhs = float(np.sum(u.values * divergence(grad_field(v)).values))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_sparse_laplacian_matches_divergence(medium_domain, rng):
    x = rng.standard_normal(medium_domain.n_free)
    u = ScalarField.from_free(medium_domain, x)
    expected = divergence(grad_field(u)).free_values()
    np.testing.assert_allclose(medium_domain.laplacian @ x, expected, atol=1e-12)


def test_hdot1_norm_of_linear_field(small_domain):
    u = ScalarField.from_function(small_domain, lambda x1, x2: 2.0 * x1)
    values = grad_field(u).values
    assert hdot1_norm(u) == pytest.approx(np.sqrt(np.sum(values ** 2)))
    assert np.max(np.abs(values)) == pytest.approx(2.0)


def test_embed_extends_by_zero(small_domain, rng):
    u = ScalarField(small_domain, rng.standard_normal(small_domain.shape))
    big = LatticeDomain(12)
    embedded = u.embed(big)
    for m in small_domain.sites():
        assert embedded.at(m) == u.at(m)
    assert embedded.at(Site(11, 1)) == 0.0
    assert embedded.at(Site(9, 1)) == 0.0
    with pytest.raises(ValueError):
        embedded.embed(small_domain)


def test_field_clamp_sets_exterior(small_domain, rng):
    data = rng.standard_normal(small_domain.shape)
    u = ScalarField.from_free(small_domain, np.zeros(small_domain.n_free), FieldClamp(data))
    outside = ~small_domain.interior
    np.testing.assert_array_equal(u.values[outside], data[outside])
    assert not np.any(u.values[small_domain.interior])


def test_mismatched_fields_raise(small_domain, medium_domain):
    with pytest.raises(ValueError):
        ScalarField.zeros(small_domain) + ScalarField.zeros(medium_domain)
