import numpy as np
import pytest

from prismgrowth.errors import ConfigError
from prismgrowth.geometry import BasePolygon, CrystalState, facet_quadrature, measures
from prismgrowth.mapping import (
    MappingConfig,
    build_lambda,
    build_phi,
    build_psi,
    distance_to_boundary,
    jacobian,
    jacobian_samples,
    lambda_apply,
    pullback_facet_integral,
    smoothstep,
)

BASE = BasePolygon.regular(6, 1.0, 1.0)
STATE0 = CrystalState.at(BASE)
Z = np.array([0.03, -0.04, 0.05, 0.01, -0.02, 0.045, 0.035, -0.03])


@pytest.fixture(scope="module")
def lam():
    return build_lambda(STATE0, Z)


def test_smoothstep_is_c2():
    s = np.array([0.0, 1.0])
    h = 1e-5
    assert np.array_equal(smoothstep(np.array([-1.0, 0.0, 1.0, 2.0])), [0, 0, 1, 1])
    d1 = (smoothstep(s + h) - smoothstep(s - h)) / (2 * h)
    d2 = (smoothstep(s + h) - 2 * smoothstep(s) + smoothstep(s - h)) / h**2
    assert np.max(np.abs(d1)) < 1e-8 and np.max(np.abs(d2)) < 1e-3


def test_phi_maps_top_and_bottom():
    phi = build_phi(STATE0, Z, MappingConfig())
    assert phi(1.0) == pytest.approx(1.0 + Z[6], abs=1e-15)
    assert phi(-1.0) == pytest.approx(-1.0 - Z[7], abs=1e-15)
    x = np.linspace(1.0 + 2 * 0.5, 2.0 * STATE0.diameter, 50)
    assert np.allclose(phi(x), x + Z[6])  # rigid translation band
    xs = np.linspace(-5 * STATE0.diameter, 5 * STATE0.diameter, 1000)
    assert np.all(np.diff(phi(xs)) > 0)


def test_phi_identity_for_zero_vertical():
    z = Z.copy()
    z[6:] = 0.0
    phi = build_phi(STATE0, z, MappingConfig())
    x = np.linspace(-20, 20, 101)
    assert np.allclose(phi(x), x, rtol=0, atol=1e-14)
    far = np.array([-20.0, -12.0, 12.0, 20.0])
    assert np.array_equal(phi(far), far)


def test_phi_rejects_large_vertical_motion():
    z = Z.copy()
    z[6] = 0.3
    with pytest.raises(ConfigError):
        build_phi(STATE0, z, MappingConfig(delta_v=0.5))


def test_psi_vertex_images(lam):
    new = CrystalState.at(BASE, Z).vertices
    img = build_psi(STATE0, Z, MappingConfig())(BASE.vertices0, 0.0)
    assert np.max(np.linalg.norm(img - new, axis=1)) <= 1e-6 * BASE.diameter


def test_psi_far_point_fixed():
    psi = build_psi(STATE0, Z, MappingConfig())
    p = np.array([[20.0 * BASE.diameter, 0.0], [0.0, -25.0 * BASE.diameter]])
    assert np.array_equal(psi(p, 0.0), p)


def test_identity_at_zero():
    lam0 = build_lambda(STATE0, np.zeros(8))
    x = np.random.default_rng(0).uniform(-5, 5, size=(1000, 3))
    assert np.max(np.abs(lambda_apply(lam0, x) - x)) <= 1e-12
    J = jacobian(lam0, x[:100])
    assert np.max(np.abs(J - 1.0)) < 1e-6


def test_far_identity_exact(lam):
    rng = np.random.default_rng(1)
    d = rng.normal(size=(500, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    x = d * BASE.diameter * rng.uniform(10.0, 100.0, size=(500, 1))
    assert np.array_equal(lambda_apply(lam, x), x)
    # finite differences of the identity carry only rounding error
    assert np.allclose(jacobian(lam, x[:50]), 1.0, atol=1e-8)


def test_boundary_to_boundary(lam):
    for i in range(8):
        pts, _ = facet_quadrature(STATE0, i, 3)
        d = distance_to_boundary(lam.state, lambda_apply(lam, pts))
        assert d.max() <= 1e-5 * BASE.diameter


def test_distance_to_boundary_oracle():
    s = STATE0
    pts = np.array([[0, 0, 0], [0, 0, 3.0], [3.0, 0, 0], [1.0, 0, 0.5]])
    assert np.allclose(distance_to_boundary(s, pts), [1.0, 2.0, 2.0, 0.0])


def test_jacobian_samples(lam):
    pts = np.array([[1.5, 0.0, 0.0], [0.0, 0.0, 1.6], [100.0, 0.0, 0.0]])
    samples = jacobian_samples(lam, pts)
    assert all(s.value > 0 for s in samples)
    assert samples[-1].value == pytest.approx(1.0, abs=1e-8)
    assert not samples[-1].inside_support


def test_pullback_area_and_linear_integrand(lam):
    areas = measures(lam.state).facet_areas
    for i in (0, 2, 6, 7):
        assert pullback_facet_integral(lam, i, lambda p: np.ones(len(p))) == pytest.approx(areas[i], rel=1e-4)
    # linear integrand against direct quadrature on the current facet
    f = lambda p: 1.0 + 0.3 * p[:, 0] - 0.2 * p[:, 1] + 0.5 * p[:, 2]  # noqa: E731
    for i in (1, 6):
        pts, w = facet_quadrature(lam.state, i, 6)
        direct = np.dot(w, f(pts))
        assert pullback_facet_integral(lam, i, f) == pytest.approx(direct, rel=1e-4)


def test_pullback_exact_at_zero():
    lam0 = build_lambda(STATE0, np.zeros(8))
    areas = measures(STATE0).facet_areas
    assert pullback_facet_integral(lam0, 3, lambda p: np.ones(len(p)), n=4) == pytest.approx(areas[3], rel=1e-9)


def test_config_preconditions():
    with pytest.raises(ConfigError):
        MappingConfig(eps_p=5.0).resolved(BASE)
    with pytest.raises(ConfigError):
        MappingConfig(n_flow=4).resolved(BASE)
    with pytest.raises(ConfigError):
        build_psi(STATE0, np.full(8, 0.5), MappingConfig())
