import numpy as np
import pytest

from prismgrowth.errors import ConfigError
from prismgrowth.extension import (
    assemble_G,
    build_extension,
    build_extensions,
    interior_facet_points,
    normal_derivative,
)
from prismgrowth.geometry import BasePolygon, CrystalState

from conftest import random_states


@pytest.fixture(scope="module")
def hexa():
    return CrystalState.at(BasePolygon.regular(6, 1.0, 1.0))


def test_value_on_own_facet_is_zero_and_linear_off_it(hexa):
    h = build_extension(hexa, 6)
    pts = interior_facet_points(hexa, 6, 0.3)
    assert np.allclose(h(pts), 0.0, atol=1e-15)
    assert np.allclose(h(pts + 0.05 * np.array([0, 0, 1.0])), 0.05)


def test_normal_derivative_kronecker(hexa):
    ext = build_extensions(hexa)
    for j in range(8):
        pts = interior_facet_points(hexa, j, 2 * ext.eps_cut)
        assert len(pts) > 0
        for i in range(8):
            dn = normal_derivative(ext[i], pts, hexa.base.normals3[j])
            assert np.allclose(dn, float(i == j), atol=1e-8)


def test_derivative_fails_near_edges(hexa):
    # sanity check of the oracle: the property is not claimed inside the edge bands
    ext = build_extensions(hexa)
    pts = interior_facet_points(hexa, 0, 0.0, n=12)
    dn = normal_derivative(ext[0], pts, hexa.base.normals3[0])
    assert np.max(np.abs(dn - 1.0)) > 0.5


def test_compact_support(hexa):
    ext = build_extensions(hexa)
    rng = np.random.default_rng(0)
    d = rng.normal(size=(500, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    x = d * ext.support * rng.uniform(1.0, 3.0, size=(500, 1))
    for h in ext.extensions:
        assert np.all(h(x) == 0.0)


def test_assemble_G_linearity(hexa):
    ext = build_extensions(hexa)
    pts = np.random.default_rng(3).uniform(-3, 3, size=(300, 3))
    assert np.all(assemble_G(ext, np.zeros(8))(pts) == 0.0)
    for j in range(8):
        assert np.array_equal(assemble_G(ext, np.eye(8)[j])(pts), ext[j](pts))
    g = np.random.default_rng(4).normal(size=8)
    assert np.array_equal(assemble_G(ext, 4.0 * g)(pts), 4.0 * assemble_G(ext, g)(pts))


@pytest.mark.parametrize("state", random_states(3, seed=21), ids=lambda s: "")
def test_G_normal_derivative_matches_g(state):
    s0 = CrystalState.at(BasePolygon(state.vertices, 0.5 * state.height))
    ext = build_extensions(s0)
    g = np.random.default_rng(5).normal(size=8)
    G = assemble_G(ext, g)
    for j in range(8):
        pts = interior_facet_points(s0, j, 2 * ext.eps_cut)
        assert np.allclose(normal_derivative(G, pts, s0.base.normals3[j]), g[j], atol=1e-4)


def test_eps_precondition(hexa):
    with pytest.raises(ConfigError):
        build_extension(hexa, 0, eps_cut=0.6)
    with pytest.raises(ConfigError):
        build_extensions(hexa, eps_cut=-1.0)
