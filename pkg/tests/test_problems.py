from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import fd_gradient, fd_laplacian
from rbffd_lm.exceptions import DegenerateNorm
from rbffd_lm.geometry import BUTTERFLY, UNIT_BALL, UNIT_DISK, butterfly_radius, generate_boundary_nodes, outward_normals
from rbffd_lm.problems import PROBLEMS, get_problem, relative_l2_error, tp1, tp2, tp3, tp4


def test_tp1_values():
    p = tp1()
    assert p.domain == UNIT_DISK
    assert p.u_exact(np.zeros((1, 2)))[0] == 0.0
    assert p.f([[0.1, 0.2]])[0] == pytest.approx(-200 * math.sin(3.0), rel=1e-13)
    assert p.g([[0.0, 1.0]])[0] == pytest.approx(math.sin(10.0), rel=1e-13)


def test_tp2_franke_origin():
    p = tp2()
    expected = (0.75 * math.exp(-(4 + 4) / 4) + 0.75 * math.exp(-(1 / 49 + 1 / 10))
                + 0.5 * math.exp(-(49 + 9) / 4) - 0.2 * math.exp(-(16 + 49)))
    assert p.u_exact(np.zeros((1, 2)))[0] == pytest.approx(expected, rel=1e-14)
    assert p.domain == BUTTERFLY


def test_tp2_split_is_mixed():
    b = generate_boundary_nodes(BUTTERFLY, 0.05, tp2().split)
    assert b.counts["D"] > 0 and b.counts["N"] > 0


def test_tp3_values():
    p = tp3()
    assert p.u_exact(np.zeros((1, 3)))[0] == 1.0
    assert p.f(np.zeros((1, 3)))[0] == pytest.approx(-math.pi**2)
    assert p.g([[1.0, 0.0, 0.0]])[0] == pytest.approx(1.0, abs=1e-15)
    b = generate_boundary_nodes(UNIT_BALL, 0.2, p.split)
    assert b.counts["N"] == 0


def test_tp4_values():
    p = tp4()
    assert p.h([[0.0, 0.0, -1.0]])[0] == pytest.approx(math.pi, rel=1e-14)
    b = generate_boundary_nodes(UNIT_BALL, 0.1, p.split)
    assert np.all(b.points[b.dirichlet, 2] >= 0)


def _domain_samples(domain, count, rng):
    if domain.dim == 3:
        v = rng.standard_normal((count, 3))
        return v / np.linalg.norm(v, axis=1, keepdims=True) * rng.uniform(0, 1, (count, 1)) ** (1 / 3)
    theta = rng.uniform(0, 2 * np.pi, count)
    r = butterfly_radius(theta) if domain is BUTTERFLY else np.ones(count)
    s = np.sqrt(rng.uniform(0, 1, count)) * r
    return np.column_stack([s * np.cos(theta), s * np.sin(theta)])


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_laplacian_matches_fd(name):
    p = get_problem(name)
    x = _domain_samples(p.domain, 1000, np.random.default_rng(1))
    fd = fd_laplacian(p.u_exact, x, step=1e-3)
    np.testing.assert_allclose(p.f(x), fd, rtol=1e-5, atol=1e-5 * np.abs(fd).max())


@pytest.mark.parametrize("name", sorted(PROBLEMS))
def test_gradient_matches_fd(name):
    p = get_problem(name)
    x = _domain_samples(p.domain, 1000, np.random.default_rng(2))
    fd = fd_gradient(p.u_exact, x)
    np.testing.assert_allclose(p.gradient(x), fd, rtol=1e-5, atol=1e-6 * np.abs(fd).max())


@pytest.mark.parametrize("name", ["tp2", "tp4"])
def test_neumann_data_matches_fd_directional_derivative(name):
    p = get_problem(name)
    b = generate_boundary_nodes(p.domain, 0.02 if p.domain.dim == 2 else 0.06, p.split)
    nn = b.neumann
    pts, normals = b.points[nn], b.normals[nn]
    step = 1e-6
    fd = (p.u_exact(pts + step * normals) - p.u_exact(pts - step * normals)) / (2 * step)
    np.testing.assert_allclose(p.h(pts), fd, rtol=1e-5, atol=1e-7)
    np.testing.assert_allclose(p.h(pts, normals), p.h(pts), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(normals, outward_normals(p.domain, pts))


def test_get_problem_unknown():
    with pytest.raises(KeyError):
        get_problem("tp9")


def test_error_metric_examples():
    u = np.array([3.0, 4.0])
    assert relative_l2_error(u, u) == 0.0
    assert relative_l2_error(2 * u, u) == pytest.approx(1.0)
    assert relative_l2_error(u + [1e-3, 0], u) == pytest.approx(1e-3 / 5)
    with pytest.raises(DegenerateNorm):
        relative_l2_error(u, np.zeros(2))
    with pytest.raises(ValueError):
        relative_l2_error(u, np.ones(3))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=2, max_size=20), st.floats(1e-3, 1e3), st.booleans())
def test_error_metric_scale_invariant(values, alpha, negate):
    exact = np.asarray(values)
    if np.linalg.norm(exact) < 1e-6:
        exact = exact + 1.0
    num = exact * 1.01 + 0.1
    a = -alpha if negate else alpha
    assert relative_l2_error(a * num, a * exact) == pytest.approx(relative_l2_error(num, exact), rel=1e-9, abs=1e-15)
