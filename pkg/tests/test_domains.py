"""Domain support maps and their angle jets."""

import math

import numpy as np
import pytest

from hplateau import domains


def _fd_jet_2d(dom, theta, h=1e-5):
    f = lambda t: dom.rho_jet(t)[0]
    d1 = (f(theta + h) - f(theta - h)) / (2 * h)
    d2 = (f(theta + h) - 2 * f(theta) + f(theta - h)) / (h * h)
    return d1, d2


def test_omega_jet_is_a_unit_vector_path():
    w, dw, ddw = domains.omega_jet(0.7, 1.9)
    assert np.linalg.norm(w) == pytest.approx(1.0, rel=1e-14)
    h = 1e-6
    wp, _, _ = domains.omega_jet(0.7 + h, 1.9)
    wm, _, _ = domains.omega_jet(0.7 - h, 1.9)
    assert np.allclose((wp - wm) / (2 * h), dw[0], atol=1e-9)
    assert np.allclose((wp - 2 * w + wm) / (h * h), ddw[0][0], atol=1e-4)
    vp, _, _ = domains.omega_jet(0.7, 1.9 + h)
    vm, _, _ = domains.omega_jet(0.7, 1.9 - h)
    assert np.allclose((vp - vm) / (2 * h), dw[1], atol=1e-9)


def test_ball_jet_is_constant():
    ball = domains.make_ball(3, 2.5)
    rho, g, H = ball.rho_jet(0.4, 1.1)
    assert rho == 2.5
    assert np.array_equal(g, np.zeros(2))
    assert np.array_equal(H, np.zeros((2, 2)))
    assert ball.support(np.array([0.0, 0.0, 1.0])) == 2.5


def test_ellipsoid_jet_matches_finite_differences_3d():
    dom = domains.make_ellipsoid((1.3, 1.0, 0.8))
    for theta, phi in ((0.6, 0.3), (1.2, 2.8), (2.4, 5.0)):
        rho, g, H = dom.rho_jet(theta, phi)
        w = domains.omega_jet(theta, phi)[0]
        assert rho == pytest.approx(dom.support(w), rel=1e-13)
        h = 1e-5
        ft = lambda t, p: dom.rho_jet(t, p)[0]
        assert g[0] == pytest.approx(
            (ft(theta + h, phi) - ft(theta - h, phi)) / (2 * h), abs=1e-8)
        assert g[1] == pytest.approx(
            (ft(theta, phi + h) - ft(theta, phi - h)) / (2 * h), abs=1e-8)
        assert H[0, 0] == pytest.approx(
            (ft(theta + h, phi) - 2 * rho + ft(theta - h, phi)) / (h * h),
            abs=1e-4)
        assert H[1, 1] == pytest.approx(
            (ft(theta, phi + h) - 2 * rho + ft(theta, phi - h)) / (h * h),
            abs=1e-4)
        mixed = (ft(theta + h, phi + h) - ft(theta + h, phi - h)
                 - ft(theta - h, phi + h) + ft(theta - h, phi - h)) / (4 * h * h)
        assert H[0, 1] == pytest.approx(mixed, abs=1e-4)
        assert H[1, 0] == H[0, 1]


def test_ellipse_jet_matches_finite_differences_2d():
    dom = domains.make_ellipsoid((1.4, 0.9))
    for theta in (0.0, 0.5, 2.2, 4.9):
        rho, d1, d2 = dom.rho_jet(theta)
        fd1, fd2 = _fd_jet_2d(dom, theta)
        assert d1 == pytest.approx(fd1, abs=1e-8)
        assert d2 == pytest.approx(fd2, abs=1e-4)


def test_star_jet_matches_finite_differences():
    samples = 1.0 + 0.15 * np.cos(3 * np.linspace(0, 2 * math.pi, 24,
                                                  endpoint=False))
    dom = domains.make_star2d(samples)
    for theta in (0.3, 1.7, 3.9):
        rho, d1, d2 = dom.rho_jet(theta)
        fd1, fd2 = _fd_jet_2d(dom, theta)
        assert d1 == pytest.approx(fd1, abs=1e-7)
        assert d2 == pytest.approx(fd2, abs=1e-3)


def test_constant_star_is_a_circle():
    dom = domains.make_star2d([1.7] * 16)
    rho, d1, d2 = dom.rho_jet(2.0)
    assert rho == pytest.approx(1.7, rel=1e-12)
    assert abs(d1) < 1e-10 and abs(d2) < 1e-8
    assert dom.boundary_mean_curvature_min == pytest.approx(1.0 / 1.7, rel=1e-8)


def test_mean_curvature_floor_ball():
    assert domains.make_ball(3, 2.0).boundary_mean_curvature_min == 0.5
    assert domains.make_ball(2, 0.5).boundary_mean_curvature_min == 2.0


def test_mean_curvature_floor_prolate_ellipsoid():
    # equator of the (a, b, b) spheroid: principal curvatures b/a^2 and
    # 1/b, so the floor is their mean
    a, b = 1.3, 1.0
    dom = domains.make_ellipsoid((a, b, b))
    expect = 0.5 * (b / a ** 2 + 1.0 / b)
    assert dom.boundary_mean_curvature_min == pytest.approx(expect, rel=1e-4)


def test_wavy_star_can_lose_convexity():
    theta = np.linspace(0, 2 * math.pi, 32, endpoint=False)
    dom = domains.make_star2d(1.0 + 0.45 * np.cos(5 * theta))
    assert dom.boundary_mean_curvature_min < 0.0
    mild = domains.make_star2d(1.0 + 0.08 * np.cos(3 * theta))
    assert mild.boundary_mean_curvature_min > 0.0


def test_map_parameter_and_distance():
    dom = domains.make_ellipsoid((1.3, 1.0, 1.0))
    assert dom.map_parameter(np.zeros(3)) == 0.0
    assert dom.map_parameter(np.array([1.3, 0.0, 0.0])) == pytest.approx(1.0)
    assert dom.map_parameter(np.array([0.0, 0.5, 0.0])) == pytest.approx(0.5)
    ball = domains.make_ball(2, 2.0)
    x = np.array([0.6, 0.8])
    assert ball.boundary_distance_estimate(x) == pytest.approx(1.0, rel=1e-4)


def test_constructor_validation():
    with pytest.raises(ValueError):
        domains.make_ball(1, 1.0)
    with pytest.raises(ValueError):
        domains.make_ball(3, 0.0)
    with pytest.raises(ValueError):
        domains.make_ellipsoid((1.0,))
    with pytest.raises(ValueError):
        domains.make_ellipsoid((1.0, -1.0))
    with pytest.raises(ValueError):
        domains.make_star2d([1.0] * 7)
    with pytest.raises(ValueError):
        domains.make_star2d([1.0] * 7 + [-0.2])


def test_config_round_trips_and_aliases():
    ball = domains.domain_from_config(
        {"kind": "ball", "params": {"n": 3, "radius": 2.0}})
    assert ball.kind == "ball" and ball.radius == 2.0
    ell = domains.domain_from_config(
        {"kind": "ellipsoid", "params": {"semi_axes": [1.3, 1.0, 1.0]}})
    assert ell.semi_axes == (1.3, 1.0, 1.0)
    for alias in ("star", "star_shaped", "star2d"):
        star = domains.domain_from_config(
            {"kind": alias, "params": {"samples": [1.0] * 12}})
        assert star.kind == "star"
    with pytest.raises(ValueError):
        domains.domain_from_config(
            {"kind": "star_shaped", "params": {"n": 3, "samples": [1.0] * 12}})
    with pytest.raises(ValueError):
        domains.domain_from_config({"kind": "torus", "params": {}})
