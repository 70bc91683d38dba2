"""Star-shaped solve domains and their radial support maps.

A domain is described by its support map rho: S^{n-1} -> (0, inf),
x in Omega iff |x| < rho(x/|x|).  The grid solver pulls everything back
through x = s * rho(omega(angles)) * omega(angles), so each domain kind
exposes rho together with its first and second angle derivatives:

* ball: rho = R, all derivatives zero;
* ellipsoid: rho(omega) = (omega^T M omega)^{-1/2}, M = diag(1/a_i^2),
  derivatives by the chain rule through the quadratic form;
* star (n = 2 only): rho(theta) from a periodic cubic spline through
  equispaced samples.

Angle conventions: n = 2 uses theta in [0, 2pi); n = 3 uses latitude
theta in (0, pi) and longitude phi in [0, 2pi) with
omega = (sin t cos p, sin t sin p, cos t).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = [
    "DomainSpec",
    "make_ball",
    "make_ellipsoid",
    "make_star2d",
    "domain_from_config",
    "omega_jet",
]


def omega_jet(theta: float, phi: float):
    """Unit vector on S^2 with first and second angle derivatives.

    Returns (omega, [w_t, w_p], [[w_tt, w_tp], [w_tp, w_pp]]).
    """
    st, ct = math.sin(theta), math.cos(theta)
    sp, cp = math.sin(phi), math.cos(phi)
    w = np.array([st * cp, st * sp, ct])
    w_t = np.array([ct * cp, ct * sp, -st])
    w_p = np.array([-st * sp, st * cp, 0.0])
    w_tt = -w
    w_tp = np.array([-ct * sp, ct * cp, 0.0])
    w_pp = np.array([-st * cp, -st * sp, 0.0])
    return w, [w_t, w_p], [[w_tt, w_tp], [w_tp, w_pp]]


@dataclass(frozen=True)
class DomainSpec:
    """One solve domain; construct through the make_* helpers."""

    kind: str
    n: int
    radius: float | None = None
    semi_axes: tuple[float, ...] | None = None
    star_samples: tuple[float, ...] | None = None

    @cached_property
    def _star_spline(self):
        vals = np.asarray(self.star_samples, dtype=float)
        theta = np.linspace(0.0, 2.0 * math.pi, vals.size + 1)
        return CubicSpline(theta, np.append(vals, vals[0]), bc_type="periodic")

    # -- support map -------------------------------------------------------

    def support(self, omega) -> float:
        """rho at a unit direction omega."""
        omega = np.asarray(omega, dtype=float)
        if self.kind == "ball":
            return self.radius
        if self.kind == "ellipsoid":
            M = 1.0 / np.asarray(self.semi_axes, dtype=float) ** 2
            return 1.0 / math.sqrt(float((M * omega) @ omega))
        theta = math.atan2(omega[1], omega[0]) % (2.0 * math.pi)
        return float(self._star_spline(theta))

    def rho_jet(self, theta: float, phi: float | None = None):
        """rho with first/second angle derivatives at the given angles.

        n = 2: returns (rho, rho_t, rho_tt) scalars.
        n = 3: returns (rho, grad, hess) with grad = [rho_t, rho_p] and
        hess the symmetric 2x2 of second derivatives.
        """
        if self.n == 2:
            if self.kind == "ball":
                return self.radius, 0.0, 0.0
            if self.kind == "star":
                s = self._star_spline
                return float(s(theta)), float(s(theta, 1)), float(s(theta, 2))
            w = np.array([math.cos(theta), math.sin(theta)])
            dw = [np.array([-math.sin(theta), math.cos(theta)])]
            ddw = [[-w]]
            rho, g, H = self._quadratic_rho_jet(w, dw, ddw)
            return rho, g[0], H[0, 0]
        if self.kind == "ball":
            return self.radius, np.zeros(2), np.zeros((2, 2))
        w, dw, ddw = omega_jet(theta, phi)
        return self._quadratic_rho_jet(w, dw, ddw)

    def _quadratic_rho_jet(self, w, dw, ddw):
        M = 1.0 / np.asarray(self.semi_axes, dtype=float) ** 2

        def m(a, b):
            return float((M * a) @ b)

        rho = 1.0 / math.sqrt(m(w, w))
        k = len(dw)
        grad = np.empty(k)
        hess = np.empty((k, k))
        for i in range(k):
            grad[i] = -rho ** 3 * m(w, dw[i])
        for i in range(k):
            for j in range(i, k):
                val = 3.0 * rho ** 5 * m(w, dw[i]) * m(w, dw[j]) \
                    - rho ** 3 * (m(dw[i], dw[j]) + m(w, ddw[i][j] if j >= i else ddw[j][i]))
                hess[i, j] = hess[j, i] = val
        return rho, grad, hess

    # -- containment and distance ------------------------------------------

    def map_parameter(self, x) -> float:
        """s(x) = |x| / rho(x/|x|); the boundary is s = 1."""
        x = np.asarray(x, dtype=float)
        r = float(np.linalg.norm(x))
        if r == 0.0:
            return 0.0
        return r / self.support(x / r)

    def boundary_distance_estimate(self, x) -> float:
        """First-order estimate (1 - s)/|grad s| of dist(x, boundary)."""
        x = np.asarray(x, dtype=float)
        s = self.map_parameter(x)
        h = 1.0e-6 * (1.0 + float(np.linalg.norm(x)))
        g = np.empty(self.n)
        for i in range(self.n):
            e = np.zeros(self.n)
            e[i] = h
            g[i] = (self.map_parameter(x + e) - self.map_parameter(x - e)) / (2.0 * h)
        gn = float(np.linalg.norm(g))
        if gn == 0.0:
            return (1.0 - s) * self.support(np.ones(self.n) / math.sqrt(self.n))
        return (1.0 - s) / gn

    # -- boundary mean curvature --------------------------------------------

    @cached_property
    def boundary_mean_curvature_min(self) -> float:
        """Min over the boundary of the mean curvature (outward normal).

        Positive for every convex body in the convention used here; the
        solver refuses domains where this dips below zero.
        """
        if self.kind == "ball":
            return 1.0 / self.radius
        if self.kind == "star":
            theta = np.linspace(0.0, 2.0 * math.pi, 2048, endpoint=False)
            s = self._star_spline
            rho, d1, d2 = s(theta), s(theta, 1), s(theta, 2)
            num = rho ** 2 + 2.0 * d1 ** 2 - rho * d2
            return float((num / (rho ** 2 + d1 ** 2) ** 1.5).min())
        M = 1.0 / np.asarray(self.semi_axes, dtype=float) ** 2
        worst = math.inf
        if self.n == 2:
            dirs = [np.array([math.cos(t), math.sin(t)])
                    for t in np.linspace(0.0, 2.0 * math.pi, 720, endpoint=False)]
        else:
            dirs = []
            for t in np.linspace(0.05, math.pi - 0.05, 60):
                for p in np.linspace(0.0, 2.0 * math.pi, 120, endpoint=False):
                    dirs.append(omega_jet(t, p)[0])
            dirs += [np.array([0.0, 0.0, 1.0]), np.array([0.0, 0.0, -1.0])]
        for w in dirs:
            x = self.support(w) * w
            grad = 2.0 * M * x
            nrm = grad / np.linalg.norm(grad)
            P = np.eye(self.n) - np.outer(nrm, nrm)
            S = P @ np.diag(2.0 * M) @ P / float(np.linalg.norm(grad))
            eigs = np.sort(np.linalg.eigvalsh(S))
            worst = min(worst, float(eigs[1:].mean()))
        return worst


def make_ball(n: int, radius: float) -> DomainSpec:
    if n < 2:
        raise ValueError("need n >= 2")
    if radius <= 0.0:
        raise ValueError("radius must be positive")
    return DomainSpec(kind="ball", n=int(n), radius=float(radius))


def make_ellipsoid(semi_axes) -> DomainSpec:
    axes = tuple(float(a) for a in semi_axes)
    if len(axes) not in (2, 3):
        raise ValueError("ellipsoid domains support n in {2, 3}")
    if any(a <= 0.0 for a in axes):
        raise ValueError("semi-axes must be positive")
    return DomainSpec(kind="ellipsoid", n=len(axes), semi_axes=axes)


def make_star2d(samples) -> DomainSpec:
    vals = tuple(float(v) for v in samples)
    if len(vals) < 8:
        raise ValueError("need at least 8 radial samples")
    if any(v <= 0.0 for v in vals):
        raise ValueError("radial samples must be positive")
    return DomainSpec(kind="star", n=2, star_samples=vals)


def domain_from_config(cfg: dict) -> DomainSpec:
    """Build a DomainSpec from the CLI JSON shape {kind, params}."""
    kind = cfg.get("kind")
    params = cfg.get("params", {})
    if kind == "ball":
        return make_ball(int(params.get("n", 3)), float(params.get("radius", 1.0)))
    if kind == "ellipsoid":
        return make_ellipsoid(params["semi_axes"])
    if kind in ("star", "star_shaped", "star2d"):
        if int(params.get("n", 2)) != 2:
            raise ValueError("star-shaped domains are supported for n = 2 only")
        return make_star2d(params["samples"])
    raise ValueError(f"unknown domain kind {kind!r}")
