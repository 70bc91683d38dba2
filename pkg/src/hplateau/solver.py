"""Damped-Newton continuation solver for sigma_{n-1}(kappa[u]) = sigma.

The Dirichlet approximation replaces the ideal-boundary condition u = 0
by u = eps_bdry > 0 and walks eps_bdry down a schedule, warm-starting
each solve from the previous height field.  Every Newton iterate is
kept inside the ellipticity region by the cone guard: a trial step is
accepted only if u stays positive and the hyperbolic spectrum stays in
Gamma_{n-1} at every non-boundary node; otherwise the step is halved.

This module owns the shared Newton engine, the config/result types and
the rotationally reduced solver on ball domains.  The full mapped-grid
solver lives in gridsolver.py and reuses the engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .cones import elem_sym_table, elementary_symmetric_batch
from .domains import DomainSpec
from .errors import ConeViolationError, InvalidHeightError, NewtonDivergenceError
from .geometry import exact_cap

__all__ = [
    "NewtonParams",
    "RadialMesh",
    "PolarGridMesh",
    "SphericalGridMesh",
    "SolveConfig",
    "ConvergenceInfo",
    "SolutionField",
    "DEFAULT_EPS_SCHEDULE",
    "damped_newton",
    "initial_profile_slope",
    "solve_radial",
    "solve_radial_path",
    "pde_residual",
    "newton_step",
]

DEFAULT_EPS_SCHEDULE = (1.0e-1, 1.0e-2, 1.0e-3, 1.0e-4)

#: Armijo sufficient-decrease slope for the damped line search.
ARMIJO_SLOPE = 1.0e-4


@dataclass(frozen=True)
class NewtonParams:
    max_iters: int = 40
    residual_tol: float = 1.0e-10
    step_damping: float = 1.0
    min_step: float = 1.0e-6


@dataclass(frozen=True)
class RadialMesh:
    nodes: int = 401

    def __post_init__(self):
        if self.nodes < 5:
            raise ValueError("radial mesh needs at least 5 nodes")


@dataclass(frozen=True)
class PolarGridMesh:
    """n = 2 mapped grid: offset radial rings x angular sectors."""

    radial: int = 48
    angular: int = 64

    def __post_init__(self):
        if self.radial < 4 or self.angular < 8:
            raise ValueError("polar grid too coarse")
        if self.angular % 2:
            raise ValueError("angular count must be even")


@dataclass(frozen=True)
class SphericalGridMesh:
    """n = 3 mapped grid: offset radial rings x offset latitudes x longitudes."""

    radial: int = 20
    lat: int = 12
    lon: int = 24

    def __post_init__(self):
        if self.radial < 4 or self.lat < 4 or self.lon < 8:
            raise ValueError("spherical grid too coarse")
        if self.lon % 2:
            raise ValueError("longitude count must be even")


@dataclass(frozen=True)
class SolveConfig:
    n: int
    sigma_target: float
    eps_schedule: tuple[float, ...] = DEFAULT_EPS_SCHEDULE
    mesh: object = None
    newton: NewtonParams = NewtonParams()
    sigma_path: tuple[float, ...] = ()
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need n >= 2")
        if not 0.0 < self.sigma_target < self.n:
            raise ValueError(
                f"sigma_target must lie in (0, {self.n}), got {self.sigma_target}")
        eps = tuple(float(e) for e in self.eps_schedule)
        if not eps:
            raise ValueError("eps_schedule must be nonempty")
        if any(e <= 0.0 for e in eps):
            raise ValueError("eps_schedule entries must be positive")
        if any(eps[i] <= eps[i + 1] for i in range(len(eps) - 1)):
            raise ValueError("eps_schedule must be strictly decreasing")
        object.__setattr__(self, "eps_schedule", eps)
        for s in self.sigma_path:
            if not 0.0 < s < self.n:
                raise ValueError("sigma_path values must lie in (0, n)")


@dataclass(frozen=True)
class ConvergenceInfo:
    iterations: int
    residual: float
    eps_bdry: float
    sigma: float


@dataclass
class SolutionField:
    """One converged height field with derived curvature data per node."""

    domain: DomainSpec
    nodes: np.ndarray
    u: np.ndarray
    boundary: np.ndarray
    nu_vertical: np.ndarray
    spectra: np.ndarray  # (m, n), rows sorted descending
    residual_field: np.ndarray
    convergence: ConvergenceInfo
    cone_ok: bool
    meta: dict = field(default_factory=dict)

    @property
    def interior(self) -> np.ndarray:
        return ~self.boundary


# ---------------------------------------------------------------------------
# Shared Newton engine
# ---------------------------------------------------------------------------

def damped_newton(v0, residual_fn, guard_fn, jacobian_solver,
                  params: NewtonParams):
    """Guarded, damped Newton iteration on the unknown vector v.

    jacobian_solver(v, F) must return the Newton step s with J(v) s = -F.
    Returns (v, iterations, final_residual_norm).  A step whose entire
    backtracking sweep fails the cone guard raises ConeViolationError;
    any other failure to reduce the residual raises
    NewtonDivergenceError.  Both carry the last accepted iterate.
    """
    v = np.array(v0, dtype=float)
    if not guard_fn(v):
        raise ConeViolationError(
            "initial iterate violates the positivity/cone guard", state=v)
    F = residual_fn(v)
    nrm = float(np.abs(F).max())
    for it in range(1, params.max_iters + 1):
        if nrm <= params.residual_tol:
            return v, it - 1, nrm
        s = jacobian_solver(v, F)
        t = params.step_damping
        guard_seen = False
        accepted = False
        while t >= params.min_step:
            trial = v + t * s
            if guard_fn(trial):
                guard_seen = True
                Ft = residual_fn(trial)
                nt = float(np.abs(Ft).max())
                if nt <= (1.0 - ARMIJO_SLOPE * t) * nrm or nt <= params.residual_tol:
                    v, F, nrm = trial, Ft, nt
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            if not guard_seen:
                raise ConeViolationError(
                    "cone guard rejected every damped step", state=v)
            raise NewtonDivergenceError(
                f"no residual decrease above min_step (residual {nrm:.3e})",
                state=v)
    if nrm <= params.residual_tol:
        return v, params.max_iters, nrm
    raise NewtonDivergenceError(
        f"residual {nrm:.3e} above tol after {params.max_iters} iterations",
        state=v)


def initial_profile_slope(n: int, sigma: float) -> float:
    """Boundary growth rate sqrt(1-lam^2)/lam of the umbilic cap family."""
    lam = (sigma / n) ** (1.0 / (n - 1))
    return math.sqrt(1.0 - lam * lam) / lam


# ---------------------------------------------------------------------------
# Rotational reduction on the ball
# ---------------------------------------------------------------------------

class _RadialScheme:
    """Second-order FD discretization of the reduced rotational problem.

    Unknowns are the heights at nodes 0..m-2 (center plus interior);
    u(R) = eps_bdry is imposed exactly at the last node.  The center
    uses the symmetry conditions u'(0) = 0, u''(0) = 2(u_1 - u_0)/h^2.
    """

    def __init__(self, n: int, radius: float, nodes: int, eps_bdry: float):
        self.n = n
        self.m = nodes
        self.r = np.linspace(0.0, radius, nodes)
        self.h = self.r[1] - self.r[0]
        self.eps_bdry = float(eps_bdry)

    def full_height(self, v: np.ndarray) -> np.ndarray:
        return np.append(v, self.eps_bdry)

    def spectra(self, v: np.ndarray) -> np.ndarray:
        """Unsorted spectra rows at the m-1 equation nodes."""
        u = self.full_height(v)
        h, n = self.h, self.n
        du = (u[2:] - u[:-2]) / (2.0 * h)
        d2u = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h ** 2
        w = np.sqrt(1.0 + du ** 2)
        krad = u[1:-1] * d2u / w ** 3 + 1.0 / w
        kang = u[1:-1] * du / (self.r[1:-1] * w) + 1.0 / w
        k0 = u[0] * (2.0 * (u[1] - u[0]) / h ** 2) + 1.0
        rows = np.empty((self.m - 1, n))
        rows[0] = k0
        rows[1:, 0] = krad
        rows[1:, 1:] = kang[:, None]
        return rows

    def residual(self, v: np.ndarray, sigma: float) -> np.ndarray:
        return elementary_symmetric_batch(self.spectra(v), self.n - 1) - sigma

    def guard(self, v: np.ndarray) -> bool:
        if not (v > 0.0).all():
            return False
        tab = elem_sym_table(self.spectra(v), self.n - 1)
        return bool((tab[:, 1:] > 0.0).all())

    def jacobian_step(self, v: np.ndarray, F: np.ndarray,
                      sigma: float) -> np.ndarray:
        """Newton step from the exact tridiagonal Jacobian.

        The rotational curvature formulas are explicit in the stencil
        values (no eigendecomposition), so the chain rule through
        kappa_rad, kappa_ang and the sigma_{n-1} gradient is smooth and
        is assembled in closed form.  A secant Jacobian is useless here:
        perturbing a single node by delta moves the curvatures by
        delta/h^2, and the secant error that induces grows like the mesh
        is refined until Newton stalls at the discretization residual.
        """
        m1 = v.size
        n, h = self.n, self.h
        u = self.full_height(v)
        band = np.zeros((3, m1))  # rows: super, main, sub

        # center equation: all curvatures equal u0*q0 + 1
        q0 = 2.0 * (u[1] - u[0]) / h ** 2
        k0 = u[0] * q0 + 1.0
        c0 = n * (n - 1) * k0 ** (n - 2)
        band[1, 0] = c0 * (q0 - 2.0 * u[0] / h ** 2)
        if m1 > 1:
            band[0, 1] = c0 * (2.0 * u[0] / h ** 2)

        # interior equations i = 1..m-2 handled vectorized
        b = u[1:-1]
        p = (u[2:] - u[:-2]) / (2.0 * h)
        q = (u[2:] - 2.0 * b + u[:-2]) / h ** 2
        r = self.r[1:-1]
        w = np.sqrt(1.0 + p * p)
        krad = b * q / w ** 3 + 1.0 / w
        kang = b * p / (r * w) + 1.0 / w
        if n == 2:
            g_rad = np.ones_like(b)
            g_ang = np.ones_like(b)
        else:
            g_rad = (n - 1) * kang ** (n - 2)
            g_ang = (n - 1) * ((n - 2) * krad * kang ** (n - 3) + kang ** (n - 2))

        def dF_dx(px, qx, is_mid):
            mid = 1.0 if is_mid else 0.0
            dkrad = (mid * q + b * qx) / w ** 3 \
                - (3.0 * b * q * p * px) / w ** 5 - p * px / w ** 3
            dkang = (mid * p + b * px) / (r * w) \
                - b * p * p * px / (r * w ** 3) - p * px / w ** 3
            return g_rad * dkrad + g_ang * dkang

        lower = dF_dx(-1.0 / (2.0 * h), 1.0 / h ** 2, False)
        diag = dF_dx(0.0, -2.0 / h ** 2, True)
        upper = dF_dx(1.0 / (2.0 * h), 1.0 / h ** 2, False)

        # equation at node i sits in Jacobian row i; its unknowns are
        # v[i-1], v[i], v[i+1] except that the last column is the fixed
        # boundary value and is dropped
        band[1, 1:] = diag
        band[2, 0:m1 - 1] = lower
        band[0, 2:] = upper[:-1]
        return scipy.linalg.solve_banded((1, 1), band, -F)


def _radial_field(scheme: _RadialScheme, v: np.ndarray, domain: DomainSpec,
                  sigma: float, iterations: int, resid: float) -> SolutionField:
    u = scheme.full_height(v)
    m, n, h = scheme.m, scheme.n, scheme.h
    r = scheme.r
    du = np.empty(m)
    d2u = np.empty(m)
    du[0] = 0.0
    d2u[0] = 2.0 * (u[1] - u[0]) / h ** 2
    du[1:-1] = (u[2:] - u[:-2]) / (2.0 * h)
    d2u[1:-1] = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h ** 2
    du[-1] = (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) / (2.0 * h)
    d2u[-1] = (2.0 * u[-1] - 5.0 * u[-2] + 4.0 * u[-3] - u[-4]) / h ** 2
    w = np.sqrt(1.0 + du ** 2)
    nu = 1.0 / w
    krad = u * d2u / w ** 3 + nu
    kang = np.empty(m)
    kang[0] = krad[0]
    kang[1:] = u[1:] * du[1:] / (r[1:] * w[1:]) + nu[1:]
    rows = np.empty((m, n))
    rows[:, 0] = krad
    rows[:, 1:] = kang[:, None]
    spectra = np.sort(rows, axis=1)[:, ::-1]
    residual_field = elementary_symmetric_batch(rows, n - 1) - sigma
    boundary = np.zeros(m, dtype=bool)
    boundary[-1] = True
    near = np.zeros(m, dtype=bool)
    near[-2:] = True
    tab = elem_sym_table(rows[:-1], n - 1)
    cone_ok = bool((tab[:, 1:] > 0.0).all())
    return SolutionField(
        domain=domain,
        nodes=r.copy(),
        u=u,
        boundary=boundary,
        nu_vertical=nu,
        spectra=spectra,
        residual_field=residual_field,
        convergence=ConvergenceInfo(iterations=iterations, residual=resid,
                                    eps_bdry=scheme.eps_bdry, sigma=sigma),
        cone_ok=cone_ok,
        meta={"kind": "radial", "h": h, "du": du, "d2u": d2u,
              "kappa_rad": krad, "kappa_ang": kang,
              "near_boundary": near},
    )


def _converge_radial(scheme: _RadialScheme, v: np.ndarray, sigma: float,
                     params: NewtonParams):
    return damped_newton(
        v,
        residual_fn=lambda x: scheme.residual(x, sigma),
        guard_fn=scheme.guard,
        jacobian_solver=lambda x, F: scheme.jacobian_step(x, F, sigma),
        params=params,
    )


def _descend_eps_radial(n, radius, nodes, params, v, sigma,
                        eps_from, eps_to, depth=0):
    """Move the converged profile from eps_from to eps_to, bisecting the
    (geometric) eps step up to 3 times on Newton failure.

    Re-pinning the boundary node alone kinks the profile hard enough to
    leave the cone, so the warm start adds the height difference of the
    exact cap family between the two eps values (exact transport on the
    ball, smooth and cone-safe in general).
    """
    scheme = _RadialScheme(n, radius, nodes, eps_to)
    shift = exact_cap(n, sigma, radius, eps_to).height(scheme.r[:-1]) \
        - exact_cap(n, sigma, radius, eps_from).height(scheme.r[:-1])
    try:
        return scheme, _converge_radial(scheme, v + shift, sigma, params)
    except (NewtonDivergenceError, ConeViolationError):
        if depth >= 3:
            raise
        mid = math.sqrt(eps_from * eps_to)
        _, (vm, it1, _) = _descend_eps_radial(
            n, radius, nodes, params, v, sigma, eps_from, mid, depth + 1)
        scheme2, (v2, it2, res2) = _descend_eps_radial(
            n, radius, nodes, params, vm, sigma, mid, eps_to, depth + 1)
        return scheme2, (v2, it1 + it2, res2)


def solve_radial_path(config: SolveConfig, domain: DomainSpec) -> list[SolutionField]:
    """Continuation solve on the ball; one SolutionField per scheduled eps."""
    if domain.kind != "ball":
        raise ValueError("solve_radial requires a ball domain")
    if domain.n != config.n:
        raise ValueError("domain dimension does not match config.n")
    if domain.boundary_mean_curvature_min < 0.0:
        raise ValueError("domain boundary must have nonnegative mean curvature")
    mesh = config.mesh if config.mesh is not None else RadialMesh()
    if not isinstance(mesh, RadialMesh):
        raise ValueError("solve_radial needs a RadialMesh")
    params = config.newton
    sig_path = list(config.sigma_path)
    if not sig_path or sig_path[-1] != config.sigma_target:
        sig_path.append(config.sigma_target)

    eps0 = config.eps_schedule[0]
    scheme = _RadialScheme(config.n, domain.radius, mesh.nodes, eps0)
    cap = exact_cap(config.n, sig_path[0], domain.radius, eps0)
    v = cap.height(scheme.r[:-1])
    total_it = 0
    for sg in sig_path:
        v, it, res = _converge_radial(scheme, v, sg, params)
        total_it += it

    fields = [_radial_field(scheme, v, domain, config.sigma_target,
                            total_it, res)]
    prev = eps0
    for eps in config.eps_schedule[1:]:
        scheme, (v, it, res) = _descend_eps_radial(
            config.n, domain.radius, mesh.nodes, params, v,
            config.sigma_target, prev, eps)
        fields.append(_radial_field(scheme, v, domain, config.sigma_target,
                                    it, res))
        prev = eps
    return fields


def solve_radial(config: SolveConfig, domain: DomainSpec) -> SolutionField:
    return solve_radial_path(config, domain)[-1]


# ---------------------------------------------------------------------------
# Field-level operations shared with the grid solver
# ---------------------------------------------------------------------------

def pde_residual(field: SolutionField) -> np.ndarray:
    """sigma_{n-1}(spectrum) - sigma at every non-boundary node."""
    if not (field.u > 0.0).all():
        raise InvalidHeightError("solution field has non-positive heights")
    kind = field.meta.get("kind")
    sigma = field.convergence.sigma
    if kind == "radial":
        scheme = _RadialScheme(field.domain.n, float(field.nodes[-1]),
                               field.nodes.size, field.convergence.eps_bdry)
        return scheme.residual(field.u[:-1], sigma)
    if kind == "grid":
        from .gridsolver import grid_residual
        return grid_residual(field)
    raise ValueError(f"unknown field kind {kind!r}")


def newton_step(field: SolutionField, damping: float = 1.0):
    """One guarded Newton update of a converged or in-progress field.

    Returns (updated_field, (residual_before, residual_after)).
    """
    if not field.cone_ok:
        raise ConeViolationError("newton_step requires a cone_ok field",
                                 state=field.u)
    kind = field.meta.get("kind")
    sigma = field.convergence.sigma
    if kind == "grid":
        from .gridsolver import newton_step_grid
        return newton_step_grid(field, damping)
    if kind != "radial":
        raise ValueError(f"unknown field kind {kind!r}")
    scheme = _RadialScheme(field.domain.n, float(field.nodes[-1]),
                           field.nodes.size, field.convergence.eps_bdry)
    v = field.u[:-1]
    F = scheme.residual(v, sigma)
    before = float(np.abs(F).max())
    s = scheme.jacobian_step(v, F, sigma)
    t = float(damping)
    guard_seen = False
    while t >= 1.0e-6:
        trial = v + t * s
        if scheme.guard(trial):
            guard_seen = True
            after = float(np.abs(scheme.residual(trial, sigma)).max())
            # a single step accepts any non-increase (within roundoff)
            if after <= before * (1.0 + 1.0e-12) + 1.0e-15:
                out = _radial_field(scheme, trial, field.domain, sigma,
                                    field.convergence.iterations + 1, after)
                return out, (before, after)
        t *= 0.5
    if not guard_seen:
        raise ConeViolationError("cone guard rejected every damped step",
                                 state=field.u)
    raise NewtonDivergenceError("single Newton step could not avoid a "
                                "residual increase", state=field.u)
