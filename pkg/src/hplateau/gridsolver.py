"""Full graph solver on star-shaped domains via a mapped polar grid.

The domain is pulled back to the unit ball by x = s * rho(omega) * omega
and discretized on an offset product grid:

* radial rings s_j = (j - 1/2) * hs with hs = 1/(J - 1/2), so ring J
  sits exactly on the boundary (Dirichlet) and no node hits the
  coordinate singularity s = 0;
* n = 3: offset latitudes theta_m = (m + 1/2) pi / M (no pole nodes)
  and periodic longitudes phi_l = 2 pi l / L with L even;
* n = 2: periodic angles phi_l = 2 pi l / L.

Ghost neighbors wrap instead of extrapolating: longitude is periodic,
stepping over a pole lands on the opposite longitude, and stepping
through the center lands on the antipodal node of ring 1 (valid because
the map direction through the origin is straight).  Center wrap is
applied before the pole wrap so composed crossings resolve correctly.

Chart derivatives of u convert to Cartesian ones through the inverse
map Jacobian; the residual is evaluated through the symmetrized shape
matrix

    S = u * Ghalf @ (D2u / w) @ Ghalf + nu * I,
    Ghalf = I - Du Du^T / (w (w + 1))   (inverse square root of g_e),

whose eigenvalues are the hyperbolic principal curvatures.  sigma_1 and
sigma_2 come from trace minors of S, so residual and cone guard are
smooth in u and safe to differentiate by finite differences; the
Jacobian uses distance-2 graph coloring with central differences on a
fixed sparsity pattern.
"""

from __future__ import annotations

import math

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .domains import DomainSpec, omega_jet
from .errors import (ConeViolationError, GridDegeneracyError,
                     NewtonDivergenceError)
from .geometry import exact_cap
from .solver import (ConvergenceInfo, NewtonParams, PolarGridMesh, SolveConfig,
                     SolutionField, SphericalGridMesh, damped_newton)

__all__ = ["solve_graph", "solve_graph_path", "grid_residual",
           "newton_step_grid", "initial_grid_guess"]

_OFFSETS3 = [(0, 0, 0),
             (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0),
             (0, 0, 1), (0, 0, -1),
             (1, 1, 0), (1, -1, 0), (-1, 1, 0), (-1, -1, 0),
             (1, 0, 1), (1, 0, -1), (-1, 0, 1), (-1, 0, -1),
             (0, 1, 1), (0, 1, -1), (0, -1, 1), (0, -1, -1)]

_OFFSETS2 = [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1),
             (1, 1), (1, -1), (-1, 1), (-1, -1)]


class _GridGeometry:
    """Mesh, map tensors and wrapped index maps; independent of u."""

    def __init__(self, domain: DomainSpec, mesh):
        self.domain = domain
        self.n = domain.n
        if self.n == 3:
            if not isinstance(mesh, SphericalGridMesh):
                raise ValueError("n = 3 grid solves need a SphericalGridMesh")
            self.J, self.M, self.L = mesh.radial, mesh.lat, mesh.lon
        else:
            if not isinstance(mesh, PolarGridMesh):
                raise ValueError("n = 2 grid solves need a PolarGridMesh")
            self.J, self.L = mesh.radial, mesh.angular
            self.M = 1
        self.mesh = mesh
        J, M, L = self.J, self.M, self.L
        self.hs = 1.0 / (J - 0.5)
        self.s = (np.arange(1, J + 1) - 0.5) * self.hs
        self.n_all = J * M * L
        self.n_int = (J - 1) * M * L

        jj, mm, ll = np.meshgrid(np.arange(1, J + 1), np.arange(M),
                                 np.arange(L), indexing="ij")
        self.jj = jj.ravel()
        self.mm = mm.ravel()
        self.ll = ll.ravel()

        self._build_map_tensors()
        self._build_index_maps()
        self._coloring = None

    # -- map tensors ---------------------------------------------------------

    def _build_map_tensors(self):
        n, J, M, L = self.n, self.J, self.M, self.L
        if n == 3:
            self.hth = math.pi / M
            self.hph = 2.0 * math.pi / L
            theta = (np.arange(M) + 0.5) * self.hth
            phi = np.arange(L) * self.hph
        else:
            self.hph = 2.0 * math.pi / L
            phi = np.arange(L) * self.hph

        Xc = np.empty((self.n_all, n, n))
        Xcc = np.zeros((self.n_all, n, n, n))
        xyz = np.empty((self.n_all, n))
        s_node = self.s[self.jj - 1]
        if n == 3:
            for m in range(M):
                for l in range(L):
                    w, dw, ddw = omega_jet(theta[m], phi[l])
                    rho, dr, ddr = self.domain.rho_jet(theta[m], phi[l])
                    q = rho * w
                    q_t = dr[0] * w + rho * dw[0]
                    q_p = dr[1] * w + rho * dw[1]
                    q_tt = ddr[0, 0] * w + 2.0 * dr[0] * dw[0] + rho * ddw[0][0]
                    q_tp = ddr[0, 1] * w + dr[0] * dw[1] + dr[1] * dw[0] + rho * ddw[0][1]
                    q_pp = ddr[1, 1] * w + 2.0 * dr[1] * dw[1] + rho * ddw[1][1]
                    sel = (self.mm == m) & (self.ll == l)
                    sv = s_node[sel]
                    Xc[sel, :, 0] = q
                    Xc[sel, :, 1] = sv[:, None] * q_t
                    Xc[sel, :, 2] = sv[:, None] * q_p
                    Xcc[sel, :, 0, 1] = Xcc[sel, :, 1, 0] = q_t
                    Xcc[sel, :, 0, 2] = Xcc[sel, :, 2, 0] = q_p
                    Xcc[sel, :, 1, 1] = sv[:, None] * q_tt
                    Xcc[sel, :, 1, 2] = Xcc[sel, :, 2, 1] = sv[:, None] * q_tp
                    Xcc[sel, :, 2, 2] = sv[:, None] * q_pp
                    xyz[sel] = sv[:, None] * q
        else:
            for l in range(L):
                p = phi[l]
                w = np.array([math.cos(p), math.sin(p)])
                w_p = np.array([-math.sin(p), math.cos(p)])
                rho, dr, ddr = self.domain.rho_jet(p)
                q = rho * w
                q_p = dr * w + rho * w_p
                q_pp = ddr * w + 2.0 * dr * w_p - rho * w
                sel = self.ll == l
                sv = s_node[sel]
                Xc[sel, :, 0] = q
                Xc[sel, :, 1] = sv[:, None] * q_p
                Xcc[sel, :, 0, 1] = Xcc[sel, :, 1, 0] = q_p
                Xcc[sel, :, 1, 1] = sv[:, None] * q_pp
                xyz[sel] = sv[:, None] * q

        det = np.linalg.det(Xc)
        if np.abs(det).min() < 1.0e-12:
            raise GridDegeneracyError(
                "radial map loses injectivity on the grid "
                f"(min |det| = {np.abs(det).min():.3e})")
        self.A = np.linalg.inv(Xc)
        self.Xcc = Xcc
        self.xyz = xyz
        self.s_node = s_node

    # -- wrapped stencil indices ---------------------------------------------

    def _wrap_flat(self, dj: int, dm: int, dl: int) -> np.ndarray:
        J, M, L = self.J, self.M, self.L
        jj = self.jj + dj
        mm = self.mm + dm
        ll = self.ll + dl
        if self.n == 3:
            center = jj == 0
            if center.any():
                mm = np.where(center, M - 1 - mm, mm)
                ll = np.where(center, ll + L // 2, ll)
                jj = np.where(center, 1, jj)
            low = mm == -1
            mm = np.where(low, 0, mm)
            ll = np.where(low, ll + L // 2, ll)
            high = mm == M
            mm = np.where(high, M - 1, mm)
            ll = np.where(high, ll + L // 2, ll)
        else:
            center = jj == 0
            if center.any():
                ll = np.where(center, ll + L // 2, ll)
                jj = np.where(center, 1, jj)
        ll = ll % L
        return (jj - 1) * M * L + mm * L + ll

    def _build_index_maps(self):
        offsets = _OFFSETS3 if self.n == 3 else _OFFSETS2
        self.idx = {}
        for off in offsets:
            if self.n == 3:
                flat = self._wrap_flat(*off)
            else:
                flat = self._wrap_flat(off[0], 0, off[1])
            self.idx[off] = flat

    # -- chart derivatives -----------------------------------------------------

    def chart_derivatives(self, U: np.ndarray):
        """First/second chart derivatives of the full height array.

        Interior rows only: slices [:n_int] of every stencil gather.
        """
        ni = self.n_int
        g = {off: U[ix[:ni]] for off, ix in self.idx.items()}
        n = self.n
        p = np.empty((ni, n))
        P = np.empty((ni, n, n))
        hs = self.hs
        if n == 3:
            hth, hph = self.hth, self.hph
            u0 = g[(0, 0, 0)]
            p[:, 0] = (g[(1, 0, 0)] - g[(-1, 0, 0)]) / (2 * hs)
            p[:, 1] = (g[(0, 1, 0)] - g[(0, -1, 0)]) / (2 * hth)
            p[:, 2] = (g[(0, 0, 1)] - g[(0, 0, -1)]) / (2 * hph)
            P[:, 0, 0] = (g[(1, 0, 0)] - 2 * u0 + g[(-1, 0, 0)]) / hs ** 2
            P[:, 1, 1] = (g[(0, 1, 0)] - 2 * u0 + g[(0, -1, 0)]) / hth ** 2
            P[:, 2, 2] = (g[(0, 0, 1)] - 2 * u0 + g[(0, 0, -1)]) / hph ** 2
            P[:, 0, 1] = P[:, 1, 0] = (g[(1, 1, 0)] - g[(1, -1, 0)]
                                       - g[(-1, 1, 0)] + g[(-1, -1, 0)]) / (4 * hs * hth)
            P[:, 0, 2] = P[:, 2, 0] = (g[(1, 0, 1)] - g[(1, 0, -1)]
                                       - g[(-1, 0, 1)] + g[(-1, 0, -1)]) / (4 * hs * hph)
            P[:, 1, 2] = P[:, 2, 1] = (g[(0, 1, 1)] - g[(0, 1, -1)]
                                       - g[(0, -1, 1)] + g[(0, -1, -1)]) / (4 * hth * hph)
        else:
            hph = self.hph
            u0 = g[(0, 0)]
            p[:, 0] = (g[(1, 0)] - g[(-1, 0)]) / (2 * hs)
            p[:, 1] = (g[(0, 1)] - g[(0, -1)]) / (2 * hph)
            P[:, 0, 0] = (g[(1, 0)] - 2 * u0 + g[(-1, 0)]) / hs ** 2
            P[:, 1, 1] = (g[(0, 1)] - 2 * u0 + g[(0, -1)]) / hph ** 2
            P[:, 0, 1] = P[:, 1, 0] = (g[(1, 1)] - g[(1, -1)]
                                       - g[(-1, 1)] + g[(-1, -1)]) / (4 * hs * hph)
        return p, P

    def boundary_chart_derivatives(self, U: np.ndarray):
        """One-sided (radial) derivatives on the boundary ring, for reports."""
        J, M, L = self.J, self.M, self.L
        nb = M * L
        base = (J - 1) * M * L

        def ring(j):
            return U[(j - 1) * M * L:(j) * M * L]

        uJ, u1, u2, u3 = ring(J), ring(J - 1), ring(J - 2), ring(J - 3)
        hs = self.hs
        n = self.n
        p = np.empty((nb, n))
        P = np.empty((nb, n, n))
        p[:, 0] = (3 * uJ - 4 * u1 + u2) / (2 * hs)
        P[:, 0, 0] = (2 * uJ - 5 * u1 + 4 * u2 - u3) / hs ** 2

        def ang_shift(ringvals, dm, dl):
            # wrap within a single ring; center wrap cannot occur here
            mm = self.mm[base:base + nb] + dm
            ll = self.ll[base:base + nb] + dl
            if self.n == 3:
                low = mm == -1
                mm = np.where(low, 0, mm)
                ll = np.where(low, ll + L // 2, ll)
                high = mm == M
                mm = np.where(high, M - 1, mm)
                ll = np.where(high, ll + L // 2, ll)
            ll = ll % L
            return ringvals[mm * L + ll]

        if n == 3:
            hth, hph = self.hth, self.hph
            dth = {j: (ang_shift(r, 1, 0) - ang_shift(r, -1, 0)) / (2 * hth)
                   for j, r in (("J", uJ), ("1", u1), ("2", u2))}
            dph = {j: (ang_shift(r, 0, 1) - ang_shift(r, 0, -1)) / (2 * hph)
                   for j, r in (("J", uJ), ("1", u1), ("2", u2))}
            p[:, 1] = dth["J"]
            p[:, 2] = dph["J"]
            P[:, 1, 1] = (ang_shift(uJ, 1, 0) - 2 * uJ + ang_shift(uJ, -1, 0)) / hth ** 2
            P[:, 2, 2] = (ang_shift(uJ, 0, 1) - 2 * uJ + ang_shift(uJ, 0, -1)) / hph ** 2
            P[:, 1, 2] = P[:, 2, 1] = (ang_shift(uJ, 1, 1) - ang_shift(uJ, 1, -1)
                                       - ang_shift(uJ, -1, 1) + ang_shift(uJ, -1, -1)) \
                / (4 * hth * hph)
            P[:, 0, 1] = P[:, 1, 0] = (3 * dth["J"] - 4 * dth["1"] + dth["2"]) / (2 * hs)
            P[:, 0, 2] = P[:, 2, 0] = (3 * dph["J"] - 4 * dph["1"] + dph["2"]) / (2 * hs)
        else:
            hph = self.hph
            dph = {j: (ang_shift(r, 0, 1) - ang_shift(r, 0, -1)) / (2 * hph)
                   for j, r in (("J", uJ), ("1", u1), ("2", u2))}
            p[:, 1] = dph["J"]
            P[:, 1, 1] = (ang_shift(uJ, 0, 1) - 2 * uJ + ang_shift(uJ, 0, -1)) / hph ** 2
            P[:, 0, 1] = P[:, 1, 0] = (3 * dph["J"] - 4 * dph["1"] + dph["2"]) / (2 * hs)
        return p, P

    # -- Jacobian sparsity and coloring ---------------------------------------

    def coloring(self):
        """(pattern csr, column colors, per-color scatter data), cached."""
        if self._coloring is not None:
            return self._coloring
        ni = self.n_int
        offsets = list(self.idx)
        cols_per_row = np.stack([self.idx[o][:ni] for o in offsets], axis=1)
        rows = np.repeat(np.arange(ni), cols_per_row.shape[1])
        cols = cols_per_row.ravel()
        keep = cols < ni
        pat = scipy.sparse.csr_matrix(
            (np.ones(keep.sum(), dtype=np.int8), (rows[keep], cols[keep])),
            shape=(ni, ni))
        pat.sum_duplicates()
        pat.sort_indices()

        conflict = (pat.T @ pat).tocsr()
        conflict.sort_indices()
        colors = np.full(ni, -1, dtype=np.int32)
        for j in range(ni):
            nbr = conflict.indices[conflict.indptr[j]:conflict.indptr[j + 1]]
            used = set(colors[nbr[nbr < j]].tolist())
            c = 0
            while c in used:
                c += 1
            colors[j] = c
        ncolors = int(colors.max()) + 1

        patT = pat.T.tocsr()
        patT.sort_indices()
        plans = []
        for c in range(ncolors):
            cols_c = np.where(colors == c)[0]
            pos_list, row_list, col_list = [], [], []
            for col in cols_c:
                rws = patT.indices[patT.indptr[col]:patT.indptr[col + 1]]
                for r in rws:
                    lo, hi = pat.indptr[r], pat.indptr[r + 1]
                    pos = lo + np.searchsorted(pat.indices[lo:hi], col)
                    pos_list.append(pos)
                    row_list.append(r)
                    col_list.append(col)
            plans.append((cols_c,
                          np.asarray(pos_list, dtype=np.int64),
                          np.asarray(row_list, dtype=np.int64),
                          np.asarray(col_list, dtype=np.int64)))
        self._coloring = (pat, colors, plans)
        return self._coloring


class _GridScheme:
    """Residual, guard and Jacobian for one (geometry, eps_bdry) pair."""

    def __init__(self, geo: _GridGeometry, eps_bdry: float):
        self.geo = geo
        self.eps_bdry = float(eps_bdry)

    def full_height(self, v: np.ndarray) -> np.ndarray:
        U = np.empty(self.geo.n_all)
        U[:self.geo.n_int] = v
        U[self.geo.n_int:] = self.eps_bdry
        return U

    def _shape_matrices(self, U: np.ndarray):
        geo = self.geo
        ni = geo.n_int
        p, P = geo.chart_derivatives(U)
        A = geo.A[:ni]
        Du = np.einsum("na,nam->nm", p, A)
        C = np.einsum("nmab,nm->nab", geo.Xcc[:ni], Du)
        H = np.einsum("nam,nab,nbk->nmk", A, P - C, A)
        u = U[:ni]
        w2 = 1.0 + np.einsum("nm,nm->n", Du, Du)
        w = np.sqrt(w2)
        nu = 1.0 / w
        coef = 1.0 / (w * (w + 1.0))
        n = geo.n
        eye = np.eye(n)
        Gh = eye[None, :, :] - coef[:, None, None] * Du[:, :, None] * Du[:, None, :]
        he = H / w[:, None, None]
        S = u[:, None, None] * np.einsum("nab,nbc,ncd->nad", Gh, he, Gh) \
            + nu[:, None, None] * eye[None, :, :]
        return S, u, nu, Du

    def residual(self, v: np.ndarray, sigma: float) -> np.ndarray:
        S, _, _, _ = self._shape_matrices(self.full_height(v))
        t = np.trace(S, axis1=1, axis2=2)
        if self.geo.n == 2:
            return t - sigma
        t2 = np.einsum("nab,nab->n", S, S)
        return 0.5 * (t * t - t2) - sigma

    def guard(self, v: np.ndarray) -> bool:
        if not (v > 0.0).all():
            return False
        S, _, _, _ = self._shape_matrices(self.full_height(v))
        t = np.trace(S, axis1=1, axis2=2)
        if not (t > 0.0).all():
            return False
        if self.geo.n == 2:
            return True
        t2 = np.einsum("nab,nab->n", S, S)
        return bool((0.5 * (t * t - t2) > 0.0).all())

    def jacobian_step(self, v: np.ndarray, F: np.ndarray,
                      sigma: float) -> np.ndarray:
        pat, _, plans = self.geo.coloring()
        data = np.zeros(pat.nnz)
        for cols_c, pos, rows, cols in plans:
            delta = 1.0e-6 * (1.0 + np.abs(v[cols_c]))
            dvec = np.zeros_like(v)
            dvec[cols_c] = delta
            dF = self.residual(v + dvec, sigma) - self.residual(v - dvec, sigma)
            dmap = np.zeros_like(v)
            dmap[cols_c] = 2.0 * delta
            data[pos] = dF[rows] / dmap[cols]
        J = scipy.sparse.csr_matrix(
            (data, pat.indices, pat.indptr), shape=pat.shape).tocsc()
        lu = scipy.sparse.linalg.splu(J)
        return lu.solve(-F)

    # -- field assembly -------------------------------------------------------

    def build_field(self, v: np.ndarray, sigma: float, iterations: int,
                    resid: float) -> SolutionField:
        geo = self.geo
        U = self.full_height(v)
        ni, na = geo.n_int, geo.n_all
        S_int, _, nu_int, _ = self._shape_matrices(U)

        pb, Pb = geo.boundary_chart_derivatives(U)
        Ab = geo.A[ni:]
        Dub = np.einsum("na,nam->nm", pb, Ab)
        Cb = np.einsum("nmab,nm->nab", geo.Xcc[ni:], Dub)
        Hb = np.einsum("nam,nab,nbk->nmk", Ab, Pb - Cb, Ab)
        wb = np.sqrt(1.0 + np.einsum("nm,nm->n", Dub, Dub))
        nub = 1.0 / wb
        coefb = 1.0 / (wb * (wb + 1.0))
        eye = np.eye(geo.n)
        Ghb = eye[None] - coefb[:, None, None] * Dub[:, :, None] * Dub[:, None, :]
        Sb = U[ni:, None, None] * np.einsum(
            "nab,nbc,ncd->nad", Ghb, Hb / wb[:, None, None], Ghb) \
            + nub[:, None, None] * eye[None]

        S_all = np.concatenate([S_int, Sb], axis=0)
        spectra = np.linalg.eigvalsh(S_all)[:, ::-1]
        t = np.trace(S_all, axis1=1, axis2=2)
        if geo.n == 2:
            res_all = t - sigma
        else:
            t2 = np.einsum("nab,nab->n", S_all, S_all)
            res_all = 0.5 * (t * t - t2) - sigma
        nu_all = np.concatenate([nu_int, nub])

        boundary = np.zeros(na, dtype=bool)
        boundary[ni:] = True
        near = np.zeros(na, dtype=bool)
        near[(geo.jj >= geo.J - 1)] = True

        from .cones import elem_sym_table
        tab = elem_sym_table(spectra[:ni], geo.n - 1)
        cone_ok = bool((tab[:, 1:] > 0.0).all())
        return SolutionField(
            domain=geo.domain,
            nodes=geo.xyz.copy(),
            u=U,
            boundary=boundary,
            nu_vertical=nu_all,
            spectra=spectra,
            residual_field=res_all,
            convergence=ConvergenceInfo(iterations=iterations, residual=resid,
                                        eps_bdry=self.eps_bdry, sigma=sigma),
            cone_ok=cone_ok,
            meta={"kind": "grid", "mesh": geo.mesh, "near_boundary": near,
                  "s_node": geo.s_node.copy()},
        )


# ---------------------------------------------------------------------------
# Initial guesses and continuation driver
# ---------------------------------------------------------------------------

def _reference_radius(domain: DomainSpec) -> float:
    if domain.kind == "ball":
        return domain.radius
    if domain.kind == "ellipsoid":
        return float(np.mean(domain.semi_axes))
    return float(np.mean(domain.star_samples))


def _cap_profile_guess(geo: _GridGeometry, sigma: float, eps: float) -> np.ndarray:
    """Umbilic cap profile of the mean-radius ball, composed with s."""
    R = _reference_radius(geo.domain)
    cap = exact_cap(geo.n, sigma, R, eps)
    return cap.height(R * geo.s_node[:geo.n_int])

def initial_grid_guess(geo: _GridGeometry, sigma: float, eps: float) -> np.ndarray:
    """Boundary-exact starting heights inside the cone guard.

    Balls start on the exact cap.  Other domains start from the linear
    distance profile eps + sqrt(1-lam^2)/lam * dist(x, boundary) with
    one neighbor-averaging pass, which tracks the cap's boundary growth;
    its center crease can poke out of the cone, so the guess is blended
    toward the (always admissible) mean-radius cap profile until the
    guard accepts it.
    """
    ni = geo.n_int
    if geo.domain.kind == "ball":
        cap = exact_cap(geo.n, sigma, geo.domain.radius, eps)
        r = np.linalg.norm(geo.xyz[:ni], axis=1)
        return cap.height(r)

    lam = (sigma / geo.n) ** (1.0 / (geo.n - 1))
    slope = math.sqrt(1.0 - lam * lam) / lam
    # distance proxy (1 - s) * rho * cos(angle between ray and normal)
    if geo.domain.kind == "ellipsoid":
        Mdiag = 1.0 / np.asarray(geo.domain.semi_axes) ** 2
        xb = geo.xyz / geo.s_node[:, None]  # boundary point along each ray
        # cos(gamma) = rho * (omega . M omega) / |rho * M omega|
        rho = np.linalg.norm(xb, axis=1)
        omega = xb / rho[:, None]
        momega = Mdiag[None, :] * omega
        cosg = (np.einsum("ni,ni->n", omega, momega) * rho
                / np.linalg.norm(momega * rho[:, None], axis=1))
        dist = (1.0 - geo.s_node) * rho * cosg
    else:
        rho = np.linalg.norm(geo.xyz / geo.s_node[:, None], axis=1)
        dist = (1.0 - geo.s_node) * rho
    u0 = eps + slope * dist[:ni]

    # one neighbor-averaging pass (boundary stays pinned at eps)
    U = np.empty(geo.n_all)
    U[:ni] = u0
    U[ni:] = eps
    axes = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)] \
        if geo.n == 3 else [(1, 0), (-1, 0), (0, 1), (0, -1)]
    acc = np.zeros(ni)
    for off in axes:
        acc += U[geo.idx[off][:ni]]
    u0 = 0.5 * u0 + 0.5 * acc / len(axes)

    scheme = _GridScheme(geo, eps)
    capg = _cap_profile_guess(geo, sigma, eps)
    blend = u0
    for _ in range(40):
        if scheme.guard(blend):
            return blend
        blend = 0.5 * blend + 0.5 * capg
    return capg


def _converge_grid(scheme: _GridScheme, v: np.ndarray, sigma: float,
                   params: NewtonParams):
    return damped_newton(
        v,
        residual_fn=lambda x: scheme.residual(x, sigma),
        guard_fn=scheme.guard,
        jacobian_solver=lambda x, F: scheme.jacobian_step(x, F, sigma),
        params=params,
    )


def _descend_eps_grid(geo: _GridGeometry, params, v, sigma,
                      eps_from, eps_to, depth=0):
    scheme = _GridScheme(geo, eps_to)
    R = _reference_radius(geo.domain)
    shift = exact_cap(geo.n, sigma, R, eps_to).height(R * geo.s_node[:geo.n_int]) \
        - exact_cap(geo.n, sigma, R, eps_from).height(R * geo.s_node[:geo.n_int])
    v = v + shift
    try:
        return scheme, _converge_grid(scheme, v, sigma, params)
    except (NewtonDivergenceError, ConeViolationError):
        if depth >= 3:
            raise
        mid = math.sqrt(eps_from * eps_to)
        _, (vm, it1, _) = _descend_eps_grid(geo, params, v - shift, sigma,
                                            eps_from, mid, depth + 1)
        scheme2, (v2, it2, res2) = _descend_eps_grid(geo, params, vm, sigma,
                                                     mid, eps_to, depth + 1)
        return scheme2, (v2, it1 + it2, res2)


def solve_graph_path(config: SolveConfig, domain: DomainSpec) -> list[SolutionField]:
    """Continuation solve on the mapped grid; one field per scheduled eps."""
    if domain.n != config.n:
        raise ValueError("domain dimension does not match config.n")
    if config.n not in (2, 3):
        raise ValueError("grid solves support n in {2, 3}")
    if domain.boundary_mean_curvature_min < 0.0:
        raise ValueError("domain boundary must have nonnegative mean curvature")
    mesh = config.mesh
    if mesh is None:
        mesh = SphericalGridMesh() if config.n == 3 else PolarGridMesh()
    geo = _GridGeometry(domain, mesh)
    params = config.newton

    sig_path = list(config.sigma_path)
    if not sig_path or sig_path[-1] != config.sigma_target:
        sig_path.append(config.sigma_target)

    eps0 = config.eps_schedule[0]
    scheme = _GridScheme(geo, eps0)
    R = _reference_radius(domain)
    s_int = geo.s_node[:geo.n_int]

    def first_leg(sigma_first):
        v0 = initial_grid_guess(geo, sigma_first, eps0)
        return _converge_grid(scheme, v0, sigma_first, params)

    try:
        v, it, res = first_leg(sig_path[0])
    except (ConeViolationError, NewtonDivergenceError):
        if config.sigma_path:
            raise  # an explicit path is not second-guessed
        # extreme targets (very steep or very flat caps) can place every
        # direct guess outside the cone; walk sigma there from a mid
        # value, transporting iterates along the cap family
        easy = 0.5 * config.n
        ratio = max(easy, config.sigma_target) / min(easy, config.sigma_target)
        count = max(2, math.ceil(math.log(ratio) / math.log(2.0)) + 2)
        sig_path = list(np.geomspace(easy, config.sigma_target, count))
        sig_path[-1] = config.sigma_target
        v, it, res = first_leg(sig_path[0])
    total_it = it
    for prev_sg, sg in zip(sig_path, sig_path[1:]):
        v = v + exact_cap(geo.n, sg, R, eps0).height(R * s_int) \
            - exact_cap(geo.n, prev_sg, R, eps0).height(R * s_int)
        v, it, res = _converge_grid(scheme, v, sg, params)
        total_it += it

    fields = [scheme.build_field(v, config.sigma_target, total_it, res)]
    prev = eps0
    for eps in config.eps_schedule[1:]:
        scheme, (v, it, res) = _descend_eps_grid(
            geo, params, v, config.sigma_target, prev, eps)
        fields.append(scheme.build_field(v, config.sigma_target, it, res))
        prev = eps
    return fields


def solve_graph(config: SolveConfig, domain: DomainSpec) -> SolutionField:
    return solve_graph_path(config, domain)[-1]


# ---------------------------------------------------------------------------
# Field-level hooks used by solver.pde_residual / solver.newton_step
# ---------------------------------------------------------------------------

def _scheme_from_field(field: SolutionField) -> _GridScheme:
    geo = _GridGeometry(field.domain, field.meta["mesh"])
    return _GridScheme(geo, field.convergence.eps_bdry)


def grid_residual(field: SolutionField) -> np.ndarray:
    scheme = _scheme_from_field(field)
    return scheme.residual(field.u[:scheme.geo.n_int], field.convergence.sigma)


def newton_step_grid(field: SolutionField, damping: float = 1.0):
    scheme = _scheme_from_field(field)
    sigma = field.convergence.sigma
    v = field.u[:scheme.geo.n_int]
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
            if after <= before * (1.0 + 1.0e-12) + 1.0e-15:
                out = scheme.build_field(trial, sigma,
                                         field.convergence.iterations + 1, after)
                return out, (before, after)
        t *= 0.5
    if not guard_seen:
        raise ConeViolationError("cone guard rejected every damped step",
                                 state=field.u)
    raise NewtonDivergenceError("single Newton step could not avoid a "
                                "residual increase", state=field.u)
