"""Elementary symmetric function calculus on Garding cones.

Everything downstream (solver guards, curvature audits, form
certification) reduces to evaluating sigma_k and its first two
derivatives on spectra and deciding cone membership.  Scalar entry
points take a CurvatureVector (or anything coercible to one); the
``*_batch`` variants operate on (m, n) arrays of descending-sorted rows
and back the large sampling studies.

sigma_k is evaluated by expanding the product of (x + kappa_i) one root
at a time, which is numerically benign for the small n used here.
Derivatives are taken through the deletion identities

    d sigma_k / d kappa_i          = sigma_{k-1}(kappa with i removed)
    d^2 sigma_k / d kappa_p kappa_q = sigma_{k-2}(kappa with p, q removed)

rather than by differentiating the recurrence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConePreconditionError, DegenerateSpectrumError

__all__ = [
    "CurvatureVector",
    "ConeMembership",
    "SymmetricJet",
    "RWQuery",
    "elementary_symmetric",
    "elementary_symmetric_batch",
    "elem_sym_table",
    "symmetric_jet",
    "jet_gradient_batch",
    "jet_hessian_batch",
    "cone_membership",
    "cone_mask_batch",
    "second_moment_slack",
    "second_moment_slack_batch",
    "negative_part_slack",
    "negative_part_slack_batch",
    "ren_wang_form",
    "ren_wang_matrices",
    "ren_wang_min_k",
    "ren_wang_min_k_batch",
    "eigenvalue_jet",
    "sample_cone",
]

#: Bisection abandons the search above this K and reports +inf.
RW_K_CAP = 1.0e12

#: The certification threshold is -PSD_TOL_SCALE * (1 + spectral radius).
PSD_TOL_SCALE = 1.0e-9

#: Relative eigenvalue gap below which the top eigenvalue counts as degenerate.
EIG_GAP_TOL = 1.0e-8


@dataclass(frozen=True)
class CurvatureVector:
    """A point spectrum kappa in R^n, n >= 2, stored sorted descending."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if len(vals) < 2:
            raise ValueError("a curvature vector needs at least two entries")
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("curvature entries must be finite")
        if any(vals[i] < vals[i + 1] for i in range(len(vals) - 1)):
            raise ValueError("curvature entries must be sorted descending; "
                             "use CurvatureVector.from_values to sort")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_values(cls, values) -> "CurvatureVector":
        arr = np.sort(np.asarray(values, dtype=float), kind="stable")[::-1]
        return cls(tuple(arr))

    @property
    def n(self) -> int:
        return len(self.values)

    def array(self) -> np.ndarray:
        return np.array(self.values, dtype=float)


@dataclass(frozen=True)
class ConeMembership:
    """Outcome of testing kappa against Gamma_k = {sigma_1 > 0, ..., sigma_k > 0}."""

    k: int
    sigma_values: tuple[float, ...]
    inside: bool
    min_slack: float


@dataclass(frozen=True)
class SymmetricJet:
    """sigma_k with its gradient and Hessian at a fixed spectrum."""

    k: int
    value: float
    gradient: np.ndarray
    hessian: np.ndarray


@dataclass(frozen=True)
class RWQuery:
    """One evaluation of the certification form for the Ren-Wang inequality."""

    kappa: CurvatureVector
    eps_rw: float
    K: float
    form_matrix: np.ndarray
    min_eigenvalue: float
    certified: bool


def _coerce(kappa) -> CurvatureVector:
    if isinstance(kappa, CurvatureVector):
        return kappa
    return CurvatureVector.from_values(kappa)


def _check_k(n: int, k: int, kmin: int = 0) -> None:
    if not isinstance(k, (int, np.integer)):
        raise ValueError(f"k must be an integer, got {k!r}")
    if k < kmin or k > n:
        raise ValueError(f"k={k} out of range [{kmin}, {n}]")


def elem_sym_table(rows: np.ndarray, kmax: int) -> np.ndarray:
    """All sigma_0 .. sigma_kmax along the last axis.

    rows has shape (..., n); the result has shape (..., kmax + 1) with
    sigma_0 = 1 in the first slot.
    """
    vals = np.asarray(rows, dtype=float)
    n = vals.shape[-1]
    out = np.zeros(vals.shape[:-1] + (kmax + 1,), dtype=float)
    out[..., 0] = 1.0
    for i in range(n):
        top = min(i + 1, kmax)
        for j in range(top, 0, -1):
            out[..., j] += vals[..., i] * out[..., j - 1]
    return out


def elementary_symmetric_batch(rows: np.ndarray, k: int) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    _check_k(rows.shape[-1], k)
    return elem_sym_table(rows, k)[..., k]


def elementary_symmetric(kappa, k: int) -> float:
    """sigma_k(kappa); sigma_0 = 1 by convention."""
    kv = _coerce(kappa)
    _check_k(kv.n, k)
    return float(elementary_symmetric_batch(kv.array(), k))


def jet_gradient_batch(rows: np.ndarray, k: int) -> np.ndarray:
    """d sigma_k / d kappa_i by deletion, shape (..., n)."""
    vals = np.asarray(rows, dtype=float)
    n = vals.shape[-1]
    _check_k(n, k, kmin=1)
    grad = np.empty_like(vals)
    for i in range(n):
        sub = np.delete(vals, i, axis=-1)
        grad[..., i] = elem_sym_table(sub, k - 1)[..., k - 1]
    return grad


def jet_hessian_batch(rows: np.ndarray, k: int) -> np.ndarray:
    """d^2 sigma_k / d kappa_p d kappa_q by double deletion, zero diagonal."""
    vals = np.asarray(rows, dtype=float)
    n = vals.shape[-1]
    _check_k(n, k, kmin=1)
    hess = np.zeros(vals.shape[:-1] + (n, n), dtype=float)
    if k < 2:
        return hess
    for p in range(n):
        for q in range(p + 1, n):
            sub = np.delete(np.delete(vals, q, axis=-1), p, axis=-1)
            val = elem_sym_table(sub, k - 2)[..., k - 2]
            hess[..., p, q] = val
            hess[..., q, p] = val
    return hess


def symmetric_jet(kappa, k: int) -> SymmetricJet:
    kv = _coerce(kappa)
    _check_k(kv.n, k, kmin=1)
    arr = kv.array()
    return SymmetricJet(
        k=k,
        value=float(elementary_symmetric_batch(arr, k)),
        gradient=jet_gradient_batch(arr, k),
        hessian=jet_hessian_batch(arr, k),
    )


def cone_mask_batch(rows: np.ndarray, k: int) -> np.ndarray:
    """Boolean mask of rows lying strictly inside Gamma_k."""
    rows = np.asarray(rows, dtype=float)
    _check_k(rows.shape[-1], k, kmin=1)
    tab = elem_sym_table(rows, k)
    return (tab[..., 1:k + 1] > 0.0).all(axis=-1)


def cone_membership(kappa, k: int) -> ConeMembership:
    kv = _coerce(kappa)
    _check_k(kv.n, k, kmin=1)
    tab = elem_sym_table(kv.array(), k)
    sig = tuple(float(s) for s in tab[1:k + 1])
    return ConeMembership(
        k=k,
        sigma_values=sig,
        inside=all(s > 0.0 for s in sig),
        min_slack=min(sig),
    )


def _require_cone(kv: CurvatureVector, k: int, who: str) -> None:
    mem = cone_membership(kv, k)
    if not mem.inside:
        raise ConePreconditionError(
            f"{who} requires kappa in Gamma_{k}; sigma values {mem.sigma_values}"
        )


def second_moment_slack_batch(rows: np.ndarray, k: int) -> np.ndarray:
    """sum_i (d sigma_k/d kappa_i) kappa_i^2 - (k/n) sigma_1 sigma_k.

    Nonnegative on Gamma_k; rows are assumed to lie inside the cone.
    """
    rows = np.asarray(rows, dtype=float)
    n = rows.shape[-1]
    grad = jet_gradient_batch(rows, k)
    tab = elem_sym_table(rows, k)
    moment = (grad * rows * rows).sum(axis=-1)
    return moment - (k / n) * tab[..., 1] * tab[..., k]


def second_moment_slack(kappa, k: int) -> float:
    kv = _coerce(kappa)
    _check_k(kv.n, k, kmin=1)
    _require_cone(kv, k, "second_moment_slack")
    return float(second_moment_slack_batch(kv.array(), k))


def negative_part_slack_batch(rows: np.ndarray, k: int) -> np.ndarray:
    """min over nonpositive entries of ((n-k)/k) kappa_1 + kappa_i; +inf if none.

    On Gamma_k any negative entry is dominated by the top one through
    this affine bound, so the value is nonnegative inside the cone.
    Rows must be sorted descending.
    """
    rows = np.asarray(rows, dtype=float)
    n = rows.shape[-1]
    _check_k(n, k, kmin=1)
    bound = ((n - k) / k) * rows[..., 0] + rows[..., -1]
    return np.where(rows[..., -1] <= 0.0, bound, np.inf)


def negative_part_slack(kappa, k: int) -> float:
    kv = _coerce(kappa)
    _check_k(kv.n, k, kmin=1)
    _require_cone(kv, k, "negative_part_slack")
    return float(negative_part_slack_batch(kv.array(), k))


# ---------------------------------------------------------------------------
# Ren-Wang certification form
# ---------------------------------------------------------------------------

def ren_wang_matrices(rows: np.ndarray, eps_rw: float, K) -> np.ndarray:
    """Certification matrices M(K) for each row, shape (m, n, n).

    With g the sigma_{n-1} gradient, H its Hessian and F^ii = g_i,

        M(K) = kappa_1 (K g g^T - H) + diag(-F^11, (1+eps) F^22, ...)

    so xi^T M xi reproduces the third-order-term quadratic form of the
    Ren-Wang inequality.  K may be a scalar or a vector of per-row values.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    m, n = rows.shape
    g = jet_gradient_batch(rows, n - 1)
    H = jet_hessian_batch(rows, n - 1)
    k1 = rows[:, 0]
    Kv = np.broadcast_to(np.asarray(K, dtype=float), (m,))
    M = k1[:, None, None] * (Kv[:, None, None] * g[:, :, None] * g[:, None, :] - H)
    diag = (1.0 + eps_rw) * g
    diag = diag.copy()
    diag[:, 0] = -g[:, 0]
    M[:, np.arange(n), np.arange(n)] += diag
    return M


def _certified_batch(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    eigs = np.linalg.eigvalsh(M)
    lam_min = eigs[:, 0]
    scale = np.abs(eigs).max(axis=1)
    tol = PSD_TOL_SCALE * (1.0 + scale)
    return lam_min >= -tol, lam_min


def ren_wang_form(kappa, eps_rw: float, K: float) -> RWQuery:
    """Evaluate the certification matrix at a single (kappa, K)."""
    kv = _coerce(kappa)
    if eps_rw <= 0.0:
        raise ValueError("eps_rw must be positive")
    if K < 0.0:
        raise ValueError("K must be nonnegative")
    _require_cone(kv, kv.n - 1, "ren_wang_form")
    M = ren_wang_matrices(kv.array()[None, :], eps_rw, K)
    cert, lam_min = _certified_batch(M)
    return RWQuery(
        kappa=kv,
        eps_rw=float(eps_rw),
        K=float(K),
        form_matrix=M[0],
        min_eigenvalue=float(lam_min[0]),
        certified=bool(cert[0]),
    )


def ren_wang_min_k_batch(rows: np.ndarray, eps_rw: float,
                         k_cap: float = RW_K_CAP,
                         rel_tol: float = 1.0e-6) -> np.ndarray:
    """Smallest certified K per row by doubling plus bisection.

    Monotone in K because kappa_1 g g^T is positive semidefinite, so the
    certified set is an interval [min_K, inf).  Rows not certified at
    k_cap get +inf.  Returns the certified right endpoint of the final
    bracket, so the reported value itself certifies.
    """
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    m = rows.shape[0]
    out = np.full(m, np.inf)

    lo = np.zeros(m)
    hi = np.ones(m)
    cert_hi, _ = _certified_batch(ren_wang_matrices(rows, eps_rw, hi))
    active = ~cert_hi
    while active.any():
        lo[active] = hi[active]
        hi[active] *= 2.0
        over = active & (hi > k_cap)
        if over.any():
            active &= ~over
            if not active.any():
                break
        cert, _ = _certified_batch(ren_wang_matrices(rows[active], eps_rw, hi[active]))
        done = np.where(active)[0][cert]
        active[done] = False

    # rows whose hi ran past the cap stay at +inf
    bracketed = hi <= k_cap
    idx = np.where(bracketed)[0]
    lo_b, hi_b = lo[idx], hi[idx]
    while True:
        width = hi_b - lo_b
        unresolved = width > rel_tol * np.maximum(1.0, hi_b)
        if not unresolved.any():
            break
        mid = np.where(unresolved, 0.5 * (lo_b + hi_b), hi_b)
        cert, _ = _certified_batch(ren_wang_matrices(rows[idx[unresolved]],
                                                     eps_rw, mid[unresolved]))
        sel = np.where(unresolved)[0]
        hit = sel[cert]
        miss = sel[~cert]
        hi_b[hit] = mid[hit]
        lo_b[miss] = mid[miss]
    out[idx] = hi_b
    return out


def ren_wang_min_k(kappa, eps_rw: float, k_cap: float = RW_K_CAP) -> float:
    kv = _coerce(kappa)
    if eps_rw <= 0.0:
        raise ValueError("eps_rw must be positive")
    _require_cone(kv, kv.n - 1, "ren_wang_min_k")
    return float(ren_wang_min_k_batch(kv.array()[None, :], eps_rw, k_cap)[0])


# ---------------------------------------------------------------------------
# Top-eigenvalue jet along a quadratic matrix path
# ---------------------------------------------------------------------------

def eigenvalue_jet(a, adot, addot) -> tuple[float, float, float]:
    """Value and first two t-derivatives of the top eigenvalue of
    A + t Adot + (t^2/2) Addot at t = 0.

    Requires the top eigenvalue of A to be simple.  In the eigenbasis of
    A (top eigenvector first) the derivatives are the classical Rayleigh
    series: B_11 and C_11 + 2 sum_p B_1p^2 / (lam_1 - lam_p).
    """
    A = np.asarray(a, dtype=float)
    B_in = np.asarray(adot, dtype=float)
    C_in = np.asarray(addot, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("expected square matrices")
    if B_in.shape != A.shape or C_in.shape != A.shape:
        raise ValueError("path matrices must share the base shape")
    scale = max(1.0, float(np.abs(A).max()))
    for M in (A, B_in, C_in):
        if np.abs(M - M.T).max() > 1.0e-10 * scale:
            raise ValueError("path matrices must be symmetric")

    w, Q = np.linalg.eigh(0.5 * (A + A.T))
    lam = w[::-1]
    Q = Q[:, ::-1]
    gap = lam[0] - lam[1]
    if gap <= EIG_GAP_TOL * (1.0 + abs(lam[0])):
        raise DegenerateSpectrumError(
            f"top eigenvalue gap {gap:.3e} below tolerance; jet undefined")
    B = Q.T @ (0.5 * (B_in + B_in.T)) @ Q
    C = Q.T @ (0.5 * (C_in + C_in.T)) @ Q
    second = C[0, 0] + 2.0 * float(np.sum(B[0, 1:] ** 2 / (lam[0] - lam[1:])))
    return float(lam[0]), float(B[0, 0]), second


# ---------------------------------------------------------------------------
# Seeded rejection sampling of Gamma_k
# ---------------------------------------------------------------------------

def _diagonal_shift(n: int, k: int) -> float:
    # keeps the acceptance rate workable at high k while leaving plenty of
    # near-boundary mass; k = 1 needs no help
    if k <= 1:
        return 0.0
    return 0.6 * k / math.sqrt(n)


def sample_cone(n: int, k: int, count: int, seed: int,
                level: float | None = None,
                shift: float | None = None) -> np.ndarray:
    """Draw ``count`` spectra from Gamma_k, rows sorted descending.

    Gaussian proposals (optionally shifted toward the diagonal) are
    sorted and rejection-filtered on strict cone membership.  With
    ``level`` set, accepted rows are rescaled by t = (level/sigma_k)^(1/k)
    onto the level set sigma_k = level; positive homogeneity keeps them
    inside the cone.  A fixed seed fully determines the output.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    _check_k(n, k, kmin=1)
    if count < 1:
        raise ValueError("count must be positive")
    if level is not None and level <= 0.0:
        raise ValueError("level must be positive")
    mu = _diagonal_shift(n, k) if shift is None else float(shift)
    rng = np.random.default_rng(seed)
    chunks = []
    have = 0
    batch = max(4096, 2 * count)
    while have < count:
        draw = rng.standard_normal((batch, n)) + mu
        rows = np.sort(draw, axis=1)[:, ::-1]
        ok = cone_mask_batch(rows, k)
        good = rows[ok]
        if good.size:
            chunks.append(good)
            have += good.shape[0]
    rows = np.concatenate(chunks, axis=0)[:count]
    if level is not None:
        sk = elementary_symmetric_batch(rows, k)
        rows = rows * (level / sk)[:, None] ** (1.0 / k)
    return rows
