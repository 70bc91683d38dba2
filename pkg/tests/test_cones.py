"""Cone calculus against brute-force combinatorial oracles."""

import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from hplateau import cones
from hplateau.errors import ConePreconditionError, DegenerateSpectrumError


def _sigma_brute(vals, k):
    # independent oracle: literal sum over k-subsets
    if k == 0:
        return 1.0
    return float(sum(math.prod(c) for c in itertools.combinations(vals, k)))


def _deleted(vals, *drop):
    return [v for i, v in enumerate(vals) if i not in drop]


# ---------------------------------------------------------------------------
# sigma_k table and jets vs. brute force
# ---------------------------------------------------------------------------

def test_elem_sym_table_matches_brute_force():
    rng = np.random.default_rng(7)
    rows = rng.normal(size=(40, 5))
    tab = cones.elem_sym_table(rows, 5)
    assert tab.shape == (40, 6)
    for i, row in enumerate(rows):
        for k in range(6):
            expect = _sigma_brute(row.tolist(), k)
            scale = 1.0 + abs(expect)
            assert abs(tab[i, k] - expect) <= 1e-12 * scale


def test_gradient_is_deleted_sigma():
    vals = [2.5, 1.0, 0.4, 0.1]
    jet = cones.symmetric_jet(vals, 3)
    for i in range(4):
        expect = _sigma_brute(_deleted(vals, i), 2)
        assert jet.gradient[i] == pytest.approx(expect, rel=1e-12)


def test_hessian_is_doubly_deleted_sigma():
    vals = [3.0, 1.5, 0.7, 0.2, 0.05]
    jet = cones.symmetric_jet(vals, 4)
    assert np.allclose(jet.hessian, jet.hessian.T)
    for i in range(5):
        assert jet.hessian[i, i] == 0.0
        for j in range(5):
            if i == j:
                continue
            expect = _sigma_brute(_deleted(vals, i, j), 2)
            assert jet.hessian[i, j] == pytest.approx(expect, rel=1e-12)


def test_jet_derivatives_match_finite_differences():
    vals = np.array([1.8, 0.9, 0.35])
    jet = cones.symmetric_jet(vals, 2)
    h = 1e-6
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fp = _sigma_brute((vals + e).tolist(), 2)
        fm = _sigma_brute((vals - e).tolist(), 2)
        assert jet.gradient[i] == pytest.approx((fp - fm) / (2 * h), rel=1e-8)
    # one mixed second difference
    e0 = np.array([h, 0.0, 0.0])
    e1 = np.array([0.0, h, 0.0])
    mixed = (_sigma_brute((vals + e0 + e1).tolist(), 2)
             - _sigma_brute((vals + e0 - e1).tolist(), 2)
             - _sigma_brute((vals - e0 + e1).tolist(), 2)
             + _sigma_brute((vals - e0 - e1).tolist(), 2)) / (4 * h * h)
    assert jet.hessian[0, 1] == pytest.approx(mixed, rel=1e-4)


def test_k_bounds_are_validated():
    with pytest.raises(ValueError):
        cones.symmetric_jet([1.0, 2.0], 0)
    with pytest.raises(ValueError):
        cones.symmetric_jet([1.0, 2.0], 3)
    with pytest.raises(ValueError):
        cones.elementary_symmetric([1.0, 2.0], 2.5)


def test_curvature_vector_sorting_contract():
    with pytest.raises(ValueError):
        cones.CurvatureVector((0.5, 1.0))
    kv = cones.CurvatureVector.from_values([0.5, 1.0, -0.2])
    assert kv.values == (1.0, 0.5, -0.2)
    with pytest.raises(ValueError):
        cones.CurvatureVector.from_values([1.0, float("nan")])
    with pytest.raises(ValueError):
        cones.CurvatureVector.from_values([1.0])


# ---------------------------------------------------------------------------
# membership and the two cone inequalities
# ---------------------------------------------------------------------------

def test_membership_flags_each_sigma_sign():
    mem = cones.cone_membership([2.0, 1.0, -0.5], 2)
    assert mem.inside
    assert mem.sigma_values == pytest.approx((2.5, 0.5))
    # sigma_3 = -1 < 0, so the same spectrum leaves Gamma_3
    assert not cones.cone_membership([2.0, 1.0, -0.5], 3).inside


def test_second_moment_slack_requires_cone():
    with pytest.raises(ConePreconditionError):
        cones.second_moment_slack([1.0, -2.0], 1)


def test_negative_part_slack_values():
    # no nonpositive entries: vacuous, +inf
    assert cones.negative_part_slack([2.0, 1.0, 0.5], 2) == math.inf
    # one nonpositive entry: ((n-k)/k) kappa_1 + kappa_min
    got = cones.negative_part_slack([2.0, 1.0, -0.5], 2)
    assert got == pytest.approx((1.0 / 2.0) * 2.0 - 0.5, rel=1e-12)


def test_cone_mask_batch_agrees_with_scalar():
    rows = cones.sample_cone(4, 2, 64, seed=3)
    loose = rows.copy()
    loose[::3, -1] -= 6.0  # push some rows out
    mask = cones.cone_mask_batch(np.sort(loose, axis=1)[:, ::-1], 2)
    for row, flag in zip(np.sort(loose, axis=1)[:, ::-1], mask):
        assert cones.cone_membership(row, 2).inside == bool(flag)


# ---------------------------------------------------------------------------
# certification form
# ---------------------------------------------------------------------------

def test_form_matrix_at_umbilic_point():
    # kappa = (1,1,1), eps = 0.1, K = 0: gradient (2,2,2), Hessian ones-I,
    # so M = -H + diag(-2, 2.2, 2.2).  Its eigenvalues are 3.2 on the
    # antisymmetric direction and the 2x2 pencil [[-2, -sqrt2],[-sqrt2, 1.2]],
    # whose lower root is (-0.8 - sqrt(18.24))/2.
    q = cones.ren_wang_form([1.0, 1.0, 1.0], 0.1, 0.0)
    expect = np.array([[-2.0, -1.0, -1.0],
                       [-1.0, 2.2, -1.0],
                       [-1.0, -1.0, 2.2]])
    assert np.allclose(q.form_matrix, expect, atol=1e-14)
    assert q.min_eigenvalue == pytest.approx((-0.8 - math.sqrt(18.24)) / 2.0,
                                             rel=1e-12)
    assert not q.certified


def test_min_k_at_umbilic_point_closed_form():
    # In the symmetric 2x2 block the determinant is linear in K:
    # det = 4.8 K - 4.4, so the certified threshold is exactly 11/12.
    got = cones.ren_wang_min_k([1.0, 1.0, 1.0], 0.1)
    assert got == pytest.approx(11.0 / 12.0, rel=1e-5)
    # scaling kappa -> t kappa rescales the threshold by 1/t^2
    scaled = cones.ren_wang_min_k([0.5, 0.5, 0.5], 0.1)
    assert scaled == pytest.approx(4.0 * 11.0 / 12.0, rel=1e-5)


def test_min_k_brackets_certification():
    rows = cones.sample_cone(3, 2, 8, seed=11, level=1.0)
    ks = cones.ren_wang_min_k_batch(rows, 0.1)
    assert np.isfinite(ks).all()
    for row, kstar in zip(rows, ks):
        assert cones.ren_wang_form(row, 0.1, float(kstar) * 1.01).certified
        if kstar > 1e-3:
            assert not cones.ren_wang_form(row, 0.1,
                                           float(kstar) * 0.9).certified


def test_min_k_weakly_decreasing_in_eps():
    # a larger eps only adds positive diagonal, enlarging the certified set
    rows = cones.sample_cone(3, 2, 16, seed=21, level=1.0)
    tight = cones.ren_wang_min_k_batch(rows, 0.05)
    loose = cones.ren_wang_min_k_batch(rows, 0.5)
    assert (loose <= tight * (1.0 + 1e-5) + 1e-9).all()


def test_form_input_validation():
    with pytest.raises(ValueError):
        cones.ren_wang_form([1.0, 1.0, 1.0], -0.1, 1.0)
    with pytest.raises(ValueError):
        cones.ren_wang_form([1.0, 1.0, 1.0], 0.1, -1.0)
    with pytest.raises(ConePreconditionError):
        cones.ren_wang_min_k([1.0, -1.0, -1.0], 0.1)


# ---------------------------------------------------------------------------
# top-eigenvalue jet
# ---------------------------------------------------------------------------

def _eigmax(M):
    return float(np.linalg.eigvalsh(M)[-1])


def test_eigenvalue_jet_matches_finite_differences():
    rng = np.random.default_rng(5)
    A = np.diag([5.0, 1.0, 0.0, -1.0])
    B = rng.normal(size=(4, 4))
    B = 0.5 * (B + B.T)
    C = rng.normal(size=(4, 4))
    C = 0.5 * (C + C.T)
    val, d1, d2 = cones.eigenvalue_jet(A, B, C)
    assert val == pytest.approx(5.0)

    def path(t):
        return _eigmax(A + t * B + 0.5 * t * t * C)

    h = 1e-5
    assert d1 == pytest.approx((path(h) - path(-h)) / (2 * h), abs=1e-7)
    assert d2 == pytest.approx((path(h) - 2 * path(0.0) + path(-h)) / (h * h),
                               abs=1e-4)


def test_eigenvalue_jet_rejects_degenerate_top():
    with pytest.raises(DegenerateSpectrumError):
        cones.eigenvalue_jet(np.eye(3), np.eye(3), np.eye(3))


def test_eigenvalue_jet_rejects_asymmetric():
    A = np.diag([2.0, 1.0])
    bad = np.array([[0.0, 1.0], [0.0, 0.0]])
    with pytest.raises(ValueError):
        cones.eigenvalue_jet(A, bad, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        cones.eigenvalue_jet(np.zeros((2, 3)), np.zeros((2, 3)),
                             np.zeros((2, 3)))


# ---------------------------------------------------------------------------
# cone sampling
# ---------------------------------------------------------------------------

def test_sample_cone_is_deterministic_and_inside():
    a = cones.sample_cone(4, 3, 200, seed=42)
    b = cones.sample_cone(4, 3, 200, seed=42)
    assert np.array_equal(a, b)
    assert a.shape == (200, 4)
    assert cones.cone_mask_batch(a, 3).all()
    assert (np.diff(a, axis=1) <= 0.0).all()
    c = cones.sample_cone(4, 3, 200, seed=43)
    assert not np.array_equal(a, c)


def test_sample_cone_level_normalisation():
    rows = cones.sample_cone(3, 2, 100, seed=9, level=2.5)
    sig = cones.elementary_symmetric_batch(rows, 2)
    assert np.allclose(sig, 2.5, rtol=1e-9)


def test_sample_cone_validation():
    with pytest.raises(ValueError):
        cones.sample_cone(1, 1, 10, seed=0)
    with pytest.raises(ValueError):
        cones.sample_cone(3, 2, 0, seed=0)
    with pytest.raises(ValueError):
        cones.sample_cone(3, 2, 10, seed=0, level=-1.0)


# ---------------------------------------------------------------------------
# algebraic identities as properties
# ---------------------------------------------------------------------------

def _spectra(draw_negative_tail=True):
    def build(vals, tail):
        vals = sorted(vals, reverse=True)
        if draw_negative_tail and tail is not None:
            vals[-1] = tail
        return sorted(vals, reverse=True)

    return st.integers(2, 5).flatmap(
        lambda n: st.builds(
            build,
            st.lists(st.floats(0.05, 4.0), min_size=n, max_size=n),
            st.one_of(st.none(), st.floats(-1.5, 0.0)),
        )
    )


@given(_spectra(), st.data())
def test_euler_identity(vals, data):
    n = len(vals)
    k = data.draw(st.integers(1, n), label="k")
    assume(cones.cone_membership(vals, k).inside)
    jet = cones.symmetric_jet(vals, k)
    lhs = float(np.dot(jet.gradient, vals))
    scale = 1.0 + abs(jet.value)
    assert abs(lhs - k * jet.value) <= 5e-12 * scale


@given(_spectra(), st.floats(0.1, 3.0), st.data())
def test_homogeneity(vals, t, data):
    n = len(vals)
    k = data.draw(st.integers(1, n), label="k")
    base = cones.elementary_symmetric(vals, k)
    scaled = cones.elementary_symmetric([t * v for v in vals], k)
    assert scaled == pytest.approx(t ** k * base, rel=1e-10, abs=1e-12)


@given(_spectra(), st.data())
def test_deletion_identity(vals, data):
    n = len(vals)
    k = data.draw(st.integers(1, n - 1), label="k")
    i = data.draw(st.integers(0, n - 1), label="i")
    full = cones.elementary_symmetric(vals, k)
    rest = _deleted(vals, i)
    expect = _sigma_brute(rest, k) + vals[i] * _sigma_brute(rest, k - 1)
    scale = 1.0 + abs(full)
    assert abs(full - expect) <= 1e-11 * scale


@given(st.integers(2, 5), st.integers(0, 200))
def test_sampled_rows_satisfy_both_slack_inequalities(n, seed_offset):
    k = n - 1
    rows = cones.sample_cone(n, k, 50, seed=1000 + seed_offset)
    quad = cones.second_moment_slack_batch(rows, k)
    neg = cones.negative_part_slack_batch(rows, k)
    scale = 1.0 + np.abs(rows).max(axis=1) ** (k + 1)
    assert (quad >= -1e-10 * scale).all()
    assert (neg >= -1e-10 * scale).all()
