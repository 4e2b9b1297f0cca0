import math
from itertools import combinations

import numpy as np
import pytest

from core.errors import DomainError, LatticeError, SingularMatrixError
from core.frames.gramian import (
    block_interval,
    block_openings,
    bidiagonal_size,
    build_block_bidiagonal,
    build_block_p0,
    dual_window,
    f_entry_bound,
    frame_case,
    k0_for,
    neville_factorize,
    neville_norm_bound,
    pregramian_rows,
    pregramian_section,
    s_pinv_norm_bound,
)
from core.model import LatticeParams
from core.spline.windows import symmetric_eb_spline


def _lat(alpha, beta):
    return LatticeParams.create(alpha, beta).with_inferred_rational()


# ---- Classification ----

def test_frame_cases(hat, spline_4, spline_123):
    assert frame_case(hat, _lat(1.0, 0.5)) == 1
    assert frame_case(spline_4, _lat(1.0, 0.86)) == 2
    assert frame_case(spline_123, _lat(2.0, 0.45)) == 2
    assert frame_case(spline_123, _lat(1.5, 0.5)) == 3
    assert frame_case(spline_123, _lat(1.5, 0.6)) is None
    assert frame_case(hat, _lat(1.0, 1.0)) is None


def test_k0_values():
    assert k0_for(4.0, _lat(1.0, 0.86)) == 17
    assert k0_for(2.0, _lat(1.0, 0.6)) == 0
    assert k0_for(3.0, _lat(2.0, 0.45)) == 3


def test_block_interval(spline_4):
    lat = _lat(1.0, 0.86)
    I0, I1 = block_interval(spline_4, lat, 2)
    assert abs(I0 - (4.0 - 1.0 / 0.86)) <= 1e-15
    assert abs(I1 - I0 - 1.0) <= 1e-15
    assert block_interval(spline_4, lat, 1) == (0.0, 1.0)


# ---- Blocks ----

def test_p0_block(spline_4, lattice_086):
    I0, I1 = block_interval(spline_4, lattice_086, 2)
    block = build_block_p0(spline_4, lattice_086, 0.5 * (I0 + I1))
    assert block.shape == (18, 18)
    assert np.array_equal(block.entries, block.recompute(spline_4))
    assert abs(np.linalg.det(block.entries)) > 0.0


def test_p0_diagonal_positive_across_interval(spline_4, lattice_086):
    I0, I1 = block_interval(spline_4, lattice_086, 2)
    rng = np.random.default_rng(21)
    for x in rng.uniform(I0, I1, 50):
        assert np.all(np.diag(build_block_p0(spline_4, lattice_086, float(x)).entries) > 0.0), x


@pytest.mark.parametrize("size", [1, 2, 3, 4])
def test_p0_consecutive_minors_nonnegative(spline_4, spline_123, lattice_086, lattice_2_045, size):
    for w, lat in ((spline_4, lattice_086), (spline_123, lattice_2_045)):
        I0, I1 = block_interval(w, lat, 2)
        for x in np.linspace(I0, I1, 7):
            P = build_block_p0(w, lat, float(x)).entries
            n = P.shape[0]
            for i in range(n - size + 1):
                for j in range(n - size + 1):
                    sub = P[i: i + size, j: j + size]
                    det = np.linalg.det(sub)
                    assert det >= -1e-13 * max(1.0, float(np.max(sub))) ** size, (x, i, j, det)
                    if size <= 2 and np.min(np.diag(sub)) > 1e-2:
                        assert det > 0.0, (x, i, j, det)


def test_p0_block_rejections(spline_4, spline_123, lattice_086):
    with pytest.raises(DomainError):
        build_block_p0(spline_4, lattice_086, 10.0)
    with pytest.raises(LatticeError) as exc:
        build_block_p0(spline_123, _lat(1.5, 0.6), 0.5)
    assert exc.value.valid_cases


def test_section_rows_are_supported_inside(spline_4, lattice_086):
    x = 4.0 - 1.0 / 0.86
    block = pregramian_section(spline_4, lattice_086, x, -2, 19)
    rows = pregramian_rows(spline_4, lattice_086, x, block.rows.start, block.rows.stop - 1)
    # every selected row vanishes outside the section's columns
    assert rows.cols.start >= -2 and rows.cols.stop - 1 <= 19
    assert block.shape[0] >= block.shape[1]
    with pytest.raises(DomainError):
        pregramian_section(spline_4, lattice_086, x, 3, 2)


# ---- Dual windows ----

@pytest.mark.parametrize("extra_cols", [0, 2, 4, 8])
def test_duality_reference_configurations(spline_4, spline_123, lattice_086, lattice_2_045, extra_cols):
    for w, lat in ((spline_4, lattice_086), (spline_123, lattice_2_045)):
        dw = dual_window(w, lat, grid_points=257, extra_cols=extra_cols)
        assert dw.residual <= 1e-9
        assert len(dw.sigma_rows) == 257
        assert dw.wiener_norm_estimate > 0.0


def test_duality_condition_off_grid(spline_4, lattice_086):
    """sum_k gamma(x + k alpha) g(x + k alpha - l/beta) = beta delta_l0 at points off the sample grid."""
    dw = dual_window(spline_4, lattice_086, grid_points=33, extra_cols=0)
    rng = np.random.default_rng(9)
    ks = np.arange(-40, 41)
    for x in rng.uniform(0.0, 1.0, 5):
        gam = np.array([dw.gamma(x + k) for k in ks])
        for l in range(-3, 4):
            s = float(np.sum(gam * spline_4(x + ks - l / 0.86)))
            assert abs(s - (0.86 if l == 0 else 0.0)) <= 1e-9


def test_case_one_dual_is_canonical(hat):
    lat = _lat(1.0, 0.5)
    dw = dual_window(hat, lat, grid_points=11)
    assert dw.case == 1
    assert abs(dw.gamma(0.3) - 0.5 * 0.3 / (0.3 ** 2 + 0.7 ** 2)) <= 1e-12
    assert abs(dw.gamma(1.3) - 0.5 * 0.7 / (0.3 ** 2 + 0.7 ** 2)) <= 1e-12
    assert dw.gamma(5.0) == 0.0


def test_dual_samples_sorted(spline_123, lattice_2_045):
    dw = dual_window(spline_123, lattice_2_045, grid_points=9)
    samples = dw.samples()
    k_lo, k_hi = dw.k_range()
    assert len(samples) == 9 * (k_hi - k_lo + 1)
    ys = [y for y, _, _ in samples]
    assert ys == sorted(ys)
    assert any(edge for _, _, edge in samples)
    d = dw.to_dict()
    assert d["case"] == 2 and d["grid_points"] == 9


def test_dual_rejections(spline_123, spline_4, lattice_086):
    with pytest.raises(LatticeError):
        dual_window(spline_123, _lat(1.5, 0.6))
    with pytest.raises(LatticeError):
        dual_window(spline_123, _lat(1.0, 1.0))
    with pytest.raises(DomainError):
        dual_window(spline_4, lattice_086, grid_points=1)
    dw = dual_window(spline_4, lattice_086, grid_points=3)
    with pytest.raises(DomainError):
        dw.sigma(-5.0)


def test_dual_tolerances_are_honoured(spline_4, lattice_086):
    with pytest.raises(SingularMatrixError):
        dual_window(spline_4, lattice_086, grid_points=3, pivot_rel=1.0)
    with pytest.raises(SingularMatrixError):
        dual_window(spline_4, lattice_086, grid_points=3, extra_cols=2, pinv_rcond=1.0)
    dw = dual_window(spline_4, lattice_086, grid_points=3, pivot_rel=1e-15, pinv_rcond=1e-15)
    assert (dw.pivot_rel, dw.pinv_rcond) == (1e-15, 1e-15)
    assert dw.residual <= 1e-9


def test_wider_sections_do_not_grow_wiener_norm(spline_4, spline_123, lattice_086, lattice_2_045):
    for w, lat in ((spline_4, lattice_086), (spline_123, lattice_2_045)):
        norms = []
        for extra_cols in (0, 2, 4, 8):
            dw = dual_window(w, lat, grid_points=129, extra_cols=extra_cols)
            assert dw.residual <= 1e-9
            norms.append(dw.wiener_norm_estimate)
        for a, b in zip(norms, norms[1:]):
            assert b <= 1.01 * a, norms


def test_high_redundancy_left_inverse_is_optimal(hat):
    lat = _lat(1.0, 0.5)
    dw = dual_window(hat, lat, grid_points=11)
    for x in np.linspace(0.05, 0.95, 7):
        P = pregramian_section(hat, lat, float(x), -2, 2).entries
        col_norms = np.sqrt(np.sum(P * P, axis=0))
        expected = math.hypot(hat(x), hat(x + 1.0))
        assert np.allclose(col_norms, expected, rtol=1e-12)
        # disjoint column supports: ||P^+||_2 = 1 / min_l ||P e_l||
        assert abs(np.linalg.norm(np.linalg.pinv(P), 2) - 1.0 / np.min(col_norms)) <= 1e-10
        _, sig = dw.sigma(float(x))
        assert abs(np.linalg.norm(sig) - 1.0 / expected) <= 1e-10


# ---- Staircase blocks ----

def test_bidiagonal_block():
    assert bidiagonal_size(0.6, 0.9) == 2
    block = build_block_bidiagonal(1.0, 0.6, 0.9)
    assert block.shape == (3, 2)
    B = symmetric_eb_spline(1.0)
    assert abs(block.entries[0, 0] - B(0.9)) <= 1e-15
    assert abs(block.entries[1, 0] - B(1.9)) <= 1e-15
    assert abs(block.entries[1, 1] - B(0.9 - (1 / 0.6 - 1))) <= 1e-15
    with pytest.raises(DomainError):
        build_block_bidiagonal(1.0, 0.6, 0.1)
    with pytest.raises(DomainError):
        build_block_bidiagonal(1.0, 0.4, 0.9)
    with pytest.raises(DomainError):
        build_block_bidiagonal(0.0, 0.6, 0.9)


@pytest.mark.parametrize("lam,beta,x1", [(1.0, 0.6, 0.9), (0.5, 0.8, 0.8), (3.0, 0.9, 0.95), (1.0, 0.75, 2.0 - 1.0 / 0.75)])
def test_staircase_pattern(lam, beta, x1):
    P = build_block_bidiagonal(lam, beta, x1).entries
    assert np.all(np.count_nonzero(P, axis=0) <= 2)
    assert np.all(np.count_nonzero(P, axis=1) <= 2)
    n_rows, n_cols = P.shape
    for i, k in combinations(range(n_rows), 2):
        for j, l in combinations(range(n_cols), 2):
            assert 0.0 in (P[i, j], P[i, l], P[k, j], P[k, l]), (i, k, j, l)


def test_block_openings():
    x = 0.37
    for k, l, t in block_openings(0.7, x, -5, 5):
        assert abs(t - (x + k - l / 0.7)) <= 1e-12
        assert 2.0 - 1.0 / 0.7 - 1e-12 <= t < 1.0


def test_neville_factorization():
    block = build_block_bidiagonal(1.0, 0.8, 0.95)
    fact = neville_factorize(block, 1.0, 0.8)
    C, S, gamma0, norm = fact
    assert np.allclose(C @ S, block.entries, atol=1e-14)
    assert np.allclose(fact.F @ C, np.eye(C.shape[0]), atol=1e-12)
    assert np.allclose(gamma0 @ block.entries, np.eye(block.shape[1]), atol=1e-10)
    assert 1 <= fact.r <= block.shape[1]
    assert norm <= neville_norm_bound(1.0, 0.8)


def test_neville_norm_bound_random():
    rng = np.random.default_rng(12)
    for _ in range(100):
        lam = float(rng.uniform(0.1, 4.0))
        beta = float(rng.uniform(0.5 + 1e-6, 0.999))
        x1 = float(rng.uniform(2.0 - 1.0 / beta, 1.0))
        block = build_block_bidiagonal(lam, beta, x1)
        fact = neville_factorize(block, lam, beta)
        assert fact.residual <= 1e-10
        assert fact.norm <= neville_norm_bound(lam, beta) * (1 + 1e-9), (lam, beta, x1)
        assert fact.s_pinv_norm <= s_pinv_norm_bound(lam, beta) * (1 + 1e-12), (lam, beta, x1)


@pytest.mark.parametrize("lam,beta", [(0.1, 0.9965), (4.0, 0.998), (1.0, 0.9995)])
def test_neville_large_staircase_blocks(lam, beta):
    x1 = 0.5 * (3.0 - 1.0 / beta)
    block = build_block_bidiagonal(lam, beta, x1)
    assert block.shape[1] > 256
    fact = neville_factorize(block, lam, beta)
    assert fact.residual <= 1e-10
    assert fact.norm <= neville_norm_bound(lam, beta) * (1 + 1e-9)
    assert fact.s_pinv_norm <= s_pinv_norm_bound(lam, beta) * (1 + 1e-12)


def test_neville_f_entries_decay():
    rng = np.random.default_rng(5)
    for _ in range(40):
        lam = float(rng.uniform(0.1, 4.0))
        beta = float(rng.uniform(0.55, 0.99))
        x1 = float(rng.uniform(2.0 - 1.0 / beta, 1.0))
        fact = neville_factorize(build_block_bidiagonal(lam, beta, x1), lam, beta)
        r = fact.r
        for j in range(1, r + 1):
            for k in range(1, j + 1):
                bound = f_entry_bound(j, k, r, beta)
                assert abs(fact.F[j - 1, k - 1]) <= bound * (1 + 1e-12) + 1e-300, (lam, beta, x1, j, k)


def test_f_entry_bound_shape():
    assert f_entry_bound(3, 3, 5, 0.8) == 1.0
    assert f_entry_bound(4, 1, 5, 0.8) < f_entry_bound(4, 3, 5, 0.8) < 1.0
    assert math.isclose(f_entry_bound(2, 1, 2, 0.75), math.exp(-1.0 / 3.0))


def test_neville_rejects_wrong_shape():
    block = build_block_bidiagonal(1.0, 0.8, 0.95)
    square = type(block)(block.entries[:-1], 0, 0, block.x, 1.0, 0.8)
    with pytest.raises(DomainError):
        neville_factorize(square, 1.0, 0.8)
