"""
Pre-Gramian Blocks and Dual Windows

P(x) = (g(x + k alpha - l/beta))_{k,l}. For a compactly supported window every row touches
finitely many columns, so left inverses can be built block by block:

- build_block_p0: the square block on rows/columns 0..k0 over I = [m - 1/beta, m - 1/beta + alpha]
- pregramian_section: columns col_lo..col_hi with every row supported inside them
- dual_window: sigma(x) with sigma(x) P(x) = e_0 on a grid over I, and gamma(x' + alpha k) = beta sigma_k(x')
- build_block_bidiagonal / neville_factorize: the (s+1) x s staircase blocks of the symmetric
  order-2 spline at alpha = 1, 1/2 < beta < 1, and the left inverse S^+ C^{-1}
"""

from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from core import linalg
from core.errors import DomainError, LatticeError, ResidualError, SingularMatrixError, WindowError
from core.frames.bounds import c_beta
from core.model import LatticeParams
from core.spline.windows import symmetric_eb_spline, window_support

logger = logging.getLogger(__name__)

EDGE_TOL = 1e-12
INT_TOL = 1e-9
DUALITY_TOL = 1e-9
LEFT_INVERSE_TOL = 1e-10

VALID_CASES = [
    "(1) 1/beta >= m",
    "(2) alpha in {1, ..., m-1}, alpha*beta < 1",
    "(3) 1/beta in {1, ..., m-1}, alpha*beta < 1",
]


def _ceil_tol(v: float, tol: float = INT_TOL) -> int:
    r = round(v)
    if abs(v - r) <= tol:
        return int(r)
    return int(math.ceil(v))


def _is_int_in(v: float, lo: int, hi: int) -> bool:
    r = round(v)
    return abs(v - r) <= INT_TOL and lo <= r <= hi


def _compact_length(w: Any) -> float:
    lo, hi = window_support(w)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise WindowError("pre-Gramian blocks need a compactly supported window")
    return hi - lo


# -------------------------
# Lattice classification
# -------------------------

def frame_case(w: Any, lat: LatticeParams) -> Optional[int]:
    """Which of the three frame regimes (alpha, beta) falls in for a window of support length m."""
    m = _compact_length(w)
    if lat.density >= 1.0 - EDGE_TOL:
        return None
    inv_beta = 1.0 / lat.beta
    if inv_beta >= m - INT_TOL and lat.alpha < m:
        return 1
    top = int(math.ceil(m - INT_TOL)) - 1
    if _is_int_in(lat.alpha, 1, top):
        return 2
    if _is_int_in(inv_beta, 1, top):
        return 3
    return None


def k0_for(m: float, lat: LatticeParams) -> int:
    inv_beta = 1.0 / lat.beta
    return _ceil_tol((m - inv_beta) / (inv_beta - lat.alpha)) - 1


def block_interval(w: Any, lat: LatticeParams, case: int) -> Tuple[float, float]:
    """I = [0, alpha] in case (1), else [m - 1/beta, m - 1/beta + alpha]."""
    if case == 1:
        return (0.0, lat.alpha)
    m = _compact_length(w)
    left = m - 1.0 / lat.beta
    return (left, left + lat.alpha)


# -------------------------
# Blocks
# -------------------------

@dataclass(frozen=True)
class PreGramianBlock:
    entries: np.ndarray
    row_offset: int
    col_offset: int
    x: float
    alpha: float = 1.0
    beta: float = 1.0

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape

    @property
    def rows(self) -> range:
        return range(self.row_offset, self.row_offset + self.entries.shape[0])

    @property
    def cols(self) -> range:
        return range(self.col_offset, self.col_offset + self.entries.shape[1])

    def recompute(self, w: Any) -> np.ndarray:
        k = np.asarray(self.rows, dtype=float)[:, None]
        l = np.asarray(self.cols, dtype=float)[None, :]
        return w(self.x + k * self.alpha - l / self.beta)


def _entries(w: Any, lat: LatticeParams, x: float, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
    k = np.asarray(rows, dtype=float)[:, None]
    l = np.asarray(cols, dtype=float)[None, :]
    return np.asarray(w(x + k * lat.alpha - l / lat.beta), dtype=float)


def _row_support(lo: float, hi: float, lat: LatticeParams, x: float, k: int) -> Tuple[int, int]:
    """Column range [l_min, l_max] where lo < x + k alpha - l/beta < hi; empty when l_min > l_max."""
    u = x + k * lat.alpha
    cands = range(int(math.floor((u - hi) * lat.beta)) - 1, int(math.ceil((u - lo) * lat.beta)) + 2)
    live = [l for l in cands if lo + EDGE_TOL < u - l / lat.beta < hi - EDGE_TOL]
    if not live:
        return (1, 0)
    return (live[0], live[-1])


def build_block_p0(w: Any, lat: LatticeParams, x: float) -> PreGramianBlock:
    """
    Square block P0(x) = (g(x + k alpha - l/beta))_{k,l=0..k0} for x in I.

    Raises:
        LatticeError: lattice not in case (2) or (3).
        DomainError: x outside I.
    """
    lat.require_subcritical()
    case = frame_case(w, lat)
    if case not in (2, 3):
        raise LatticeError(
            "the square block needs case (2) or (3)", alpha=lat.alpha, beta=lat.beta,
            valid_cases=VALID_CASES[1:],
        )
    I0, I1 = block_interval(w, lat, case)
    if not (I0 - EDGE_TOL <= x <= I1 + EDGE_TOL):
        raise DomainError("x must lie in I", parameter="x", value=x, interval=(I0, I1))
    m = _compact_length(w)
    k0 = k0_for(m, lat)
    idx = list(range(k0 + 1))
    entries = _entries(w, lat, x, idx, idx)
    logger.debug("[gramian] P0 block k0=%d x=%.6g", k0, x)
    return PreGramianBlock(entries, 0, 0, float(x), lat.alpha, lat.beta)


def pregramian_section(w: Any, lat: LatticeParams, x: float, col_lo: int, col_hi: int) -> PreGramianBlock:
    """
    Columns col_lo..col_hi of P(x) with the maximal (contiguous) set of nonzero rows
    whose support lies inside those columns.
    """
    if col_hi < col_lo:
        raise DomainError("empty column range", parameter="cols", value=(col_lo, col_hi))
    lo, hi = window_support(w)
    _compact_length(w)
    a = lat.alpha
    k_start = int(math.floor((col_lo / lat.beta - x + lo) / a)) - 2
    k_stop = int(math.ceil((col_hi / lat.beta - x + hi) / a)) + 2
    rows: List[int] = []
    for k in range(k_start, k_stop + 1):
        l_min, l_max = _row_support(lo, hi, lat, x, k)
        if l_min <= l_max and l_min >= col_lo and l_max <= col_hi:
            rows.append(k)
    if not rows:
        raise SingularMatrixError("no rows supported inside the column range", size=col_hi - col_lo + 1)
    if rows != list(range(rows[0], rows[-1] + 1)):
        raise SingularMatrixError("rows supported inside the columns are not contiguous", size=len(rows))
    cols = list(range(col_lo, col_hi + 1))
    entries = _entries(w, lat, x, rows, cols)
    return PreGramianBlock(entries, rows[0], col_lo, float(x), lat.alpha, lat.beta)


def pregramian_rows(w: Any, lat: LatticeParams, x: float, k_lo: int, k_hi: int) -> PreGramianBlock:
    """Rows k_lo..k_hi of P(x) with every column they touch."""
    lo, hi = window_support(w)
    spans = [_row_support(lo, hi, lat, x, k) for k in range(k_lo, k_hi + 1)]
    live = [s for s in spans if s[0] <= s[1]]
    c_lo = min(s[0] for s in live) if live else 0
    c_hi = max(s[1] for s in live) if live else 0
    entries = _entries(w, lat, x, list(range(k_lo, k_hi + 1)), list(range(c_lo, c_hi + 1)))
    return PreGramianBlock(entries, k_lo, c_lo, float(x), lat.alpha, lat.beta)


# -------------------------
# Dual windows
# -------------------------

def _sigma_square(w: Any, lat: LatticeParams, x: float, pivot_rel: float) -> Tuple[int, np.ndarray]:
    block = build_block_p0(w, lat, x)
    n = block.entries.shape[0]
    e0 = np.zeros(n)
    e0[0] = 1.0
    # first row of P0^{-1}: sigma P0 = e0^T; P0 is badly scaled near the ends of I
    return 0, linalg.solve_refined(block.entries.T, e0, pivot_rel=pivot_rel)


def _sigma_section(
    w: Any, lat: LatticeParams, x: float, col_lo: int, col_hi: int, rcond: float
) -> Tuple[int, np.ndarray]:
    block = pregramian_section(w, lat, x, col_lo, col_hi)
    rank = linalg.matrix_rank(block.entries, rcond=rcond)
    if rank < block.entries.shape[1]:
        raise SingularMatrixError(
            f"section has rank {rank} < {block.entries.shape[1]} columns", size=block.entries.shape[1]
        )
    return block.row_offset, linalg.left_inverse_row(block.entries, 0 - block.col_offset, rcond=rcond)


def _column_range(case: int, k0: int, extra_cols: int) -> Tuple[int, int]:
    left = extra_cols // 2
    return -left, k0 + extra_cols - left


def _sigma_at(
    w: Any,
    lat: LatticeParams,
    x: float,
    case: int,
    k0: int,
    extra_cols: int,
    pivot_rel: float = linalg.PIVOT_REL,
    rcond: float = linalg.PINV_RCOND,
) -> Tuple[int, np.ndarray]:
    if case != 1 and extra_cols == 0:
        return _sigma_square(w, lat, x, pivot_rel)
    c_lo, c_hi = _column_range(case, k0, extra_cols)
    return _sigma_section(w, lat, x, c_lo, c_hi, rcond)


def duality_residual(w: Any, lat: LatticeParams, x: float, k_offset: int, sigma: np.ndarray) -> float:
    """||sigma(x) P(x) - e_0||_inf over every column the sigma rows touch."""
    block = pregramian_rows(w, lat, x, k_offset, k_offset + len(sigma) - 1)
    prod = sigma @ block.entries
    target = np.zeros_like(prod)
    if 0 in block.cols:
        target[0 - block.col_offset] = 1.0
    else:
        return 1.0
    return float(np.max(np.abs(prod - target)))


@dataclass
class DualWindow:
    """
    sigma_rows[i] = (k_offset, sigma) at x_grid[i]; sigma_k(x) is nonzero only for
    k in k_offset .. k_offset + len(sigma) - 1.
    """
    window: Any
    lattice: LatticeParams
    case: int
    extra_cols: int
    interval: Tuple[float, float]
    x_grid: np.ndarray
    sigma_rows: List[Tuple[int, np.ndarray]]
    residual: float
    wiener_norm_estimate: float
    k0: int = 0
    pivot_rel: float = linalg.PIVOT_REL
    pinv_rcond: float = linalg.PINV_RCOND

    @property
    def alpha(self) -> float:
        return self.lattice.alpha

    @property
    def beta(self) -> float:
        return self.lattice.beta

    def sigma(self, x: float) -> Tuple[int, np.ndarray]:
        I0, I1 = self.interval
        if not (I0 - EDGE_TOL <= x <= I1 + EDGE_TOL):
            raise DomainError("x must lie in I", parameter="x", value=x, interval=self.interval)
        return _sigma_at(
            self.window, self.lattice, x, self.case, self.k0, self.extra_cols, self.pivot_rel, self.pinv_rcond
        )

    def k_range(self) -> Tuple[int, int]:
        lo = min(k for k, _ in self.sigma_rows)
        hi = max(k + len(s) - 1 for k, s in self.sigma_rows)
        return lo, hi

    def gamma(self, y: float) -> float:
        """gamma(x' + alpha k) = beta sigma_k(x') with x' in [I0, I0 + alpha)."""
        I0 = self.interval[0]
        k = int(math.floor((y - I0) / self.alpha))
        xp = y - k * self.alpha
        off, sig = self.sigma(min(max(xp, I0), self.interval[1]))
        if off <= k < off + len(sig):
            return self.beta * float(sig[k - off])
        return 0.0

    def samples(self) -> List[Tuple[float, float, bool]]:
        """(y, gamma(y), is_discontinuity) over every grid point and shift, sorted by y."""
        I0 = self.interval[0]
        k_lo, k_hi = self.k_range()
        last = len(self.x_grid) - 1
        keyed = []
        for i, (off, sig) in enumerate(self.sigma_rows):
            edge = i == 0 or i == last
            for k in range(k_lo, k_hi + 1):
                val = self.beta * float(sig[k - off]) if off <= k < off + len(sig) else 0.0
                # y = I0 + (i/last + k) alpha, so I1 + k alpha and I0 + (k+1) alpha coincide exactly
                y = I0 + (i / last + k) * self.alpha
                # left limit (x = I1) sorts before the right value (x = I0) at each jump
                keyed.append(((y, 0 if i == last else 1), (y, val, edge)))
        keyed.sort(key=lambda t: t[0])
        return [s for _, s in keyed]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "case": self.case,
            "extra_cols": self.extra_cols,
            "interval": list(self.interval),
            "grid_points": int(len(self.x_grid)),
            "k_range": list(self.k_range()),
            "residual": self.residual,
            "wiener_norm_estimate": self.wiener_norm_estimate,
        }


def dual_window(
    w: Any,
    lat: LatticeParams,
    grid_points: int = 257,
    extra_cols: int = 0,
    tol: float = DUALITY_TOL,
    pivot_rel: float = linalg.PIVOT_REL,
    pinv_rcond: float = linalg.PINV_RCOND,
) -> DualWindow:
    """
    Dual window through sigma(x) P(x) = e_0 on a uniform grid over I (both endpoints included).

    extra_cols = 0 uses the square block P0 (case (2)/(3)) or the single-column section (case (1));
    extra_cols > 0 widens the columns to [-floor(e/2), k0 + e - floor(e/2)] and takes the
    l = 0 row of the section's pseudo-inverse. pivot_rel and pinv_rcond are the pivot threshold of
    the square solve and the singular-value cutoff of the pseudo-inverse.

    Raises:
        LatticeError: alpha*beta >= 1 or no frame case applies.
        SingularMatrixError: a block or section lost rank.
        ResidualError: duality residual above tol at some grid point.
    """
    if grid_points < 2:
        raise DomainError("grid_points must be >= 2", parameter="grid_points", value=grid_points)
    if extra_cols < 0:
        raise DomainError("extra_cols must be >= 0", parameter="extra_cols", value=extra_cols)
    lat.require_subcritical()
    case = frame_case(w, lat)
    if case is None:
        raise LatticeError(
            "lattice outside the EB-spline frame cases", alpha=lat.alpha, beta=lat.beta,
            valid_cases=VALID_CASES,
        )
    m = _compact_length(w)
    k0 = 0 if case == 1 else k0_for(m, lat)
    I0, I1 = block_interval(w, lat, case)
    xs = np.linspace(I0, I1, grid_points)

    rows: List[Tuple[int, np.ndarray]] = []
    worst = 0.0
    for x in xs:
        off, sig = _sigma_at(w, lat, float(x), case, k0, extra_cols, pivot_rel, pinv_rcond)
        res = duality_residual(w, lat, float(x), off, sig)
        worst = max(worst, res)
        rows.append((off, sig))
    if worst > tol:
        logger.warning("[gramian] duality residual %.3e above %.1e", worst, tol)
        raise ResidualError("sigma(x) P(x) = e_0 violated", check="duality", residual=worst, tolerance=tol)

    k_lo = min(k for k, _ in rows)
    k_hi = max(k + len(s) - 1 for k, s in rows)
    sup = np.zeros(k_hi - k_lo + 1)
    for off, sig in rows:
        sup[off - k_lo: off - k_lo + len(sig)] = np.maximum(sup[off - k_lo: off - k_lo + len(sig)], np.abs(sig))
    wiener = float(np.sum(sup))
    logger.info(
        "[gramian] dual case=%d k0=%d extra_cols=%d residual=%.2e wiener=%.6g",
        case, k0, extra_cols, worst, wiener,
    )
    return DualWindow(w, lat, case, extra_cols, (I0, I1), xs, rows, worst, wiener, k0, pivot_rel, pinv_rcond)


# -------------------------
# Staircase blocks for the symmetric order-2 spline
# -------------------------

def _check_neville_params(lam: float, beta: float) -> None:
    if not (math.isfinite(lam) and lam > 0.0):
        raise DomainError("lambda must be positive", parameter="lambda", value=lam)
    if not (0.5 < beta < 1.0):
        raise DomainError("beta must lie in (1/2, 1)", parameter="beta", value=beta, interval=(0.5, 1.0))


def bidiagonal_size(beta: float, x1: float) -> int:
    return max(1, _ceil_tol(beta * x1 / (1.0 - beta)))


def build_block_bidiagonal(lam: float, beta: float, x1: float) -> PreGramianBlock:
    """
    (s+1) x s block with a_j = B(x_j) on the diagonal and b_j = B(x_j + 1) below it,
    x_j = x1 - (j-1)(1/beta - 1), s = ceil(beta x1 / (1 - beta)).
    """
    _check_neville_params(lam, beta)
    if not (2.0 - 1.0 / beta - EDGE_TOL <= x1 < 1.0):
        raise DomainError("x1 must lie in [2 - 1/beta, 1)", parameter="x1", value=x1, interval=(2.0 - 1.0 / beta, 1.0))
    s = bidiagonal_size(beta, x1)
    B = symmetric_eb_spline(lam)
    xj = x1 - np.arange(s) * (1.0 / beta - 1.0)
    a = B(xj)
    b = B(xj + 1.0)
    P = np.zeros((s + 1, s))
    P[np.arange(s), np.arange(s)] = a
    P[np.arange(1, s + 1), np.arange(s)] = b
    return PreGramianBlock(P, 0, 0, float(x1), 1.0, float(beta))


def block_openings(beta: float, x: float, l_lo: int, l_hi: int) -> List[Tuple[int, int, float]]:
    """(k, l, x1) for every staircase block opening in columns l_lo..l_hi of P(x), alpha = 1."""
    out = []
    for l in range(l_lo, l_hi + 1):
        # unique k with x + k - l/beta in (0, 1]
        k = int(math.ceil(l / beta - x))
        t = x + k - l / beta
        if t <= EDGE_TOL:
            k += 1
            t += 1.0
        if 2.0 - 1.0 / beta - EDGE_TOL <= t < 1.0 - EDGE_TOL:
            out.append((k, l, t))
    return out


@dataclass(frozen=True)
class NevilleFactorization:
    C: np.ndarray
    S: np.ndarray
    gamma0: np.ndarray
    norm: float
    r: int
    F: np.ndarray
    s_pinv_norm: float
    residual: float
    nodes: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __iter__(self) -> Iterator[Any]:
        return iter((self.C, self.S, self.gamma0, self.norm))


def _unit_bidiagonal_inverse(s: int, r: int, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """
    Inverse of C = I + lower below the diagonal on rows 1..r-1 + upper above it on rows r..s-1.
    C is block diagonal (r x r lower, (s+1-r) x (s+1-r) upper), so C^{-1} entries are signed
    running products of the off-diagonal entries.
    """
    F = np.eye(s + 1)
    for k in range(r - 1):
        F[k + 1: r, k] = np.cumprod(-lower[k: r - 1])
    for i in range(r, s):
        F[i, i + 1: s + 1] = np.cumprod(-upper[i - r:])
    return F


def neville_factorize(block: PreGramianBlock, lam: float, beta: float) -> NevilleFactorization:
    """
    P0 = C S with C unit bidiagonal (lower on rows 1..r, upper on rows r+1..s+1) and S holding
    a_1..a_r on its diagonal, then b_r, b_{r+1}, ..., b_s one row below; Gamma0 = S^+ C^{-1}.

    r is the smallest index with |x_r - 1/2| <= (1/beta - 1)/2. The columns of S have disjoint
    row supports, so S^+ = diag(1/|s_j|^2) S^T and every step is O(s^2).
    """
    _check_neville_params(lam, beta)
    P = block.entries
    s = P.shape[1]
    if P.shape[0] != s + 1:
        raise DomainError("expected an (s+1) x s staircase block", parameter="shape", value=P.shape)
    a = np.diag(P).copy()
    b = P[np.arange(1, s + 1), np.arange(s)].copy()
    delta = 0.5 * (1.0 / beta - 1.0)
    xj = block.x - np.arange(s) * (1.0 / beta - 1.0)
    hits = np.flatnonzero(np.abs(xj - 0.5) <= delta + EDGE_TOL)
    if hits.size == 0:
        raise DomainError("no node within delta of 1/2", parameter="x1", value=block.x)
    r = int(hits[0]) + 1

    lower = b[: r - 1] / a[: r - 1]
    upper = a[r:s] / b[r:s]
    C = np.eye(s + 1)
    C[np.arange(1, r), np.arange(r - 1)] = lower
    C[np.arange(r, s), np.arange(r + 1, s + 1)] = upper

    # row of S holding each column's main entry; column r-1 also has b_{r-1} in row r
    main_row = np.where(np.arange(s) < r, np.arange(s), np.arange(s) + 1)
    main = np.where(np.arange(s) < r, a, b)
    S = np.zeros((s + 1, s))
    S[main_row, np.arange(s)] = main
    S[r, r - 1] = b[r - 1]
    col_sq = main ** 2
    col_sq[r - 1] += b[r - 1] ** 2

    F = _unit_bidiagonal_inverse(s, r, lower, upper)
    gamma0 = (main / col_sq)[:, None] * F[main_row]
    gamma0[r - 1] += (b[r - 1] / col_sq[r - 1]) * F[r]

    # Gamma0 P0 with P0 bidiagonal: column j is a_j Gamma0[:, j] + b_j Gamma0[:, j+1]
    left = gamma0[:, :s] * a[None, :] + gamma0[:, 1:] * b[None, :]
    residual = float(np.max(np.abs(left - np.eye(s))))
    if residual > LEFT_INVERSE_TOL:
        raise ResidualError("Gamma0 P0 != I", check="neville_left_inverse", residual=residual, tolerance=LEFT_INVERSE_TOL)
    norm = linalg.norm2(gamma0)
    s_pinv_norm = 1.0 / math.sqrt(float(np.min(col_sq)))
    logger.debug("[gramian] neville s=%d r=%d ||Gamma0||=%.6g", s, r, norm)
    return NevilleFactorization(C, S, gamma0, norm, r, F, s_pinv_norm, residual, xj)


def neville_norm_bound(lam: float, beta: float) -> float:
    """c_beta^{1/2} lambda / min{sqrt(2) sinh(lambda/2), sinh(lambda/(2 beta))}."""
    return math.sqrt(c_beta(beta)) * lam / min(math.sqrt(2.0) * math.sinh(lam / 2.0), math.sinh(lam / (2.0 * beta)))


def s_pinv_norm_bound(lam: float, beta: float) -> float:
    delta = 0.5 * (1.0 / beta - 1.0)
    return max(lam / math.sinh(lam * (0.5 + delta)), lam / (math.sqrt(2.0) * math.sinh(lam / 2.0)))


def f_entry_bound(j: int, k: int, r: int, beta: float) -> float:
    """exp(-(j-k)(2r-j-k)/(2 omega - 1)), omega = 1/(2 - 2 beta), for 1 <= k <= j <= r."""
    two_omega_minus_1 = beta / (1.0 - beta)
    return math.exp(-(j - k) * (2 * r - j - k) / two_omega_minus_1)
