"""
Dense Linear Algebra Kernel

Small dense solves, determinants, SVD, Moore-Penrose pseudo-inverse and operator
norms for pre-Gramian blocks and symbols. Matrices are numpy arrays (real, or
complex for symbols); the heavy lifting is LAPACK via numpy / scipy, with the
thresholds used throughout the package made explicit here.
"""

from __future__ import annotations
import logging
import math
from typing import Optional, Tuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as spla

from core.errors import ConvergenceError, DomainError, SingularMatrixError

logger = logging.getLogger(__name__)

PIVOT_REL = 1e-13
PINV_RCOND = 1e-12
MAX_SVD_DIM = 256
REFINE_STEPS = 5


def _as_matrix(A: np.ndarray, name: str = "A") -> np.ndarray:
    M = np.asarray(A)
    if M.ndim != 2:
        raise DomainError(f"{name} must be 2-dimensional", parameter=f"{name}.ndim", value=M.ndim)
    if not np.all(np.isfinite(M)):
        raise DomainError(f"{name} contains non-finite entries", parameter=name)
    return M


def solve(A: np.ndarray, b: np.ndarray, pivot_rel: float = PIVOT_REL) -> np.ndarray:
    """
    Solve A x = b by partial-pivoted LU.

    Raises:
        SingularMatrixError: some |U_ii| <= pivot_rel * ||A||_inf (pivot index reported).
    """
    M = _as_matrix(A)
    n, m = M.shape
    if n != m:
        raise DomainError("solve requires a square matrix", parameter="A.shape", value=M.shape)
    if n == 0:
        return np.zeros_like(np.asarray(b, dtype=float))
    scale = norm_inf(M)
    if scale == 0.0:
        raise SingularMatrixError("zero matrix", pivot=0, size=n)
    lu, piv = sla.lu_factor(M, check_finite=False)
    diag = np.abs(np.diag(lu))
    small = np.flatnonzero(diag <= pivot_rel * scale)
    if small.size:
        raise SingularMatrixError(
            f"pivot {diag[small[0]]:.3e} below {pivot_rel:.0e}*||A||", pivot=int(small[0]), size=n
        )
    return sla.lu_solve((lu, piv), np.asarray(b), check_finite=False)


def _pow2_scale(v: np.ndarray) -> np.ndarray:
    """Nearest power of two to 1/v (exact rescaling); zero entries get scale 1."""
    out = np.ones_like(v, dtype=float)
    live = v > 0.0
    out[live] = np.ldexp(1.0, -np.frexp(v[live])[1])
    return out


def equilibrate(A: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Power-of-two row scalings r, then column scalings c, so every column of diag(r) A diag(c) peaks in [1/2, 1)."""
    M = np.abs(_as_matrix(A))
    r = _pow2_scale(np.max(M, axis=1)) if M.size else np.ones(M.shape[0])
    c = _pow2_scale(np.max(M * r[:, None], axis=0)) if M.size else np.ones(M.shape[1])
    return r, c


def solve_refined(
    A: np.ndarray,
    b: np.ndarray,
    pivot_rel: float = PIVOT_REL,
    max_steps: int = REFINE_STEPS,
) -> np.ndarray:
    """
    Solve A x = b on the equilibrated matrix diag(r) A diag(c), then apply iterative refinement
    in working precision until the correction stops shrinking.

    Raises:
        SingularMatrixError: a pivot of the equilibrated factor is below pivot_rel.
    """
    M = _as_matrix(A)
    n, m = M.shape
    if n != m:
        raise DomainError("solve requires a square matrix", parameter="A.shape", value=M.shape)
    rhs = np.asarray(b, dtype=float)
    if n == 0:
        return np.zeros_like(rhs)
    r, c = equilibrate(M)
    S = r[:, None] * M * c[None, :]
    if norm_inf(S) == 0.0:
        raise SingularMatrixError("zero matrix", pivot=0, size=n)
    lu, piv = sla.lu_factor(S, check_finite=False)
    diag = np.abs(np.diag(lu))
    small = np.flatnonzero(diag <= pivot_rel * norm_inf(S))
    if small.size:
        raise SingularMatrixError(
            f"pivot {diag[small[0]]:.3e} below {pivot_rel:.0e} after equilibration", pivot=int(small[0]), size=n
        )

    def step(res: np.ndarray) -> np.ndarray:
        return c * sla.lu_solve((lu, piv), r * res, check_finite=False)

    x = step(rhs)
    last = math.inf
    for _ in range(max_steps):
        dx = step(rhs - M @ x)
        size = float(np.max(np.abs(dx)))
        if size >= 0.5 * last:
            break
        x = x + dx
        last = size
        if size <= np.finfo(float).eps * float(np.max(np.abs(x))):
            break
    return x


def left_inverse_row(
    A: np.ndarray,
    j: int,
    rcond: float = PINV_RCOND,
    max_steps: int = REFINE_STEPS,
) -> np.ndarray:
    """
    Row j of pinv(A) for A of full column rank: the minimum-norm sigma with sigma A = e_j^T.

    Columns are equilibrated first (row scaling would change the norm being minimised) and the
    row is refined with sigma += (e_j^T - sigma A) pinv(A).
    """
    M = _as_matrix(A)
    _, c = equilibrate(M)
    X = pinv(M * c[None, :], rcond=rcond) * c[:, None]
    target = np.zeros(M.shape[1])
    target[j] = 1.0
    sigma = X[j].copy()
    last = math.inf
    for _ in range(max_steps):
        res = target - sigma @ M
        size = float(np.max(np.abs(res)))
        if size >= 0.5 * last or size == 0.0:
            break
        sigma = sigma + res @ X
        last = size
    return sigma


def det(A: np.ndarray) -> float:
    M = _as_matrix(A)
    if M.shape[0] != M.shape[1]:
        raise DomainError("det requires a square matrix", parameter="A.shape", value=M.shape)
    if M.shape[0] == 0:
        return 1.0
    return float(np.linalg.det(M))


def svd(A: np.ndarray, compute_uv: bool = True):
    """
    Thin SVD with singular values in descending order.

    Returns (s, U, Vh) when compute_uv, else s.

    Raises:
        ConvergenceError: LAPACK did not converge.
    """
    M = _as_matrix(A)
    if max(M.shape) > MAX_SVD_DIM:
        raise DomainError("svd is intended for blocks up to 256x256", parameter="A.shape", value=M.shape)
    try:
        if compute_uv:
            U, s, Vh = np.linalg.svd(M, full_matrices=False)
            return s, U, Vh
        return np.linalg.svd(M, compute_uv=False)
    except np.linalg.LinAlgError as e:
        raise ConvergenceError(str(e), routine="svd", details={"shape": M.shape}) from e


def singular_values(stack: np.ndarray) -> np.ndarray:
    """Batched singular values over the leading axes of a (..., m, n) array."""
    try:
        return np.linalg.svd(np.asarray(stack), compute_uv=False)
    except np.linalg.LinAlgError as e:
        raise ConvergenceError(str(e), routine="svd", details={"shape": np.shape(stack)}) from e


def pinv(A: np.ndarray, rcond: float = PINV_RCOND) -> np.ndarray:
    """Moore-Penrose pseudo-inverse; singular values <= rcond * sigma_max are treated as zero."""
    M = _as_matrix(A)
    if M.size == 0:
        return np.zeros(M.shape[::-1], dtype=M.dtype)
    s, U, Vh = svd(M)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(M.shape[::-1], dtype=M.dtype)
    rank = int(np.sum(s > rcond * s[0]))
    if rank < min(M.shape):
        logger.debug("[linalg] pinv rank %d < %d for shape %s", rank, min(M.shape), M.shape)
    Ur = U[:, :rank] / s[:rank]
    return np.conjugate(Ur @ Vh[:rank]).T


def matrix_rank(A: np.ndarray, rcond: float = PINV_RCOND) -> int:
    s = svd(A, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rcond * s[0]))


def norm2(A: np.ndarray) -> float:
    """||A||_2; blocks above MAX_SVD_DIM use a Lanczos (ARPACK) estimate of the top singular value."""
    M = _as_matrix(A)
    if min(M.shape) < 2:
        # a single row or column: the Euclidean norm
        return float(np.linalg.norm(M.ravel()))
    if max(M.shape) <= MAX_SVD_DIM:
        s = svd(M, compute_uv=False)
        return float(s[0]) if s.size else 0.0
    v0 = np.random.default_rng(0).standard_normal(min(M.shape))
    try:
        s = spla.svds(M, k=1, v0=v0, return_singular_vectors=False)
    except spla.ArpackNoConvergence as e:
        raise ConvergenceError(str(e), routine="svds", details={"shape": M.shape}) from e
    logger.debug("[linalg] norm2 via svds for shape %s", M.shape)
    return float(s[0])


def norm1(A: np.ndarray) -> float:
    """Maximum absolute column sum."""
    M = _as_matrix(A)
    return float(np.max(np.sum(np.abs(M), axis=0))) if M.size else 0.0


def norm_inf(A: np.ndarray) -> float:
    """Maximum absolute row sum."""
    M = _as_matrix(A)
    return float(np.max(np.sum(np.abs(M), axis=1))) if M.size else 0.0


def power_norm(A: np.ndarray, iters: int = 500, seed: int = 0, tol: float = 1e-14) -> float:
    """||A||_2 by power iteration on A^T A; independent of the SVD path."""
    M = _as_matrix(A)
    if M.size == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(M.shape[1])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = M.conj().T @ (M @ v)
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        v = w / nw
        if abs(nw - lam) <= tol * nw:
            lam = nw
            break
        lam = nw
    return float(np.sqrt(lam))


def penrose_residuals(A: np.ndarray, X: Optional[np.ndarray] = None) -> Tuple[float, float, float, float]:
    """Relative residuals of the four Penrose identities for X = pinv(A)."""
    M = _as_matrix(A)
    X = pinv(M) if X is None else X
    na = max(np.linalg.norm(M), 1e-300)
    nx = max(np.linalg.norm(X), 1e-300)
    r1 = np.linalg.norm(M @ X @ M - M) / na
    r2 = np.linalg.norm(X @ M @ X - X) / nx
    r3 = np.linalg.norm((M @ X).conj().T - M @ X) / max(np.linalg.norm(M @ X), 1e-300)
    r4 = np.linalg.norm((X @ M).conj().T - X @ M) / max(np.linalg.norm(X @ M), 1e-300)
    return float(r1), float(r2), float(r3), float(r4)
