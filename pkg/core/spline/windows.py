"""
Window Families

- EBSplineWindow: B_Lambda = e^{lam_1 .}chi_[0,1) * ... * e^{lam_m .}chi_[0,1), support [0, m]
- TPFiniteWindow: totally positive function of finite type, g_hat = C prod (1 + 2 pi i w / a)^{-1},
  held as one exp-poly per half line
- ScaledWindow: f(alpha .), used by the Zak scaling identity

Also the Fourier transforms, the closed-form EB-spline coefficients for distinct rates and
the collocation determinant used for total-positivity checks.
"""

from __future__ import annotations
import logging
import math
from dataclasses import dataclass
from typing import Any, Optional, Protocol, Sequence, Tuple, runtime_checkable

import numpy as np
from numpy.polynomial import polynomial as npoly

from core import linalg
from core.errors import DomainError, ResidualError, WindowError
from core.spline.exppoly import (
    RATE_MERGE_TOL,
    ExpPolyTerm,
    PiecewiseExpPoly,
    convolve_exp_box,
    exp_box,
    merge_terms,
)

logger = logging.getLogger(__name__)

INVARIANT_GRID_PER_UNIT = 1024
CONTINUITY_TOL = 1e-10


@runtime_checkable
class Window(Protocol):
    """Anything evaluable on numpy arrays with a (possibly infinite) support interval."""

    @property
    def support(self) -> Tuple[float, float]: ...

    def __call__(self, x: Any) -> Any: ...


def window_support(w: Any) -> Tuple[float, float]:
    sup = w.support
    if sup is None:
        return (0.0, 0.0)
    return (float(sup[0]), float(sup[1]))


def window_knots(w: Any) -> Tuple[float, ...]:
    """Breakpoints of a piecewise window (EB-splines and their dilates); empty when unknown."""
    if isinstance(w, ScaledWindow):
        return tuple(k / w.alpha for k in window_knots(w.base))
    shape = getattr(w, "shape", None)
    return tuple(float(b) for b in getattr(shape, "breakpoints", ()))


def decay_envelope(w: Any) -> Optional[Tuple[float, float]]:
    """(C', delta) with |w(x)| <= C' e^{-delta |x|}, or None for compact windows."""
    return getattr(w, "decay_envelope", None)


def _check_rates(rates: Sequence[float], what: str = "rates") -> Tuple[float, ...]:
    vals = tuple(float(r) for r in rates)
    if not vals:
        raise WindowError(f"{what} must be non-empty", rates=vals)
    if not all(math.isfinite(r) for r in vals):
        raise WindowError(f"{what} must be finite", rates=vals)
    return vals


# -------------------------
# EB-splines
# -------------------------

@dataclass(frozen=True)
class EBSplineWindow:
    rates: Tuple[float, ...]
    order: int
    shape: PiecewiseExpPoly

    def __post_init__(self) -> None:
        if self.order != len(self.rates):
            raise WindowError("order must equal the number of rates", rates=self.rates)

    @property
    def support(self) -> Tuple[float, float]:
        return (0.0, float(self.order))

    def __call__(self, x: Any) -> Any:
        return self.shape(x)

    def is_symmetric(self, tol: float = RATE_MERGE_TOL) -> bool:
        a = np.sort(np.asarray(self.rates))
        return bool(np.all(np.abs(a + a[::-1]) <= tol))

    def check_invariants(self) -> None:
        """Nonnegativity on a dense grid and continuity at the knots (order >= 2)."""
        m = self.order
        xs = np.linspace(0.0, float(m), INVARIANT_GRID_PER_UNIT * m + 1)
        vals = self.shape(xs)
        scale = max(float(np.max(np.abs(vals))), 1e-300)
        if float(np.min(vals)) < -1e-12 * scale:
            raise ResidualError(
                "EB-spline takes negative values", check="eb_spline_nonnegative",
                residual=float(-np.min(vals)), tolerance=1e-12 * scale,
            )
        if m >= 2:
            jump = spline_max_jump(self.shape)
            if jump > CONTINUITY_TOL * max(1.0, scale):
                raise ResidualError(
                    "EB-spline is discontinuous at a knot", check="eb_spline_continuity",
                    residual=jump, tolerance=CONTINUITY_TOL,
                )


def spline_max_jump(f: PiecewiseExpPoly) -> float:
    """Largest |f(b+) - f(b-)| over all breakpoints, including the support ends."""
    segs = f.segments
    if not segs:
        return 0.0
    jumps = [abs(float(segs[0].evaluate(np.array([float(segs[0].left)]))[0]))]
    for a, b in zip(segs, segs[1:]):
        x = np.array([float(b.left)])
        jumps.append(abs(float(b.evaluate(x)[0]) - float(a.evaluate(x)[0])))
    end = np.array([float(segs[-1].right)])
    jumps.append(abs(float(segs[-1].evaluate(end)[0])))
    return max(jumps)


def build_eb_spline(
    rates: Sequence[float], check: bool = True, merge_tol: float = RATE_MERGE_TOL
) -> EBSplineWindow:
    """
    B_Lambda by repeated convolution with exponential boxes.

    Args:
        rates: Lambda = (lam_1, ..., lam_m), any order (the result does not depend on it)
        check: verify nonnegativity and continuity on a 1024-per-unit grid
        merge_tol: exp-poly terms whose rates agree within merge_tol are merged

    Raises:
        WindowError: empty or non-finite rates.
    """
    lam = _check_rates(rates)
    shape = exp_box(lam[0])
    for r in lam[1:]:
        shape = convolve_exp_box(shape, r, merge_tol)
    w = EBSplineWindow(rates=lam, order=len(lam), shape=shape)
    if check:
        w.check_invariants()
    logger.debug("[windows] built EB-spline rates=%s segments=%d", lam, len(shape.segments))
    return w


def symmetric_eb_spline(lam: float) -> EBSplineWindow:
    """Order-2 spline with rates (lam, -lam): sinh(lam x)/lam on [0,1], sinh(lam(2-x))/lam on [1,2]."""
    lam = abs(float(lam))
    return build_eb_spline((lam, -lam))


def eb_spline_fourier(w: EBSplineWindow, omega: Any) -> Any:
    """prod_j (e^{lam_j - 2 pi i w} - 1)/(lam_j - 2 pi i w); the removable singularity gives 1."""
    om = np.asarray(omega, dtype=float)
    out = np.ones(om.shape, dtype=complex)
    for lam in w.rates:
        z = lam - 2j * np.pi * om
        small = np.abs(z) < 1e-8
        zs = np.where(small, 1.0, z)
        out *= np.where(small, 1.0 + z / 2.0 + z * z / 6.0, (np.exp(zs) - 1.0) / zs)
    if np.ndim(omega) == 0:
        return complex(out)
    return out


def _elementary_symmetric(values: np.ndarray) -> np.ndarray:
    """e_0..e_n of the given values."""
    coeffs = np.poly(values) if len(values) else np.array([1.0])
    signs = (-1.0) ** np.arange(len(coeffs))
    return np.real(coeffs) * signs


def christensen_massopust(rates: Sequence[float], x: Any) -> Any:
    """
    Closed form of B_Lambda for pairwise distinct rates.

    On [k-1, k): B(t + k - 1) = sum_j alpha_j^(k) e^{lam_j t} with
    alpha_j^(k) = (-1)^(k-1) e_{k-1}(e^{lam_r}: r != j) / prod_{r != j} (lam_j - lam_r).
    """
    lam = np.asarray(_check_rates(rates), dtype=float)
    m = len(lam)
    diffs = np.abs(lam[:, None] - lam[None, :]) + np.eye(m)
    if np.min(diffs) <= RATE_MERGE_TOL:
        raise WindowError("closed form needs pairwise distinct rates", rates=lam.tolist())

    alpha = np.zeros((m, m))
    for j in range(m):
        others = np.delete(lam, j)
        denom = float(np.prod(lam[j] - others)) if m > 1 else 1.0
        esym = _elementary_symmetric(np.exp(others))
        for k in range(1, m + 1):
            alpha[k - 1, j] = (-1.0) ** (k - 1) * esym[k - 1] / denom

    xs = np.asarray(x, dtype=float)
    out = np.zeros(xs.shape)
    inside = (xs >= 0.0) & (xs < m)
    k = np.floor(xs[inside]).astype(int)
    t = xs[inside] - k
    out[inside] = np.sum(alpha[k] * np.exp(np.outer(t, lam)), axis=1)
    if np.ndim(x) == 0:
        return float(out)
    return out


# -------------------------
# TP functions of finite type
# -------------------------

@dataclass(frozen=True)
class TPFiniteWindow:
    """
    g(x) = sum of right_terms (x >= 0) or left_terms (x < 0), coefficients in x itself.

    decay_envelope = (C', delta) with |g(x)| <= C' e^{-delta |x|}.
    """
    pole_rates: Tuple[float, ...]
    normalization: float
    right_terms: Tuple[ExpPolyTerm, ...]
    left_terms: Tuple[ExpPolyTerm, ...]
    decay_envelope: Tuple[float, float]

    @property
    def order(self) -> int:
        return len(self.pole_rates)

    @property
    def m_pos(self) -> int:
        return sum(1 for a in self.pole_rates if a > 0)

    @property
    def m_neg(self) -> int:
        return sum(1 for a in self.pole_rates if a < 0)

    @property
    def support(self) -> Tuple[float, float]:
        lo = -math.inf if self.left_terms else 0.0
        hi = math.inf if self.right_terms else 0.0
        return (lo, hi)

    def __call__(self, x: Any) -> Any:
        xs = np.asarray(x, dtype=float)
        out = np.zeros(xs.shape)
        right = xs >= 0.0
        for terms, mask in ((self.right_terms, right), (self.left_terms, ~right)):
            if not np.any(mask):
                continue
            t = xs[mask]
            acc = np.zeros(t.shape)
            for term in terms:
                acc += term.evaluate(t)
            out[mask] = acc
        if np.ndim(x) == 0:
            return float(out)
        return out


def _group_poles(poles: Sequence[float], tol: float) -> list:
    groups: list = []
    for a in sorted(poles):
        if groups and abs(a - groups[-1][0]) <= tol:
            groups[-1][1] += 1
        else:
            groups.append([a, 1])
    return groups


def _laurent_coefficients(groups: list, idx: int, prefactor: float) -> np.ndarray:
    """
    Taylor coefficients h_0..h_{s-1} at s = -a of (s + a)^s F(s), F = prefactor * prod (b + s)^{-m_b}
    over the other groups; the coefficient of (s + a)^{-j} in F is h_{s-j}.
    """
    a, mult = groups[idx]
    series = np.array([prefactor])
    for k, (b, mb) in enumerate(groups):
        if k == idx:
            continue
        d = b - a
        n = np.arange(mult)
        # (d + t)^{-mb} = d^{-mb} sum_n binom(mb + n - 1, n) (-t/d)^n
        binom = np.array([math.comb(mb + int(i) - 1, int(i)) for i in n], dtype=float)
        factor = d ** (-mb) * binom * (-1.0 / d) ** n
        series = npoly.polymul(series, factor)[:mult]
    out = np.zeros(mult)
    out[: len(series)] = series
    return out


def _envelope(terms: Sequence[ExpPolyTerm], delta: float) -> float:
    total = 0.0
    for term in terms:
        c = abs(term.rate) - delta
        for k, coef in enumerate(term.coeffs):
            if k == 0:
                total += abs(coef)
            else:
                total += abs(coef) * (k / (math.e * c)) ** k
    return total


def build_tp_window(
    pole_rates: Sequence[float], C: float = 1.0, merge_tol: float = RATE_MERGE_TOL
) -> TPFiniteWindow:
    """
    Partial-fraction form of g_hat = C prod_nu (1 + 2 pi i w / a_nu)^{-1}.

    Each group of (numerically) equal poles a with multiplicity s contributes
    A_j / (a + 2 pi i w)^j, j = 1..s, whose inverse transform is
    A_j x^{j-1}/(j-1)! e^{-a x} on x >= 0 (a > 0) or -A_j x^{j-1}/(j-1)! e^{-a x} on x < 0 (a < 0).

    Raises:
        WindowError: empty, non-finite or zero pole rates, or C <= 0.
    """
    poles = _check_rates(pole_rates, "pole_rates")
    if any(a == 0.0 for a in poles):
        raise WindowError("pole rates must be nonzero", rates=poles)
    if not (math.isfinite(C) and C > 0.0):
        raise WindowError(f"normalization must be positive, got {C}", rates=poles)

    groups = _group_poles(poles, merge_tol)
    prefactor = float(np.prod(poles))
    right_raw, left_raw = [], []
    for idx, (a, mult) in enumerate(groups):
        h = _laurent_coefficients(groups, idx, prefactor)
        coeffs = np.zeros(mult)
        for j in range(1, mult + 1):
            coeffs[j - 1] = h[mult - j] / math.factorial(j - 1)
        if a > 0:
            right_raw.append((-a, C * coeffs))
        else:
            left_raw.append((-a, -C * coeffs))

    right, left = merge_terms(right_raw, merge_tol), merge_terms(left_raw, merge_tol)
    pos = [a for a in poles if a > 0]
    neg = [-a for a in poles if a < 0]
    delta = min(pos + neg)
    # a repeated slowest pole leaves x^k e^{-delta x} unbounded against e^{-delta x}
    slowest = [t for t in right + left if abs(abs(t.rate) - delta) <= merge_tol]
    if any(t.degree > 0 for t in slowest):
        delta *= 0.5
    c_env = max(_envelope(right, delta), _envelope(left, delta))

    w = TPFiniteWindow(
        pole_rates=poles,
        normalization=float(C),
        right_terms=right,
        left_terms=left,
        decay_envelope=(c_env, delta),
    )
    logger.debug("[windows] built TP window poles=%s envelope=(%.3g, %.3g)", poles, c_env, delta)
    return w


def two_sided_exponential(lam: float) -> TPFiniteWindow:
    """g(x) = (lam/2) e^{-lam |x|}."""
    lam = abs(float(lam))
    return build_tp_window((lam, -lam), C=1.0)


def tp_fourier(w: TPFiniteWindow, omega: Any) -> Any:
    om = np.asarray(omega, dtype=float)
    out = np.full(om.shape, w.normalization, dtype=complex)
    for a in w.pole_rates:
        out /= 1.0 + 2j * np.pi * om / a
    if np.ndim(omega) == 0:
        return complex(out)
    return out


def schoenberg_whitney_check(
    w: TPFiniteWindow,
    xs: Sequence[float],
    ys: Sequence[float],
) -> Tuple[float, bool]:
    """
    det(g(x_j - y_k)) together with the interlacing condition x_{j-m1} < y_j < x_{j+m2}
    (m1 positive poles, m2 negative poles; out-of-range x are -inf / +inf).
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    n = len(x)
    if n != len(y) or n == 0 or n > 8:
        raise DomainError("need equal-length node sets of size 1..8", parameter="N", value=(len(x), len(y)))
    if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
        raise DomainError("nodes must be strictly increasing", parameter="nodes")

    mat = w(x[:, None] - y[None, :])
    d = linalg.det(mat)

    m1, m2 = w.m_pos, w.m_neg
    holds = True
    for j in range(1, n + 1):
        lo = x[j - m1 - 1] if j - m1 >= 1 else -math.inf
        hi = x[j + m2 - 1] if j + m2 <= n else math.inf
        if not (lo < y[j - 1] < hi):
            holds = False
            break
    return d, holds


# -------------------------
# Scaling
# -------------------------

@dataclass(frozen=True)
class ScaledWindow:
    """f_alpha(x) = f(alpha x)."""
    base: Any
    alpha: float

    def __post_init__(self) -> None:
        if not self.alpha > 0.0:
            raise DomainError("scale must be positive", parameter="alpha", value=self.alpha)

    @property
    def support(self) -> Tuple[float, float]:
        lo, hi = window_support(self.base)
        return (lo / self.alpha, hi / self.alpha)

    @property
    def decay_envelope(self) -> Optional[Tuple[float, float]]:
        env = decay_envelope(self.base)
        if env is None:
            return None
        return (env[0], env[1] * self.alpha)

    def __call__(self, x: Any) -> Any:
        return self.base(np.asarray(x, dtype=float) * self.alpha) if np.ndim(x) else self.base(float(x) * self.alpha)
