"""
Zak Transform

Z_alpha g(x, w) = sum_k g(x - k alpha) e^{2 pi i k alpha w}

Compact windows give finite exact sums; TP windows are truncated at |k - floor(x/alpha)| <= K
with K chosen from the stored decay envelope so the tail is below 1e-12. The sum is always
centred on the lattice cell containing x.
"""

from __future__ import annotations
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect

from core.errors import DomainError, ResidualError, WindowError, ZeroNotFoundError
from core.spline.windows import (
    EBSplineWindow,
    ScaledWindow,
    TPFiniteWindow,
    build_eb_spline,
    decay_envelope,
    window_support,
)

logger = logging.getLogger(__name__)

ZAK_TAIL_TOL = 1e-12
BRACKET_POINTS = 64
BISECT_XTOL = 1e-12
EXCLUSION_CELLS = 2


@dataclass(frozen=True)
class ZakEvaluator:
    window: Any
    alpha: float
    truncation_half_width: int
    tail_bound: float

    @classmethod
    def for_window(cls, window: Any, alpha: float, tail_tol: float = ZAK_TAIL_TOL) -> "ZakEvaluator":
        alpha = float(alpha)
        if not (math.isfinite(alpha) and alpha > 0.0):
            raise DomainError("alpha must be positive", parameter="alpha", value=alpha)
        env = decay_envelope(window)
        if env is None:
            lo, hi = window_support(window)
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise WindowError("window without compact support needs a decay envelope")
            K = int(math.ceil(max(abs(lo), abs(hi)) / alpha)) + 1
            return cls(window, alpha, K, 0.0)

        c_env, delta = env
        da = delta * alpha
        geo = 2.0 / (1.0 - math.exp(-da))
        K = max(1, int(math.ceil(math.log(max(c_env * geo / tail_tol, 1.0)) / da)))
        tail = c_env * geo * math.exp(-da * K)
        logger.debug("[zak] alpha=%s K=%d tail=%.2e", alpha, K, tail)
        return cls(window, alpha, K, tail)

    def _shifts(self, xs: np.ndarray) -> np.ndarray:
        n = np.floor(xs / self.alpha)
        K = self.truncation_half_width
        return n[..., None] + np.arange(-K, K + 1)


def zak(e: ZakEvaluator, x: Any, omega: Any) -> Any:
    """Truncated Zak sum, vectorised over broadcast (x, omega)."""
    xs, om = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(omega, dtype=float))
    ks = e._shifts(xs)
    vals = e.window(xs[..., None] - ks * e.alpha)
    phase = np.exp(2j * np.pi * ks * (e.alpha * om[..., None]))
    out = np.sum(vals * phase, axis=-1)
    if np.ndim(out) == 0:
        return complex(out)
    return out


def zak_half(e: ZakEvaluator, x: Any) -> Any:
    """Z_alpha g(x, 1/(2 alpha)) = sum_k (-1)^k g(x - k alpha), evaluated as a real sum."""
    xs = np.asarray(x, dtype=float)
    ks = e._shifts(xs)
    signs = np.where(np.mod(ks, 2.0) == 0.0, 1.0, -1.0)
    out = np.sum(signs * e.window(xs[..., None] - ks * e.alpha), axis=-1)
    if np.ndim(out) == 0:
        return float(out)
    return out


# -------------------------
# Identities
# -------------------------

def identity_residuals(e: ZakEvaluator, samples: int = 100, seed: int = 0) -> Dict[str, float]:
    """Max residuals of periodicity in w, quasi-periodicity in x and the scaling identity."""
    if samples <= 0:
        raise DomainError("samples must be positive", parameter="samples", value=samples)
    rng = np.random.default_rng(seed)
    a = e.alpha
    x = rng.uniform(-2.0 * a, 2.0 * a, samples)
    om = rng.uniform(0.0, 1.0 / a, samples)
    n = rng.integers(-3, 4, samples)

    z = zak(e, x, om)
    periodic = np.abs(zak(e, x, om + 1.0 / a) - z)
    quasi = np.abs(zak(e, x + n * a, om) - np.exp(2j * np.pi * n * a * om) * z)

    unit = ZakEvaluator.for_window(ScaledWindow(e.window, a), 1.0)
    scaling = np.abs(zak(unit, x / a, a * om) - z)

    return {
        "periodicity": float(np.max(periodic)),
        "quasi_periodicity": float(np.max(quasi)),
        "scaling": float(np.max(scaling)),
    }


def verify_zak_identities(e: ZakEvaluator, samples: int = 100, seed: int = 0) -> float:
    res = identity_residuals(e, samples, seed)
    logger.info("[zak] identity residuals %s", res)
    return max(res.values())


# -------------------------
# Grids
# -------------------------

def modulus_grid(e: ZakEvaluator, n_x: int, n_omega: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Z on the uniform grid of the fundamental cell [0, alpha) x [0, 1/alpha)."""
    xs = e.alpha * np.arange(n_x) / n_x
    om = np.arange(n_omega) / (n_omega * e.alpha)
    Z = zak(e, xs[:, None], om[None, :])
    return xs, om, Z


def winding_cells(e: ZakEvaluator, n: int) -> np.ndarray:
    """
    Winding number of Z around every cell of an n x n grid of the fundamental cell.

    Grid lines sit at half-cell offsets, (i - 1/2) alpha / n and (j - 1/2) / (n alpha), so
    the symmetric zero locations (x in {0, alpha/2}, w = 1/(2 alpha)) fall on cell centres.
    Entry [i, j] covers x in [(i - 1/2), (i + 1/2)] alpha / n and the matching w range.
    """
    xl = e.alpha * (np.arange(n + 1) - 0.5) / n
    wl = (np.arange(n + 1) - 0.5) / (n * e.alpha)
    Z = zak(e, xl[:, None], wl[None, :])
    z00, z10 = Z[:-1, :-1], Z[1:, :-1]
    z11, z01 = Z[1:, 1:], Z[:-1, 1:]
    total = (
        np.angle(z10 / z00) + np.angle(z11 / z10) + np.angle(z01 / z11) + np.angle(z00 / z01)
    )
    return np.rint(total / (2.0 * np.pi)).astype(int)


def zero_cells(e: ZakEvaluator, n: int) -> Sequence[Tuple[int, int]]:
    """(i, j) indices of the cells with nonzero winding."""
    w = winding_cells(e, n)
    return [(int(i), int(j)) for i, j in zip(*np.nonzero(w))]


# -------------------------
# Zero location
# -------------------------

@dataclass(frozen=True)
class ZeroReport:
    x_zero: float
    omega_zero: float
    min_modulus_off_zero: float
    grid_resolution: int
    residual: float
    alpha: float = 1.0

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _min_modulus_off_zero(e: ZakEvaluator, x_zero: float, n: int) -> float:
    a = e.alpha
    xs, om, Z = modulus_grid(e, n, n)
    dx = np.abs(xs - x_zero)
    dx = np.minimum(dx, a - dx)
    near_x = dx <= EXCLUSION_CELLS * a / n
    near_w = np.abs(om - 0.5 / a) <= EXCLUSION_CELLS / (n * a)
    mod = np.abs(Z)
    mod[np.ix_(near_x, near_w)] = np.inf
    return float(np.min(mod))


def _bracket_zero(h: Any, scale: float) -> float:
    xs = np.arange(BRACKET_POINTS + 1) / BRACKET_POINTS
    vals = np.asarray(h(xs), dtype=float)
    ztol = 1e-14 * scale
    for i in range(BRACKET_POINTS):
        if abs(vals[i]) <= ztol:
            return float(xs[i])
        if vals[i] * vals[i + 1] < 0.0:
            return float(bisect(h, xs[i], xs[i + 1], xtol=BISECT_XTOL))
    raise ZeroNotFoundError(
        "no sign change of sum (-1)^k B(x-k) on [0,1]", routine="bisect",
        details={"samples": vals.tolist()},
    )


def locate_zero_on_half_line(e: ZakEvaluator, scan: int = 256) -> ZeroReport:
    """
    The zero of Z_1 B on w = 1/2 and the minimum of |Z| on a scan x scan grid away from it.

    Raises:
        DomainError: alpha != 1 or order < 2.
        ZeroNotFoundError: no sign change was bracketed.
        ResidualError: bisection residual above 1e-10 scale, or a second zero on the grid.
    """
    if abs(e.alpha - 1.0) > 1e-12:
        raise DomainError("zero location on the half line needs alpha = 1", parameter="alpha", value=e.alpha)
    order = getattr(e.window, "order", None)
    if order is None or order < 2:
        raise DomainError("zero location needs an EB-spline of order >= 2", parameter="order", value=order)

    def h(x: Any) -> Any:
        return zak_half(e, x)

    scale = float(np.max(np.abs(e.window(np.linspace(0.0, float(order), 257)))))
    x_zero = _bracket_zero(h, scale)
    if x_zero >= 1.0 - BISECT_XTOL:
        x_zero = 0.0
    residual = abs(float(h(x_zero)))
    if residual > 1e-10 * scale:
        raise ResidualError("Zak zero residual too large", check="zak_zero", residual=residual, tolerance=1e-10 * scale)

    min_off = _min_modulus_off_zero(e, x_zero, scan)
    if not min_off > 0.0:
        raise ResidualError("|Z| vanishes away from the located zero", check="zak_single_zero", residual=min_off)
    logger.info("[zak] zero x=%.15g residual=%.2e min|Z| off zero=%.3e (n=%d)", x_zero, residual, min_off, scan)
    return ZeroReport(x_zero, 0.5, min_off, scan, residual, 1.0)


# -------------------------
# TP windows via EB-splines
# -------------------------

def factorization_factor(alpha: float, pole_rates: Sequence[float], omega: Any) -> Any:
    """prod_nu alpha a_nu / (1 - e^{-alpha (a_nu + 2 pi i w)})."""
    if any(float(a) == 0.0 for a in pole_rates):
        raise WindowError("pole rates must be nonzero", rates=list(pole_rates))
    om = np.asarray(omega, dtype=float)
    out = np.ones(om.shape, dtype=complex)
    for a in pole_rates:
        out *= alpha * a / (1.0 - np.exp(-alpha * (a + 2j * np.pi * om)))
    if np.ndim(omega) == 0:
        return complex(out)
    return out


def eb_partner(window: TPFiniteWindow, alpha: float) -> EBSplineWindow:
    """B_Lambda with Lambda = -alpha a."""
    return build_eb_spline([-alpha * a for a in window.pole_rates])


def factorization_residual(
    window: TPFiniteWindow, alpha: float, n: int = 32, tail_tol: float = ZAK_TAIL_TOL
) -> float:
    """
    max |alpha Z_alpha g - C factor Z_1 B_Lambda(x/alpha, alpha w)| on an n x n cell grid.

    tail_tol bounds the truncation of the TP side; the EB side is a finite sum.
    """
    eg = ZakEvaluator.for_window(window, alpha, tail_tol)
    eb = ZakEvaluator.for_window(eb_partner(window, alpha), 1.0)
    xs = alpha * np.arange(n) / n
    om = np.arange(n) / (n * alpha)
    X, W = np.meshgrid(xs, om, indexing="ij")
    lhs = alpha * zak(eg, X, W)
    rhs = window.normalization * factorization_factor(alpha, window.pole_rates, W) * zak(eb, X / alpha, alpha * W)
    return float(np.max(np.abs(lhs - rhs)))


def locate_zero_tp(
    window: TPFiniteWindow, alpha: float, scan: int = 256, tail_tol: float = ZAK_TAIL_TOL
) -> ZeroReport:
    """
    Zero of Z_alpha g at (alpha x_B, 1/(2 alpha)), x_B the half-line zero of B_Lambda, Lambda = -alpha a.
    The direct check sums the TP window to within tail_tol.

    Raises:
        DomainError: finite type below 2.
        ResidualError: the direct truncated sum at the reported zero exceeds 1e-8.
    """
    if window.order < 2:
        raise DomainError("zero location needs finite type >= 2", parameter="order", value=window.order)
    alpha = float(alpha)
    partner = ZakEvaluator.for_window(eb_partner(window, alpha), 1.0)
    rep_b = locate_zero_on_half_line(partner, scan)
    x_zero = alpha * rep_b.x_zero
    om_zero = 0.5 / alpha

    eg = ZakEvaluator.for_window(window, alpha, tail_tol)
    residual = abs(zak(eg, x_zero, om_zero))
    if residual > 1e-8:
        raise ResidualError("TP Zak zero not confirmed by direct sum", check="zak_zero_tp", residual=residual, tolerance=1e-8)
    min_off = _min_modulus_off_zero(eg, x_zero, scan)
    logger.info("[zak] TP zero x=%.15g w=%.15g residual=%.2e", x_zero, om_zero, residual)
    return ZeroReport(x_zero, om_zero, min_off, scan, residual, alpha)
