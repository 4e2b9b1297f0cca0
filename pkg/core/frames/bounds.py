"""
Frame Bounds

Closed forms for the symmetric order-2 EB-spline and the two-sided exponential, the
transference of bounds through a Zak factor, and grid-optimal bounds:

- rational alpha*beta = p/q: the pre-Gramian is block Toeplitz under (k, l) -> (k + q, l + p),
  A = inf sigma_min(Phi)^2 / beta and B = sup sigma_max(Phi)^2 / beta over its q x p symbol
- beta = 1/N, alpha = 1: sums of N subsampled |Z g|^2
- 1/beta >= support length: the diagonal formula inf_x sum_k g(x + k alpha)^2 / beta
- TP windows: the EB-spline bound at lattice (1, alpha beta) carried over by the factor D
"""

from __future__ import annotations
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from core import linalg
from core.errors import DomainError, LatticeError, WindowError
from core.model import FrameBoundReport, LatticeParams
from core.spline.windows import window_knots

logger = logging.getLogger(__name__)

REFINE_START = 128
REFINE_MAX = 2048
REFINE_REL = 1e-4
HIGHREDUNDANCY_GRID = 2049
X_CHUNK = 64
NO_SHIFT = np.iinfo(np.int64).min


# -------------------------
# Closed forms
# -------------------------

def c_beta(beta: float) -> float:
    """Piecewise constant of the order-2 lower bound; jumps at beta = 5/6."""
    if not (0.0 < beta < 1.0):
        raise DomainError("beta must lie in (0, 1)", parameter="beta", value=beta, interval=(0.0, 1.0))
    if beta <= 0.5:
        return 1.0
    ib = 1.0 / beta
    if beta <= 0.75:
        return (3.0 - ib) ** 2
    if beta <= 5.0 / 6.0:
        return (3.0 - ib) * (11.0 - 11.0 * ib + 3.0 * ib * ib)
    return (1.0 + math.sqrt(beta / (math.pi * (1.0 - beta)))) * (
        1.0 + math.sqrt(math.pi * beta / (4.0 * (1.0 - beta)))
    )


def lower_bound_eb2(lam: float, beta: float) -> float:
    """
    Lower frame bound of G(B, 1, beta), B the symmetric order-2 spline with parameter lam.

    (beta lam^2 c_beta)^{-1} min{2 sinh^2(lam/2), sinh^2(lam/(2 beta))}; lam = 0 gives
    (beta c_beta)^{-1} min{1/2, 1/(2 beta)^2}.
    """
    if not (math.isfinite(lam) and lam >= 0.0):
        raise DomainError("lambda must be >= 0", parameter="lambda", value=lam)
    if not (0.0 < beta < 1.0):
        raise DomainError("beta must lie in (0, 1)", parameter="beta", value=beta, interval=(0.0, 1.0))
    cb = c_beta(beta)
    if lam == 0.0:
        return min(0.5, 1.0 / (2.0 * beta) ** 2) / (beta * cb)
    num = min(2.0 * math.sinh(lam / 2.0) ** 2, math.sinh(lam / (2.0 * beta)) ** 2)
    return num / (beta * lam * lam * cb)


def lower_bound_tp2(lam: float, alpha: float, beta: float) -> float:
    """Lower frame bound of G((lam/2) e^{-lam|x|}, alpha, beta), alpha*beta < 1."""
    if not (math.isfinite(lam) and lam > 0.0):
        raise DomainError("lambda must be positive", parameter="lambda", value=lam)
    if not (alpha > 0.0 and beta > 0.0):
        raise DomainError("lattice parameters must be positive", parameter="alpha,beta", value=(alpha, beta))
    ab = alpha * beta
    if ab >= 1.0:
        raise LatticeError("alpha*beta must be < 1", alpha=alpha, beta=beta)
    h = alpha * lam / 2.0
    num = lam * lam * min(2.0 * math.sinh(h) ** 2, math.sinh(lam / (2.0 * beta)) ** 2)
    return num / (16.0 * beta * c_beta(ab) * math.cosh(h) ** 4)


def transfer_bounds(A: float, B: float, kappa: float, D_min_sq: float, D_max_sq: float) -> Tuple[float, float]:
    """(kappa A inf|D|^2, kappa B sup|D|^2)."""
    if not (0.0 < D_min_sq <= D_max_sq < math.inf):
        raise DomainError("need 0 < D_min_sq <= D_max_sq < inf", parameter="D", value=(D_min_sq, D_max_sq))
    if not kappa > 0.0:
        raise DomainError("kappa must be positive", parameter="kappa", value=kappa)
    return kappa * A * D_min_sq, kappa * B * D_max_sq


def tp2_transfer_factors(lam: float, alpha: float) -> Tuple[float, float]:
    """Range of |D|^2 = |C/alpha|^2 for the two-sided exponential: extremes at alpha w = 1/2 and 0."""
    h = alpha * lam / 2.0
    base = alpha * alpha * lam ** 4 / 16.0
    return base / math.cosh(h) ** 4, base / math.sinh(h) ** 4


def tp_transfer_factors(window: Any, alpha: float) -> Tuple[float, float]:
    """Range of |C factor / alpha|^2 for a TP window of finite type."""
    from core.frames.zak import factorization_factor

    at_zero = abs(factorization_factor(alpha, window.pole_rates, 0.0))
    at_half = abs(factorization_factor(alpha, window.pole_rates, 0.5 / alpha))
    scale = (window.normalization / alpha) ** 2
    lo, hi = sorted((at_zero, at_half))
    return scale * lo * lo, scale * hi * hi


def formula_report(family: str, lam: float, lat: LatticeParams) -> FrameBoundReport:
    """Closed-form lower bound as a report; eb2 needs alpha = 1."""
    if family == "eb2":
        if abs(lat.alpha - 1.0) > 1e-12:
            raise LatticeError("the order-2 spline bound is for alpha = 1", alpha=lat.alpha, beta=lat.beta)
        method = "closed_form_case1" if lat.beta <= 0.5 else "closed_form_thm_bound"
        return FrameBoundReport(lattice=lat, method=method, lower=lower_bound_eb2(lam, lat.beta))
    if family == "tp2":
        return FrameBoundReport(lattice=lat, method="closed_form_tp", lower=lower_bound_tp2(lam, lat.alpha, lat.beta))
    raise DomainError(f"unknown family {family!r}", parameter="family", value=family)


# -------------------------
# Diagonal regime
# -------------------------

def _support(w: Any) -> Tuple[float, float]:
    lo, hi = (float(v) for v in w.support)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise WindowError("this bound needs a compactly supported window")
    return lo, hi


def _periodized_square(w: Any, alpha: float) -> Any:
    lo, hi = _support(w)
    ks = np.arange(int(math.floor(lo / alpha)) - 2, int(math.ceil(hi / alpha)) + 2)

    def f(x: Any) -> Any:
        xs = np.asarray(x, dtype=float)
        return np.sum(np.asarray(w(xs[..., None] + ks * alpha)) ** 2, axis=-1)

    return f


def _golden_refine(f: Any, xs: np.ndarray, vals: np.ndarray, i: int, sign: float) -> Tuple[float, float]:
    """Golden-section polish of a grid extremum; falls back to the grid point on flat brackets."""
    def g(t: float) -> float:
        return sign * float(f(t))

    h = xs[1] - xs[0]
    try:
        res = minimize_scalar(g, bracket=(xs[i] - h, xs[i], xs[i] + h), method="golden", tol=1e-12)
    except ValueError:
        return float(xs[i]), float(vals[i])
    if getattr(res, "success", True) and res.fun <= sign * vals[i]:
        return float(res.x), float(sign * res.fun)
    return float(xs[i]), float(vals[i])


def optimal_bound_highredundancy(
    w: Any,
    lat: LatticeParams,
    grid: int = HIGHREDUNDANCY_GRID,
) -> FrameBoundReport:
    """
    beta^{-1} inf / sup over [0, alpha) of sum_k w(x + k alpha)^2, valid when 1/beta >= support length.

    Raises:
        LatticeError: 1/beta below the support length.
    """
    lo, hi = _support(w)
    if 1.0 / lat.beta < (hi - lo) - 1e-12:
        raise LatticeError(
            "diagonal formula needs 1/beta >= support length", alpha=lat.alpha, beta=lat.beta,
            valid_cases=["(1) 1/beta >= m"],
        )
    f = _periodized_square(w, lat.alpha)
    xs = np.linspace(0.0, lat.alpha, grid)
    vals = f(xs)
    i_min, i_max = int(np.argmin(vals)), int(np.argmax(vals))
    x_min, v_min = _golden_refine(f, xs, vals, i_min, 1.0)
    _, v_max = _golden_refine(f, xs, vals, i_max, -1.0)
    x_min = x_min % lat.alpha
    if lat.alpha - x_min < 1e-12:
        x_min = 0.0
    lower, upper = v_min / lat.beta, v_max / lat.beta
    logger.info("[bounds] highredundancy beta=%s lower=%.12g at x=%.12g upper=%.12g", lat.beta, lower, x_min, upper)
    return FrameBoundReport(
        lattice=lat, method="optimal_highredundancy", lower=lower, upper=upper,
        grid=(grid, 1), max_residual=abs(float(vals[i_min]) - v_min) / lat.beta, minimizer=x_min,
    )


# -------------------------
# Rational lattices: block-Toeplitz symbol
# -------------------------

def _gauge_consistent(shift: np.ndarray) -> bool:
    """
    True when the shift matrix admits shift[i, j] = u_i - v_j on its nonzero pattern, so the
    symbol is diag(e^{2 pi i u w}) Phi(0) diag(e^{-2 pi i v w}) and its singular values do not
    depend on w.
    """
    q, p = shift.shape
    pot: Dict[int, int] = {}
    for start in range(q):
        if start in pot:
            continue
        pot[start] = 0
        stack = [start]
        while stack:
            node = stack.pop()
            if node < q:
                for j in np.flatnonzero(shift[node] != NO_SHIFT):
                    want = pot[node] - int(shift[node, j])
                    col = q + int(j)
                    if col in pot:
                        if pot[col] != want:
                            return False
                    else:
                        pot[col] = want
                        stack.append(col)
            else:
                j = node - q
                for i in np.flatnonzero(shift[:, j] != NO_SHIFT):
                    want = pot[node] + int(shift[i, j])
                    if int(i) in pot:
                        if pot[int(i)] != want:
                            return False
                    else:
                        pot[int(i)] = want
                        stack.append(int(i))
    return True


@dataclass
class _SymbolScan:
    lower_sq: float = math.inf
    upper_sq: float = 0.0
    argmin: float = 0.0

    def update(self, smin_sq: np.ndarray, smax_sq: np.ndarray, xs: np.ndarray) -> None:
        if smin_sq.size == 0:
            return
        i = int(np.argmin(smin_sq))
        if smin_sq[i] < self.lower_sq:
            self.lower_sq = float(smin_sq[i])
            self.argmin = float(xs[i])
        self.upper_sq = max(self.upper_sq, float(np.max(smax_sq)))


class _RationalSymbol:
    """T_d(x)[i, j] = w(x + i alpha - j/beta + d q alpha); Phi(x, w) = sum_d T_d(x) e^{2 pi i d w}."""

    def __init__(self, w: Any, lat: LatticeParams, p: int, q: int):
        self.w, self.lat, self.p, self.q = w, lat, p, q
        lo, hi = _support(w)
        period = q * lat.alpha
        d_lo = int(math.floor((lo - period) / period)) - 1
        d_hi = int(math.ceil((hi + (p - 1) / lat.beta) / period)) + 1
        self.ds = np.arange(d_lo, d_hi + 1)
        self.base = (
            np.arange(q)[:, None] * lat.alpha - np.arange(p)[None, :] / lat.beta
        )[None, :, :] + self.ds[:, None, None] * period
        self._collapse_cache: Dict[bytes, bool] = {}

    def blocks(self, xs: np.ndarray) -> np.ndarray:
        t = xs[:, None, None, None] + self.base[None]
        return np.asarray(self.w(t), dtype=float)

    def collapsible(self, T: np.ndarray) -> bool:
        nz = T != 0.0
        counts = nz.sum(axis=0)
        if np.any(counts > 1):
            return False
        shift = np.where(counts == 1, self.ds[np.argmax(nz, axis=0)], NO_SHIFT).astype(np.int64)
        key = shift.tobytes()
        hit = self._collapse_cache.get(key)
        if hit is None:
            hit = _gauge_consistent(shift)
            self._collapse_cache[key] = hit
        return hit

    def scan(self, xs: np.ndarray, ws: np.ndarray, acc: _SymbolScan, only_w_dependent: bool = False) -> None:
        phase = np.exp(2j * np.pi * np.outer(ws, self.ds)) if ws.size else None
        for c in range(0, len(xs), X_CHUNK):
            xc = xs[c:c + X_CHUNK]
            T = self.blocks(xc)
            flat_x, flat_w = [], []
            for n, x in enumerate(xc):
                if self.collapsible(T[n]):
                    if not only_w_dependent:
                        flat_x.append(x)
                        flat_w.append(T[n].sum(axis=0))
                    continue
                if phase is None:
                    continue
                Phi = np.einsum("dqp,wd->wqp", T[n], phase)
                s = linalg.singular_values(Phi)
                acc.update(s[:, -1] ** 2, s[:, 0] ** 2, np.full(len(ws), x))
            if flat_w:
                s = linalg.singular_values(np.stack(flat_w))
                acc.update(s[:, -1] ** 2, s[:, 0] ** 2, np.asarray(flat_x))


def _rational_form(lat: LatticeParams) -> Tuple[int, int]:
    rl = lat.with_inferred_rational()
    if rl.rational_form is None:
        raise LatticeError(
            "optimal bounds need rational alpha*beta (commensurate alpha and 1/beta)",
            alpha=lat.alpha, beta=lat.beta,
        )
    return rl.rational_form


def optimal_bound_rational(
    w: Any,
    lat: LatticeParams,
    start: int = REFINE_START,
    max_grid: int = REFINE_MAX,
    rel_change: float = REFINE_REL,
) -> FrameBoundReport:
    """
    Grid-optimal frame bounds through the pre-Gramian symbol at alpha*beta = p/q.

    Grids x_i = i alpha/n, w_j = j/n are nested and doubled from start until the relative
    change of both bounds drops below rel_change (or max_grid); max_residual is the last change.

    Raises:
        LatticeError: alpha*beta >= 1 or not rational.
        WindowError: window without compact support.
    """
    lat.require_subcritical()
    _support(w)
    p, q = _rational_form(lat)
    sym = _RationalSymbol(w, lat, p, q)

    n = start
    acc = _SymbolScan()
    sym.scan(lat.alpha * np.arange(n) / n, np.arange(n) / n, acc)
    delta = math.inf
    while True:
        lower, upper = acc.lower_sq / lat.beta, acc.upper_sq / lat.beta
        logger.debug("[bounds] p/q=%d/%d n=%d lower=%.12g upper=%.12g", p, q, n, lower, upper)
        if n >= max_grid:
            break
        n2 = 2 * n
        xs, ws = lat.alpha * np.arange(n2) / n2, np.arange(n2) / n2
        sym.scan(xs[1::2], ws, acc)
        sym.scan(xs[0::2], ws[1::2], acc, only_w_dependent=True)
        n = n2
        new_lower, new_upper = acc.lower_sq / lat.beta, acc.upper_sq / lat.beta
        delta = max(
            abs(lower - new_lower) / max(new_lower, 1e-300),
            abs(new_upper - upper) / max(new_upper, 1e-300),
        )
        if delta < rel_change:
            lower, upper = new_lower, new_upper
            break
    if n >= max_grid and delta >= rel_change:
        logger.warning("[bounds] grid cap %d reached with relative change %.2e", n, delta)
    logger.info("[bounds] optimal p/q=%d/%d lower=%.10g upper=%.10g grid=%d", p, q, lower, upper, n)
    return FrameBoundReport(
        lattice=lat.with_inferred_rational(), method="optimal_rational", lower=lower, upper=upper,
        grid=(n, n), max_residual=0.0 if math.isinf(delta) else delta, minimizer=acc.argmin,
    )


def optimal_bound_zak_subsampled(w: Any, N: int, grid: int = 256) -> FrameBoundReport:
    """alpha = 1, beta = 1/N: inf / sup over a grid of [0,1)^2 of sum_{j<N} |Z_1 w(x, w + j/N)|^2."""
    from core.frames.zak import ZakEvaluator, zak

    if N <= 0:
        raise DomainError("N must be a positive integer", parameter="N", value=N)
    lat = LatticeParams.from_fraction(1, f"1/{N}")
    e = ZakEvaluator.for_window(w, 1.0)
    xs = np.arange(grid) / grid
    ws = np.arange(grid) / grid
    total = np.zeros((grid, grid))
    for j in range(N):
        total += np.abs(zak(e, xs[:, None], ws[None, :] + j / N)) ** 2
    i = np.unravel_index(int(np.argmin(total)), total.shape)
    lower, upper = float(total[i]), float(np.max(total))
    logger.info("[bounds] zak N=%d lower=%.10g upper=%.10g", N, lower, upper)
    return FrameBoundReport(
        lattice=lat, method="zak_subsampled", lower=lower, upper=upper,
        grid=(grid, grid), max_residual=e.tail_bound, minimizer=float(xs[i[0]]),
    )


def _sup_periodized_abs(w: Any, step: float, grid: int) -> float:
    """
    sup over y of sum_k |w(y + k step)|. The sum is smooth between the knots of w taken mod step,
    so it is evaluated at every knot (and its left limit), on the grid, and at the polished
    maximum of each kink-free grid bracket.
    """
    lo, hi = _support(w)
    ks = np.arange(int(math.floor(lo / step)) - 2, int(math.ceil(hi / step)) + 2)

    def f(y: Any) -> Any:
        ys = np.asarray(y, dtype=float)
        return np.sum(np.abs(np.asarray(w(ys[..., None] + ks * step))), axis=-1)

    kinks = np.unique(np.concatenate([np.mod(np.asarray(window_knots(w), dtype=float), step), [0.0, step]]))
    ys = np.union1d(np.linspace(0.0, step, grid), kinks)
    vals = f(ys)
    best = max(float(np.max(vals)), float(np.max(f(np.nextafter(kinks, -np.inf)))))
    is_kink = np.isin(ys, kinks)
    for i in range(1, len(ys) - 1):
        if is_kink[i] or vals[i] < vals[i - 1] or vals[i] < vals[i + 1]:
            continue
        res = minimize_scalar(
            lambda t: -float(f(t)), bounds=(ys[i - 1], ys[i + 1]), method="bounded", options={"xatol": 1e-12}
        )
        best = max(best, -float(res.fun))
    return best


def upper_bound_schur(w: Any, lat: LatticeParams, grid: int = HIGHREDUNDANCY_GRID) -> FrameBoundReport:
    """
    beta^{-1} sup_y sum_k |w(y + k alpha)| * sup_y sum_l |w(y + l/beta)|, the Schur test on P(x).
    Both sups include the knots of w shifted into the period, where the maximum of a
    piecewise window usually sits.
    """
    col, row = _sup_periodized_abs(w, lat.alpha, grid), _sup_periodized_abs(w, 1.0 / lat.beta, grid)
    upper = col * row / lat.beta
    return FrameBoundReport(lattice=lat, method="schur_upper", lower=0.0, upper=upper, grid=(grid, 1))


# -------------------------
# TP windows by transference
# -------------------------

def optimal_bound_tp_transferred(
    window: Any,
    lat: LatticeParams,
    eb_report: Optional[FrameBoundReport] = None,
    **refine: Any,
) -> FrameBoundReport:
    """
    EB-spline bounds for Lambda = -alpha a at lattice (1, alpha beta), transferred with kappa = alpha
    and the exact range of |D|^2.
    """
    from core.frames.zak import eb_partner

    lat.require_subcritical()
    p, q = _rational_form(lat)
    if eb_report is None:
        partner = eb_partner(window, lat.alpha)
        eb_lat = LatticeParams.create(1.0, lat.alpha * lat.beta, (p, q))
        eb_report = optimal_bound_rational(partner, eb_lat, **refine)
    d_min, d_max = tp_transfer_factors(window, lat.alpha)
    lower, upper = transfer_bounds(eb_report.lower, eb_report.upper, lat.alpha, d_min, d_max)
    minimizer = None if eb_report.minimizer is None else lat.alpha * eb_report.minimizer
    return FrameBoundReport(
        lattice=lat.with_inferred_rational(), method="transferred_tp", lower=lower, upper=upper,
        grid=eb_report.grid, max_residual=eb_report.max_residual, minimizer=minimizer,
    )


# -------------------------
# Beta sweep
# -------------------------

@dataclass(frozen=True)
class SweepRow:
    panel: str
    k: int
    beta: float
    a_formula: float
    a_opt: float
    b_opt: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _sweep_point(lam: float, k: int, denominator: int, refine: Dict[str, Any]) -> List[SweepRow]:
    from core.spline.windows import symmetric_eb_spline, two_sided_exponential

    lat = LatticeParams.from_fraction(1, f"{k}/{denominator}")
    beta = lat.beta
    eb = optimal_bound_rational(symmetric_eb_spline(lam), lat, **refine)
    # at alpha = 1 the partner spline of the two-sided exponential is the same symmetric spline
    tp = optimal_bound_tp_transferred(two_sided_exponential(lam), lat, eb_report=eb)
    return [
        SweepRow("eb2", k, beta, lower_bound_eb2(lam, beta), eb.lower, eb.upper),
        SweepRow("tp2", k, beta, lower_bound_tp2(lam, 1.0, beta), tp.lower, tp.upper),
    ]


def bound_sweep(
    lam: float = 1.0,
    denominator: int = 61,
    k_min: int = 31,
    k_max: int = 60,
    workers: Optional[int] = None,
    **refine: Any,
) -> List[SweepRow]:
    """Rows for beta = k/denominator, k_min <= k <= k_max, both panels, sorted by (panel, beta)."""
    from core.frames.sweep import run_sweep

    if not (0 < k_min <= k_max < denominator):
        raise DomainError(
            "need 0 < k_min <= k_max < denominator", parameter="k", value=(k_min, k_max, denominator)
        )
    ks = list(range(k_min, k_max + 1))
    chunks = run_sweep(ks, lambda k: _sweep_point(lam, k, denominator, refine), workers=workers)
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=lambda r: (r.panel, r.beta))
    return rows
