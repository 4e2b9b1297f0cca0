"""
Piecewise Exponential Polynomials

Exact representation of functions that are, on each interval [left, right) of a
partition, a finite sum of terms p(t) e^{rate t} with t = x - left measured from the
segment's local origin. This is the carrier of every EB-spline window.

- convolve_exp_box(): f * (e^{lam .} chi_[0,1)) computed segment by segment from the
  closed form of the integral of t^n e^{mu t}
- differentiate(), integrate(), integrate_between(): exact calculus
- shift(), combine(): translates and linear combinations on merged breakpoints
- strong_sign_changes_seq() / strong_sign_changes_fn(): S^- counts

Breakpoints are Fractions whenever the inputs are rational (integer knots), floats
otherwise. Evaluation at a breakpoint uses the right-hand segment.
"""

from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as npoly

from core.errors import WindowError

logger = logging.getLogger(__name__)

Breakpoint = Union[Fraction, float]

RATE_MERGE_TOL = 1e-12
# trailing coefficients / whole terms below this fraction of the segment scale are noise
_TRIM_REL = 1e-14
_BREAKPOINT_TOL = 1e-12
# |rate difference| * segment length at or below which exp factors are expanded in series
SERIES_SWITCH = 1.0
_SERIES_REMAINDER = 1e-17


# -------------------------
# Breakpoint helpers
# -------------------------

def as_breakpoint(v: Any) -> Breakpoint:
    """Exact Fraction for rational input (int, Fraction, integral float), float otherwise."""
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return Fraction(int(v))
    fv = float(v)
    if not math.isfinite(fv):
        raise ValueError(f"breakpoint must be finite, got {v!r}")
    if fv.is_integer():
        return Fraction(int(fv))
    return fv


def _bp_add(a: Breakpoint, b: Any) -> Breakpoint:
    if isinstance(a, Fraction) and isinstance(as_breakpoint(b), Fraction):
        return a + as_breakpoint(b)  # type: ignore[operator]
    return as_breakpoint(float(a) + float(b))


def _merge_breakpoints(points: Iterable[Breakpoint]) -> List[Breakpoint]:
    out: List[Breakpoint] = []
    for p in sorted(points, key=float):
        if out and abs(float(p) - float(out[-1])) <= _BREAKPOINT_TOL:
            # keep the exact representative
            if isinstance(p, Fraction) and not isinstance(out[-1], Fraction):
                out[-1] = p
            continue
        out.append(p)
    return out


def _bp_json(v: Breakpoint) -> Union[str, float]:
    return str(v) if isinstance(v, Fraction) else float(v)


# -------------------------
# Types
# -------------------------

@dataclass(frozen=True)
class ExpPolyTerm:
    """p(t) e^{rate t}; coeffs ascending in t, last coefficient nonzero."""
    rate: float
    coeffs: Tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.coeffs:
            raise ValueError("ExpPolyTerm needs at least one coefficient")
        if self.coeffs[-1] == 0.0:
            raise ValueError("ExpPolyTerm coefficients must have a nonzero leading entry")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        return npoly.polyval(t, self.coeffs) * np.exp(self.rate * t)


@dataclass(frozen=True)
class ExpPolySegment:
    left: Breakpoint
    right: Breakpoint
    terms: Tuple[ExpPolyTerm, ...] = ()

    def __post_init__(self) -> None:
        if not float(self.left) < float(self.right):
            raise ValueError(f"segment requires left < right, got [{self.left}, {self.right})")
        rates = [t.rate for t in self.terms]
        if len(set(rates)) != len(rates):
            raise ValueError("segment terms must have pairwise distinct rates")

    @property
    def length(self) -> float:
        return float(self.right) - float(self.left)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        t = np.asarray(x, dtype=float) - float(self.left)
        out = np.zeros_like(t)
        for term in self.terms:
            out += term.evaluate(t)
        return out


@dataclass(frozen=True)
class PiecewiseExpPoly:
    """Contiguous exp-poly segments; zero outside [segments[0].left, segments[-1].right)."""
    segments: Tuple[ExpPolySegment, ...]
    _edges: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        for a, b in zip(self.segments, self.segments[1:]):
            if a.right != b.left and abs(float(a.right) - float(b.left)) > _BREAKPOINT_TOL:
                raise ValueError(f"segments not contiguous at {a.right} / {b.left}")
        edges = [float(s.left) for s in self.segments]
        if self.segments:
            edges.append(float(self.segments[-1].right))
        object.__setattr__(self, "_edges", np.asarray(edges, dtype=float))

    # ---- shape ----

    @property
    def support(self) -> Optional[Tuple[Breakpoint, Breakpoint]]:
        if not self.segments:
            return None
        return (self.segments[0].left, self.segments[-1].right)

    @property
    def breakpoints(self) -> Tuple[Breakpoint, ...]:
        if not self.segments:
            return ()
        return tuple(s.left for s in self.segments) + (self.segments[-1].right,)

    def is_exact(self) -> bool:
        return all(isinstance(b, Fraction) for b in self.breakpoints)

    # ---- evaluation ----

    def __call__(self, x: Any) -> Any:
        xs = np.asarray(x, dtype=float)
        out = np.zeros(xs.shape, dtype=float)
        n = len(self.segments)
        if n:
            idx = np.searchsorted(self._edges, xs, side="right") - 1
            valid = (idx >= 0) & (idx < n)
            for i, seg in enumerate(self.segments):
                mask = valid & (idx == i)
                if np.any(mask):
                    out[mask] = seg.evaluate(xs[mask])
        if np.ndim(x) == 0:
            return float(out)
        return out

    def to_dict(self) -> Dict[str, Any]:
        return {
            "support": [_bp_json(b) for b in self.support] if self.support else None,
            "segments": [
                {
                    "left": _bp_json(s.left),
                    "right": _bp_json(s.right),
                    "terms": [{"rate": t.rate, "coeffs": list(t.coeffs)} for t in s.terms],
                }
                for s in self.segments
            ],
        }


# -------------------------
# Canonical form
# -------------------------

def _trim(coeffs: np.ndarray, atol: float) -> np.ndarray:
    c = np.asarray(coeffs, dtype=float)
    k = len(c)
    while k > 0 and abs(c[k - 1]) <= atol:
        k -= 1
    return c[:k]


def merge_terms(
    raw: Sequence[Tuple[float, np.ndarray]],
    tol: float = RATE_MERGE_TOL,
) -> Tuple[ExpPolyTerm, ...]:
    """
    Merge (rate, coeffs) pairs whose rates agree within tol and drop numerical zeros.

    Returns terms sorted by rate with canonical (nonzero leading) coefficients.
    """
    if not raw:
        return ()
    items = sorted(((float(r), np.asarray(c, dtype=float)) for r, c in raw), key=lambda rc: rc[0])
    groups: List[Tuple[float, np.ndarray]] = []
    for rate, c in items:
        if groups and abs(rate - groups[-1][0]) <= tol:
            groups[-1] = (groups[-1][0], npoly.polyadd(groups[-1][1], c))
        else:
            groups.append((rate, c))

    scale = max((float(np.max(np.abs(c))) for _, c in groups if len(c)), default=0.0)
    if scale == 0.0:
        return ()
    atol = _TRIM_REL * scale
    out: List[ExpPolyTerm] = []
    for rate, c in groups:
        c = _trim(c, atol)
        if len(c):
            out.append(ExpPolyTerm(rate=rate, coeffs=tuple(float(v) for v in c)))
    return tuple(out)


def _shifted(coeffs: Sequence[float], s: float) -> np.ndarray:
    """Coefficients of p(w + s) in w."""
    if s == 0.0:
        return np.asarray(coeffs, dtype=float)
    return np.asarray(Polynomial(coeffs)(Polynomial([s, 1.0])).coef, dtype=float)


def _reexpress(term: ExpPolyTerm, s: float, factor: float = 1.0) -> Tuple[float, np.ndarray]:
    """Rewrite p(u) e^{xi u} with u = w + s as a term in w, times factor."""
    return term.rate, _shifted(term.coeffs, s) * (factor * math.exp(term.rate * s))


# -------------------------
# Constructors
# -------------------------

def exp_box(lam: float) -> PiecewiseExpPoly:
    """e^{lam x} chi_[0,1)(x)."""
    lam = float(lam)
    if not math.isfinite(lam):
        raise WindowError("rate must be finite", rates=[lam])
    seg = ExpPolySegment(Fraction(0), Fraction(1), (ExpPolyTerm(lam, (1.0,)),))
    return PiecewiseExpPoly((seg,))


def from_segments(
    pieces: Sequence[Tuple[Any, Any, Sequence[Tuple[float, Sequence[float]]]]],
) -> PiecewiseExpPoly:
    """Build from (left, right, [(rate, coeffs), ...]) triples."""
    segs = []
    for left, right, terms in pieces:
        raw = [(r, np.asarray(c, dtype=float)) for r, c in terms]
        segs.append(ExpPolySegment(as_breakpoint(left), as_breakpoint(right), merge_terms(raw)))
    return PiecewiseExpPoly(tuple(segs))


# -------------------------
# Calculus
# -------------------------

def _exp_series(mu: float, length: float) -> np.ndarray:
    """Taylor coefficients of e^{mu u}, truncated once the remainder on [0, length] is below 1e-17."""
    z = abs(mu) * length
    coeffs = [1.0]
    rem = z
    j = 0
    while rem > _SERIES_REMAINDER:
        j += 1
        coeffs.append(coeffs[-1] * mu / j)
        rem *= z / (j + 1)
    return np.asarray(coeffs, dtype=float)


def _antiderivative(term: ExpPolyTerm, lam: float, tol: float, length: float = 1.0) -> Tuple[float, float, np.ndarray]:
    """
    For p(v) e^{xi v} e^{-lam v} return (xi_eff, mu, q) with
    d/du [q(u) e^{mu u}] = p(u) e^{(xi - lam) u} for u in [0, length].

    When |xi - lam| * length <= SERIES_SWITCH the factor e^{(xi - lam) u} is expanded as a
    polynomial, so nearly equal rates never divide by a small difference; the result then
    carries mu == 0 and xi_eff = lam.
    """
    p = np.asarray(term.coeffs, dtype=float)
    mu = term.rate - lam
    if abs(mu) <= tol:
        return lam, 0.0, npoly.polyint(p)
    if abs(mu) * length <= SERIES_SWITCH:
        return lam, 0.0, npoly.polyint(npoly.polymul(p, _exp_series(mu, length)))
    q = np.zeros(len(p))
    sign = 1.0
    for k in range(len(p)):
        dk = npoly.polyder(p, k) if k else p
        q[: len(dk)] += sign * dk / mu ** (k + 1)
        sign = -sign
    return term.rate, mu, q


def convolve_exp_box(
    f: PiecewiseExpPoly,
    lam: float,
    tol: float = RATE_MERGE_TOL,
) -> PiecewiseExpPoly:
    """
    Exact convolution f * (e^{lam .} chi_[0,1)).

    h(x) = sum over segments [L, R) of f of
        int_{max(L, x-1)}^{min(R, x)} f(t) e^{lam (x - t)} dt
    and each piece is e^{lam (x - L)} [Q(hi - L) - Q(lo - L)] with Q(u) = q(u) e^{mu u}.
    Output breakpoints are the union of f's breakpoints and their unit shifts, so on each
    output interval every limit is either constant or moves with x.

    Raises:
        WindowError: f has no bounded support or lam is not finite.
    """
    lam = float(lam)
    if not math.isfinite(lam):
        raise WindowError("convolution rate must be finite", rates=[lam])
    if f.support is None:
        raise WindowError("convolution requires a function with bounded, non-empty support")

    bps = list(f.breakpoints)
    out_bps = _merge_breakpoints(bps + [_bp_add(b, 1) for b in bps])
    anti = [[_antiderivative(t, lam, tol, seg.length) for t in seg.terms] for seg in f.segments]

    segments: List[ExpPolySegment] = []
    for c, d in zip(out_bps, out_bps[1:]):
        cf, df = float(c), float(d)
        xm = 0.5 * (cf + df)
        raw: List[Tuple[float, np.ndarray]] = []
        for seg, qs in zip(f.segments, anti):
            L, R = float(seg.left), float(seg.right)
            lo_moves = xm - 1.0 >= L
            hi_moves = xm <= R
            lo_mid = xm - 1.0 if lo_moves else L
            hi_mid = xm if hi_moves else R
            if hi_mid <= lo_mid:
                continue
            s = cf - L
            for xi_eff, mu, q in qs:
                # + Q(hi - L)
                if hi_moves:
                    raw.append((xi_eff, _shifted(q, s) * math.exp(xi_eff * s)))
                else:
                    val = float(npoly.polyval(R - L, q)) * math.exp(mu * (R - L) + lam * s)
                    raw.append((lam, np.array([val])))
                # - Q(lo - L)
                if lo_moves:
                    raw.append((xi_eff, -_shifted(q, s - 1.0) * math.exp(xi_eff * (s - 1.0) + lam)))
                else:
                    raw.append((lam, np.array([-float(q[0]) * math.exp(lam * s)])))
        segments.append(ExpPolySegment(c, d, merge_terms(raw, tol)))

    h = PiecewiseExpPoly(tuple(segments))
    logger.debug("[exppoly] convolve lam=%s -> %d segments on %s", lam, len(segments), h.support)
    return h


def differentiate(f: PiecewiseExpPoly) -> PiecewiseExpPoly:
    """Segment-wise derivative: (p e^{xi t})' = (p' + xi p) e^{xi t}."""
    segs = []
    for seg in f.segments:
        raw = []
        for t in seg.terms:
            p = np.asarray(t.coeffs, dtype=float)
            raw.append((t.rate, npoly.polyadd(npoly.polyder(p), t.rate * p)))
        segs.append(ExpPolySegment(seg.left, seg.right, merge_terms(raw)))
    return PiecewiseExpPoly(tuple(segs))


def _term_integral(term: ExpPolyTerm, u0: float, u1: float) -> float:
    _, mu, q = _antiderivative(term, 0.0, RATE_MERGE_TOL, max(abs(u0), abs(u1)))
    return float(npoly.polyval(u1, q) * math.exp(mu * u1) - npoly.polyval(u0, q) * math.exp(mu * u0))


def integrate_between(f: PiecewiseExpPoly, a: float, b: float) -> float:
    """Exact integral of f over [a, b]."""
    if b < a:
        return -integrate_between(f, b, a)
    total = 0.0
    for seg in f.segments:
        L, R = float(seg.left), float(seg.right)
        lo, hi = max(a, L), min(b, R)
        if hi <= lo:
            continue
        for t in seg.terms:
            total += _term_integral(t, lo - L, hi - L)
    return total


def integrate(f: PiecewiseExpPoly) -> float:
    """Exact integral of f over its support."""
    if f.support is None:
        return 0.0
    return integrate_between(f, float(f.support[0]), float(f.support[1]))


# -------------------------
# Translates and combinations
# -------------------------

def shift(f: PiecewiseExpPoly, s: Any) -> PiecewiseExpPoly:
    """x -> f(x - s); the local-origin representation is unchanged."""
    return PiecewiseExpPoly(
        tuple(ExpPolySegment(_bp_add(g.left, s), _bp_add(g.right, s), g.terms) for g in f.segments)
    )


def combine(parts: Sequence[Tuple[float, PiecewiseExpPoly]]) -> PiecewiseExpPoly:
    """sum_i c_i f_i on the merged breakpoints of all f_i."""
    live = [(float(c), f) for c, f in parts if f.segments and c != 0.0]
    if not live:
        return PiecewiseExpPoly(())
    bps = _merge_breakpoints(b for _, f in live for b in f.breakpoints)
    segs: List[ExpPolySegment] = []
    for c, d in zip(bps, bps[1:]):
        cf = float(c)
        xm = 0.5 * (cf + float(d))
        raw: List[Tuple[float, np.ndarray]] = []
        for coef, f in live:
            for seg in f.segments:
                if float(seg.left) <= xm < float(seg.right):
                    raw.extend(_reexpress(t, cf - float(seg.left), coef) for t in seg.terms)
                    break
        segs.append(ExpPolySegment(c, d, merge_terms(raw)))
    return PiecewiseExpPoly(tuple(segs))


# -------------------------
# Sign changes
# -------------------------

def strong_sign_changes_seq(c: Sequence[float], tol: float = 0.0) -> int:
    """S^-(c): strict sign alternations after deleting entries with |c_k| <= tol."""
    signs = [1 if v > 0 else -1 for v in (float(x) for x in c) if abs(v) > tol]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def strong_sign_changes_fn(
    f: Callable[[np.ndarray], Any],
    a: float,
    b: float,
    n: int,
    rel_tol: float = 1e-12,
) -> int:
    """
    S^- of f sampled at n uniform points of [a, b]; a lower bound on S^-(f).

    Samples with |f| <= rel_tol * max|f| count as zeros so float noise near the support
    ends does not register as sign changes.
    """
    if n < 2:
        raise ValueError("need at least two sample points")
    vals = np.asarray(f(np.linspace(a, b, n)), dtype=float)
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    return strong_sign_changes_seq(vals.tolist(), tol=rel_tol * scale)
