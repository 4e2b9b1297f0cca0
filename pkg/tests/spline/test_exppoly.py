import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st
from scipy.integrate import quad

from core.errors import WindowError
from core.spline.exppoly import (
    ExpPolyTerm,
    PiecewiseExpPoly,
    combine,
    convolve_exp_box,
    differentiate,
    exp_box,
    from_segments,
    integrate,
    integrate_between,
    shift,
    strong_sign_changes_fn,
    strong_sign_changes_seq,
)
from core.spline.windows import build_eb_spline


def _approx_eq(a, b, tol=1e-12):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


# ---- Construction ----

def test_exp_box_values_and_right_continuity():
    f = exp_box(0.5)
    assert f(0.0) == 1.0
    assert _approx_eq(f(0.5), math.exp(0.25))
    # evaluation at a breakpoint uses the right-hand segment
    assert f(1.0) == 0.0
    assert f(-1e-9) == 0.0


def test_exp_box_rejects_non_finite_rate():
    with pytest.raises(WindowError):
        exp_box(float("inf"))


def test_term_requires_nonzero_leading_coefficient():
    with pytest.raises(ValueError):
        ExpPolyTerm(rate=1.0, coeffs=(1.0, 0.0))


def test_integer_knots_stay_exact():
    w = build_eb_spline([0.0, 1.0, -1.0])
    assert w.shape.is_exact()
    assert w.shape.breakpoints == (Fraction(0), Fraction(1), Fraction(2), Fraction(3))
    d = w.shape.to_dict()
    assert d["support"] == ["0", "3"]
    assert len(d["segments"]) == 3


def test_from_segments_merges_equal_rates():
    f = from_segments([(0, 1, [(1.0, [1.0]), (1.0, [2.0])])])
    assert len(f.segments[0].terms) == 1
    assert _approx_eq(f(0.5), 3.0 * math.exp(0.5))


# ---- Convolution ----

def test_convolution_of_boxes_is_hat():
    hat = convolve_exp_box(exp_box(0.0), 0.0)
    xs = np.array([0.0, 0.5, 1.0, 1.5, 2.0])
    assert np.allclose(hat(xs), [0.0, 0.5, 1.0, 0.5, 0.0], atol=1e-15)


@pytest.mark.parametrize("rates", [(1.0, -1.0), (2.0, 2.0), (0.0, 1.5, -0.5), (-2.0, -1.0, 1.0, 2.0)])
def test_convolution_matches_quadrature(rates):
    f = exp_box(rates[0])
    for lam in rates[1:-1]:
        f = convolve_exp_box(f, lam)
    lam = rates[-1]
    h = convolve_exp_box(f, lam)
    lo, hi = (float(v) for v in f.support)
    for x in np.linspace(0.05, len(rates) - 0.05, 23):
        a, b = max(lo, x - 1.0), min(hi, x)
        ref, _ = quad(lambda t: f(t) * math.exp(lam * (x - t)), a, b, points=[p for p in range(len(rates)) if a < p < b] or None)
        assert abs(h(x) - ref) <= 1e-12, (x, h(x), ref)


@pytest.mark.parametrize("eps", [5.96e-8, 1e-10, 3e-6, 0.2])
def test_nearly_equal_rates_stay_continuous(eps):
    near = build_eb_spline([0.0, 1.0, eps])
    merged = build_eb_spline([0.0, 1.0, 0.0])
    xs = np.linspace(0.0, 3.0, 601)
    # B_Lambda depends smoothly on Lambda; the perturbation is O(eps)
    assert np.max(np.abs(near(xs) - merged(xs))) <= 2.5 * eps + 1e-13
    for seg in near.shape.segments:
        for term in seg.terms:
            assert max(abs(c) for c in term.coeffs) < 1e3


def test_nearly_equal_rates_keep_sign_changes():
    B = build_eb_spline([0.0, 1.0, 5.96e-8]).shape
    assert strong_sign_changes_fn(B, 0.0, 3.0, 2001) == 0
    f = combine([(1.0, B), (-1.0, shift(B, 1))])
    assert strong_sign_changes_fn(f, 0.0, 4.0, 2001) <= 1


@pytest.mark.parametrize(
    "f,lam",
    [
        (exp_box(0.5), -1.0),
        (shift(build_eb_spline([1.0, 2.0]).shape, 1), 0.0),
        (shift(build_eb_spline([0.0, -1.0, 3.0]).shape, Fraction(1, 3)), 2.0),
    ],
)
def test_convolution_support_adds_unit_interval(f, lam):
    lo, hi = f.support
    assert convolve_exp_box(f, lam).support == (lo, hi + 1)


def test_convolution_requires_support():
    with pytest.raises(WindowError):
        convolve_exp_box(PiecewiseExpPoly(()), 1.0)


# ---- Calculus ----

def test_integral_of_spline_is_product_of_box_integrals():
    rates = [1.0, -0.5, 2.0]
    w = build_eb_spline(rates)
    expected = np.prod([(math.exp(r) - 1.0) / r for r in rates])
    assert _approx_eq(integrate(w.shape), expected, 1e-12)


def test_integrate_between_is_oriented():
    f = build_eb_spline([0.0, 0.0]).shape
    assert _approx_eq(integrate_between(f, 0.0, 1.0), 0.5)
    assert _approx_eq(integrate_between(f, 1.0, 0.0), -0.5)
    assert integrate(PiecewiseExpPoly(())) == 0.0


def test_derivative_of_hat():
    d = differentiate(build_eb_spline([0.0, 0.0]).shape)
    assert _approx_eq(d(0.3), 1.0)
    assert _approx_eq(d(1.7), -1.0)


def test_derivative_matches_finite_difference():
    f = build_eb_spline([1.0, 2.0, -1.0]).shape
    d = differentiate(f)
    for x in (0.3, 1.4, 2.6):
        fd = (f(x + 1e-6) - f(x - 1e-6)) / 2e-6
        assert abs(d(x) - fd) <= 1e-6


# ---- Translates and combinations ----

def test_shift_and_combine():
    f = build_eb_spline([0.5, -0.5]).shape
    g = shift(f, 1)
    assert g.support == (Fraction(1), Fraction(3))
    h = combine([(2.0, f), (-1.0, g)])
    xs = np.linspace(-0.5, 3.5, 41)
    assert np.allclose(h(xs), 2.0 * f(xs) - f(xs - 1.0), atol=1e-13)


def test_combine_of_nothing_is_zero():
    assert combine([]).segments == ()
    assert combine([(0.0, exp_box(1.0))]).segments == ()


# ---- Sign changes ----

def test_strong_sign_changes_seq():
    assert strong_sign_changes_seq([1.0, 0.0, -1.0, 2.0]) == 2
    assert strong_sign_changes_seq([1.0, -1e-20, 1.0], tol=1e-15) == 0
    assert strong_sign_changes_seq([]) == 0


def test_strong_sign_changes_of_cosine():
    assert strong_sign_changes_fn(lambda x: np.cos(2.0 * np.pi * x), 0.0, 2.0, 101) == 4


def test_strong_sign_changes_fn_needs_two_points():
    with pytest.raises(ValueError):
        strong_sign_changes_fn(np.sin, 0.0, 1.0, 1)


_rates = st.lists(st.floats(-2.0, 2.0, allow_nan=False), min_size=2, max_size=4)
_coeffs = st.lists(st.floats(-1.0, 1.0, allow_nan=False).filter(lambda v: abs(v) > 1e-3), min_size=1, max_size=8)


@settings(max_examples=100, deadline=None)
@given(rates=_rates, coeffs=_coeffs)
@example(rates=[0.0, 1.0, 5.96e-8], coeffs=[1.0])
def test_variation_diminishing(rates, coeffs):
    B = build_eb_spline(rates).shape
    f = combine([(c, shift(B, k)) for k, c in enumerate(coeffs)])
    end = len(coeffs) + len(rates)
    assert strong_sign_changes_fn(f, 0.0, float(end), 2001) <= strong_sign_changes_seq(coeffs)
