"""Piecewise exponential polynomials and window families."""
