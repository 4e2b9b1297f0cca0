"""
Gabor-EB Core Module

Exponential B-spline and totally positive Gabor windows, Zak transforms,
pre-Gramian dual windows and frame bounds.
"""

__version__ = "0.1.0"
