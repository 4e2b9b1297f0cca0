"""
Gabor-EB Error Types

Typed exceptions for configuration, window construction, lattice admissibility,
argument domains, dense linear algebra and residual verification. Each carries
contextual fields (rates, lattice parameters, pivot index, residual, ...) so the
CLI can print a single actionable diagnostic.
"""

from __future__ import annotations
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple


class GaborEBError(Exception):
    """Base error for all gabor-eb failures."""


@dataclass
class ConfigError(GaborEBError):
    """Numeric defaults file or run configuration error."""
    message: str
    config_path: Optional[str] = None
    key: Optional[str] = None
    context: Optional[Dict[str, Any]] = None

    def __str__(self) -> str:
        loc = f" at {self.config_path}" if self.config_path else ""
        key = f" (key={self.key})" if self.key else ""
        return f"ConfigError{loc}{key}: {self.message}"


@dataclass
class WindowError(GaborEBError):
    """Invalid window parameters (rates, poles, support)."""
    message: str
    rates: Optional[Sequence[float]] = None
    context: Optional[Dict[str, Any]] = None

    def __str__(self) -> str:
        rates = f" rates={list(self.rates)}" if self.rates is not None else ""
        return f"WindowError: {self.message}{rates}"


@dataclass
class LatticeError(GaborEBError):
    """Lattice (alpha, beta) outside the regime an operation supports."""
    message: str
    alpha: Optional[float] = None
    beta: Optional[float] = None
    valid_cases: Optional[List[str]] = None

    def __str__(self) -> str:
        lat = ""
        if self.alpha is not None or self.beta is not None:
            lat = f" (alpha={self.alpha}, beta={self.beta})"
        cases = ""
        if self.valid_cases:
            cases = "; valid cases: " + "; ".join(self.valid_cases)
        return f"LatticeError{lat}: {self.message}{cases}"


@dataclass
class DomainError(GaborEBError):
    """Argument outside its documented interval."""
    message: str
    parameter: Optional[str] = None
    value: Optional[Any] = None
    interval: Optional[Tuple[float, float]] = None

    def __str__(self) -> str:
        par = f" {self.parameter}={self.value}" if self.parameter else ""
        iv = f" not in [{self.interval[0]}, {self.interval[1]}]" if self.interval else ""
        return f"DomainError:{par}{iv}: {self.message}"


@dataclass
class SingularMatrixError(GaborEBError):
    """Elimination hit a pivot below the singularity threshold."""
    message: str
    pivot: Optional[int] = None
    size: Optional[int] = None

    def __str__(self) -> str:
        piv = f" pivot={self.pivot}" if self.pivot is not None else ""
        size = f" size={self.size}" if self.size is not None else ""
        return f"SingularMatrixError{piv}{size}: {self.message}"


@dataclass
class ConvergenceError(GaborEBError):
    """Iterative routine failed (SVD, root bracketing)."""
    message: str
    routine: Optional[str] = None
    details: Optional[Dict[str, Any]] = None

    def __str__(self) -> str:
        routine = f"[{self.routine}] " if self.routine else ""
        return f"ConvergenceError {routine}{self.message}"


@dataclass
class ZeroNotFoundError(ConvergenceError):
    """No sign change of the real Zak sum was bracketed on the half line."""

    def __str__(self) -> str:
        return f"ZeroNotFoundError: {self.message}"


@dataclass
class ResidualError(GaborEBError):
    """An internal residual assertion exceeded its tolerance."""
    message: str
    check: Optional[str] = None
    residual: Optional[float] = None
    tolerance: Optional[float] = None

    def __str__(self) -> str:
        chk = f"[{self.check}] " if self.check else ""
        res = ""
        if self.residual is not None:
            res = f" residual={self.residual:.3e}"
            if self.tolerance is not None:
                res += f" > tol={self.tolerance:.1e}"
        return f"ResidualError {chk}{self.message}{res}"
