"""
Core Data Models for Gabor-EB

Pydantic models for lattices, window specifications, frame-bound reports and the
resolved CLI run configuration, with validation.
"""

from __future__ import annotations
import math
from fractions import Fraction
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from core.errors import LatticeError, WindowError

RATIONAL_TOL = 1e-12
CRITICAL_TOL = 1e-12

Rational = Union[Fraction, int, str]


class LatticeParams(BaseModel):
    """
    Lattice alpha Z x beta Z

    rational_form (p, q), when present, is the reduced fraction alpha*beta = p/q.
    """
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(..., gt=0.0)
    beta: float = Field(..., gt=0.0)
    rational_form: Optional[Tuple[int, int]] = None

    @field_validator("alpha", "beta")
    @classmethod
    def finite(cls, v):
        if not math.isfinite(v):
            raise ValueError("lattice parameters must be finite")
        return v

    @field_validator("rational_form")
    @classmethod
    def reduced(cls, v):
        if v is None:
            return v
        p, q = v
        if p <= 0 or q <= 0:
            raise ValueError("rational_form must be positive integers")
        if math.gcd(p, q) != 1:
            raise ValueError(f"rational_form {p}/{q} is not reduced")
        return v

    @model_validator(mode="after")
    def check_density(self):
        ab = self.alpha * self.beta
        if ab > 1.0 + CRITICAL_TOL:
            raise ValueError(f"alpha*beta = {ab} > 1 never gives a frame")
        if self.rational_form is not None:
            p, q = self.rational_form
            if abs(ab - p / q) > RATIONAL_TOL:
                raise ValueError(f"alpha*beta = {ab} does not match rational_form {p}/{q}")
        return self

    @classmethod
    def create(
        cls,
        alpha: float,
        beta: float,
        rational_form: Optional[Tuple[int, int]] = None,
    ) -> "LatticeParams":
        """Constructor that reports validation failures as LatticeError."""
        try:
            return cls(alpha=alpha, beta=beta, rational_form=rational_form)
        except ValidationError as e:
            msg = "; ".join(err["msg"] for err in e.errors())
            raise LatticeError(msg, alpha=alpha, beta=beta) from e

    @classmethod
    def from_fraction(cls, alpha: Rational, beta: Rational) -> "LatticeParams":
        """Exact lattice from rationals, e.g. from_fraction(1, "31/61")."""
        try:
            a, b = Fraction(alpha), Fraction(beta)
        except (ValueError, ZeroDivisionError) as e:
            raise LatticeError(f"not a rational: {alpha!r}, {beta!r}") from e
        ab = a * b
        return cls.create(float(a), float(b), (ab.numerator, ab.denominator))

    def with_inferred_rational(self, max_denominator: int = 10_000) -> "LatticeParams":
        """Attach rational_form when alpha*beta is within 1e-12 of a fraction with small denominator."""
        if self.rational_form is not None:
            return self
        frac = Fraction(self.alpha * self.beta).limit_denominator(max_denominator)
        if abs(self.alpha * self.beta - float(frac)) > RATIONAL_TOL:
            return self
        return LatticeParams.create(self.alpha, self.beta, (frac.numerator, frac.denominator))

    @property
    def density(self) -> float:
        return self.alpha * self.beta

    @property
    def is_critical(self) -> bool:
        return abs(self.density - 1.0) <= CRITICAL_TOL

    def require_subcritical(self) -> "LatticeParams":
        if self.density >= 1.0 - CRITICAL_TOL:
            raise LatticeError(
                "frame constructions need alpha*beta < 1", alpha=self.alpha, beta=self.beta
            )
        return self


BoundMethod = Literal[
    "closed_form_case1",
    "closed_form_thm_bound",
    "closed_form_tp",
    "optimal_rational",
    "optimal_highredundancy",
    "zak_subsampled",
    "transferred_tp",
    "schur_upper",
]


class FrameBoundReport(BaseModel):
    lattice: LatticeParams
    method: BoundMethod
    lower: float = Field(..., ge=0.0)
    upper: Optional[float] = Field(None, gt=0.0)
    grid: Tuple[int, int] = (0, 0)
    max_residual: float = 0.0
    minimizer: Optional[float] = None

    @model_validator(mode="after")
    def ordered(self):
        if self.upper is not None and self.lower > self.upper * (1.0 + 1e-12):
            raise ValueError(f"lower bound {self.lower} exceeds upper bound {self.upper}")
        return self


class WindowSpec(BaseModel):
    """eb: EB-spline with rates; tp: TP function of finite type with poles and normalization C."""
    family: Literal["eb", "tp"]
    rates: Optional[List[float]] = None
    poles: Optional[List[float]] = None
    C: float = Field(1.0, gt=0.0)

    @model_validator(mode="after")
    def parameters_present(self):
        if self.family == "eb":
            if not self.rates:
                raise ValueError("eb window needs at least one rate")
            if not all(math.isfinite(r) for r in self.rates):
                raise ValueError("rates must be finite")
        else:
            if not self.poles:
                raise ValueError("tp window needs at least one pole")
            if any(a == 0.0 or not math.isfinite(a) for a in self.poles):
                raise ValueError("poles must be finite and nonzero")
        return self

    @classmethod
    def create(cls, **kwargs: Any) -> "WindowSpec":
        try:
            return cls(**kwargs)
        except ValidationError as e:
            msg = "; ".join(err["msg"] for err in e.errors())
            raise WindowError(msg, rates=kwargs.get("rates") or kwargs.get("poles")) from e

    def build(self, merge_tol: Optional[float] = None) -> Any:
        from core.spline.exppoly import RATE_MERGE_TOL
        from core.spline.windows import build_eb_spline, build_tp_window

        tol = RATE_MERGE_TOL if merge_tol is None else merge_tol
        if self.family == "eb":
            return build_eb_spline(self.rates, merge_tol=tol)
        return build_tp_window(self.poles, self.C, merge_tol=tol)


class RunConfig(BaseModel):
    """Fully resolved configuration of one CLI invocation; embedded in every JSON report."""
    command: str
    window: Optional[WindowSpec] = None
    lattice: Optional[LatticeParams] = None
    grids: Dict[str, int] = Field(default_factory=dict)
    extra_cols: int = Field(0, ge=0)
    out: Optional[str] = None
    format: Literal["csv", "json"] = "csv"
    options: Dict[str, Any] = Field(default_factory=dict)
    defaults_source: Optional[str] = None

    @field_validator("grids")
    @classmethod
    def positive_grids(cls, v):
        bad = [k for k, n in v.items() if n <= 0]
        if bad:
            raise ValueError(f"grid sizes must be positive: {', '.join(sorted(bad))}")
        return v

    def audit(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")
