"""
nedlin Shared Data Models

Pydantic models exchanged between the numerical modules and written to disk
by the CLI: certificates for the growth and contraction bounds, dichotomy
verdicts and spectrum estimates, sampling specifications, base points for
the linearizing maps, and the generic verification report.

Every certificate is a statement about a finite window at grid resolution;
``FINITE_WINDOW_CAVEAT`` is attached to each of them.

References:
- docs/architecture.md
- memory-bank/systemPatterns.md
"""

from __future__ import annotations

import math
from typing import Any, ClassVar, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

FINITE_WINDOW_CAVEAT = "bound verified on [0, t_max] at grid resolution only"


class GridInfo(BaseModel):
    """Description of the (t, s) sample grid a certificate was fitted on."""
    t_max: float = Field(..., gt=0.0, description="Right end of the window")
    n: int = Field(..., ge=2, description="Number of initial-time samples")
    n_lags: int = Field(0, ge=0, description="Number of t - s lags per initial time")


class CoefficientBound(BaseModel):
    """Exponential envelope ||A(t)|| <= M exp(nu t)."""
    M: float = Field(..., ge=0.0, description="Scale")
    nu: float = Field(..., ge=0.0, description="Rate (1/time)")
    max_violation: float = Field(..., description="Worst log-violation after inflation (<= 0 when covered)")
    fit_residual: float = Field(0.0, ge=0.0, description="RMS residual of the envelope least-squares fit")


class GrowthCertificate(BaseModel):
    """Two-sided bound ||Phi(t,s)|| <= K0 exp(a|t-s| + eps_bar s)."""
    K0: float = Field(..., ge=1.0)
    a: float = Field(..., ge=0.0)
    eps_bar: float = Field(..., ge=0.0)
    residual: float = Field(..., description="Max log-violation on the grid")
    grid: GridInfo
    caveat: str = FINITE_WINDOW_CAVEAT


class ContractionCertificate(BaseModel):
    """Forward bound ||Phi(t,s)|| <= K exp(-alpha (t-s) + mu s) for t >= s >= 0."""
    model_config = ConfigDict(frozen=True)

    K: float = Field(..., ge=1.0, description="Transient scale")
    alpha: float = Field(..., gt=0.0, description="Decay rate (1/time)")
    mu: float = Field(..., ge=0.0, description="Nonuniformity rate (1/time)")
    residual: float = Field(0.0, description="Max log-violation on the grid")
    grid: Optional[GridInfo] = None
    caveat: str = FINITE_WINDOW_CAVEAT

    def bound(self, t: float, s: float) -> float:
        return self.K * math.exp(-self.alpha * (t - s) + self.mu * s)


Verdict = Literal["stable", "unstable", "split", "none"]


class DichotomyVerdict(BaseModel):
    """Outcome of the dichotomy test for A - lam I."""
    lam: float
    verdict: Verdict
    stable_coordinates: list[int] = Field(default_factory=list, description="Range of the projector P")
    stable: Optional[ContractionCertificate] = None
    unstable: Optional[ContractionCertificate] = None


class SpectrumInterval(BaseModel):
    lower: float
    upper: float
    uncertainty: float = Field(..., gt=0.0, description="Half-resolution of each end (one grid step)")

    def touches_zero(self) -> bool:
        return self.lower - self.uncertainty <= 0.0 <= self.upper + self.uncertainty


class SpectrumEstimate(BaseModel):
    lambda_grid: list[float]
    verdicts: list[DichotomyVerdict]
    intervals: list[SpectrumInterval]
    flags: list[str] = Field(default_factory=list)
    caveat: str = FINITE_WINDOW_CAVEAT


class SampleSpec(BaseModel):
    """Random sample generation for verification suites."""
    n_pairs: int = Field(50, ge=1, description="Number of (t, s) pairs")
    n_states: int = Field(4, ge=1, description="States drawn per pair")
    t_max: float = Field(10.0, gt=0.0)
    x_scale: float = Field(1.0, gt=0.0, description="Spread of sampled states")
    seed: int = 0


class ParamPoint(BaseModel):
    """Base point kappa = (tau, xi) of the linearizing maps."""
    model_config = ConfigDict(frozen=True)

    tau: float = Field(..., ge=0.0, description="Base time")
    xi: tuple[float, ...] = Field(..., min_length=1, description="State at the base time")

    @field_validator("xi", mode="before")
    @classmethod
    def _as_tuple(cls, value: Any) -> Any:
        if hasattr(value, "tolist"):
            value = value.tolist()
        if isinstance(value, (int, float)):
            return (float(value),)
        return tuple(float(v) for v in value)


class CheckResult(BaseModel):
    """One checked property: worst margin over samples (>= -tol means pass)."""
    model_config = ConfigDict(populate_by_name=True)

    axiom: str = Field(..., description="Checked property, e.g. V1, V3, decay, inverse_GH")
    worst_margin: float
    location: dict[str, Any] = Field(default_factory=dict, description="Sample realizing the worst margin")
    passed: bool = Field(..., alias="pass")


class Report(BaseModel):
    """Verification report. Violations are reported, never raised."""
    model_config = ConfigDict(populate_by_name=True)

    kind: ClassVar[str] = "report"
    subject: str
    status: Literal["pass", "fail"] = "pass"
    checks: list[CheckResult] = Field(default_factory=list)
    notes: list[str] = Field(default_factory=list)
    tables: dict[str, list[dict[str, Any]]] = Field(default_factory=dict)

    def add(self, axiom: str, worst_margin: float, location: dict[str, Any], passed: bool) -> CheckResult:
        check = CheckResult(axiom=axiom, worst_margin=float(worst_margin), location=location, passed=passed)
        self.checks.append(check)
        if not passed:
            self.status = "fail"
        return check

    def check(self, axiom: str) -> CheckResult:
        for item in self.checks:
            if item.axiom == axiom:
                return item
        raise KeyError(f"No check named '{axiom}' in report '{self.subject}'")

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True, indent=2)
