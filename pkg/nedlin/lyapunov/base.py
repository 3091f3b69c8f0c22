"""
Common interface of the Lyapunov evaluators.

An evaluator V(t, x) comes with the constants of its axioms:

    lower(t) ||x||^2 <= V(t, x) <= upper(t) ||x||^2              (V1)
    V(t, Phi(t,s) x) <= exp(-2 gamma (t - s)) V(s, x),  t >= s   (V3)
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, Field


class LyapunovSummary(BaseModel):
    """Constants of an evaluator, as written to JSON by the CLI."""
    kind: Literal["strict", "quadratic"]
    alpha_V: float = Field(..., description="Rate of the sup weight or the integral weight")
    gamma: float = Field(..., description="Decay rate checked by axiom V3")
    horizon: Optional[float] = Field(None, description="Truncation length T_h at the end of the working window")
    K: float = Field(..., description="Sandwich scale (strict) or K1 (quadratic)")
    upsilon: float = Field(..., description="Nonuniformity rate of the upper sandwich bound")
    C: Optional[float] = None
    eta: float = Field(1.0, description="Lower sandwich constant")
    tol: float


class LyapunovEvaluator(ABC):
    kind: str = "abstract"

    @property
    @abstractmethod
    def gamma(self) -> float:
        ...

    @abstractmethod
    def evaluate(self, t: float, x: np.ndarray) -> float:
        ...

    @abstractmethod
    def lower(self, t: float) -> float:
        ...

    @abstractmethod
    def upper(self, t: float) -> float:
        ...

    @abstractmethod
    def summary(self) -> LyapunovSummary:
        ...

    def __call__(self, t: float, x: np.ndarray) -> float:
        return self.evaluate(t, x)


def evaluate_V(V: LyapunovEvaluator, t: float, x: np.ndarray) -> float:
    """V(t, x) for t >= 0; zero at x = 0."""
    if t < 0.0:
        raise ValueError(f"Lyapunov functions are defined for t >= 0, got {t}")
    state = np.atleast_1d(np.asarray(x, dtype=float))
    if not state.any():
        return 0.0
    return V.evaluate(t, state)
