"""
Common interface of the linearizing homeomorphism pairs (H, G).

H(t, .) carries solutions of the reference system onto solutions of the
perturbed system and G(t, .) is its inverse. Both fix the origin only when
the perturbation vanishes there.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import Any, Literal

import numpy as np

from nedlin.primitives.models import ParamPoint

Direction = Literal["H", "G"]


def as_state(xi: Any, dim: int) -> np.ndarray:
    state = np.atleast_1d(np.asarray(xi, dtype=float))
    if state.shape != (dim,):
        raise ValueError(f"State must have dimension {dim}, got shape {state.shape}")
    return state


class Homeomorphism(ABC):
    method: str = "abstract"

    @property
    @abstractmethod
    def dim(self) -> int:
        ...

    @abstractmethod
    def map_with_diagnostics(self, tau: float, xi: np.ndarray, which: Direction = "H") -> tuple[np.ndarray, dict]:
        """Value of H (or G) at (tau, xi) and per-point diagnostics for the output tables."""

    def map_H(self, tau: float, xi: np.ndarray) -> np.ndarray:
        return self.map_with_diagnostics(tau, xi, "H")[0]

    def map_G(self, tau: float, xi: np.ndarray) -> np.ndarray:
        return self.map_with_diagnostics(tau, xi, "G")[0]

    def evaluate(self, point: ParamPoint, which: Direction = "H") -> np.ndarray:
        return self.map_with_diagnostics(point.tau, np.array(point.xi), which)[0]

    def inverse_residuals(self, tau: float, xi: np.ndarray) -> tuple[float, float]:
        """||G(tau, H(tau, xi)) - xi|| and ||H(tau, G(tau, xi)) - xi||."""
        state = as_state(xi, self.dim)
        gh = self.map_G(tau, self.map_H(tau, state))
        hg = self.map_H(tau, self.map_G(tau, state))
        return float(np.linalg.norm(gh - state)), float(np.linalg.norm(hg - state))
