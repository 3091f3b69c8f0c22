"""
Log-norm tables of the evolution operator on (t, s) sample grids.

Initial times s are uniform on [0, t_max); lags t - s are the union of a
geometric grid (resolving the transient) and a uniform grid (resolving
oscillating peaks). A table stores ln ||Phi(s + lag, s) P|| for every pair
with s + lag <= t_max, sorted by s, so that any exponential bound
ln K + c * lag + mu * s can be fitted with segment reductions.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from nedlin.flow.integrator import EvolutionFamily, TRANSITION_TOL
from nedlin.flow.systems import LinearSystem
from nedlin.primitives.models import GridInfo

logger = logging.getLogger(__name__)


def initial_times(t_max: float, n_samples: int) -> np.ndarray:
    return np.linspace(0.0, t_max, n_samples, endpoint=False)


def lag_grid(t_max: float, n_geometric: int = 60, n_uniform: int = 400) -> np.ndarray:
    geometric = np.geomspace(1e-3, t_max, n_geometric)
    uniform = np.linspace(0.0, t_max, n_uniform + 1)
    return np.unique(np.concatenate(([0.0], geometric, uniform)))


class NormTable:
    """
    ln ||Phi(t, s) P|| for t = s + lag >= s on a sample grid.

    Attributes:
        s: initial time of each pair.
        lag: t - s of each pair.
        log_norm: ln of the operator norm.
        starts: index of the first pair of each initial time (for np.maximum.reduceat).
    """

    def __init__(self, s: np.ndarray, lag: np.ndarray, log_norm: np.ndarray, t_max: float, n_samples: int):
        self.s = s
        self.lag = lag
        self.log_norm = log_norm
        self.t_max = t_max
        self.n_samples = n_samples
        self.starts = np.flatnonzero(np.r_[True, np.diff(s) != 0.0])
        self.s_unique = s[self.starts]

    @property
    def grid(self) -> GridInfo:
        return GridInfo(t_max=self.t_max, n=self.n_samples, n_lags=int(np.max(np.diff(np.r_[self.starts, self.s.size]))))

    def restrict(self, t_limit: float) -> "NormTable":
        """Sub-table of pairs with t <= t_limit."""
        keep = self.s + self.lag <= t_limit * (1.0 + 1e-12)
        return NormTable(self.s[keep], self.lag[keep], self.log_norm[keep], t_limit, self.n_samples)

    def shifted(self, rate: float) -> np.ndarray:
        """log-norms of the system with coefficient A + rate I."""
        return self.log_norm + rate * self.lag

    def violation(self, log_K: float, alpha: float, mu: float, shift: float = 0.0) -> tuple[float, int]:
        """Worst ln||.|| - (ln K - alpha lag + mu s) and its pair index."""
        gap = self.shifted(shift) - (log_K - alpha * self.lag + mu * self.s)
        k = int(np.argmax(gap))
        return float(gap[k]), k


def build_tables(
    sys: LinearSystem,
    t_max: float,
    n_samples: int,
    column_sets: Sequence[Optional[tuple[int, ...]]] = (None,),
    tol: float = TRANSITION_TOL,
    lags: np.ndarray | None = None,
) -> dict[Optional[tuple[int, ...]], NormTable]:
    """
    One NormTable per coordinate column set; each set is integrated as its own column block.

    Args:
        sys: Linear system (use ``sys.adjoint()`` for backward bounds).
        t_max: Window end.
        n_samples: Number of initial times.
        column_sets: Coordinate subsets P projects onto; None means P = I.
        tol: Integrator tolerance for the evolution families.
        lags: Optional lag grid (default: ``lag_grid(t_max)``).
    """
    lag_values = lag_grid(t_max) if lags is None else lags
    parts: dict[Optional[tuple[int, ...]], list[tuple[np.ndarray, np.ndarray, np.ndarray]]] = {c: [] for c in column_sets}
    for s in initial_times(t_max, n_samples):
        valid = lag_values[s + lag_values <= t_max]
        for columns in column_sets:
            values = EvolutionFamily(sys, s, t_max, tol, columns).log_norms(s + valid)
            parts[columns].append((np.full(valid.size, s), valid, values))
    tables = {}
    for columns, chunks in parts.items():
        s_all = np.concatenate([c[0] for c in chunks])
        lag_all = np.concatenate([c[1] for c in chunks])
        ln_all = np.concatenate([c[2] for c in chunks])
        if not np.all(np.isfinite(ln_all[lag_all > 0])):
            logger.warning(f"[Sampling] non-finite log-norms for columns {columns}; projected operator vanishes")
        tables[columns] = NormTable(s_all, lag_all, ln_all, t_max, n_samples)
    logger.info(f"[Sampling] built {len(tables)} table(s) with {s_all.size} pairs on [0, {t_max}]")
    return tables
