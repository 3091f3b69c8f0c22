"""
Strict Lyapunov function built from a contraction certificate.

    V(t, x) = sup_{t <= tau <= t + T_h} ||Phi(tau, t) x||^2 exp(2 alpha_V (tau - t))

with 0 < alpha_V < alpha. Past tau - t = T_h(t) the certificate bounds every
term by tol ||x||^2, and the tau = t term is ||x||^2, so the truncated sup is
the full sup whenever tol < 1.

The sup is taken on a tau grid of step ``tau_step`` anchored at t and then
refined with a bounded scalar search around the grid maxima.
"""

from __future__ import annotations

import logging
import math
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from nedlin.flow.integrator import EvolutionFamily, TRANSITION_TOL
from nedlin.flow.systems import LinearSystem
from nedlin.lyapunov.base import LyapunovEvaluator, LyapunovSummary
from nedlin.lyapunov.cache import MatrixCache
from nedlin.primitives.models import ContractionCertificate

logger = logging.getLogger(__name__)

REFINE_BAND = 1e-3
MAX_REFINED = 5


def check_rate(cert: ContractionCertificate, alpha_V: float) -> None:
    if not 0.0 < alpha_V < cert.alpha:
        raise ValueError(f"alpha_V must lie in (0, alpha) = (0, {cert.alpha}), got {alpha_V}")


class StrictLyapunov(LyapunovEvaluator):
    """
    Sup-formula Lyapunov function with sandwich ||x||^2 <= V <= K^2 e^{2 mu t} ||x||^2.

    Args:
        cert: Contraction certificate (K, alpha, mu) of ``sys``.
        sys: Linear system.
        alpha_V: Weight rate, strictly inside (0, cert.alpha).
        tol: Relative tail bound defining the horizon.
        tau_step: Spacing of the tau grid.
        t_window: End of the working window (defaults to the certificate window).
        cache: Shared memo of tau-grids of Phi(tau, t).
    """

    kind = "strict"

    def __init__(
        self,
        cert: ContractionCertificate,
        sys: LinearSystem,
        alpha_V: float,
        tol: float = 1e-6,
        tau_step: float = 0.01,
        t_window: Optional[float] = None,
        cache: Optional[MatrixCache] = None,
    ):
        check_rate(cert, alpha_V)
        if not 0.0 < tol < 1.0:
            raise ValueError("tol must lie in (0, 1)")
        self.cert = cert
        self.sys = sys
        self.alpha_V = alpha_V
        self.tol = tol
        self.tau_step = tau_step
        self.t_window = t_window if t_window is not None else (cert.grid.t_max if cert.grid else 20.0)
        self.K = cert.K
        self.upsilon = cert.mu
        self.horizon = self.horizon_at(self.t_window)
        self._cache = cache if cache is not None else MatrixCache()

    @property
    def gamma(self) -> float:
        return self.alpha_V

    @property
    def dim(self) -> int:
        return self.sys.dim

    def horizon_at(self, t: float) -> float:
        gap = 2.0 * (self.cert.alpha - self.alpha_V)
        length = (2.0 * math.log(self.K) + 2.0 * self.upsilon * max(t, 0.0) + math.log(1.0 / self.tol)) / gap
        return max(length, self.tau_step)

    def lower(self, t: float) -> float:
        return 1.0

    def upper(self, t: float) -> float:
        return self.K ** 2 * math.exp(2.0 * self.upsilon * t)

    def _profile(self, t: float):
        def compute():
            length = self.horizon_at(t)
            count = int(math.ceil(length / self.tau_step))
            taus = np.minimum(t + np.arange(count + 1) * self.tau_step, t + length)
            family = EvolutionFamily(self.sys, t, t + length, TRANSITION_TOL)
            return taus, family, family.at(taus), np.exp(2.0 * self.alpha_V * (taus - t))

        return self._cache.get_or_compute(("strict", float(t)), compute)

    def _sup(self, t: float, x: np.ndarray) -> float:
        taus, family, stack, weights = self._profile(t)
        values = np.sum((stack @ x) ** 2, axis=1) * weights
        best = float(np.max(values))
        peaks = np.flatnonzero(values >= best * (1.0 - REFINE_BAND))
        peaks = peaks[np.argsort(values[peaks])[::-1][:MAX_REFINED]]

        def negative_term(tau: float) -> float:
            return -float(np.sum((family.at(tau) @ x) ** 2)) * math.exp(2.0 * self.alpha_V * (tau - t))

        for k in peaks:
            lo, hi = taus[max(k - 1, 0)], taus[min(k + 1, taus.size - 1)]
            if hi <= lo:
                continue
            result = minimize_scalar(negative_term, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
            best = max(best, -float(result.fun))
        return best

    def evaluate(self, t: float, x: np.ndarray) -> float:
        if t < 0.0:
            raise ValueError(f"Lyapunov functions are defined for t >= 0, got {t}")
        state = np.atleast_1d(np.asarray(x, dtype=float))
        if not state.any():
            return 0.0
        if self.sys.dim == 1:
            # degree-2 homogeneity: V(t, x) = V(t, 1) x^2
            unit = self._cache.get_or_compute(("strict-unit", float(t)), lambda: self._sup(t, np.ones(1)))
            return unit * float(state[0]) ** 2
        return self._sup(t, state)

    def summary(self) -> LyapunovSummary:
        return LyapunovSummary(
            kind="strict", alpha_V=self.alpha_V, gamma=self.gamma, horizon=self.horizon,
            K=self.K, upsilon=self.upsilon, eta=1.0, tol=self.tol,
        )


def build_strict(
    cert: ContractionCertificate,
    sys: LinearSystem,
    alpha_V: float,
    tol: float = 1e-6,
    t_window: Optional[float] = None,
    cache: Optional[MatrixCache] = None,
) -> StrictLyapunov:
    """
    Raises:
        ValueError: alpha_V outside (0, cert.alpha).
    """
    V = StrictLyapunov(cert, sys, alpha_V, tol=tol, t_window=t_window, cache=cache)
    logger.info(f"[Lyapunov] strict V with alpha_V={alpha_V} horizon={V.horizon:.4g}")
    return V
