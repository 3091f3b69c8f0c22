"""
Quadratic Lyapunov forms V(t, x) = <S(t) x, x>.

The integral construction

    S(t) = int_t^{t + T_h} Phi(s, t)^T Phi(s, t) exp(2 alpha_V (s - t)) ds

satisfies S' + A^T S + S A = -I - 2 alpha_V S up to the truncated tail. It is
available in two equivalent forms: one backward sweep of that matrix ODE from
t_far = t_window + T_h with S(t_far) = 0, giving a dense S on the whole window,
and per-t adaptive quadrature (used beyond the window and as a cross-check).
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Literal, Optional

import numpy as np
from scipy.integrate import quad_vec

from nedlin.flow.integrator import EvolutionFamily, IntegrationError, IntegratorSettings, integrate
from nedlin.flow.systems import LinearSystem
from nedlin.lyapunov.base import LyapunovEvaluator, LyapunovSummary
from nedlin.lyapunov.cache import MatrixCache
from nedlin.lyapunov.strict import check_rate
from nedlin.primitives.models import ContractionCertificate

logger = logging.getLogger(__name__)

SWEEP_TOL = 1e-12


class QuadraticLyapunov(LyapunovEvaluator):
    """
    V(t, x) = <S(t) x, x> with eta ||x||^2 <= V <= C K1 e^{2 mu t} ||x||^2 on samples.

    Use ``build_quadratic`` for the integral construction and ``constant`` for
    a fixed matrix.
    """

    kind = "quadratic"

    def __init__(
        self,
        S_eval: Callable[[float], np.ndarray],
        dim: int,
        alpha_V: float,
        gamma: float,
        horizon: Optional[float],
        C: float,
        K1: float,
        mu: float,
        eta: float,
        tol: float,
        sys: Optional[LinearSystem] = None,
        cert: Optional[ContractionCertificate] = None,
        t_window: Optional[float] = None,
        recompute: Optional[Callable[[float], np.ndarray]] = None,
    ):
        self._S_eval = S_eval
        self._dim = dim
        self.alpha_V = alpha_V
        self._gamma = gamma
        self.horizon = horizon
        self.C = C
        self.K1 = K1
        self.mu = mu
        self.eta = eta
        self.tol = tol
        self.sys = sys
        self.cert = cert
        self.t_window = t_window
        self._recompute = recompute

    @classmethod
    def constant(cls, matrix, gamma: float) -> "QuadraticLyapunov":
        """Time-independent form <M x, x>; ``gamma`` is the decay rate to check."""
        M = np.atleast_2d(np.asarray(matrix, dtype=float))
        if M.shape[0] != M.shape[1] or not np.allclose(M, M.T):
            raise ValueError("Constant quadratic form needs a symmetric square matrix")
        eigs = np.linalg.eigvalsh(M)
        if eigs[0] <= 0.0:
            raise ValueError("Constant quadratic form must be positive definite")
        frozen = M.copy()
        frozen.setflags(write=False)
        return cls(lambda t: frozen, M.shape[0], gamma, gamma, None, float(eigs[-1]), 1.0, 0.0, float(eigs[0]), 0.0)

    @property
    def gamma(self) -> float:
        return self._gamma

    @property
    def dim(self) -> int:
        return self._dim

    def S(self, t: float) -> np.ndarray:
        return self._S_eval(t)

    def S_quadrature(self, t: float) -> np.ndarray:
        """Direct quadrature of the integral; only for the integral construction."""
        if self._recompute is None:
            raise ValueError("This quadratic form has no integral construction to recompute")
        return self._recompute(t)

    def evaluate(self, t: float, x: np.ndarray) -> float:
        if t < 0.0:
            raise ValueError(f"Lyapunov functions are defined for t >= 0, got {t}")
        state = np.atleast_1d(np.asarray(x, dtype=float))
        return float(state @ self.S(t) @ state)

    def lower(self, t: float) -> float:
        return self.eta

    def upper(self, t: float) -> float:
        return self.C * self.K1 * math.exp(2.0 * self.mu * t)

    def summary(self) -> LyapunovSummary:
        return LyapunovSummary(
            kind="quadratic", alpha_V=self.alpha_V, gamma=self.gamma, horizon=self.horizon,
            K=self.K1, upsilon=self.mu, C=self.C, eta=self.eta, tol=self.tol,
        )


def quadratic_horizon(cert: ContractionCertificate, alpha_V: float, t: float, tol: float) -> float:
    """Length T_h with int_{T_h}^inf K^2 e^{2 mu t} e^{-2 (alpha - alpha_V) s} ds = tol."""
    gap = 2.0 * (cert.alpha - alpha_V)
    return max(math.log(cert.K ** 2 * math.exp(2.0 * cert.mu * max(t, 0.0)) / (gap * tol)) / gap, 0.0)


def _quadrature(sys: LinearSystem, cert: ContractionCertificate, alpha_V: float, tol: float):
    def S_at(t: float) -> np.ndarray:
        length = quadratic_horizon(cert, alpha_V, t, tol)
        family = EvolutionFamily(sys, t, t + length)

        def integrand(sigma: float) -> np.ndarray:
            phi = family.at(sigma)
            return phi.T @ phi * math.exp(2.0 * alpha_V * (sigma - t))

        value, error = quad_vec(integrand, t, t + length, epsabs=tol * 1e-2, epsrel=1e-11)
        if not np.all(np.isfinite(value)):
            raise IntegrationError(f"Quadrature of S({t}) failed (error estimate {error:.2e})")
        return 0.5 * (value + value.T)

    return S_at


def _sweep(sys: LinearSystem, alpha_V: float, t_far: float):
    n = sys.dim
    eye = np.eye(n)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        S = y.reshape(n, n)
        B = sys.matrix(t) + alpha_V * eye
        return (-(B.T @ S) - S @ B - eye).ravel()

    sol = integrate(rhs, t_far, np.zeros(n * n), 0.0, IntegratorSettings(tol=SWEEP_TOL))
    return sol.sol


def build_quadratic(
    cert: ContractionCertificate,
    sys: LinearSystem,
    alpha_V: float,
    tol: float = 1e-10,
    t_window: Optional[float] = None,
    method: Literal["sweep", "quadrature"] = "sweep",
    n_fit: int = 41,
    cache: Optional[MatrixCache] = None,
) -> QuadraticLyapunov:
    """
    Integral quadratic form for ``sys`` with weight rate alpha_V.

    With ``method="sweep"`` S is dense on [0, t_window] and falls back to
    quadrature beyond it. (C, K1) are fitted so ||S(t)|| <= C K1 e^{2 mu t}
    on ``n_fit`` samples of the window, with K1 = K^2.

    Raises:
        ValueError: alpha_V outside (0, cert.alpha), or S not positive definite.
        IntegrationError: quadrature or sweep failure.
    """
    check_rate(cert, alpha_V)
    window = t_window if t_window is not None else (cert.grid.t_max if cert.grid else 20.0)
    memo = cache if cache is not None else MatrixCache()
    direct = _quadrature(sys, cert, alpha_V, tol)

    def by_quadrature(t: float) -> np.ndarray:
        return memo.get_or_compute(("quadrature", float(t)), lambda: direct(t))

    if method == "sweep":
        horizon = quadratic_horizon(cert, alpha_V, window, tol)
        dense = _sweep(sys, alpha_V, window + horizon)
        n = sys.dim

        def S_eval(t: float) -> np.ndarray:
            if t > window:
                return by_quadrature(t)
            value = dense(t).reshape(n, n)
            return 0.5 * (value + value.T)
    elif method == "quadrature":
        horizon = quadratic_horizon(cert, alpha_V, window, tol)
        S_eval = by_quadrature
    else:
        raise ValueError(f"Unknown quadratic construction '{method}'")

    samples = np.linspace(0.0, window, n_fit)
    mats = np.array([S_eval(float(t)) for t in samples])
    eig_min = np.linalg.eigvalsh(mats)[:, 0]
    if np.any(eig_min <= 0.0):
        bad = float(samples[int(np.argmin(eig_min))])
        raise ValueError(f"S({bad}) is not positive definite (smallest eigenvalue {eig_min.min():.3e})")
    K1 = cert.K ** 2
    norms = np.linalg.norm(mats, ord=2, axis=(1, 2))
    C = float(np.max(norms * np.exp(-2.0 * cert.mu * samples))) / K1
    V = QuadraticLyapunov(
        S_eval, sys.dim, alpha_V, alpha_V, horizon, C, K1, cert.mu, float(eig_min.min()), tol,
        sys=sys, cert=cert, t_window=window, recompute=direct,
    )
    logger.info(f"[Lyapunov] quadratic V ({method}) alpha_V={alpha_V} horizon={horizon:.4g} C={C:.4g} K1={K1:.4g}")
    return V
