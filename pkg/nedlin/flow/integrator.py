"""
Adaptive integration of linear and perturbed systems.

All solves go through scipy's embedded Runge-Kutta pairs with dense output.
The evolution operator is integrated in normalized form Phi = exp(rho) W with
rho' = <W, A W> / <W, W>, so that operators spanning many orders of
magnitude keep their relative accuracy and log-norms never overflow.
"""

from __future__ import annotations

import logging
from typing import Any, Callable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.integrate import solve_ivp

from nedlin.flow.systems import LinearSystem, NonlinearPerturbation
from nedlin.primitives.models import Report

logger = logging.getLogger(__name__)

DEFAULT_TOL = 1e-9
TRANSITION_TOL = 1e-11
DEFAULT_CEILING = 1e12


class IntegrationError(RuntimeError):
    """Step-size underflow or a non-finite state."""


class BlowUpError(IntegrationError):
    def __init__(self, t: float, norm: float, ceiling: float):
        self.t = t
        self.norm = norm
        super().__init__(f"State norm {norm:.3e} reached the ceiling {ceiling:.1e} at t={t:.6g}")


class IntegratorSettings(BaseModel):
    tol: float = Field(DEFAULT_TOL, gt=0.0, description="Relative and absolute tolerance")
    method: str = Field("DOP853", description="solve_ivp embedded pair")
    ceiling: float = Field(DEFAULT_CEILING, gt=0.0, description="Blow-up threshold on the state norm")


class Trajectory(BaseModel):
    """
    Solution on [min(t0, t_end), max(t0, t_end)] with dense output.

    ``grid`` is increasing whatever the integration direction.
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    t0: float
    t_end: float
    grid: np.ndarray
    states: np.ndarray
    interpolant: Optional[Any] = None

    def __call__(self, t: float | np.ndarray) -> np.ndarray:
        lo, hi = self.span
        pad = 1e-9 * (1.0 + abs(hi))
        ts = np.asarray(t, dtype=float)
        if np.any(ts < lo - pad) or np.any(ts > hi + pad):
            raise ValueError(f"t={t} outside the trajectory span [{lo}, {hi}]")
        if self.interpolant is None:
            base = self.states[0]
            return base.copy() if ts.ndim == 0 else np.repeat(base[:, None], ts.size, axis=1)
        return self.interpolant(np.clip(ts, lo, hi))

    @property
    def span(self) -> tuple[float, float]:
        return (min(self.t0, self.t_end), max(self.t0, self.t_end))

    @property
    def final(self) -> np.ndarray:
        return self(self.t_end)

    def residual(self, rhs: Callable[[float, np.ndarray], np.ndarray], n_samples: int = 50) -> float:
        """Largest relative defect of the dense output against ``rhs`` (central differences)."""
        lo, hi = self.span
        if hi - lo <= 0.0:
            return 0.0
        worst = 0.0
        for t in np.linspace(lo, hi, n_samples + 2)[1:-1]:
            h = min(1e-4 * (1.0 + abs(t)), 0.5 * (t - lo), 0.5 * (hi - t))
            slope = (self(t + h) - self(t - h)) / (2.0 * h)
            exact = rhs(t, self(t))
            worst = max(worst, float(np.linalg.norm(slope - exact) / (1.0 + np.linalg.norm(exact))))
        return worst


class TransitionMatrix(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    t: float
    s: float
    value: np.ndarray


def _check_ceiling(t0: float, y0: np.ndarray, ceiling: float | None) -> None:
    # the terminal event only fires on a crossing, not on a start above the ceiling
    if ceiling is not None:
        norm = float(np.linalg.norm(y0))
        if not norm < ceiling:
            raise BlowUpError(t0, norm, ceiling)


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0: np.ndarray,
    t_end: float,
    settings: IntegratorSettings,
    ceiling: float | None = None,
):
    """solve_ivp with dense output and an optional terminal blow-up event; returns the scipy OdeResult."""
    _check_ceiling(t0, y0, ceiling)
    events = None
    if ceiling is not None:
        def blow_up(t: float, y: np.ndarray) -> float:
            return ceiling - float(np.linalg.norm(y))

        blow_up.terminal = True  # type: ignore[attr-defined]
        events = [blow_up]
    sol = solve_ivp(
        rhs,
        (t0, t_end),
        y0,
        method=settings.method,
        rtol=settings.tol,
        atol=settings.tol,
        dense_output=True,
        events=events,
    )
    if sol.status == -1:
        raise IntegrationError(f"Integration failed on [{t0}, {t_end}]: {sol.message}")
    if sol.status == 1:
        t_hit = float(sol.t_events[0][0])
        raise BlowUpError(t_hit, float(np.linalg.norm(sol.y_events[0][0])), ceiling or 0.0)
    if not np.all(np.isfinite(sol.y)):
        raise IntegrationError(f"Non-finite state while integrating on [{t0}, {t_end}]")
    return sol


def _trajectory(rhs, tau: float, xi: np.ndarray, t_end: float, settings: IntegratorSettings) -> Trajectory:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    _check_ceiling(tau, xi, settings.ceiling)
    if t_end == tau:
        return Trajectory(t0=tau, t_end=t_end, grid=np.array([tau]), states=xi[None, :].copy())
    sol = integrate(rhs, tau, xi, t_end, settings, ceiling=settings.ceiling)
    order = np.argsort(sol.t)
    return Trajectory(t0=tau, t_end=t_end, grid=sol.t[order], states=sol.y.T[order], interpolant=sol.sol)


def linear_rhs(sys: LinearSystem) -> Callable[[float, np.ndarray], np.ndarray]:
    return lambda t, x: sys.matrix(t) @ x


def perturbed_rhs(sys: LinearSystem, f: NonlinearPerturbation) -> Callable[[float, np.ndarray], np.ndarray]:
    if f.dim != sys.dim:
        raise ValueError(f"Perturbation has dimension {f.dim}, system has {sys.dim}")
    return lambda t, x: sys.matrix(t) @ x + f.evaluate(t, x)


def solve_linear(
    sys: LinearSystem,
    tau: float,
    xi: np.ndarray,
    t_end: float,
    tol: float = DEFAULT_TOL,
    settings: IntegratorSettings | None = None,
) -> Trajectory:
    """Solution X(t, tau, xi) of x' = A(t) x between tau and t_end (either direction)."""
    _check_times(tau, t_end)
    cfg = settings or IntegratorSettings(tol=tol)
    return _trajectory(linear_rhs(sys), tau, xi, t_end, cfg)


def solve_perturbed(
    sys: LinearSystem,
    f: NonlinearPerturbation,
    tau: float,
    xi: np.ndarray,
    t_end: float,
    tol: float = DEFAULT_TOL,
    settings: IntegratorSettings | None = None,
) -> Trajectory:
    """Solution Y(t, tau, xi) of y' = A(t) y + f(t, y); raises BlowUpError past the ceiling."""
    _check_times(tau, t_end)
    cfg = settings or IntegratorSettings(tol=tol)
    return _trajectory(perturbed_rhs(sys, f), tau, xi, t_end, cfg)


def solve_forced(
    sys: LinearSystem,
    forcing: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    z0: np.ndarray,
    t_end: float,
    tol: float = DEFAULT_TOL,
) -> Trajectory:
    """Solution of z' = A(t) z + forcing(t, z); used for variation-of-constants integrals."""
    return _trajectory(lambda t, z: sys.matrix(t) @ z + forcing(t, z), t0, z0, t_end, IntegratorSettings(tol=tol))


def _check_times(*times: float) -> None:
    for value in times:
        if value < 0.0:
            raise ValueError(f"Times must be >= 0, got {value}")


class EvolutionFamily:
    """
    Dense family t -> Phi(t, s) P for fixed initial time s.

    Args:
        sys: Linear system.
        s: Initial time.
        t_end: Far end of the family (may be below s for backward integration).
        tol: Integrator tolerance on the normalized state.
        columns: Coordinate columns kept by the projector P (all when None).
            Each column block is integrated on its own so its relative
            accuracy does not depend on the other modes.
    """

    def __init__(
        self,
        sys: LinearSystem,
        s: float,
        t_end: float,
        tol: float = TRANSITION_TOL,
        columns: Optional[Sequence[int]] = None,
    ):
        self.sys = sys
        self.s = float(s)
        self.t_end = float(t_end)
        n = sys.dim
        self.columns = list(range(n)) if columns is None else list(columns)
        if not self.columns:
            raise ValueError("EvolutionFamily needs at least one column")
        k = len(self.columns)
        self._shape = (n, k)
        self._w0 = np.eye(n)[:, self.columns] / np.sqrt(k)
        self._rho0 = 0.5 * np.log(k)
        if t_end == s:
            self._sol = None
            return

        def rhs(t: float, y: np.ndarray) -> np.ndarray:
            w = y[:-1].reshape(n, k)
            aw = sys.matrix(t) @ w
            rate = float(np.sum(w * aw) / np.sum(w * w))
            return np.concatenate(((aw - rate * w).ravel(), [rate]))

        y0 = np.concatenate((self._w0.ravel(), [self._rho0]))
        self._sol = integrate(rhs, self.s, y0, self.t_end, IntegratorSettings(tol=tol)).sol

    def _raw(self, t: float | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        n, k = self._shape
        if self._sol is None:
            return np.repeat(self._w0[None], ts.size, axis=0), np.full(ts.size, self._rho0)
        lo, hi = min(self.s, self.t_end), max(self.s, self.t_end)
        y = self._sol(np.clip(ts, lo, hi))
        return y[:-1].T.reshape(ts.size, n, k), y[-1]

    def at(self, t: float | np.ndarray) -> np.ndarray:
        """Phi(t, s) P; a stack of matrices when ``t`` is an array."""
        w, rho = self._raw(t)
        out = np.exp(rho)[:, None, None] * w
        return out[0] if np.ndim(t) == 0 else out

    def log_norms(self, t: np.ndarray) -> np.ndarray:
        """ln ||Phi(t, s) P|| (spectral norm)."""
        w, rho = self._raw(t)
        norms = np.linalg.norm(w, ord=2, axis=(1, 2))
        with np.errstate(divide="ignore"):
            return rho + np.log(norms)


def transition_matrix(sys: LinearSystem, t: float, s: float, tol: float = TRANSITION_TOL) -> TransitionMatrix:
    """Phi(t, s); t < s integrates backward."""
    _check_times(t, s)
    value = EvolutionFamily(sys, s, t, tol).at(t)
    if not np.all(np.isfinite(value)):
        raise IntegrationError(f"Non-finite entry in Phi({t}, {s})")
    if s == t:
        value = np.eye(sys.dim)
    return TransitionMatrix(t=t, s=s, value=value)


def gronwall_sandwich(
    sys: LinearSystem,
    f: NonlinearPerturbation,
    s: float,
    u: np.ndarray,
    v: np.ndarray,
    t_values: np.ndarray,
    L: float,
    tol: float = 1e-4,
) -> Report:
    """
    Check e^{-L|t-s|}||u-v|| <= ||Y(t,s,u) - Y(t,s,v)|| <= e^{L|t-s|}||u-v||.

    ``L`` is a global Lipschitz constant of the full right-hand side on the window.
    """
    report = Report(subject="local continuity sandwich")
    t_far_hi, t_far_lo = max(float(np.max(t_values)), s), min(float(np.min(t_values)), s)
    gap = float(np.linalg.norm(np.asarray(u) - np.asarray(v)))
    lower_worst, upper_worst = np.inf, np.inf
    lower_at, upper_at = {}, {}
    trajectories = []
    for x0 in (u, v):
        fwd = solve_perturbed(sys, f, s, x0, t_far_hi, tol=1e-11) if t_far_hi > s else None
        bwd = solve_perturbed(sys, f, s, x0, t_far_lo, tol=1e-11) if t_far_lo < s else None
        trajectories.append((fwd, bwd))
    for t in t_values:
        t = float(t)
        ys = []
        for fwd, bwd in trajectories:
            traj = fwd if t >= s else bwd
            ys.append(traj(t) if traj is not None else np.asarray(u if not ys else v, dtype=float))
        dist = float(np.linalg.norm(ys[0] - ys[1]))
        spread = np.exp(L * abs(t - s))
        lower = dist - gap / spread * (1.0 - tol)
        upper = gap * spread * (1.0 + tol) - dist
        if lower < lower_worst:
            lower_worst, lower_at = lower, {"t": t, "s": s}
        if upper < upper_worst:
            upper_worst, upper_at = upper, {"t": t, "s": s}
    report.add("sandwich_lower", lower_worst / max(gap, 1e-300), lower_at, lower_worst >= 0.0)
    report.add("sandwich_upper", upper_worst / max(gap, 1e-300), upper_at, upper_worst >= 0.0)
    return report
