"""
Homeomorphism pair from the bounded solution of a fixed-point problem.

For a base point kappa = (tau, xi) let X(t) be the orbit through (tau, xi) of
x' = A x + f0(t, x), with f0(t, x) = f(t, x) - f(t, 0). The correction Z is the
unique bounded solution of

    Z(t) = int_0^t Phi(t, s) F(s, Z(s)) ds,   F(t, y) = f(t, y + X(t)) - f0(t, X(t)),

found by Picard iteration in the weighted norm sup_t e^{-mu t} ||U(t)||, where
the iteration is a contraction with ratio K L_f / alpha. Then

    H(tau, xi) = xi + Z(tau)

and G mirrors the construction along the perturbed orbit with
F~(t, y) = f0(t, y + Y(t)) - f(t, Y(t)). Every integral is computed by
solving z' = A z + F(t, Z_prev(t)), z(0) = 0.
"""

from __future__ import annotations

import logging
import math
from typing import Any, Callable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from nedlin.flow.integrator import Trajectory, solve_forced, solve_perturbed
from nedlin.flow.systems import LinearSystem, NonlinearPerturbation
from nedlin.linearization.base import Direction, Homeomorphism, as_state
from nedlin.lyapunov.cache import MatrixCache
from nedlin.primitives.models import ContractionCertificate, ParamPoint, Report

logger = logging.getLogger(__name__)


class ContractionRatioError(ValueError):
    """K L_f / alpha >= 1: the fixed-point map is not a contraction."""


class PicardDivergenceError(RuntimeError):
    """The iteration did not reach the requested defect within max_iter."""


class PicardSettings(BaseModel):
    tol: float = Field(1e-8, gt=0.0, description="Target fixed-point defect in the weighted norm")
    max_iter: int = Field(60, ge=1)
    margin: float = Field(0.15, ge=0.0, description="Slack on K L_f / alpha for the observed ratios")
    grid: int = Field(200, ge=10, description="Initial number of norm samples")
    ode_tol_factor: float = Field(1e-3, gt=0.0, description="ODE tolerance relative to tol")
    ode_tol_floor: float = Field(1e-13, gt=0.0)
    horizon: Optional[float] = Field(None, gt=0.0, description="Window end; tau + 10/alpha when None")

    @property
    def ode_tol(self) -> float:
        return max(self.tol * self.ode_tol_factor, self.ode_tol_floor)


class WeightedNorm:
    """||U||_A = sup_{0 <= t <= t_max} e^{-mu t} ||U(t)||, sampled on a grid refined until stable."""

    def __init__(self, mu: float, t_max: float, n_grid: int = 200, rel_change: float = 1e-3, max_doublings: int = 6):
        if mu < 0.0 or t_max <= 0.0:
            raise ValueError("WeightedNorm needs mu >= 0 and t_max > 0")
        self.mu = mu
        self.t_max = t_max
        self.n_grid = n_grid
        self.rel_change = rel_change
        self.max_doublings = max_doublings

    def _sampled(self, fn: Callable[[np.ndarray], np.ndarray], n: int) -> float:
        ts = np.linspace(0.0, self.t_max, n)
        values = np.atleast_2d(fn(ts))
        if values.shape[-1] != ts.size:
            values = values.T
        return float(np.max(np.exp(-self.mu * ts) * np.linalg.norm(values, axis=0)))

    def __call__(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        """``fn`` maps an array of times to states of shape (n, len(times))."""
        n = self.n_grid
        value = self._sampled(fn, n)
        for _ in range(self.max_doublings):
            n = 2 * n - 1
            refined = self._sampled(fn, n)
            if abs(refined - value) <= self.rel_change * max(abs(refined), 1e-300):
                return refined
            value = refined
        return value


class PicardSolution(BaseModel):
    """Bounded correction Z on [0, t_max] with its convergence record."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    point: ParamPoint
    grid: np.ndarray
    Z_values: np.ndarray = Field(..., description="Z at the grid times, shape (len(grid), n)")
    residual: float = Field(..., description="Fixed-point defect in the weighted norm")
    iterations: int
    ratio_history: list[float] = Field(default_factory=list)
    norm: float = Field(..., description="||Z||_A")
    a_priori_bound: float
    trajectory: Any = Field(None, exclude=True, description="Dense output of the last iterate")

    def __call__(self, t: float | np.ndarray) -> np.ndarray:
        if self.trajectory is None:
            ts = np.asarray(t, dtype=float)
            zero = np.zeros(self.Z_values.shape[1])
            return zero if ts.ndim == 0 else np.zeros((zero.size, ts.size))
        return self.trajectory(t)

    def within_a_priori_bound(self, slack: float = 1e-9) -> bool:
        return self.norm <= self.a_priori_bound * (1.0 + slack) + slack


def reduce_f0(f: NonlinearPerturbation) -> NonlinearPerturbation:
    """f0(t, x) = f(t, x) - f(t, 0): class A2 with the Lipschitz data of f."""
    origin = f.at_origin()
    rows = [e - o for e, o in zip(f.f, origin.f)]
    return f.model_copy(update={"f": rows, "K0": 0.0, "class_tag": "A2"})


class _Orbit:
    """Two-sided orbit through (tau, xi) covering [0, t_max]."""

    def __init__(self, backward: Optional[Trajectory], forward: Optional[Trajectory], tau: float, xi: np.ndarray):
        self.backward = backward
        self.forward = forward
        self.tau = tau
        self.xi = xi

    def __call__(self, t: float) -> np.ndarray:
        if t < self.tau and self.backward is not None:
            return self.backward(t)
        if t > self.tau and self.forward is not None:
            return self.forward(t)
        return self.xi.copy()


def _orbit(lin: LinearSystem, f: NonlinearPerturbation, tau: float, xi: np.ndarray, t_max: float, tol: float) -> _Orbit:
    backward = solve_perturbed(lin, f, tau, xi, 0.0, tol=tol) if tau > 0.0 else None
    forward = solve_perturbed(lin, f, tau, xi, t_max, tol=tol) if t_max > tau else None
    return _Orbit(backward, forward, tau, xi)


class PLHomeomorphism(Homeomorphism):
    """
    Args:
        lin: Linear system with contraction certificate ``cert``.
        pert: Perturbation (class A1 or A2) with K L_f / alpha < 1.
        cert: Contraction certificate of ``lin``.
        settings: Iteration settings.
        cache: Shared per-point memo of solutions.

    Raises:
        ContractionRatioError: K L_f / alpha >= 1.
    """

    method = "picard"

    def __init__(
        self,
        lin: LinearSystem,
        pert: NonlinearPerturbation,
        cert: ContractionCertificate,
        settings: PicardSettings | None = None,
        cache: MatrixCache | None = None,
    ):
        if pert.dim != lin.dim:
            raise ValueError(f"Perturbation has dimension {pert.dim}, system has {lin.dim}")
        ratio = cert.K * pert.L_f / cert.alpha
        if ratio >= 1.0:
            raise ContractionRatioError(
                f"K*L_f/alpha = {cert.K:.6g}*{pert.L_f:.6g}/{cert.alpha:.6g} = {ratio:.6g} must be below 1"
            )
        self.lin = lin
        self.pert = pert
        self.f0 = reduce_f0(pert)
        self.cert = cert
        self.ratio = ratio
        self.settings = settings or PicardSettings()
        self.notes: list[str] = []
        self._cache = cache if cache is not None else MatrixCache()
        if pert.beta < cert.mu:
            self.notes.append(f"beta = {pert.beta} is below the nonuniformity rate mu = {cert.mu}")
            logger.warning(f"[Picard] {self.notes[-1]}")
        self.K0 = self._checked_K0()

    @property
    def dim(self) -> int:
        return self.lin.dim

    def _checked_K0(self, t_max: float = 20.0, n_samples: int = 201) -> float:
        origin = np.zeros(self.dim)
        sampled = max(float(np.linalg.norm(self.pert.evaluate(t, origin))) for t in np.linspace(0.0, t_max, n_samples))
        if sampled > self.pert.K0 * (1.0 + 1e-9) + 1e-12:
            self.notes.append(f"sampled sup ||f(t, 0)|| = {sampled:.6g} exceeds K0 = {self.pert.K0}; using the sample")
            logger.warning(f"[Picard] {self.notes[-1]}")
            return sampled
        return self.pert.K0

    def window(self, tau: float) -> float:
        if self.settings.horizon is not None:
            return max(self.settings.horizon, tau)
        return tau + 10.0 / self.cert.alpha

    def a_priori_bound(self) -> float:
        return self.cert.K * self.K0 / self.cert.alpha / (1.0 - self.ratio)

    def _forcing(self, which: Direction, base: _Orbit) -> Callable[[float, np.ndarray], np.ndarray]:
        # H: F(t, y) = f(t, y + X) - f0(t, X) along the f0-orbit X
        # G: F(t, y) = f0(t, y + Y) - f(t, Y) along the perturbed orbit Y
        outer, inner = (self.pert, self.f0) if which == "H" else (self.f0, self.pert)

        def F(t: float, y: np.ndarray) -> np.ndarray:
            b = base(t)
            return outer.evaluate(t, y + b) - inner.evaluate(t, b)

        return F

    def solve(self, point: ParamPoint, which: Direction = "H") -> PicardSolution:
        """
        Raises:
            PicardDivergenceError: defect above tol after max_iter iterations.
        """
        key = (which, point.tau, point.xi)
        return self._cache.get_or_compute(key, lambda: self._iterate(point, which))

    def _iterate(self, point: ParamPoint, which: Direction) -> PicardSolution:
        cfg = self.settings
        tau, xi = point.tau, np.array(point.xi)
        t_max = self.window(tau)
        base_field = self.f0 if which == "H" else self.pert
        base = _orbit(self.lin, base_field, tau, xi, t_max, cfg.ode_tol)
        F = self._forcing(which, base)
        norm = WeightedNorm(self.cert.mu, t_max, cfg.grid)
        zero = np.zeros(self.dim)

        previous: Optional[Trajectory] = None
        defects: list[float] = []
        ratios: list[float] = []
        for iteration in range(1, cfg.max_iter + 1):
            prev = previous
            forcing = (lambda t, z: F(t, zero)) if prev is None else (lambda t, z, p=prev: F(t, p(t)))
            current = solve_forced(self.lin, forcing, 0.0, zero, t_max, tol=cfg.ode_tol)
            if prev is None:
                defect = norm(lambda ts, c=current: c(ts))
            else:
                defect = norm(lambda ts, c=current, p=prev: c(ts) - p(ts))
            if defects and defects[-1] > 0.0:
                ratios.append(defect / defects[-1])
                logger.debug(f"[Picard] iteration {iteration} ratio={ratios[-1]:.3g}")
            defects.append(defect)
            previous = current
            if defect <= cfg.tol:
                break
        else:
            raise PicardDivergenceError(
                f"Picard iteration at ({tau}, {list(point.xi)}) stopped at defect {defects[-1]:.3e} "
                f"after {cfg.max_iter} iterations (tol {cfg.tol:.1e})"
            )
        if ratios and ratios[-1] > self.ratio + cfg.margin:
            logger.warning(f"[Picard] last ratio {ratios[-1]:.3g} above K*L_f/alpha + margin = {self.ratio + cfg.margin:.3g}")
        grid = np.linspace(0.0, t_max, cfg.grid)
        values = previous(grid).T
        solution = PicardSolution(
            point=point,
            grid=grid,
            Z_values=values,
            residual=defects[-1],
            iterations=len(defects),
            ratio_history=ratios,
            norm=norm(lambda ts: previous(ts)),
            a_priori_bound=self.a_priori_bound(),
            trajectory=previous,
        )
        if not solution.within_a_priori_bound():
            logger.warning(f"[Picard] ||Z||_A = {solution.norm:.6g} exceeds the a-priori bound {solution.a_priori_bound:.6g}")
        return solution

    def base_orbit(self, point: ParamPoint, which: Direction = "H", t_end: Optional[float] = None) -> _Orbit:
        t_max = self.window(point.tau) if t_end is None else t_end
        field = self.f0 if which == "H" else self.pert
        return _orbit(self.lin, field, point.tau, np.array(point.xi), t_max, self.settings.ode_tol)

    def map_with_diagnostics(self, tau: float, xi: np.ndarray, which: Direction = "H") -> tuple[np.ndarray, dict]:
        state = as_state(xi, self.dim)
        solution = self.solve(ParamPoint(tau=tau, xi=state), which)
        value = state + solution(tau)
        return value, {"iterations": solution.iterations, "residual": solution.residual}


def picard_Z(
    hom: PLHomeomorphism,
    kappa: ParamPoint,
    t_max: Optional[float] = None,
    tol: Optional[float] = None,
    max_iter: Optional[int] = None,
) -> PicardSolution:
    """Bounded solution Z(., kappa); overrides of the window or tolerances bypass the shared cache."""
    if t_max is None and tol is None and max_iter is None:
        return hom.solve(kappa, "H")
    update: dict[str, Any] = {}
    if t_max is not None:
        if t_max <= 0.0:
            raise ValueError("t_max must be positive")
        update["horizon"] = t_max
    if tol is not None:
        update["tol"] = tol
    if max_iter is not None:
        update["max_iter"] = max_iter
    tuned = PLHomeomorphism(hom.lin, hom.pert, hom.cert, hom.settings.model_copy(update=update))
    return tuned.solve(kappa, "H")


def map_H_pl(hom: PLHomeomorphism, tau: float, xi: np.ndarray) -> np.ndarray:
    return hom.map_H(tau, xi)


def map_G_pl(hom: PLHomeomorphism, tau: float, xi: np.ndarray) -> np.ndarray:
    return hom.map_G(tau, xi)


def continuity_table(
    hom: PLHomeomorphism,
    point: ParamPoint,
    deltas: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4),
    seed: int = 0,
) -> list[dict[str, float]]:
    """Empirical modulus of continuity of xi -> H(tau, xi) along a random unit direction."""
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=hom.dim)
    direction /= np.linalg.norm(direction)
    xi = np.array(point.xi)
    base = hom.map_H(point.tau, xi)
    return [
        {"delta": float(d), "change": float(np.linalg.norm(hom.map_H(point.tau, xi + d * direction) - base))}
        for d in deltas
    ]


def bounded_offset(hom: PLHomeomorphism, samples: Sequence[ParamPoint]) -> float:
    """sup over samples of ||H(tau, xi) - xi||."""
    return max((float(np.linalg.norm(hom.map_H(p.tau, np.array(p.xi)) - np.array(p.xi))) for p in samples), default=0.0)


def verify_pl_equivalence(
    hom: PLHomeomorphism,
    samples: Sequence[ParamPoint],
    shifts: Sequence[float] = (0.5, 1.0),
    tol: float = 1e-5,
    invariance_tol: float = 1e-6,
) -> Report:
    """
    Residual suite of the Picard homeomorphism:

    * base_point_invariance: sup_r |Z(r, (t, X(t))) - Z(r, (tau, xi))| at t = tau + shift;
    * solution_mapping: t -> H(t, X(t)) solves y' = A y + f(t, y) (finite differences);
    * inverse_GH, inverse_HG;
    * a_priori_bound: ||Z||_A against (K K0 / alpha) / (1 - K L_f / alpha);
    * continuity: modulus table of xi -> H(tau, xi) (table only).
    """
    report = Report(subject="Picard homeomorphism")
    worst = {name: (0.0, {}) for name in ("base_point_invariance", "solution_mapping", "inverse_GH", "inverse_HG")}
    bound_gap, bound_at = math.inf, {}

    def record(name: str, value: float, **where) -> None:
        if value >= worst[name][0]:
            worst[name] = (value, where)

    continuity_rows = []
    for point in samples:
        tau, xi = point.tau, np.array(point.xi)
        scale = 1.0 + float(np.linalg.norm(xi))
        where = {"tau": tau, "xi": list(point.xi)}
        solution = hom.solve(point, "H")
        gap = solution.a_priori_bound * (1.0 + 1e-9) + 1e-9 - solution.norm
        if gap < bound_gap:
            bound_gap, bound_at = gap, where
        orbit = hom.base_orbit(point, "H")
        rs = np.linspace(0.0, hom.window(tau), 41)
        for shift in shifts:
            t = tau + shift
            moved = ParamPoint(tau=t, xi=orbit(t))
            other = hom.solve(moved, "H")
            diff = float(np.max(np.linalg.norm(other(rs) - solution(rs), axis=0)))
            record("base_point_invariance", diff / scale, t=t, **where)
        record("solution_mapping", _mapping_residual(hom, orbit, solution, tau + min(shifts), hom.window(tau)), **where)
        r_gh, r_hg = hom.inverse_residuals(tau, xi)
        record("inverse_GH", r_gh / scale, **where)
        record("inverse_HG", r_hg / scale, **where)
        continuity_rows.extend({"tau": tau, **row} for row in continuity_table(hom, point))
    limits = {"base_point_invariance": invariance_tol}
    for name, (value, where) in worst.items():
        limit = limits.get(name, tol)
        report.add(name, limit - value, where, value <= limit)
    if math.isfinite(bound_gap):
        report.add("a_priori_bound", bound_gap, bound_at, bound_gap >= 0.0)
    report.tables["continuity"] = continuity_rows
    if samples:
        report.tables["offset"] = [{"sup_norm_H_minus_id": bounded_offset(hom, samples)}]
    report.notes.extend(hom.notes)
    return report


def _mapping_residual(hom: PLHomeomorphism, orbit: _Orbit, solution: PicardSolution, lo: float, hi: float) -> float:
    worst = 0.0
    for t in np.linspace(lo, hi, 22)[1:-1]:
        t = float(t)
        h = 1e-4 * (1.0 + abs(t))
        y = lambda s: orbit(s) + solution(s)  # noqa: E731
        slope = (y(t + h) - y(t - h)) / (2.0 * h)
        exact = hom.lin.matrix(t) @ y(t) + hom.pert.evaluate(t, y(t))
        worst = max(worst, float(np.linalg.norm(slope - exact) / (1.0 + np.linalg.norm(exact))))
    return worst


__all__ = [
    "ContractionRatioError",
    "PLHomeomorphism",
    "PicardDivergenceError",
    "PicardSettings",
    "PicardSolution",
    "WeightedNorm",
    "bounded_offset",
    "continuity_table",
    "map_G_pl",
    "map_H_pl",
    "picard_Z",
    "reduce_f0",
    "verify_pl_equivalence",
]
