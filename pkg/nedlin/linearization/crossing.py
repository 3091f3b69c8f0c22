"""
Homeomorphism pair built from crossing times of a Lyapunov level set.

Along every nonzero solution of the linear system, t -> V(t, x(t)) decreases
strictly, so it meets the level l/2 at exactly one time T(tau, xi). The map

    H(tau, xi) = Y(tau, T, X(T, tau, xi))

follows the linear orbit to the level set and returns along the perturbed
flow; G does the same with the roles of the flows exchanged. Both send 0 to 0.
Crossings are looked for on t >= t_floor only.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from nedlin.flow.integrator import Trajectory, solve_linear, solve_perturbed
from nedlin.flow.systems import LinearSystem, NonlinearPerturbation
from nedlin.linearization.base import Direction, Homeomorphism, as_state
from nedlin.lyapunov.base import LyapunovEvaluator, evaluate_V
from nedlin.primitives.models import ParamPoint, Report

logger = logging.getLogger(__name__)


class OutOfDomainError(ValueError):
    """The level crossing lies before t_floor."""


class NonMonotoneError(RuntimeError):
    """V does not decrease along the orbit, so the crossing is not unique."""


class CrossingConfig(BaseModel):
    level: float = Field(1.0, gt=0.0, description="Level l; crossings are taken at V = l/2")
    root_tol: float = Field(1e-10, gt=0.0, description="Width of the final time bracket")
    bracket_growth: float = Field(2.0, gt=1.0, description="Expansion factor of the search bracket")
    initial_step: float = Field(1.0, gt=0.0, description="First bracket length")
    max_expansions: int = Field(60, ge=1)
    t_floor: float = Field(0.0, ge=0.0, description="Left end of the time domain")
    monotone_tol: float = Field(1e-9, ge=0.0, description="Relative slack of the monotonicity check")
    n_monotone: int = Field(17, ge=2, description="Samples of V between tau and T in the monotonicity check")
    tol: float = Field(1e-11, gt=0.0, description="Integrator tolerance of the orbit solves")


Solver = Callable[[float, np.ndarray, float], Trajectory]


class CrossingHomeomorphism(Homeomorphism):
    """
    Args:
        V: Lyapunov evaluator of ``lin`` (strictly decreasing along its orbits).
        lin: Linear system.
        pert: Perturbation of class A2.
        cfg: Level and root-finding settings.
    """

    method = "crossing"

    def __init__(
        self,
        V: LyapunovEvaluator,
        lin: LinearSystem,
        pert: NonlinearPerturbation,
        cfg: CrossingConfig | None = None,
    ):
        if pert.dim != lin.dim:
            raise ValueError(f"Perturbation has dimension {pert.dim}, system has {lin.dim}")
        self.V = V
        self.lin = lin
        self.pert = pert
        self.cfg = cfg or CrossingConfig()
        tol = self.cfg.tol
        self._linear: Solver = lambda tau, xi, t_end: solve_linear(lin, tau, xi, t_end, tol=tol)
        self._perturbed: Solver = lambda tau, xi, t_end: solve_perturbed(lin, pert, tau, xi, t_end, tol=tol)

    @property
    def dim(self) -> int:
        return self.lin.dim

    def _level_value(self, traj: Trajectory, t: float) -> float:
        return evaluate_V(self.V, t, traj(t)) - 0.5 * self.cfg.level

    def _crossing(self, solve: Solver, tau: float, xi: np.ndarray) -> tuple[float, Trajectory]:
        """Crossing time and an orbit covering [min(tau, T), max(tau, T)]."""
        cfg = self.cfg
        if tau < cfg.t_floor:
            raise OutOfDomainError(f"Base time {tau} lies before t_floor={cfg.t_floor}")
        state = as_state(xi, self.dim)
        if not state.any():
            raise ValueError("The crossing time is undefined at the origin")
        target = 0.5 * cfg.level
        start = evaluate_V(self.V, tau, state) - target
        if abs(start) <= cfg.root_tol * cfg.level:
            return tau, solve(tau, state, tau)
        forward = start > 0.0
        step, previous = cfg.initial_step, start
        for _ in range(cfg.max_expansions):
            end = tau + step if forward else max(tau - step, cfg.t_floor)
            traj = solve(tau, state, end)
            value = self._level_value(traj, end)
            scale = cfg.monotone_tol * (abs(previous) + target)
            if (forward and value > previous + scale) or (not forward and value < previous - scale):
                raise NonMonotoneError(f"V increases along the orbit through ({tau}, {state.tolist()}) near t={end:.6g}")
            if (value <= 0.0) == forward:
                break
            if not forward and end == cfg.t_floor:
                raise OutOfDomainError(
                    f"Level crossing of ({tau}, {state.tolist()}) lies before t={cfg.t_floor}: "
                    f"V stays below l/2 on [{cfg.t_floor}, {tau}]"
                )
            previous = value
            step *= cfg.bracket_growth
        else:
            raise NonMonotoneError(f"No level crossing within {step:.3g} time units of tau={tau}")
        lo, hi = (tau, end) if forward else (end, tau)
        if step > cfg.initial_step:
            logger.debug(f"[Crossing] bracket expanded to [{lo:.6g}, {hi:.6g}]")
        # V - l/2 is positive at lo and non-positive at hi
        while hi - lo > cfg.root_tol:
            mid = 0.5 * (lo + hi)
            if self._level_value(traj, mid) > 0.0:
                lo = mid
            else:
                hi = mid
        crossing = 0.5 * (lo + hi)
        self._check_monotone(traj, tau, crossing)
        return crossing, traj

    def _check_monotone(self, traj: Trajectory, tau: float, crossing: float) -> None:
        ts = np.linspace(min(tau, crossing), max(tau, crossing), self.cfg.n_monotone)
        values = np.array([evaluate_V(self.V, float(t), traj(float(t))) for t in ts])
        rises = np.diff(values) - self.cfg.monotone_tol * values[:-1]
        if np.any(rises > 0.0):
            k = int(np.argmax(rises))
            raise NonMonotoneError(f"V increases along the orbit between t={ts[k]:.6g} and t={ts[k + 1]:.6g}")

    def crossing_time_linear(self, tau: float, xi: np.ndarray) -> float:
        return self._crossing(self._linear, tau, xi)[0]

    def crossing_time_perturbed(self, tau: float, xi: np.ndarray) -> float:
        return self._crossing(self._perturbed, tau, xi)[0]

    def map_with_diagnostics(self, tau: float, xi: np.ndarray, which: Direction = "H") -> tuple[np.ndarray, dict]:
        if tau < 0.0:
            raise ValueError(f"Base time must be >= 0, got {tau}")
        state = as_state(xi, self.dim)
        if not state.any():
            return np.zeros(self.dim), {"T": tau}
        there, back = (self._linear, self._perturbed) if which == "H" else (self._perturbed, self._linear)
        crossing, traj = self._crossing(there, tau, state)
        on_level = traj(crossing)
        if crossing == tau:
            return on_level, {"T": crossing}
        return back(crossing, on_level, tau).final, {"T": crossing}


def crossing_time_linear(hom: CrossingHomeomorphism, tau: float, xi: np.ndarray) -> float:
    """
    Time T with V(T, X(T, tau, xi)) = l/2.

    Raises:
        OutOfDomainError: The crossing lies before t_floor.
        NonMonotoneError: V is not decreasing along the orbit.
    """
    return hom.crossing_time_linear(tau, xi)


def crossing_time_perturbed(hom: CrossingHomeomorphism, tau: float, xi: np.ndarray) -> float:
    """Crossing time along the perturbed orbit through (tau, xi)."""
    return hom.crossing_time_perturbed(tau, xi)


def map_H(hom: CrossingHomeomorphism, tau: float, xi: np.ndarray) -> np.ndarray:
    return hom.map_H(tau, xi)


def map_G(hom: CrossingHomeomorphism, tau: float, xi: np.ndarray) -> np.ndarray:
    return hom.map_G(tau, xi)


class _Worst:
    def __init__(self):
        self.value = 0.0
        self.location: dict = {}

    def update(self, value: float, **location) -> None:
        if value >= self.value:
            self.value = value
            self.location = location


def verify_crossing_equivalence(
    hom: CrossingHomeomorphism,
    samples: Sequence[ParamPoint],
    shifts: Sequence[float] = (0.25, 0.75),
    tol: float = 1e-5,
    scales: Sequence[float] = (1.0, 2.0, 4.0, 8.0),
    constants: Optional[BoundConstants] = None,
) -> Report:
    """
    Residual suite of the crossing homeomorphism on sample base points:

    * inverse_GH, inverse_HG: ||G(H(xi)) - xi|| and ||H(G(xi)) - xi||;
    * T_invariance: |T(t, X(t, tau, xi)) - T(tau, xi)| at t = tau + shift;
    * solution_mapping: H(t, X(t, tau, xi)) against Y(t, tau, H(tau, xi));
    * divergence: ||H(tau, c xi)|| increasing along growing c;
    * norm_bound_small: the small-state estimate of ||H||, see ``norm_bound_table``.

    Residuals are scaled by 1 + ||xi||.
    """
    report = Report(subject="crossing homeomorphism")
    gh, hg, inv_T, mapping = _Worst(), _Worst(), _Worst(), _Worst()
    growth_gap, growth_at = math.inf, {}
    skipped = 0
    for point in samples:
        tau, xi = point.tau, np.array(point.xi)
        scale = 1.0 + float(np.linalg.norm(xi))
        where = {"tau": tau, "xi": list(point.xi)}
        try:
            h = hom.map_H(tau, xi)
            r_gh, r_hg = hom.inverse_residuals(tau, xi)
            crossing = hom.crossing_time_linear(tau, xi)
        except OutOfDomainError:
            skipped += 1
            continue
        gh.update(r_gh / scale, **where)
        hg.update(r_hg / scale, **where)
        later = max(shifts)
        linear = solve_linear(hom.lin, tau, xi, tau + later, tol=hom.cfg.tol)
        perturbed = solve_perturbed(hom.lin, hom.pert, tau, h, tau + later, tol=hom.cfg.tol)
        for shift in shifts:
            t = tau + shift
            moved = linear(t)
            inv_T.update(abs(hom.crossing_time_linear(t, moved) - crossing), t=t, **where)
            gap = float(np.linalg.norm(hom.map_H(t, moved) - perturbed(t)))
            mapping.update(gap / scale, t=t, **where)
        norms = [float(np.linalg.norm(hom.map_H(tau, c * xi))) for c in scales]
        step = float(np.min(np.diff(norms))) if len(norms) > 1 else math.inf
        if step < growth_gap:
            growth_gap, growth_at = step, where
    for name, worst in (("inverse_GH", gh), ("inverse_HG", hg), ("T_invariance", inv_T), ("solution_mapping", mapping)):
        report.add(name, tol - worst.value, worst.location, worst.value <= tol)
    if math.isfinite(growth_gap):
        report.add("divergence", growth_gap, growth_at, growth_gap > 0.0)
    if skipped:
        report.notes.append(f"{skipped} sample(s) skipped: level crossing before t={hom.cfg.t_floor}")
    bounds = norm_bound_table(hom, samples, constants)
    for check in bounds.checks:
        report.add(check.axiom, check.worst_margin, check.location, check.passed)
    report.tables.update(bounds.tables)
    report.notes.extend(bounds.notes)
    return report


def continuity_at_zero(
    hom: CrossingHomeomorphism,
    tau: float,
    direction: Sequence[float],
    scales: Sequence[float] = (1.0, 0.5, 0.25, 0.125, 0.0625),
) -> Report:
    """||H(tau, c d)|| for shrinking c; crossings before t_floor are listed as out of domain."""
    report = Report(subject="continuity of H at the origin")
    unit = as_state(direction, hom.dim)
    rows = []
    for c in scales:
        xi = c * unit
        try:
            value: Optional[float] = float(np.linalg.norm(hom.map_H(tau, xi)))
            status = "ok"
        except OutOfDomainError:
            value, status = None, "out_of_domain"
        rows.append({"scale": float(c), "norm_xi": float(np.linalg.norm(xi)), "norm_H": value, "status": status})
    report.tables["continuity"] = rows
    computed = [r["norm_H"] for r in rows if r["norm_H"] is not None]
    if len(computed) >= 2:
        rises = float(np.max(np.diff(computed)))
        report.add("shrinks_to_zero", -rises, {"tau": tau}, rises <= 0.0)
    else:
        report.notes.append("too few scales inside the domain to observe the limit")
    return report


class BoundConstants(BaseModel):
    """
    Constants of the crossing norm estimate.

    K and upsilon bound V from above, V(t, x) <= K e^{2 upsilon t} ||x||^2, eta
    from below. gamma is a decay rate of V along the perturbed flow and L_F a
    Lipschitz constant of the linear field on the sampled window.
    """
    K: float = Field(..., gt=0.0)
    upsilon: float = Field(..., ge=0.0)
    gamma: float
    L_F: float = Field(..., gt=0.0)
    eta: float = Field(1.0, gt=0.0)


def bound_constants(hom: CrossingHomeomorphism, t_max: float, n_samples: int = 201) -> BoundConstants:
    """
    gamma = gamma_V - upsilon - L_g and L_F = sup ||A(t)|| + L_g on [0, t_max].
    A smaller gamma or a larger L_F only loosens the estimate.
    """
    summary = hom.V.summary()
    ts = np.linspace(0.0, max(t_max, 0.0), n_samples)
    sup_A = max(float(np.linalg.norm(hom.lin.matrix(float(t)), ord=2)) for t in ts)
    return BoundConstants(
        K=hom.V.upper(0.0),
        upsilon=summary.upsilon,
        gamma=hom.V.gamma - summary.upsilon - hom.pert.L_f,
        L_F=max(sup_A + hom.pert.L_f, 1e-12),
        eta=hom.V.lower(0.0),
    )


def norm_bound_table(
    hom: CrossingHomeomorphism,
    samples: Sequence[ParamPoint],
    constants: Optional[BoundConstants] = None,
    tol: float = 1e-6,
) -> Report:
    """
    Estimate of ||H(tau, xi)|| next to the computed values.

    For ||xi|| <= (l e^{-2 upsilon tau} / 2K)^{1/2} the crossing happens at
    T <= tau and

        ||H(tau, xi)|| <= (l / 2 eta)^{1/2} (2 K e^{2 upsilon T} ||xi||^2 / l)^{gamma_bar / 4 L_F}

    with gamma_bar = 2 gamma; checked as ``norm_bound_small``. Larger states
    are tabulated with the same expression and carry no check.
    """
    report = Report(subject="crossing norm estimates")
    if constants is None:
        constants = bound_constants(hom, max((p.tau for p in samples), default=0.0))
    c = constants
    report.notes.append(f"gamma_bar = {2.0 * c.gamma}, L_F = {c.L_F}, K = {c.K}, upsilon = {c.upsilon}, eta = {c.eta}")
    if c.gamma <= 0.0:
        report.notes.append(f"norm estimate skipped: decay rate {c.gamma} is not positive")
        return report

    level = hom.cfg.level
    exponent = 2.0 * c.gamma / (4.0 * c.L_F)
    rows = []
    worst, worst_at, checked = math.inf, {}, 0
    for point in samples:
        tau, xi = point.tau, np.array(point.xi)
        size = float(np.linalg.norm(xi))
        if size == 0.0:
            continue
        try:
            value, diag = hom.map_with_diagnostics(tau, xi, "H")
        except OutOfDomainError:
            rows.append({"tau": tau, "norm_xi": size, "norm_H": None, "bound": None, "regime": "out_of_domain"})
            continue
        crossing = diag["T"]
        ratio = 2.0 * c.K * math.exp(2.0 * c.upsilon * crossing) * size ** 2 / level
        small = size <= math.sqrt(level * math.exp(-2.0 * c.upsilon * tau) / (2.0 * c.K))
        bound = math.sqrt(level / (2.0 * c.eta)) * ratio ** exponent
        norm_H = float(np.linalg.norm(value))
        rows.append({"tau": tau, "norm_xi": size, "norm_H": norm_H, "bound": bound, "regime": "small" if small else "large"})
        if small:
            checked += 1
            margin = bound * (1.0 + tol) - norm_H
            if margin < worst:
                worst, worst_at = margin, {"tau": tau, "xi": list(point.xi), "T": crossing}
    report.tables["norm_bounds"] = rows
    if checked:
        report.add("norm_bound_small", worst, worst_at, worst >= 0.0)
    else:
        report.notes.append("no sample in the small-state regime; norm estimate not checked")
    return report
