"""
Sampled verification of Lyapunov axioms, of the quadratic-form identity, and of
the decay estimate along perturbed trajectories.

Every check reports the worst relative margin over its samples; margins are
>= 0 exactly when the check passes. Nothing here raises on a violation.
"""

from __future__ import annotations

import logging
import math
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import eigh

from nedlin.flow.integrator import EvolutionFamily, Trajectory, perturbed_rhs
from nedlin.flow.systems import LinearSystem, NonlinearPerturbation
from nedlin.lyapunov.base import LyapunovEvaluator, evaluate_V
from nedlin.lyapunov.quadratic import QuadraticLyapunov
from nedlin.primitives.models import Report, SampleSpec

logger = logging.getLogger(__name__)


class TrajectoryMismatchError(ValueError):
    """The trajectory does not solve the perturbed system it is checked against."""


def _fd_step(t: float) -> float:
    return 1e-4 * (1.0 + abs(t))


class _Worst:
    """Running minimum of a margin with the sample that realized it."""

    def __init__(self):
        self.margin = math.inf
        self.location: dict = {}

    def update(self, margin: float, **location) -> None:
        if margin < self.margin:
            self.margin = margin
            self.location = location


def verify_axioms(
    V: LyapunovEvaluator,
    sys: LinearSystem,
    sample_spec: SampleSpec | None = None,
    tol: float = 1e-6,
) -> Report:
    """
    Check V1 (both sides), V2 and V3 with gamma = V.gamma on random (t, s, x), t >= s >= 0.

    The V3 margin never exceeds the V2 margin, so V3 cannot pass while V2 fails.
    """
    spec = sample_spec or SampleSpec()
    rng = np.random.default_rng(spec.seed)
    report = Report(subject=f"{V.kind} Lyapunov axioms")
    lower, upper, v2, v3 = _Worst(), _Worst(), _Worst(), _Worst()
    for _ in range(spec.n_pairs):
        s, t = np.sort(rng.uniform(0.0, spec.t_max, size=2))
        s, t = float(s), float(t)
        phi = EvolutionFamily(sys, s, t).at(t) if t > s else np.eye(sys.dim)
        for _ in range(spec.n_states):
            x = rng.normal(scale=spec.x_scale, size=sys.dim)
            norm2 = float(x @ x)
            if norm2 == 0.0:
                continue
            v_s = evaluate_V(V, s, x)
            v_t = evaluate_V(V, t, phi @ x)
            where = {"t": t, "s": s, "x": x.tolist()}
            lower.update((v_s - V.lower(s) * norm2 * (1.0 - tol)) / v_s, **where)
            upper.update((V.upper(s) * norm2 * (1.0 + tol) - v_s) / v_s, **where)
            v2.update((v_s * (1.0 + tol) - v_t) / v_s, **where)
            v3.update((math.exp(-2.0 * V.gamma * (t - s)) * v_s * (1.0 + tol) - v_t) / v_s, **where)
    for name, worst in (("V1_lower", lower), ("V1_upper", upper), ("V2", v2), ("V3", v3)):
        report.add(name, worst.margin, worst.location, worst.margin >= 0.0)
    report.notes.append(f"gamma = {V.gamma}")
    if report.status == "fail":
        logger.warning(f"[Lyapunov] axiom check failed: {[c.axiom for c in report.checks if not c.passed]}")
    return report


def verify_decay_perturbed(
    V: LyapunovEvaluator,
    sys: LinearSystem,
    g: NonlinearPerturbation,
    traj: Trajectory,
    rates: tuple[float, float],
    tol: float = 1e-5,
    n_samples: int = 60,
    residual_tol: float = 1e-5,
) -> Report:
    """
    Check dV(t, y(t))/dt <= -2 (alpha1 - mu1 - L_g) V along ``traj``.

    The reported margin is ratio - (1 - tol) with
    ratio = (dV/dt) / (-2 (alpha1 - mu1 - L_g) V) from central differences.

    Raises:
        ValueError: g is not of class A2, or L_g >= alpha1 - mu1.
        TrajectoryMismatchError: traj does not solve y' = A(t) y + g(t, y).
    """
    alpha1, mu1 = rates
    if g.class_tag != "A2":
        raise ValueError("The decay estimate needs a perturbation of class A2 (g(t, 0) = 0)")
    rate = alpha1 - mu1 - g.L_f
    if rate <= 0.0:
        raise ValueError(f"L_g = {g.L_f} must be below alpha1 - mu1 = {alpha1 - mu1}")
    residual = traj.residual(perturbed_rhs(sys, g))
    if residual > residual_tol:
        raise TrajectoryMismatchError(f"Trajectory residual {residual:.3e} exceeds {residual_tol:.1e}")

    report = Report(subject="decay along the perturbed flow")
    lo, hi = traj.span
    worst = _Worst()
    v_max = 0.0
    for t in np.linspace(lo, hi, n_samples + 2)[1:-1]:
        t = float(t)
        h = min(_fd_step(t), 0.5 * (t - lo), 0.5 * (hi - t))
        v_here = evaluate_V(V, t, traj(t))
        v_max = max(v_max, v_here)
        if v_here == 0.0:
            continue
        slope = (evaluate_V(V, t + h, traj(t + h)) - evaluate_V(V, t - h, traj(t - h))) / (2.0 * h)
        ratio = slope / (-2.0 * rate * v_here)
        worst.update(ratio - (1.0 - tol), t=t, ratio=ratio)
    if worst.margin == math.inf:
        report.add("decay", 0.0, {"t": lo}, True)
        report.notes.append("V vanishes along the trajectory (equilibrium)")
    else:
        report.add("decay", worst.margin, worst.location, worst.margin >= 0.0)
    report.notes.append(f"gamma = alpha1 - mu1 - L_g = {rate}")
    report.tables["trajectory"] = [{"residual": residual, "max_V": v_max}]
    return report


def verify_quadratic_identity(
    V: QuadraticLyapunov,
    t_samples: Optional[Sequence[float]] = None,
    tol: float = 1e-5,
) -> Report:
    """
    Finite-difference checks of the integral quadratic form:

    * identity: S' + A^T S + S A + I + 2 alpha_V S = 0 (relative residual);
    * negative_form: S' + A^T S + S A <= -I + K1 S;
    * decay_form: S' + A^T S + S A <= -2 alpha_V S.
    """
    if V.sys is None:
        raise ValueError("verify_quadratic_identity needs a quadratic form built from a system")
    sys = V.sys
    window = V.t_window or 1.0
    ts = np.linspace(0.0, window, 21)[1:-1] if t_samples is None else np.asarray(t_samples, dtype=float)
    eye = np.eye(sys.dim)
    report = Report(subject="quadratic form identity")
    identity, negative, decay = _Worst(), _Worst(), _Worst()
    for t in ts:
        t = float(t)
        h = min(_fd_step(t), 0.5 * t) if t > 0.0 else _fd_step(t)
        S = V.S(t)
        dS = (V.S(t + h) - V.S(max(t - h, 0.0))) / (h + min(h, t))
        A = sys.matrix(t)
        lyap = dS + A.T @ S + S @ A
        scale = 1.0 + np.linalg.norm(S, 2) * (1.0 + 2.0 * np.linalg.norm(A, 2) + 2.0 * V.alpha_V)
        residual = float(np.linalg.norm(lyap + eye + 2.0 * V.alpha_V * S, 2)) / scale
        identity.update(tol - residual, t=t, residual=residual)
        top = float(np.max(np.linalg.eigvalsh(0.5 * ((lyap + eye - V.K1 * S) + (lyap + eye - V.K1 * S).T))))
        negative.update(tol - top / scale, t=t)
        # generalized eigenvalues of (lyap, S): largest must be <= -2 alpha_V
        rel = float(np.max(eigh(0.5 * (lyap + lyap.T), S, eigvals_only=True)))
        decay.update(tol - (rel + 2.0 * V.alpha_V) / (1.0 + 2.0 * V.alpha_V), t=t, rate=-0.5 * rel)
    report.add("identity", identity.margin, identity.location, identity.margin >= 0.0)
    report.add("negative_form", negative.margin, negative.location, negative.margin >= 0.0)
    report.add("decay_form", decay.margin, decay.location, decay.margin >= 0.0)
    return report
