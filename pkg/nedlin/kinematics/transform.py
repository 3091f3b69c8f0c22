"""
Kinematic similarity transforms y = S(t)^{-1} x.

A transform carries S(t) (and optionally its derivative) as expressions in
``t`` together with the metadata of its exponential bounds

    ||S(t)||, ||S(t)^{-1}|| <= M1 exp(beta t)

and of the reducibility split (delta, K_de). Transformed coefficients are
built at expression level, so the result is an ordinary LinearSystem or
NonlinearPerturbation that every other module accepts.
"""

from __future__ import annotations

import logging
import math
from itertools import permutations
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import trapezoid

from nedlin.expr import Expression
from nedlin.flow.integrator import transition_matrix
from nedlin.flow.systems import LinearSystem, NonlinearPerturbation, sampled_lipschitz, state_names
from nedlin.primitives.models import ContractionCertificate, Report, SampleSpec, SpectrumEstimate

logger = logging.getLogger(__name__)

MAX_CONDITION = 1e8
UNVERIFIED = "unverified metadata"

ExprMatrix = list[list[Expression]]


class SingularTransformError(ValueError):
    """S(t) is singular or too badly conditioned at a sample time."""


def _const(value: float) -> Expression:
    return Expression.constant(value)


def _sum(terms) -> Expression:
    total = _const(0.0)
    for term in terms:
        total = total + term
    return total


def _matmul(a: ExprMatrix, b: ExprMatrix) -> ExprMatrix:
    n, m = len(a), len(b[0])
    return [[_sum(a[i][k] * b[k][j] for k in range(len(b))) for j in range(m)] for i in range(n)]


def _permutation_sign(perm: tuple[int, ...]) -> int:
    sign, seen = 1, list(perm)
    for i in range(len(seen)):
        while seen[i] != i:
            j = seen[i]
            seen[i], seen[j] = seen[j], seen[i]
            sign = -sign
    return sign


def _determinant(m: ExprMatrix) -> Expression:
    n = len(m)
    total = _const(0.0)
    for perm in permutations(range(n)):
        term = _const(1.0)
        for i, j in enumerate(perm):
            term = term * m[i][j]
        total = total + term if _permutation_sign(perm) > 0 else total - term
    return total


def _minor(m: ExprMatrix, row: int, col: int) -> ExprMatrix:
    return [[m[i][j] for j in range(len(m)) if j != col] for i in range(len(m)) if i != row]


def _inverse(m: ExprMatrix) -> ExprMatrix:
    """Adjugate over determinant; n is small, so the Leibniz expansion is fine."""
    n = len(m)
    det = _determinant(m)
    if n == 1:
        return [[_const(1.0) / det]]
    out = [[_const(0.0)] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            cof = _determinant(_minor(m, j, i))
            out[i][j] = (cof if (i + j) % 2 == 0 else -cof) / det
    return out


def _fd_derivative(entry: Expression) -> Expression:
    """Central difference in t with step 1e-5 (1 + |t|), as an expression."""
    if "t" not in entry.free_variables:
        return _const(0.0)
    t = Expression.variable("t")
    h = Expression.parse("0.00001 * (1 + abs(t))")
    forward = entry.substitute({"t": t + h})
    backward = entry.substitute({"t": t - h})
    return (forward - backward) / (_const(2.0) * h)


def _merge_params(*maps: dict[str, float]) -> dict[str, float]:
    merged: dict[str, float] = {}
    for mapping in maps:
        for name, value in mapping.items():
            if name in merged and merged[name] != value:
                raise ValueError(f"Parameter '{name}' is bound to both {merged[name]} and {value}")
            merged[name] = value
    return merged


class KinematicTransform(BaseModel):
    """
    S(t) with bound metadata; loads from the transform JSON file
    ``{"S": [[expr]], "S_dot": optional, "M1": r, "beta": r, "delta": r, "K_de": r}``.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    S: ExprMatrix = Field(..., description="Transform matrix S(t)")
    S_dot: Optional[ExprMatrix] = Field(None, description="dS/dt; central differences when absent")
    M1: float = Field(1.0, gt=0.0, description="Scale of the exponential bounds on S and S^-1")
    beta: float = Field(0.0, ge=0.0, description="Rate of the exponential bounds (1/time)")
    delta: float = Field(0.0, ge=0.0, description="Smallness parameter of the reducibility split")
    K_de: float = Field(1.0, ge=0.0, description="Reducibility constant")
    params: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_shape(self) -> "KinematicTransform":
        n = len(self.S)
        if n == 0 or any(len(row) != n for row in self.S):
            raise ValueError("S must be a non-empty square matrix")
        if self.S_dot is not None and (len(self.S_dot) != n or any(len(row) != n for row in self.S_dot)):
            raise ValueError("S_dot must have the shape of S")
        allowed = {"t", *self.params}
        for row in [*self.S, *(self.S_dot or [])]:
            for entry in row:
                unknown = entry.free_variables - allowed
                if unknown:
                    raise ValueError(f"Transform uses undeclared names {sorted(unknown)}")
        return self

    @classmethod
    def identity(cls, n: int) -> "KinematicTransform":
        return cls(S=[[_const(1.0 if i == j else 0.0) for j in range(n)] for i in range(n)])

    @classmethod
    def from_json_file(cls, path: str | Path) -> "KinematicTransform":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    @property
    def dim(self) -> int:
        return len(self.S)

    def _numeric(self, m: ExprMatrix, t: float) -> np.ndarray:
        env = dict(self.params)
        env["t"] = float(t)
        return np.array([[e.compiled()(env) for e in row] for row in m])

    def matrix(self, t: float) -> np.ndarray:
        return self._numeric(self.S, t)

    def derivative_entries(self) -> ExprMatrix:
        if self.S_dot is not None:
            return self.S_dot
        return [[_fd_derivative(e) for e in row] for row in self.S]

    def derivative(self, t: float) -> np.ndarray:
        return self._numeric(self.derivative_entries(), t)

    def inverse_entries(self) -> ExprMatrix:
        return _inverse(self.S)

    def inverse_matrix(self, t: float) -> np.ndarray:
        self.check_invertible([t])
        return np.linalg.inv(self.matrix(t))

    def check_invertible(self, t_samples) -> bool:
        """
        Raises:
            SingularTransformError: S(t) singular or with condition number above 1e8 at a sample.
        """
        for t in t_samples:
            m = self.matrix(float(t))
            cond = float(np.linalg.cond(m)) if np.all(np.isfinite(m)) else math.inf
            if not math.isfinite(cond) or cond > MAX_CONDITION:
                raise SingularTransformError(f"S({float(t):.6g}) is singular or ill-conditioned (cond={cond:.3e})")
        return True

    def inverse(self) -> "KinematicTransform":
        """The transform S(t)^{-1}; the bound metadata is symmetric in S and S^{-1}."""
        inv = self.inverse_entries()
        inv_dot = None
        if self.S_dot is not None:
            # d(S^-1)/dt = -S^-1 S' S^-1
            inv_dot = [[-e for e in row] for row in _matmul(_matmul(inv, self.S_dot), inv)]
        return self.model_copy(update={"S": inv, "S_dot": inv_dot})


def _window(t_max: float, n_samples: int) -> np.ndarray:
    return np.linspace(0.0, t_max, n_samples)


def transform_linear(
    sys: LinearSystem, T: KinematicTransform, t_max: float = 20.0, n_samples: int = 201
) -> LinearSystem:
    """
    Coefficient S^{-1}(t) (A(t) S(t) - S'(t)) of the system for y = S^{-1}(t) x.

    Raises:
        SingularTransformError: S is singular or ill-conditioned on [0, t_max].
    """
    if T.dim != sys.dim:
        raise ValueError(f"Transform has dimension {T.dim}, system has {sys.dim}")
    T.check_invertible(_window(t_max, n_samples))
    d = T.derivative_entries()
    inner = _matmul(sys.A, T.S)
    inner = [[inner[i][j] - d[i][j] for j in range(sys.dim)] for i in range(sys.dim)]
    rows = _matmul(T.inverse_entries(), inner)
    out = LinearSystem(dim=sys.dim, A=rows, params=_merge_params(sys.params, T.params))
    logger.info(f"[Kinematics] transformed {sys.dim}-dimensional system")
    return out


def transform_nonlinearity(
    f: NonlinearPerturbation, T: KinematicTransform, t_max: float = 20.0, n_samples: int = 201
) -> NonlinearPerturbation:
    """
    g(t, y) = S^{-1}(t) f(t, S(t) y) with L_g = M1^2 L_f.

    The decay rate of the Lipschitz bound drops by the growth rate of S:
    beta_g = max(beta_f - beta, 0).
    """
    if T.dim != f.dim:
        raise ValueError(f"Transform has dimension {T.dim}, perturbation has {f.dim}")
    T.check_invertible(_window(t_max, n_samples))
    names = state_names(f.dim)
    y = [[Expression.variable(name)] for name in names]
    sy = _matmul(T.S, y)
    mapping = {name: sy[i][0] for i, name in enumerate(names)}
    composed = [[e.substitute(mapping)] for e in f.f]
    g = [row[0] for row in _matmul(T.inverse_entries(), composed)]
    if f.beta < T.beta:
        logger.warning(f"[Kinematics] Lipschitz decay {f.beta} of f is slower than the growth {T.beta} of S")
    return NonlinearPerturbation(
        f=g,
        L_f=T.M1 ** 2 * f.L_f,
        beta=max(f.beta - T.beta, 0.0),
        K0=T.M1 * f.K0,
        class_tag=f.class_tag,
        params=_merge_params(f.params, T.params),
    )


def check_metadata(T: KinematicTransform, t_max: float = 20.0, n_samples: int = 201, tol: float = 1e-6) -> Report:
    """Spot-check ||S||, ||S^-1|| <= M1 e^{beta t}; a failure demotes the metadata to unverified."""
    report = Report(subject="kinematic transform metadata")
    ts = _window(t_max, n_samples)
    try:
        T.check_invertible(ts)
    except SingularTransformError as exc:
        report.add("invertible", -1.0, {}, False)
        report.notes.append(f"{UNVERIFIED}: {exc}")
        return report
    report.add("invertible", 0.0, {}, True)
    for name, getter in (("S_bound", T.matrix), ("S_inverse_bound", lambda t: np.linalg.inv(T.matrix(t)))):
        ratios = np.array([np.linalg.norm(getter(float(t)), 2) * math.exp(-T.beta * t) / T.M1 for t in ts])
        k = int(np.argmax(ratios))
        report.add(name, 1.0 + tol - float(ratios[k]), {"t": float(ts[k])}, ratios[k] <= 1.0 + tol)
    if report.status == "fail":
        report.notes.append(UNVERIFIED)
        logger.warning("[Kinematics] transform bounds do not hold on samples; metadata is unverified")
    return report


def verify_lipschitz_transfer(
    g: NonlinearPerturbation,
    f: NonlinearPerturbation,
    T: KinematicTransform,
    sample_spec: SampleSpec | None = None,
    tol: float = 1e-6,
    cert: Optional[ContractionCertificate] = None,
) -> Report:
    """
    Sampled ||g(t,u) - g(t,v)|| e^{2 beta_g t} / ||u - v|| against M1^2 L_f.

    Also reports whether the smallness condition L_g <= delta holds and, with
    a certificate, whether delta < alpha - mu.
    """
    spec = sample_spec or SampleSpec()
    report = Report(subject="Lipschitz transfer")
    bound = T.M1 ** 2 * f.L_f
    ratio, where = sampled_lipschitz(
        g, spec.t_max, spec.n_pairs * spec.n_states, spec.seed, spec.x_scale, decay=g.beta
    )
    scale = max(bound, 1e-300)
    report.add("lipschitz_transfer", (bound * (1.0 + tol) - ratio) / scale, where, ratio <= bound * (1.0 + tol))
    report.add("smallness", T.delta - g.L_f, {"L_g": g.L_f, "delta": T.delta}, g.L_f <= T.delta)
    if cert is not None:
        gap = cert.alpha - cert.mu
        report.add("delta_below_gap", gap - T.delta, {"alpha": cert.alpha, "mu": cert.mu}, T.delta < gap)
    metadata = check_metadata(T, spec.t_max)
    if metadata.status == "fail":
        report.notes.append(UNVERIFIED)
    report.tables["sampled"] = [{"ratio": ratio, "bound": bound}]
    return report


def verify_conjugacy(
    sys: LinearSystem,
    T: KinematicTransform,
    transformed: LinearSystem | None = None,
    sample_spec: SampleSpec | None = None,
    tol: float = 1e-6,
) -> Report:
    """Phi_new(t, s) = S^{-1}(t) Phi(t, s) S(s) on sampled pairs (relative Frobenius error)."""
    spec = sample_spec or SampleSpec(n_pairs=10)
    new = transformed if transformed is not None else transform_linear(sys, T, spec.t_max)
    rng = np.random.default_rng(spec.seed)
    report = Report(subject="conjugated evolution operator")
    worst, where = 0.0, {}
    for _ in range(spec.n_pairs):
        s, t = (float(v) for v in np.sort(rng.uniform(0.0, spec.t_max, size=2)))
        expected = np.linalg.solve(T.matrix(t), transition_matrix(sys, t, s).value @ T.matrix(s))
        got = transition_matrix(new, t, s).value
        error = float(np.linalg.norm(got - expected) / max(np.linalg.norm(expected), 1e-300))
        if error > worst:
            worst, where = error, {"t": t, "s": s}
    report.add("conjugacy", tol - worst, where, worst <= tol)
    return report


def check_split_bound(
    transformed: LinearSystem, T: KinematicTransform, t_max: float = 20.0, n_samples: int = 201
) -> Report:
    """||B(t)|| <= delta K_de for the off-diagonal part B of the transformed coefficient."""
    report = Report(subject="reducibility split")
    ts = _window(t_max, n_samples)
    norms = []
    for t in ts:
        a = transformed.matrix(float(t))
        norms.append(float(np.linalg.norm(a - np.diag(np.diag(a)), 2)))
    k = int(np.argmax(norms))
    bound = T.delta * T.K_de
    report.add("split_bound", bound - norms[k], {"t": float(ts[k])}, norms[k] <= bound * (1.0 + 1e-12))
    return report


def diagonal_range_report(
    transformed: LinearSystem, spectrum: SpectrumEstimate, t_max: float = 20.0, n_samples: int = 401
) -> Report:
    """
    Sampled range and window mean of each diagonal entry C_i(t).

    Pointwise values of C_i may leave the spectrum; the check compares the
    window mean against the estimated intervals widened by their uncertainty.
    """
    report = Report(subject="diagonal entries against the spectrum")
    ts = _window(t_max, n_samples)
    diag = np.array([np.diag(transformed.matrix(float(t))) for t in ts])
    rows = []
    for i in range(transformed.dim):
        mean = float(trapezoid(diag[:, i], ts) / (ts[-1] - ts[0]))
        rows.append({"coordinate": i, "min": float(diag[:, i].min()), "max": float(diag[:, i].max()), "mean": mean})
        distance = min(
            (max(iv.lower - iv.uncertainty - mean, mean - iv.upper - iv.uncertainty, 0.0) for iv in spectrum.intervals),
            default=math.inf,
        )
        report.add(f"mean_in_spectrum_{i}", -distance, {"mean": mean}, distance == 0.0)
    report.tables["diagonal"] = rows
    return report
