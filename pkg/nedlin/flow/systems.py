"""
System and perturbation data types.

LinearSystem holds the coefficient matrix A(t) as expressions in ``t`` and
parameters; NonlinearPerturbation holds f(t, x) as expressions in ``t``,
``x1..xn`` and parameters, together with its declared Lipschitz metadata.
Both load from and dump to the JSON file formats used by the CLI.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from nedlin.expr import Expression
from nedlin.primitives.models import Report

logger = logging.getLogger(__name__)


def state_names(n: int) -> list[str]:
    return [f"x{i + 1}" for i in range(n)]


class LinearSystem(BaseModel):
    """
    Nonautonomous linear system x' = A(t) x.

    Args:
        dim: State dimension n.
        A: n x n matrix of expressions in ``t`` and parameter names.
        params: Parameter bindings.
    """
    model_config = ConfigDict(frozen=True)

    dim: int = Field(..., ge=1, description="State dimension")
    A: list[list[Expression]] = Field(..., description="Coefficient matrix A(t)")
    params: dict[str, float] = Field(default_factory=dict, description="Parameter bindings")

    @model_validator(mode="after")
    def _check_shape_and_names(self) -> "LinearSystem":
        if len(self.A) != self.dim or any(len(row) != self.dim for row in self.A):
            raise ValueError(f"A must be {self.dim}x{self.dim}")
        allowed = {"t", *self.params}
        for i, row in enumerate(self.A):
            for j, entry in enumerate(row):
                unknown = entry.free_variables - allowed
                if unknown:
                    raise ValueError(f"A[{i}][{j}] uses undeclared names {sorted(unknown)}; allowed: t and parameters")
        return self

    @classmethod
    def from_rows(cls, rows: list[list[str | float]], params: dict[str, float] | None = None) -> "LinearSystem":
        return cls(dim=len(rows), A=[[Expression.model_validate(e) for e in row] for row in rows], params=params or {})

    @classmethod
    def from_json_file(cls, path: str | Path) -> "LinearSystem":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    def matrix(self, t: float) -> np.ndarray:
        env = dict(self.params)
        env["t"] = float(t)
        out = np.empty((self.dim, self.dim))
        for i, row in enumerate(self.A):
            for j, entry in enumerate(row):
                out[i, j] = entry.compiled()(env)
        return out

    def shifted(self, lam: float) -> "LinearSystem":
        """Coefficient A(t) - lam I."""
        shift = Expression.constant(lam)
        rows = [[e - shift if i == j else e for j, e in enumerate(row)] for i, row in enumerate(self.A)]
        return LinearSystem(dim=self.dim, A=rows, params=dict(self.params))

    def adjoint(self) -> "LinearSystem":
        """Coefficient -A(t)^T, whose evolution operator is Phi(s, t)^T."""
        rows = [[-self.A[j][i] for j in range(self.dim)] for i in range(self.dim)]
        return LinearSystem(dim=self.dim, A=rows, params=dict(self.params))

    def is_diagonal(self, t_samples: np.ndarray | None = None) -> bool:
        if self.dim == 1:
            return True
        ts = np.linspace(0.0, 20.0, 41) if t_samples is None else t_samples
        for i in range(self.dim):
            for j in range(self.dim):
                if i == j or self.A[i][j].is_zero():
                    continue
                if any(self.matrix(t)[i, j] != 0.0 for t in ts):
                    return False
        return True


class NonlinearPerturbation(BaseModel):
    """
    Perturbation f(t, x) with Lipschitz data L_f exp(-2 beta t) and
    sup ||f(t, 0)|| <= K0. Class A2 additionally has f(t, 0) = 0.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    f: list[Expression] = Field(..., min_length=1, description="Vector field components")
    L_f: float = Field(..., ge=0.0, description="Lipschitz coefficient (1/time)")
    beta: float = Field(0.0, ge=0.0, description="Decay rate of the Lipschitz bound (1/time)")
    K0: float = Field(0.0, ge=0.0, description="Sup of ||f(t, 0)||")
    class_tag: Literal["A1", "A2"] = Field("A1", alias="class")
    params: dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_names(self) -> "NonlinearPerturbation":
        allowed = {"t", *state_names(self.dim), *self.params}
        for i, entry in enumerate(self.f):
            unknown = entry.free_variables - allowed
            if unknown:
                raise ValueError(f"f[{i}] uses undeclared names {sorted(unknown)}")
        return self

    @property
    def dim(self) -> int:
        return len(self.f)

    @classmethod
    def zero(cls, n: int) -> "NonlinearPerturbation":
        return cls(f=[Expression.constant(0.0)] * n, L_f=0.0, beta=0.0, K0=0.0, class_tag="A2")

    @classmethod
    def from_json_file(cls, path: str | Path) -> "NonlinearPerturbation":
        return cls.model_validate_json(Path(path).read_text(encoding="utf-8"))

    def is_zero(self) -> bool:
        return all(e.is_zero() for e in self.f)

    def evaluate(self, t: float, x: np.ndarray) -> np.ndarray:
        env = dict(self.params)
        env["t"] = float(t)
        for i, value in enumerate(np.atleast_1d(x)):
            env[f"x{i + 1}"] = float(value)
        return np.array([e.compiled()(env) for e in self.f])

    def at_origin(self) -> "NonlinearPerturbation":
        """The components of f(t, 0) as a state-independent perturbation."""
        zero = {name: Expression.constant(0.0) for name in state_names(self.dim)}
        return self.model_copy(update={"f": [e.substitute(zero) for e in self.f]})

    def to_json(self) -> str:
        return self.model_dump_json(by_alias=True, indent=2)


def sampled_lipschitz(
    f: NonlinearPerturbation,
    t_max: float,
    n_samples: int = 200,
    seed: int = 0,
    x_scale: float = 2.0,
    decay: float | None = None,
) -> tuple[float, dict]:
    """
    Largest sampled ratio ||f(t,u) - f(t,v)|| exp(2 decay t) / ||u - v||.

    ``decay`` defaults to ``f.beta``. Returns the ratio and the sample attaining it.
    """
    rate = f.beta if decay is None else decay
    rng = np.random.default_rng(seed)
    worst, where = 0.0, {}
    for _ in range(n_samples):
        t = float(rng.uniform(0.0, t_max))
        u = rng.normal(scale=x_scale, size=f.dim)
        v = u + rng.normal(scale=x_scale * 10.0 ** rng.uniform(-3, 0), size=f.dim)
        gap = float(np.linalg.norm(u - v))
        if gap == 0.0:
            continue
        ratio = float(np.linalg.norm(f.evaluate(t, u) - f.evaluate(t, v))) * np.exp(2.0 * rate * t) / gap
        if ratio > worst:
            worst, where = ratio, {"t": t, "u": u.tolist(), "v": v.tolist()}
    return worst, where


def check_perturbation(
    f: NonlinearPerturbation,
    t_max: float,
    n_samples: int = 200,
    seed: int = 0,
    tol: float = 1e-6,
) -> Report:
    """Spot-check the declared class, Lipschitz data and K0 of ``f`` by sampling."""
    report = Report(subject="perturbation metadata")
    ratio, where = sampled_lipschitz(f, t_max, n_samples, seed)
    report.add("lipschitz", f.L_f * (1.0 + tol) - ratio, where, ratio <= f.L_f * (1.0 + tol))

    origin = np.zeros(f.dim)
    ts = np.linspace(0.0, t_max, n_samples)
    values = np.array([np.linalg.norm(f.evaluate(t, origin)) for t in ts])
    k = int(np.argmax(values))
    report.add("K0", f.K0 * (1.0 + tol) - values[k], {"t": float(ts[k])}, values[k] <= f.K0 * (1.0 + tol) + tol)
    if f.class_tag == "A2":
        report.add("vanishes_at_origin", -values[k], {"t": float(ts[k])}, values[k] <= tol)
    if report.status == "fail":
        logger.warning(f"[Perturbation] metadata check failed: {[c.axiom for c in report.checks if not c.passed]}")
    return report
