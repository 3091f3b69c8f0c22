"""
Built-in example systems with closed-form evolution operators.

The catalog is a registry of factories keyed by name; each factory takes a
parameter map and returns the system together with an analytic Phi(t, s)
used as a test oracle.
"""

from __future__ import annotations

import logging
import math
from typing import Callable, Dict, Optional

import numpy as np
from pydantic import BaseModel, Field

from nedlin.flow.systems import LinearSystem

logger = logging.getLogger(__name__)

AnalyticFlow = Callable[[float, float], np.ndarray]
Factory = Callable[[Dict[str, float]], tuple[LinearSystem, Optional[AnalyticFlow]]]


class CatalogError(KeyError):
    """Unknown catalog entry or missing parameter."""


class CatalogEntry(BaseModel):
    name: str
    description: str
    required: list[str] = Field(default_factory=list, description="Parameter names the factory needs")
    enabled: bool = True


class SystemCatalog:
    """Registry of example-system factories."""

    def __init__(self):
        self._factories: Dict[str, Factory] = {}
        self._entries: Dict[str, CatalogEntry] = {}

    def register(self, entry: CatalogEntry, factory: Factory) -> None:
        if entry.name in self._factories:
            raise ValueError(f"Catalog entry '{entry.name}' already registered")
        self._factories[entry.name] = factory
        self._entries[entry.name] = entry

    def unregister(self, name: str) -> None:
        self._factories.pop(name, None)
        self._entries.pop(name, None)

    def list_entries(self) -> Dict[str, CatalogEntry]:
        return dict(self._entries)

    def build(self, name: str, params: Dict[str, float]) -> tuple[LinearSystem, Optional[AnalyticFlow]]:
        factory = self._factories.get(name)
        if factory is None or not self._entries[name].enabled:
            raise CatalogError(f"No catalog system named '{name}'; known: {', '.join(sorted(self._factories))}")
        missing = [p for p in self._entries[name].required if p not in params]
        if missing:
            raise CatalogError(f"Catalog system '{name}' is missing parameter(s) {missing}")
        logger.debug(f"[Catalog] building {name} with {params}")
        return factory({k: float(v) for k, v in params.items()})


def _scalar_autonomous(p: Dict[str, float]):
    lam = p["lambda0"]
    sys = LinearSystem.from_rows([["lambda0"]], {"lambda0": lam})
    return sys, lambda t, s: np.array([[math.exp(lam * (t - s))]])


def _diagonal_rates(p: Dict[str, float]) -> list[float]:
    rates, k = [], 1
    while f"lambda{k}" in p:
        rates.append(p[f"lambda{k}"])
        k += 1
    if not rates:
        raise CatalogError("diagonal_autonomous needs lambda1, lambda2, ...")
    return rates


def _diagonal_autonomous(p: Dict[str, float]):
    rates = _diagonal_rates(p)
    n = len(rates)
    rows = [[f"lambda{i + 1}" if i == j else 0.0 for j in range(n)] for i in range(n)]
    sys = LinearSystem.from_rows(rows, {f"lambda{i + 1}": r for i, r in enumerate(rates)})
    return sys, lambda t, s: np.diag([math.exp(r * (t - s)) for r in rates])


def _bv_antiderivative(t: float) -> float:
    return math.sin(t) - t * math.cos(t)


def _bv_scalar(p: Dict[str, float]):
    omega, a = p["omega"], p["a"]
    sys = LinearSystem.from_rows([["-omega + a*t*sin(t)"]], {"omega": omega, "a": a})

    def flow(t: float, s: float) -> np.ndarray:
        return np.array([[math.exp(-omega * (t - s) + a * (_bv_antiderivative(t) - _bv_antiderivative(s)))]])

    return sys, flow


def _bv_diagonal(p: Dict[str, float]):
    omegas, a = [p["omega1"], p["omega2"]], p["a"]
    rows = [["-omega1 + a*t*sin(t)", 0.0], [0.0, "-omega2 + a*t*sin(t)"]]
    sys = LinearSystem.from_rows(rows, {"omega1": omegas[0], "omega2": omegas[1], "a": a})

    def flow(t: float, s: float) -> np.ndarray:
        g = a * (_bv_antiderivative(t) - _bv_antiderivative(s))
        return np.diag([math.exp(-w * (t - s) + g) for w in omegas])

    return sys, flow


def _rotation_coupled(p: Dict[str, float]):
    lam, omega = p["lambda0"], p["omega"]
    rows = [["lambda0", "omega"], ["-omega", "lambda0"]]
    sys = LinearSystem.from_rows(rows, {"lambda0": lam, "omega": omega})

    def flow(t: float, s: float) -> np.ndarray:
        d = t - s
        c, sn = math.cos(omega * d), math.sin(omega * d)
        return math.exp(lam * d) * np.array([[c, sn], [-sn, c]])

    return sys, flow


default_catalog = SystemCatalog()
default_catalog.register(
    CatalogEntry(name="scalar_autonomous", description="x' = lambda0 x", required=["lambda0"]),
    _scalar_autonomous,
)
default_catalog.register(
    CatalogEntry(name="diagonal_autonomous", description="x' = diag(lambda1, ..., lambdan) x", required=["lambda1"]),
    _diagonal_autonomous,
)
default_catalog.register(
    CatalogEntry(name="bv_scalar", description="x' = (-omega + a t sin t) x", required=["omega", "a"]),
    _bv_scalar,
)
default_catalog.register(
    CatalogEntry(
        name="bv_diagonal",
        description="x' = diag(-omega1 + a t sin t, -omega2 + a t sin t) x",
        required=["omega1", "omega2", "a"],
    ),
    _bv_diagonal,
)
default_catalog.register(
    CatalogEntry(name="rotation_coupled", description="x' = [[lambda0, omega], [-omega, lambda0]] x",
                 required=["lambda0", "omega"]),
    _rotation_coupled,
)


def catalog(name: str, params: Dict[str, float] | None = None) -> tuple[LinearSystem, Optional[AnalyticFlow]]:
    """Instantiate a built-in system and its closed-form Phi."""
    return default_catalog.build(name, params or {})
