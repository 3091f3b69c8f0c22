"""
Registry of homeomorphism constructions keyed by method name.

Builders take the linear system, the perturbation, a contraction certificate
of the linear part and free-form options, and return a ready Homeomorphism.
"""

from __future__ import annotations

import logging
from typing import Any, Callable, Dict

from pydantic import BaseModel, Field

from nedlin.flow.systems import LinearSystem, NonlinearPerturbation
from nedlin.linearization.base import Homeomorphism
from nedlin.linearization.crossing import CrossingConfig, CrossingHomeomorphism
from nedlin.linearization.picard import PicardSettings, PLHomeomorphism
from nedlin.lyapunov.base import LyapunovEvaluator
from nedlin.lyapunov.quadratic import build_quadratic
from nedlin.lyapunov.strict import build_strict
from nedlin.primitives.models import ContractionCertificate

logger = logging.getLogger(__name__)

Builder = Callable[[LinearSystem, NonlinearPerturbation, ContractionCertificate, Dict[str, Any]], Homeomorphism]


class UnknownMethodError(KeyError):
    """No builder registered under the requested method name."""


class MethodEntry(BaseModel):
    name: str
    description: str
    requires_class: str | None = Field(None, description="Perturbation class the method accepts, if restricted")


class HomeomorphismRegistry:
    def __init__(self):
        self._builders: Dict[str, Builder] = {}
        self._entries: Dict[str, MethodEntry] = {}

    def register(self, entry: MethodEntry, builder: Builder) -> None:
        if entry.name in self._builders:
            raise ValueError(f"Method '{entry.name}' already registered")
        self._builders[entry.name] = builder
        self._entries[entry.name] = entry

    def list_methods(self) -> Dict[str, MethodEntry]:
        return dict(self._entries)

    def build(
        self,
        method: str,
        lin: LinearSystem,
        pert: NonlinearPerturbation,
        cert: ContractionCertificate,
        options: Dict[str, Any] | None = None,
    ) -> Homeomorphism:
        """
        Raises:
            UnknownMethodError: ``method`` is not registered.
            ValueError: The perturbation class does not suit the method.
        """
        builder = self._builders.get(method)
        if builder is None:
            raise UnknownMethodError(f"Unknown method '{method}'; known: {', '.join(sorted(self._builders))}")
        required = self._entries[method].requires_class
        if required is not None and pert.class_tag != required:
            raise ValueError(f"Method '{method}' needs a perturbation of class {required}, got {pert.class_tag}")
        logger.info(f"[Registry] building {method} homeomorphism (n={lin.dim})")
        return builder(lin, pert, cert, dict(options or {}))


def _build_V(kind: str, cert: ContractionCertificate, lin: LinearSystem, alpha_V: float) -> LyapunovEvaluator:
    if kind == "quadratic":
        return build_quadratic(cert, lin, alpha_V)
    if kind == "strict":
        return build_strict(cert, lin, alpha_V)
    raise ValueError(f"Unknown Lyapunov construction '{kind}' (expected quadratic or strict)")


def _crossing(lin: LinearSystem, pert: NonlinearPerturbation, cert: ContractionCertificate, options: Dict[str, Any]) -> Homeomorphism:
    alpha_V = float(options.pop("alpha_V", 0.5 * cert.alpha))
    lyapunov = options.pop("lyapunov", "quadratic")
    V = options.pop("V", None)
    if V is None:
        V = _build_V(lyapunov, cert, lin, alpha_V)
    return CrossingHomeomorphism(V, lin, pert, CrossingConfig(**options))


def _picard(lin: LinearSystem, pert: NonlinearPerturbation, cert: ContractionCertificate, options: Dict[str, Any]) -> Homeomorphism:
    return PLHomeomorphism(lin, pert, cert, PicardSettings(**options))


def default_registry() -> HomeomorphismRegistry:
    registry = HomeomorphismRegistry()
    registry.register(
        MethodEntry(name="crossing", description="Level-crossing map built from a Lyapunov function", requires_class="A2"),
        _crossing,
    )
    registry.register(
        MethodEntry(name="picard", description="Bounded fixed point of the variation-of-constants map"),
        _picard,
    )
    return registry
