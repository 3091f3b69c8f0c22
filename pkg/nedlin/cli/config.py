"""
Run configuration of the command-line tool and loading of its input files.

Systems are read from JSON files or from the built-in catalog with a
``catalog:<name>`` reference plus ``--param key=value`` pairs.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from nedlin.flow import LinearSystem, NonlinearPerturbation, catalog
from nedlin.kinematics.transform import KinematicTransform
from nedlin.primitives.models import CoefficientBound, ContractionCertificate, GrowthCertificate

logger = logging.getLogger(__name__)

CATALOG_PREFIX = "catalog:"
LOG_LEVEL_ENV = "NEDLIN_LOG_LEVEL"

Command = Literal["certify", "spectrum", "lyapunov", "linearize", "verify", "pipeline"]


class ConfigError(ValueError):
    """Invalid command-line value or unreadable input file."""


class RunConfig(BaseModel):
    """Validated options of one CLI invocation."""
    model_config = ConfigDict(frozen=True)

    command: Command
    system: str = Field(..., description="System JSON path or catalog:<name>")
    params: dict[str, float] = Field(default_factory=dict, description="Catalog parameters")
    perturbation: Optional[Path] = None
    transform: Optional[Path] = None
    cert: Optional[Path] = Field(None, description="cert.json written by 'certify'; fitted inline when absent")
    points: Optional[Path] = Field(None, description="CSV of base points (tau, xi1, ..., xin)")
    method: Literal["crossing", "picard"] = "picard"
    lyapunov: Literal["quadratic", "strict"] = "quadratic"
    alpha_V: Optional[float] = Field(None, gt=0.0, description="Weight rate of V; half the certified alpha when None")
    t_max: float = Field(20.0, gt=0.0)
    samples: int = Field(40, ge=2, description="Initial times of the certificate grid")
    n_points: int = Field(20, ge=1, description="Sampled base points when --points is absent")
    verify_points: int = Field(3, ge=1, description="Base points passed to the residual suites")
    mu_cap: Optional[float] = Field(None, ge=0.0)
    lambda_min: float = -5.0
    lambda_max: float = 5.0
    step: float = Field(0.05, gt=0.0)
    tol: float = Field(1e-8, gt=0.0)
    seed: int = 0
    out: Path = Path("out")

    @model_validator(mode="after")
    def _check_scan(self) -> "RunConfig":
        if self.command in ("spectrum", "pipeline") and not self.lambda_min < self.lambda_max:
            raise ValueError(f"Empty lambda grid: [{self.lambda_min}, {self.lambda_max}]")
        return self


def parse_params(pairs: list[str] | None) -> dict[str, float]:
    """
    Raises:
        ConfigError: A pair is not ``key=number``.
    """
    params: dict[str, float] = {}
    for pair in pairs or []:
        name, sep, value = pair.partition("=")
        if not sep or not name.strip():
            raise ConfigError(f"Expected key=value, got '{pair}'")
        try:
            params[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"Parameter '{name}' needs a number, got '{value}'") from None
    return params


def _read(path: Path) -> Path:
    if not path.is_file():
        raise ConfigError(f"No such file: {path}")
    return path


def load_system(cfg: RunConfig) -> LinearSystem:
    if cfg.system.startswith(CATALOG_PREFIX):
        return catalog(cfg.system[len(CATALOG_PREFIX):], cfg.params)[0]
    return LinearSystem.from_json_file(_read(Path(cfg.system)))


def load_perturbation(cfg: RunConfig, dim: int) -> NonlinearPerturbation:
    if cfg.perturbation is None:
        logger.info("[Config] no perturbation given; using f = 0")
        return NonlinearPerturbation.zero(dim)
    pert = NonlinearPerturbation.from_json_file(_read(cfg.perturbation))
    if pert.dim != dim:
        raise ConfigError(f"Perturbation has dimension {pert.dim}, system has {dim}")
    return pert


def load_transform(cfg: RunConfig, dim: int) -> Optional[KinematicTransform]:
    if cfg.transform is None:
        return None
    T = KinematicTransform.from_json_file(_read(cfg.transform))
    if T.dim != dim:
        raise ConfigError(f"Transform has dimension {T.dim}, system has {dim}")
    return T


class CertificateBundle(BaseModel):
    """Contents of cert.json."""
    contraction: ContractionCertificate
    growth: Optional[GrowthCertificate] = None
    coefficient_bound: Optional[CoefficientBound] = None


def load_certificate(cfg: RunConfig) -> Optional[ContractionCertificate]:
    if cfg.cert is None:
        return None
    return CertificateBundle.model_validate_json(_read(cfg.cert).read_text(encoding="utf-8")).contraction


def log_level(verbosity: int, env: Optional[dict[str, str]] = None) -> int:
    """-v gives INFO, -vv DEBUG; otherwise NEDLIN_LOG_LEVEL, default WARNING."""
    if verbosity >= 2:
        return logging.DEBUG
    if verbosity == 1:
        return logging.INFO
    name = (env if env is not None else os.environ).get(LOG_LEVEL_ENV, "WARNING").upper()
    level = logging.getLevelName(name)
    return level if isinstance(level, int) else logging.WARNING
