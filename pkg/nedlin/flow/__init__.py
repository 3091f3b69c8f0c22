"""Linear and perturbed flows, evolution operators and the example catalog."""

from nedlin.flow.catalog import CatalogError, SystemCatalog, catalog, default_catalog
from nedlin.flow.integrator import (
    BlowUpError,
    EvolutionFamily,
    IntegrationError,
    IntegratorSettings,
    Trajectory,
    TransitionMatrix,
    gronwall_sandwich,
    solve_forced,
    solve_linear,
    solve_perturbed,
    transition_matrix,
)
from nedlin.flow.systems import LinearSystem, NonlinearPerturbation, check_perturbation, sampled_lipschitz

__all__ = [
    "BlowUpError",
    "CatalogError",
    "EvolutionFamily",
    "IntegrationError",
    "IntegratorSettings",
    "LinearSystem",
    "NonlinearPerturbation",
    "SystemCatalog",
    "Trajectory",
    "TransitionMatrix",
    "catalog",
    "check_perturbation",
    "default_catalog",
    "gronwall_sandwich",
    "sampled_lipschitz",
    "solve_forced",
    "solve_linear",
    "solve_perturbed",
    "transition_matrix",
]
