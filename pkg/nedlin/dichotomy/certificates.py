"""
Certificate fitting for the coefficient bound, bounded growth and
nonuniform contraction.

Contraction fit, for each candidate alpha:

    ln K = max(0, sup_{s=0} ln||Phi(t,0)|| + alpha t)
    mu   = max(0, sup_{s>0} (ln||Phi(t,s)|| + alpha (t-s) - ln K) / s)

and the largest alpha with mu <= mu_cap wins. Finite data can always hide
growth inside K, so a candidate is admissible only when (ln K, mu) fitted on
the half window [0, t_max/2] and on the full window agree within
``window_tol``: the transient must have saturated.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from nedlin.dichotomy.sampling import NormTable, build_tables
from nedlin.flow.systems import LinearSystem
from nedlin.primitives.models import CoefficientBound, ContractionCertificate, GrowthCertificate

logger = logging.getLogger(__name__)


class NotCertifiableError(ValueError):
    """No candidate rate passes the fit on this grid."""


class CertificateSettings(BaseModel):
    t_max: float = Field(20.0, gt=0.0, description="Window end")
    n_samples: int = Field(40, ge=2, description="Number of initial times")
    alpha_step: float = Field(0.025, gt=0.0, description="Spacing of the default alpha grid")
    alpha_max: float = Field(5.0, gt=0.0, description="Largest default alpha")
    mu_cap: Optional[float] = Field(None, ge=0.0, description="Cap on mu (None: mu <= alpha)")
    window_tol: float = Field(0.1, gt=0.0, description="Allowed drift of (ln K, mu) between half and full window")


def default_alpha_grid(step: float = 0.025, upper: float = 5.0) -> np.ndarray:
    count = int(round(upper / step))
    return np.round(np.arange(1, count + 1) * step, 12)


def _fit_constants(table: NormTable, alphas: np.ndarray, shift: float) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized (ln K, mu) for every alpha on ``table``."""
    exponent = table.shifted(shift)[None, :] + alphas[:, None] * table.lag[None, :]
    per_s = np.maximum.reduceat(exponent, table.starts, axis=1)
    s_values = table.s_unique
    anchor = s_values == 0.0
    log_K = np.maximum(0.0, per_s[:, anchor].max(axis=1)) if anchor.any() else np.zeros(alphas.size)
    later = s_values > 0.0
    if not later.any():
        return log_K, np.zeros(alphas.size)
    ratios = (per_s[:, later] - log_K[:, None]) / s_values[later][None, :]
    return log_K, np.maximum(0.0, ratios.max(axis=1))


def fit_from_table(
    table: NormTable,
    alphas: Sequence[float] | np.ndarray,
    shift: float = 0.0,
    mu_cap: Optional[float] = None,
    window_tol: float = 0.1,
) -> Optional[ContractionCertificate]:
    """
    Best contraction certificate for the coefficient A + shift I, or None.

    Args:
        table: log-norm table of A (or of its adjoint for expansion bounds).
        alphas: Candidate decay rates.
        shift: Added to the coefficient; the table is corrected through the
            shift identity instead of re-integrating.
        mu_cap: Largest admissible mu (None: mu <= alpha).
        window_tol: Allowed drift of ln K and mu between half and full window.
    """
    alphas = np.asarray(alphas, dtype=float)
    log_K, mu = _fit_constants(table, alphas, shift)
    half_log_K, half_mu = _fit_constants(table.restrict(0.5 * table.t_max), alphas, shift)
    cap = alphas if mu_cap is None else np.full(alphas.size, mu_cap)
    ok = (mu <= cap + 1e-12) & (log_K - half_log_K <= window_tol) & (mu - half_mu <= window_tol)
    if not ok.any():
        return None
    k = int(np.flatnonzero(ok)[-1]) if np.all(np.diff(alphas) > 0) else int(np.argmax(np.where(ok, alphas, -np.inf)))
    residual, _ = table.violation(float(log_K[k]), float(alphas[k]), float(mu[k]), shift)
    return ContractionCertificate(
        K=float(np.exp(log_K[k])), alpha=float(alphas[k]), mu=float(mu[k]), residual=residual, grid=table.grid
    )


def fit_contraction(
    sys: LinearSystem,
    t_max: float = 20.0,
    n_samples: int = 40,
    alpha_grid: Sequence[float] | None = None,
    mu_cap: Optional[float] = None,
    window_tol: float = 0.1,
    table: NormTable | None = None,
) -> ContractionCertificate:
    """
    Fit (K, alpha, mu) with ||Phi(t,s)|| <= K exp(-alpha (t-s) + mu s) on the grid.

    Raises:
        NotCertifiableError: No alpha in the grid passes.
    """
    if t_max <= 0.0 or n_samples < 2:
        raise ValueError("fit_contraction needs t_max > 0 and n_samples >= 2")
    alphas = default_alpha_grid() if alpha_grid is None else np.asarray(alpha_grid, dtype=float)
    if alphas.size == 0:
        raise ValueError("alpha_grid must not be empty")
    if table is None:
        table = build_tables(sys, t_max, n_samples)[None]
    cert = fit_from_table(table, alphas, 0.0, mu_cap, window_tol)
    if cert is None:
        raise NotCertifiableError(f"System is not certifiable on this grid (t_max={t_max}, n={n_samples})")
    logger.info(f"[Certificate] K={cert.K:.6g} alpha={cert.alpha:.6g} mu={cert.mu:.6g} residual={cert.residual:.2e}")
    return cert


def _growth_constants(
    fwd: NormTable, bwd: NormTable, rates: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    # forward pairs: nonuniform time is s; backward pairs come from the adjoint
    # table, where Phi(t,s) with t < s has ||.|| = ||Psi(s,t)|| and s = s_adj + lag
    f_exp = fwd.log_norm[None, :] - rates[:, None] * fwd.lag[None, :]
    b_exp = bwd.log_norm[None, :] - rates[:, None] * bwd.lag[None, :]
    f_time, b_time = fwd.s, bwd.s + bwd.lag
    log_K = np.maximum(0.0, np.max(np.where(f_time[None, :] == 0.0, f_exp, -np.inf), axis=1))
    log_K = np.maximum(log_K, np.max(np.where(b_time[None, :] == 0.0, b_exp, -np.inf), axis=1))
    eps = np.zeros(rates.size)
    for exp_, time in ((f_exp, f_time), (b_exp, b_time)):
        later = time > 0.0
        if later.any():
            eps = np.maximum(eps, ((exp_[:, later] - log_K[:, None]) / time[later][None, :]).max(axis=1))
    return log_K, eps


def fit_bounded_growth(
    sys: LinearSystem,
    t_max: float = 20.0,
    n_samples: int = 40,
    a_step: float = 0.05,
    window_tol: float = 0.1,
) -> GrowthCertificate:
    """
    Fit (K0, a, eps_bar) with ||Phi(t,s)|| <= K0 exp(a|t-s| + eps_bar s) for all sampled t, s.

    Among candidates whose constants have saturated on the window, the
    smallest eps_bar wins, then the smallest a. Without any saturated
    candidate the largest a is used; its constants still cover the grid.
    """
    fwd = build_tables(sys, t_max, n_samples)[None]
    bwd = build_tables(sys.adjoint(), t_max, n_samples)[None]
    for table in (fwd, bwd):
        if not np.all(np.isfinite(table.log_norm)):
            raise ValueError("Non-finite evolution operator on the growth grid")
    long_lags = np.concatenate((fwd.lag, bwd.lag)) >= 1.0
    steepest = np.max(np.abs(np.concatenate((fwd.log_norm, bwd.log_norm))[long_lags] /
                             np.concatenate((fwd.lag, bwd.lag))[long_lags]), initial=0.0)
    a_step = max(a_step, steepest / 200.0)
    rates = np.round(np.arange(0, int(np.ceil(steepest / a_step)) + 2) * a_step, 12)
    log_K, eps = _growth_constants(fwd, bwd, rates)
    half_K, half_eps = _growth_constants(fwd.restrict(0.5 * t_max), bwd.restrict(0.5 * t_max), rates)
    stable = (log_K - half_K <= window_tol) & (eps - half_eps <= window_tol)
    if stable.any():
        best_eps = eps[stable].min()
        k = int(np.flatnonzero(stable & (eps <= best_eps + 0.5 * a_step))[0])
    else:
        logger.warning("[Certificate] growth constants did not saturate; using the steepest rate")
        k = rates.size - 1
    residual = max(
        float(np.max(fwd.log_norm - (log_K[k] + rates[k] * fwd.lag + eps[k] * fwd.s))),
        float(np.max(bwd.log_norm - (log_K[k] + rates[k] * bwd.lag + eps[k] * (bwd.s + bwd.lag)))),
    )
    cert = GrowthCertificate(
        K0=float(np.exp(log_K[k])), a=float(rates[k]), eps_bar=float(eps[k]), residual=residual, grid=fwd.grid
    )
    logger.info(f"[Certificate] growth K0={cert.K0:.6g} a={cert.a:.6g} eps_bar={cert.eps_bar:.6g}")
    return cert


def check_coefficient_bound(sys: LinearSystem, t_max: float = 20.0, n_samples: int = 401) -> CoefficientBound:
    """Envelope fit ||A(t)|| <= M exp(nu t): least squares on the running max of ln||A||, then inflate M."""
    if t_max <= 0.0:
        raise ValueError("t_max must be positive")
    ts = np.linspace(0.0, t_max, n_samples)
    matrices = np.array([sys.matrix(t) for t in ts])
    finite = np.isfinite(matrices).all(axis=(1, 2))
    if not finite.all():
        raise ValueError(f"Non-finite A(t) at t={float(ts[np.flatnonzero(~finite)[0]])}")
    norms = np.linalg.norm(matrices, ord=2, axis=(1, 2))
    positive = norms > 0.0
    if not positive.any():
        return CoefficientBound(M=0.0, nu=0.0, max_violation=0.0)
    t_pos, log_norms = ts[positive], np.log(norms[positive])
    envelope = np.maximum.accumulate(log_norms)
    slope, intercept = np.polyfit(t_pos, envelope, 1) if t_pos.size > 1 else (0.0, float(envelope[0]))
    nu = max(0.0, float(slope))
    log_M = float(np.max(log_norms - nu * t_pos))
    fit_residual = float(np.sqrt(np.mean((envelope - (intercept + slope * t_pos)) ** 2)))
    violation = float(np.max(log_norms - log_M - nu * t_pos))
    return CoefficientBound(M=float(np.exp(log_M)), nu=nu, max_violation=violation, fit_residual=fit_residual)
