import numpy as np
import pytest

from nedlin.dichotomy.certificates import (
    NotCertifiableError,
    check_coefficient_bound,
    default_alpha_grid,
    fit_bounded_growth,
    fit_contraction,
)
from nedlin.dichotomy.sampling import build_tables, initial_times, lag_grid
from nedlin.flow import LinearSystem
from nedlin.primitives.models import FINITE_WINDOW_CAVEAT


def test_default_alpha_grid():
    grid = default_alpha_grid()
    assert grid[0] == 0.025 and grid[-1] == 5.0 and grid.size == 200


def test_lag_grid_covers_transient_and_window():
    lags = lag_grid(20.0)
    assert lags[0] == 0.0 and lags[1] == pytest.approx(1e-3) and lags[-1] == 20.0
    assert np.all(np.diff(lags) > 0)


def test_tables_store_exact_log_norms(decay):
    table = build_tables(decay, 10.0, 5)[None]
    assert np.allclose(table.log_norm, -table.lag, atol=1e-9)
    assert np.all(table.s + table.lag <= 10.0 + 1e-12)
    assert list(table.s_unique) == list(initial_times(10.0, 5))


def test_scalar_decay_certificate(decay):
    cert = fit_contraction(decay)
    assert cert.alpha >= 1.0 - 0.025
    assert cert.mu == pytest.approx(0.0, abs=1e-6)
    assert cert.K == pytest.approx(1.0, abs=1e-6)
    assert cert.residual <= 1e-6
    assert cert.caveat == FINITE_WINDOW_CAVEAT
    assert cert.grid.t_max == 20.0 and cert.grid.n == 40


def test_expansion_is_not_certifiable(growth):
    with pytest.raises(NotCertifiableError):
        fit_contraction(growth)


def test_bv_certificate_against_closed_form(bv):
    sys, flow = bv
    cert = fit_contraction(sys, mu_cap=2.5)
    assert 1.9 <= cert.alpha <= 2.05
    assert cert.mu <= 2.0 + 0.1
    assert cert.residual <= 1e-6
    # independent re-check with the analytic operator on the certificate's own grid
    worst = -np.inf
    for s in initial_times(20.0, 40)[::3]:
        for lag in lag_grid(20.0)[::7]:
            if s + lag > 20.0:
                continue
            exact = np.log(flow(s + lag, s)[0, 0])
            worst = max(worst, exact - (np.log(cert.K) - cert.alpha * lag + cert.mu * s))
    assert worst <= 1e-6


def test_fit_contraction_input_errors(decay):
    with pytest.raises(ValueError):
        fit_contraction(decay, t_max=0.0)
    with pytest.raises(ValueError):
        fit_contraction(decay, n_samples=1)
    with pytest.raises(ValueError):
        fit_contraction(decay, alpha_grid=[])


def test_bounded_growth_of_decay(decay):
    cert = fit_bounded_growth(decay)
    assert cert.a == pytest.approx(1.0, abs=0.05)
    assert cert.eps_bar <= 0.05
    assert cert.residual <= 1e-9


def test_bounded_growth_of_zero_system():
    cert = fit_bounded_growth(LinearSystem.from_rows([["0"]]))
    assert cert.K0 == pytest.approx(1.0)
    assert cert.a == pytest.approx(0.0, abs=1e-12)
    assert cert.eps_bar == pytest.approx(0.0, abs=1e-9)


def test_bounded_growth_of_bv(bv):
    sys, _ = bv
    cert = fit_bounded_growth(sys)
    assert np.isfinite([cert.K0, cert.a, cert.eps_bar]).all()
    assert cert.residual <= 1e-9


def test_coefficient_bound_constant():
    bound = check_coefficient_bound(LinearSystem.from_rows([["-1"]]))
    assert bound.M == pytest.approx(1.0)
    assert bound.nu == pytest.approx(0.0, abs=1e-12)
    assert bound.max_violation <= 0.0


def test_coefficient_bound_exponential():
    bound = check_coefficient_bound(LinearSystem.from_rows([["exp(t)"]]), t_max=10.0)
    assert bound.nu == pytest.approx(1.0, abs=1e-6)
    assert bound.M == pytest.approx(1.0, rel=1e-6)


def test_coefficient_bound_covers_linear_growth():
    bound = check_coefficient_bound(LinearSystem.from_rows([["-3 + t*sin(t)"]]))
    ts = np.linspace(0.0, 20.0, 401)
    values = np.abs(-3 + ts * np.sin(ts))
    assert np.all(values <= bound.M * np.exp(bound.nu * ts) * (1 + 1e-9))
    assert bound.max_violation <= 1e-12
    assert bound.fit_residual >= 0.0


def test_coefficient_bound_rejects_non_finite():
    with pytest.raises(ValueError):
        check_coefficient_bound(LinearSystem.from_rows([["exp(exp(t))"]]), t_max=10.0)
