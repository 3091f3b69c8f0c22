import math

import numpy as np
import pytest

from nedlin.flow import catalog
from nedlin.lyapunov.base import evaluate_V
from nedlin.lyapunov.cache import MatrixCache
from nedlin.lyapunov.strict import StrictLyapunov, build_strict
from nedlin.primitives.models import ContractionCertificate


def bv_log_sup(t: float, alpha_V: float, length: float, step: float = 1e-5) -> float:
    """ln sup_tau Phi(tau, t)^2 exp(2 alpha_V (tau - t)) for x' = (-3 + t sin t) x, from the closed form."""
    taus = t + np.arange(0.0, length + step, step)
    g = np.sin(taus) - taus * np.cos(taus)
    g0 = math.sin(t) - t * math.cos(t)
    return float(np.max(2.0 * (-3.0 * (taus - t) + g - g0) + 2.0 * alpha_V * (taus - t)))


@pytest.mark.parametrize("t", [0.0, 1.5, 7.0])
def test_decaying_scalar_gives_the_square(decay, decay_cert, t):
    V = build_strict(decay_cert, decay, 0.5)
    assert V(t, np.array([2.0])) == pytest.approx(4.0, rel=1e-9)
    assert V(t, np.array([-0.3])) == pytest.approx(0.09, rel=1e-9)


def test_zero_state_gives_zero(decay, decay_cert):
    V = build_strict(decay_cert, decay, 0.5)
    assert evaluate_V(V, 2.0, np.zeros(1)) == 0.0
    assert V(2.0, np.zeros(1)) == 0.0


def test_negative_time_is_rejected(decay, decay_cert):
    V = build_strict(decay_cert, decay, 0.5)
    with pytest.raises(ValueError):
        V(-1.0, np.ones(1))


@pytest.mark.parametrize("alpha_V", [1.0, 1.5, 0.0, -0.2])
def test_rate_outside_the_certificate_is_rejected(decay, decay_cert, alpha_V):
    with pytest.raises(ValueError, match="alpha_V"):
        build_strict(decay_cert, decay, alpha_V)


def test_sandwich_constants(bv, bv_cert):
    V = build_strict(bv_cert, bv[0], 1.0, t_window=6.0)
    assert V.K == bv_cert.K
    assert V.upsilon == bv_cert.mu
    assert V.gamma == 1.0
    assert V.lower(3.0) == 1.0
    assert V.upper(3.0) == pytest.approx(bv_cert.K ** 2 * math.exp(2.0 * bv_cert.mu * 3.0))
    summary = V.summary()
    assert summary.kind == "strict"
    assert summary.horizon == pytest.approx(V.horizon_at(6.0))


@pytest.mark.parametrize("t", [0.0, 2 * math.pi])
def test_bv_value_matches_closed_form_sup(bv, bv_cert, t):
    V = build_strict(bv_cert, bv[0], 1.0, t_window=6.0)
    expected = bv_log_sup(t, 1.0, V.horizon_at(t))
    assert math.log(V(t, np.array([1.0]))) == pytest.approx(expected, abs=1e-6)


def test_bv_sandwich_holds_on_samples(bv, bv_cert):
    V = build_strict(bv_cert, bv[0], 1.0, t_window=6.0)
    for t in np.linspace(0.0, 6.0, 7):
        value = V(float(t), np.array([1.0]))
        assert 1.0 <= value * (1.0 + 1e-9)
        assert value <= V.upper(float(t)) * (1.0 + 1e-6)


def test_homogeneous_of_degree_two():
    sys = catalog("bv_diagonal", {"omega1": 3.0, "omega2": 4.0, "a": 1.0})[0]
    cert = ContractionCertificate(K=1.5, alpha=2.0, mu=2.0)
    V = StrictLyapunov(cert, sys, 1.0, t_window=3.0)
    x = np.array([0.7, -1.2])
    base = V(1.0, x)
    for c in (0.1, 3.0, -2.0):
        assert V(1.0, c * x) == pytest.approx(c * c * base, rel=1e-9)


def test_longer_horizon_never_decreases_the_value(bv, bv_cert):
    short = StrictLyapunov(bv_cert, bv[0], 1.0, tol=1e-3, t_window=6.0)
    long = StrictLyapunov(bv_cert, bv[0], 1.0, tol=1e-9, t_window=6.0)
    assert long.horizon_at(1.0) > short.horizon_at(1.0)
    for t in (0.5, 1.0, 4.0):
        assert long(t, np.array([1.0])) >= short(t, np.array([1.0])) * (1.0 - 1e-10)


def test_profiles_are_shared_through_the_cache(decay, decay_cert):
    cache = MatrixCache()
    V = build_strict(decay_cert, decay, 0.5, cache=cache)
    V(1.0, np.array([1.0]))
    V(1.0, np.array([3.0]))
    assert ("strict", 1.0) in cache
    assert cache.hits >= 1


def test_memo_stays_within_its_bound(decay, decay_cert):
    cache = MatrixCache(max_entries=8)
    V = build_strict(decay_cert, decay, 0.5, cache=cache)
    for t in np.linspace(0.0, 4.0, 40):
        assert V(float(t), np.array([1.0])) == pytest.approx(1.0, rel=1e-9)
        assert len(cache) <= 8
    assert cache.misses >= 40


def test_default_memo_is_bounded(decay, decay_cert):
    V = build_strict(decay_cert, decay, 0.5)
    assert V._cache.max_entries is not None
