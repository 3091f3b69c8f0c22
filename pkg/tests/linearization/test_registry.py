import math

import numpy as np
import pytest

from nedlin.flow import NonlinearPerturbation
from nedlin.linearization.crossing import CrossingHomeomorphism
from nedlin.linearization.picard import PLHomeomorphism
from nedlin.linearization.registry import (
    HomeomorphismRegistry,
    MethodEntry,
    UnknownMethodError,
    default_registry,
)


def test_default_methods():
    methods = default_registry().list_methods()
    assert sorted(methods) == ["crossing", "picard"]
    assert methods["crossing"].requires_class == "A2"
    assert methods["picard"].requires_class is None


def test_unknown_method(decay, bounded_sine, decay_cert):
    with pytest.raises(UnknownMethodError):
        default_registry().build("newton", decay, bounded_sine, decay_cert)


def test_crossing_needs_class_A2(decay, constant_push, decay_cert):
    with pytest.raises(ValueError, match="class A2"):
        default_registry().build("crossing", decay, constant_push, decay_cert)


def test_crossing_builds_quadratic_form_by_default(decay, bounded_sine, decay_cert):
    hom = default_registry().build("crossing", decay, bounded_sine, decay_cert)
    assert isinstance(hom, CrossingHomeomorphism)
    assert hom.V.gamma == pytest.approx(0.5)
    # S = 1 for x' = -x at alpha_V = 1/2
    assert hom.crossing_time_linear(0.0, np.array([2.0])) == pytest.approx(math.log(8.0) / 2.0, abs=1e-6)


def test_crossing_options_reach_the_config(decay, bounded_sine, decay_cert):
    hom = default_registry().build("crossing", decay, bounded_sine, decay_cert, {"level": 4.0, "alpha_V": 0.25})
    assert hom.cfg.level == 4.0
    assert hom.V.gamma == pytest.approx(0.25)


def test_unknown_lyapunov_construction(decay, bounded_sine, decay_cert):
    with pytest.raises(ValueError, match="Unknown Lyapunov construction"):
        default_registry().build("crossing", decay, bounded_sine, decay_cert, {"lyapunov": "sos"})


def test_picard_accepts_options(decay, constant_push, decay_cert):
    hom = default_registry().build("picard", decay, constant_push, decay_cert, {"tol": 1e-9, "max_iter": 10})
    assert isinstance(hom, PLHomeomorphism)
    assert hom.settings.tol == 1e-9 and hom.settings.max_iter == 10


def test_build_does_not_consume_caller_options(decay, bounded_sine, decay_cert):
    options = {"alpha_V": 0.5}
    default_registry().build("crossing", decay, bounded_sine, decay_cert, options)
    assert options == {"alpha_V": 0.5}


def test_duplicate_registration(decay_cert):
    registry = HomeomorphismRegistry()
    entry = MethodEntry(name="identity", description="no-op")
    registry.register(entry, lambda lin, pert, cert, options: None)
    with pytest.raises(ValueError):
        registry.register(entry, lambda lin, pert, cert, options: None)


def test_zero_perturbation_is_identity_for_both_methods(decay, decay_cert):
    zero = NonlinearPerturbation.zero(1)
    for method in ("crossing", "picard"):
        hom = default_registry().build(method, decay, zero, decay_cert)
        assert hom.map_H(2.0, np.array([1.5]))[0] == pytest.approx(1.5, rel=1e-7)
