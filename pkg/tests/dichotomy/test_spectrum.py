import numpy as np
import pytest

from nedlin.dichotomy import spectrum
from nedlin.dichotomy.spectrum import (
    DichotomyTester,
    UndecidableError,
    check_shift_identity,
    estimate_spectrum,
    lambda_grid,
)
from nedlin.flow import LinearSystem, catalog


@pytest.mark.parametrize("lam, verdict", [(-0.5, "stable"), (-1.5, "unstable"), (-1.0, "none")])
def test_scalar_verdicts(decay, lam, verdict):
    assert spectrum.test_dichotomy(decay, lam).verdict == verdict


def test_stable_verdict_carries_a_shifted_certificate(decay):
    result = spectrum.test_dichotomy(decay, -0.5)
    assert result.stable.alpha == pytest.approx(0.5)
    assert result.stable_coordinates == [0]
    result = spectrum.test_dichotomy(decay, -1.5)
    assert result.unstable.alpha == pytest.approx(0.5)
    assert result.stable_coordinates == []


def test_scalar_verdicts_are_monotone(decay):
    tester = DichotomyTester(decay)
    for lam in lambda_grid(-2.0, 0.0, 0.1):
        verdict = tester.verdict(float(lam)).verdict
        if lam > -1.0:
            assert verdict == "stable"
        elif lam < -1.0:
            assert verdict == "unstable"


def test_split_verdict_for_diagonal_system(two_rates):
    result = spectrum.test_dichotomy(two_rates, -1.5)
    assert result.verdict == "split"
    assert result.stable_coordinates == [1]
    assert result.stable.alpha == pytest.approx(0.5)
    assert result.unstable.alpha == pytest.approx(0.5)


def test_scalar_spectrum(decay):
    est = estimate_spectrum(decay, -2.0, 0.0, 0.1)
    assert len(est.intervals) == 1
    interval = est.intervals[0]
    assert abs(interval.lower + 1.0) <= 0.1 + 1e-9
    assert abs(interval.upper + 1.0) <= 0.1 + 1e-9
    assert interval.uncertainty == 0.1
    assert est.flags == []
    assert len(est.verdicts) == len(est.lambda_grid) == 21


def test_spectrum_translates_with_the_shift(decay):
    base = estimate_spectrum(decay, -2.0, 0.0, 0.1).intervals[0]
    moved = estimate_spectrum(decay.shifted(0.5), -2.5, -0.5, 0.1).intervals[0]
    assert moved.lower == pytest.approx(base.lower - 0.5)
    assert moved.upper == pytest.approx(base.upper - 0.5)


def test_diagonal_spectrum_has_two_points(two_rates):
    est = estimate_spectrum(two_rates, -3.0, 0.0, 0.25)
    assert [(iv.lower, iv.upper) for iv in est.intervals] == [(-2.0, -2.0), (-1.0, -1.0)]
    assert est.flags == []


def test_bv_spectrum():
    sys, _ = catalog("bv_scalar", {"omega": 3.0, "a": 1.0})
    est = estimate_spectrum(sys, -5.0, -1.0, 0.1, mu_cap=2.5)
    assert len(est.intervals) == 1
    interval = est.intervals[0]
    assert interval.lower == pytest.approx(-4.0, abs=0.1 + 1e-9)
    assert interval.upper == pytest.approx(-2.0, abs=0.1 + 1e-9)


def test_flags_for_zero_and_boundary():
    est = estimate_spectrum(LinearSystem.from_rows([["0"]]), -0.3, 0.3, 0.1)
    assert "interval touches 0" in est.flags
    est = estimate_spectrum(LinearSystem.from_rows([["-1"]]), -1.0, -0.5, 0.1)
    assert "spectrum reaches the scan boundary" in est.flags


def test_coupled_system_is_undecidable():
    sys, _ = catalog("rotation_coupled", {"lambda0": -1.0, "omega": 2.0})
    with pytest.raises(UndecidableError):
        spectrum.test_dichotomy(sys, -0.5)
    with pytest.raises(UndecidableError):
        spectrum.test_dichotomy(sys, -0.5, projectors=[[0]])


def test_supplied_projector_family():
    sys = LinearSystem.from_rows([["-1", "0", "0"], ["0", "-3", "1"], ["0", "-1", "-3"]])
    result = spectrum.test_dichotomy(sys, -2.0, projectors=[[1, 2]])
    assert result.verdict == "split"
    assert result.stable_coordinates == [1, 2]
    with pytest.raises(ValueError):
        spectrum.test_dichotomy(sys, -2.0, projectors=[[0, 1, 2]])


def test_lambda_grid_validation():
    assert np.array_equal(lambda_grid(-1.0, -0.5, 0.25), np.array([-1.0, -0.75, -0.5]))
    with pytest.raises(ValueError):
        lambda_grid(0.0, 0.0, 0.1)
    with pytest.raises(ValueError):
        lambda_grid(-1.0, 0.0, 0.0)


def test_shift_identity_holds(bv):
    sys, _ = bv
    report = check_shift_identity(sys, -2.5)
    assert report.status == "pass"
    assert report.check("shift_identity").worst_margin <= 1e-8
