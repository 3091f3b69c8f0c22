import math

import numpy as np
import pytest

from nedlin.flow import NonlinearPerturbation
from nedlin.linearization.picard import (
    ContractionRatioError,
    PicardDivergenceError,
    PicardSettings,
    PLHomeomorphism,
    WeightedNorm,
    bounded_offset,
    continuity_table,
    map_G_pl,
    map_H_pl,
    picard_Z,
    reduce_f0,
    verify_pl_equivalence,
)
from nedlin.primitives.models import ContractionCertificate, ParamPoint

OFFSET_AT_ONE = 0.5 * (1.0 - math.exp(-1.0))


def make_perturbation(source: str, L_f: float = 0.0, K0: float = 0.0) -> NonlinearPerturbation:
    return NonlinearPerturbation(f=[source], L_f=L_f, K0=K0, class_tag="A1")


@pytest.fixture(scope="module")
def push_hom(decay, constant_push, decay_cert):
    return PLHomeomorphism(decay, constant_push, decay_cert)


def test_reduce_f0_removes_the_value_at_the_origin(shifted_sine):
    f0 = reduce_f0(shifted_sine)
    assert f0.class_tag == "A2"
    assert f0.L_f == shifted_sine.L_f and f0.beta == shifted_sine.beta
    assert f0.evaluate(0.7, np.zeros(1)) == pytest.approx([0.0])
    assert f0.evaluate(0.7, np.array([1.2])) == pytest.approx([0.2 * math.exp(-1.4) * math.sin(1.2)])


def test_reduce_f0_of_constant_vanishes(constant_push):
    f0 = reduce_f0(constant_push)
    assert f0.evaluate(3.0, np.array([5.0])) == pytest.approx([0.0])


def test_closed_form_correction(push_hom):
    solution = picard_Z(push_hom, ParamPoint(tau=1.0, xi=[0.7]))
    for t in (0.0, 0.5, 2.0, 5.0):
        assert solution(t)[0] == pytest.approx(0.5 * (1.0 - math.exp(-t)), abs=1e-8)
    assert solution.residual <= 1e-8
    assert solution.Z_values.shape == (200, 1)


def test_H_and_G_closed_form(push_hom):
    assert map_H_pl(push_hom, 1.0, np.array([0.4]))[0] == pytest.approx(0.4 + OFFSET_AT_ONE, abs=1e-8)
    assert map_G_pl(push_hom, 1.0, np.array([0.4]))[0] == pytest.approx(0.4 - OFFSET_AT_ONE, abs=1e-8)
    assert OFFSET_AT_ONE == pytest.approx(0.3160603, abs=1e-7)


def test_H_fixes_states_at_time_zero(push_hom):
    assert map_H_pl(push_hom, 0.0, np.array([2.5]))[0] == pytest.approx(2.5, abs=1e-12)
    assert map_G_pl(push_hom, 0.0, np.array([2.5]))[0] == pytest.approx(2.5, abs=1e-12)


def test_zero_perturbation_converges_in_one_iteration(decay, decay_cert):
    hom = PLHomeomorphism(decay, NonlinearPerturbation.zero(1), decay_cert)
    solution = picard_Z(hom, ParamPoint(tau=2.0, xi=[1.0]))
    assert solution.iterations == 1
    assert solution.norm == 0.0
    assert hom.map_H(2.0, np.array([1.0]))[0] == 1.0


def test_ratios_stay_below_the_contraction_bound(decay, shifted_sine, decay_cert):
    hom = PLHomeomorphism(decay, shifted_sine, decay_cert)
    assert hom.ratio == pytest.approx(0.2)
    solution = picard_Z(hom, ParamPoint(tau=1.0, xi=[0.5]))
    assert solution.residual <= 1e-8
    assert solution.iterations > 2
    assert all(r <= 0.35 for r in solution.ratio_history[:3])
    assert solution.within_a_priori_bound()


def test_a_priori_bound(push_hom):
    solution = picard_Z(push_hom, ParamPoint(tau=1.0, xi=[0.7]))
    assert solution.a_priori_bound == pytest.approx(0.5)
    assert solution.norm <= 0.5
    assert solution.within_a_priori_bound()


def test_contraction_ratio_at_one_is_rejected(decay, decay_cert):
    with pytest.raises(ContractionRatioError, match=r"K\*L_f/alpha"):
        PLHomeomorphism(decay, make_perturbation("sin(x1)", L_f=1.0), decay_cert)


def test_divergence_when_iterations_run_out(decay, constant_push, decay_cert):
    hom = PLHomeomorphism(decay, constant_push, decay_cert, PicardSettings(max_iter=1))
    with pytest.raises(PicardDivergenceError):
        hom.map_H(1.0, np.array([0.3]))


def test_dimension_mismatch_is_rejected(decay, decay_cert):
    pert = NonlinearPerturbation.zero(2)
    with pytest.raises(ValueError):
        PLHomeomorphism(decay, pert, decay_cert)


def test_understated_K0_is_replaced_by_the_sample(decay, decay_cert):
    hom = PLHomeomorphism(decay, make_perturbation("0.5", K0=0.1), decay_cert)
    assert hom.K0 == pytest.approx(0.5)
    assert any("exceeds K0" in note for note in hom.notes)


def test_beta_below_mu_is_flagged(decay, constant_push):
    hom = PLHomeomorphism(decay, constant_push, ContractionCertificate(K=1.0, alpha=1.0, mu=0.25))
    assert hom.notes == ["beta = 0.0 is below the nonuniformity rate mu = 0.25"]


def test_solutions_are_cached_per_point(decay, constant_push, decay_cert):
    hom = PLHomeomorphism(decay, constant_push, decay_cert)
    point = ParamPoint(tau=1.0, xi=[0.2])
    assert hom.solve(point) is hom.solve(point)
    assert hom.solve(point, "G") is not hom.solve(point, "H")


def test_window_override_bypasses_the_cache(push_hom):
    point = ParamPoint(tau=1.0, xi=[0.7])
    tuned = picard_Z(push_hom, point, t_max=4.0)
    assert tuned.grid[-1] == pytest.approx(4.0)
    assert tuned(3.0)[0] == pytest.approx(0.5 * (1.0 - math.exp(-3.0)), abs=1e-8)
    with pytest.raises(ValueError):
        picard_Z(push_hom, point, t_max=-1.0)


def test_weighted_norm():
    assert WeightedNorm(1.0, 5.0)(lambda ts: np.exp(ts)[None, :]) == pytest.approx(1.0)
    assert WeightedNorm(1.0, 5.0)(lambda ts: ts[None, :]) == pytest.approx(math.exp(-1.0), rel=1e-3)
    assert WeightedNorm(0.0, 2.0)(lambda ts: np.vstack([ts, ts])) == pytest.approx(2.0 * math.sqrt(2.0))
    with pytest.raises(ValueError):
        WeightedNorm(-1.0, 5.0)


def test_continuity_table_and_offset(push_hom):
    rows = continuity_table(push_hom, ParamPoint(tau=1.0, xi=[0.5]))
    assert [r["delta"] for r in rows] == [1e-1, 1e-2, 1e-3, 1e-4]
    for row in rows:
        assert row["change"] == pytest.approx(row["delta"], rel=1e-6)
    samples = [ParamPoint(tau=1.0, xi=[0.5]), ParamPoint(tau=3.0, xi=[-1.0])]
    assert bounded_offset(push_hom, samples) == pytest.approx(0.5 * (1.0 - math.exp(-3.0)), abs=1e-8)


def test_verification_on_constant_push(push_hom):
    samples = [ParamPoint(tau=1.0, xi=[0.4]), ParamPoint(tau=2.0, xi=[-1.1])]
    report = verify_pl_equivalence(push_hom, samples)
    assert report.status == "pass"
    assert [c.axiom for c in report.checks] == [
        "base_point_invariance",
        "solution_mapping",
        "inverse_GH",
        "inverse_HG",
        "a_priori_bound",
    ]
    assert len(report.tables["continuity"]) == 8


def test_verification_on_sine_perturbation(decay, shifted_sine, decay_cert):
    hom = PLHomeomorphism(decay, shifted_sine, decay_cert)
    report = verify_pl_equivalence(hom, [ParamPoint(tau=0.5, xi=[1.0])])
    assert report.status == "pass"
    assert report.check("inverse_GH").worst_margin > 0.0
