import math

import numpy as np
import pytest

from nedlin.linearization.batch import map_points
from nedlin.linearization.crossing import CrossingHomeomorphism
from nedlin.linearization.picard import PLHomeomorphism
from nedlin.lyapunov.quadratic import QuadraticLyapunov
from nedlin.primitives.models import ParamPoint


@pytest.mark.asyncio
async def test_results_follow_input_order(decay, constant_push, decay_cert):
    hom = PLHomeomorphism(decay, constant_push, decay_cert)
    points = [ParamPoint(tau=tau, xi=[xi]) for tau, xi in [(3.0, 0.1), (0.0, 1.0), (1.0, -2.0), (2.0, 0.5)]]
    results = await map_points(hom, points, max_concurrency=2)
    assert [r.point for r in results] == points
    for r in results:
        expected = r.point.xi[0] + 0.5 * (1.0 - math.exp(-r.point.tau))
        assert r.value[0] == pytest.approx(expected, abs=1e-8)
        assert r.error is None
        assert r.diagnostics["iterations"] >= 1


@pytest.mark.asyncio
async def test_G_direction(decay, constant_push, decay_cert):
    hom = PLHomeomorphism(decay, constant_push, decay_cert)
    (result,) = await map_points(hom, [ParamPoint(tau=1.0, xi=[0.0])], which="G")
    assert result.value[0] == pytest.approx(-0.5 * (1.0 - math.exp(-1.0)), abs=1e-8)


@pytest.mark.asyncio
async def test_failed_points_are_reported(decay, bounded_sine):
    hom = CrossingHomeomorphism(QuadraticLyapunov.constant([[1.0]], gamma=1.0), decay, bounded_sine)
    points = [ParamPoint(tau=0.0, xi=[0.1]), ParamPoint(tau=0.0, xi=[2.0])]
    bad, good = await map_points(hom, points)
    assert np.isnan(bad.value[0])
    assert "before t=0.0" in bad.error
    assert good.error is None
    assert good.diagnostics["T"] > 1.0


@pytest.mark.asyncio
async def test_empty_batch(decay, constant_push, decay_cert):
    assert await map_points(PLHomeomorphism(decay, constant_push, decay_cert), []) == []
