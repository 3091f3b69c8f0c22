"""
Concurrent evaluation of H or G over many base points.

Each point is an independent pure computation, so evaluations run in worker
threads and results come back in input order.
"""

from __future__ import annotations

import asyncio
import logging
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from nedlin.linearization.base import Direction, Homeomorphism
from nedlin.primitives.models import ParamPoint

logger = logging.getLogger(__name__)


class MappedPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    point: ParamPoint
    value: tuple[float, ...]
    diagnostics: dict[str, float] = Field(default_factory=dict)
    error: Optional[str] = Field(None, description="Message of the failure when the point could not be mapped")


async def map_points(
    hom: Homeomorphism,
    points: Sequence[ParamPoint],
    which: Direction = "H",
    max_concurrency: Optional[int] = None,
) -> list[MappedPoint]:
    """
    Evaluate ``hom`` at every point. Points whose evaluation raises a
    ValueError or RuntimeError (out of domain, non-monotone, divergence) are
    returned with ``error`` set and NaN values; other exceptions propagate.
    """
    gate = asyncio.Semaphore(max_concurrency) if max_concurrency else None

    def work(point: ParamPoint) -> MappedPoint:
        try:
            value, diagnostics = hom.map_with_diagnostics(point.tau, np.array(point.xi), which)
        except (ValueError, RuntimeError) as exc:
            logger.warning(f"[Batch] {which}({point.tau}, {list(point.xi)}) failed: {exc}")
            return MappedPoint(point=point, value=tuple([float("nan")] * len(point.xi)), error=str(exc))
        return MappedPoint(point=point, value=tuple(float(v) for v in value), diagnostics=diagnostics)

    async def one(point: ParamPoint) -> MappedPoint:
        if gate is None:
            return await asyncio.to_thread(work, point)
        async with gate:
            return await asyncio.to_thread(work, point)

    results = await asyncio.gather(*(one(p) for p in points))
    failed = sum(1 for r in results if r.error is not None)
    logger.info(f"[Batch] mapped {len(results)} point(s) with {hom.method}, {failed} failed")
    return list(results)
