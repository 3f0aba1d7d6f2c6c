"""Deterministic rational sample points on charts."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import sympy as sp

from .errors import EvalDomainError, ExhaustedSampling
from .evaluation import compile_expr

DEFAULT_BOX = (-2.0, 2.0)
CHART_MARGIN = 1e-3
# sample coordinates are multiples of 1/DENOMINATOR
DENOMINATOR = 1000


@dataclass(frozen=True)
class SamplePlan:
    """What to sample: symbols, box, charts ``g > 0`` and guard expressions.

    A point is emitted only if every chart expression is at least ``margin``
    and every guard expression evaluates without a domain error.
    """

    symbols: tuple[sp.Symbol, ...]
    count: int = 100
    seed: int = 42
    bounds: dict = field(default_factory=dict)
    charts: tuple = ()
    guards: tuple = ()
    margin: float = CHART_MARGIN
    max_attempts: int | None = None

    def box(self, sym) -> tuple[float, float]:
        return self.bounds.get(sym, self.bounds.get(str(sym), DEFAULT_BOX))


def point_on_charts(values, symbols, charts, margin=CHART_MARGIN) -> bool:
    for g in charts:
        try:
            if compile_expr(g, symbols)(values) < margin:
                return False
        except EvalDomainError:
            return False
    return True


def sample_points(plan: SamplePlan) -> list[dict]:
    """Draw ``plan.count`` points, each a ``{symbol: Fraction}`` mapping.

    Deterministic for a fixed seed.  Raises ExhaustedSampling when the box
    and charts leave too little room.
    """
    syms = tuple(plan.symbols)
    rng = np.random.default_rng(plan.seed)
    charts = [compile_expr(g, syms) for g in plan.charts]
    guards = [compile_expr(g, syms) for g in plan.guards]
    lo = np.array([plan.box(s)[0] for s in syms]) * DENOMINATOR
    hi = np.array([plan.box(s)[1] for s in syms]) * DENOMINATOR
    limit = plan.max_attempts or max(200, 50 * plan.count)
    points: list[dict] = []
    attempts = 0
    while len(points) < plan.count:
        if attempts >= limit:
            raise ExhaustedSampling(
                f"only {len(points)}/{plan.count} points satisfy the charts after {attempts} draws"
            )
        attempts += 1
        nums = [int(rng.integers(int(np.ceil(a)), int(np.floor(b)) + 1)) for a, b in zip(lo, hi)]
        vals = [k / DENOMINATOR for k in nums]
        try:
            if any(c(vals) < plan.margin for c in charts):
                continue
            for g in guards:
                g(vals)
        except EvalDomainError:
            continue
        points.append({s: Fraction(k, DENOMINATOR) for s, k in zip(syms, nums)})
    return points


def as_floats(point: dict, symbols) -> list[float]:
    return [float(point[s]) for s in symbols]
