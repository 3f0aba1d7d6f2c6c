"""Fixed-step RK4 trajectories and numeric cross-checks of symbolic claims."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ChartExit, EvalDomainError, StepRejected
from .evaluation import compile_expr, compile_many
from .sampling import CHART_MARGIN, SamplePlan, sample_points

__all__ = [
    "SamplePlan",
    "Trajectory",
    "conservation_drift",
    "integrate",
    "map_trajectory",
    "residual_dynamics",
    "sample_points",
    "step_halving_ratio",
]


@dataclass(frozen=True)
class Trajectory:
    symbols: tuple
    times: np.ndarray
    states: np.ndarray  # shape (K + 1, len(symbols))

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]

    def column(self, sym) -> np.ndarray:
        return self.states[:, [str(s) for s in self.symbols].index(str(sym))]


def integrate(rhs: Sequence, symbols: Sequence, z0: Sequence[float], T: float = 1.0, h: float = 1e-3,
              charts: Sequence = (), margin: float = CHART_MARGIN) -> Trajectory:
    """Classical RK4 for ``z' = rhs(z)`` on ``[0, T]``.

    ``rhs[k]`` is the derivative of ``symbols[k]``.  Raises ChartExit if a
    grid point leaves ``charts`` (``g >= margin``), StepRejected if a stage
    cannot be evaluated or produces non-finite values.
    """
    if h <= 0:
        raise ValueError("step must be positive")
    symbols = tuple(symbols)
    f = compile_many(rhs, symbols)
    gs = [compile_expr(g, symbols) for g in charts]
    steps = max(1, int(round(T / h)))
    h = T / steps

    def on_chart(z) -> bool:
        try:
            return all(g(z) >= margin for g in gs)
        except EvalDomainError:
            return False

    def F(z, t):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                k = np.array(f(list(z)))
        except (EvalDomainError, OverflowError) as exc:
            raise StepRejected(f"rhs undefined at t={t:.6g}: {exc}") from exc
        if not np.all(np.isfinite(k)):
            raise StepRejected(f"non-finite rhs at t={t:.6g}")
        return k

    z = np.array(z0, dtype=float)
    if not on_chart(z):
        raise ChartExit(0.0, z)
    out = np.empty((steps + 1, len(symbols)))
    out[0] = z
    for i in range(steps):
        t = i * h
        k1 = F(z, t)
        k2 = F(z + 0.5 * h * k1, t)
        k3 = F(z + 0.5 * h * k2, t)
        k4 = F(z + h * k3, t)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not on_chart(z):
            raise ChartExit(t + h, z)
        out[i + 1] = z
    return Trajectory(symbols, np.linspace(0.0, T, steps + 1), out)


def map_trajectory(maps: Sequence, target_symbols: Sequence, traj: Trajectory) -> Trajectory:
    """Push ``traj`` through ``maps`` pointwise (``maps[k]`` gives ``target_symbols[k]``)."""
    f = compile_many(maps, traj.symbols)
    mapped = np.array([f(list(z)) for z in traj.states])
    return Trajectory(tuple(target_symbols), traj.times, mapped)


def residual_dynamics(rhs: Sequence, mapped: Trajectory) -> float:
    """Max over interior grid points of |central difference - rhs(point)|.

    Uses the five-point (fourth-order) central stencil so that the
    truncation error stays well below the RK4 error at ``h = 1e-3``.
    """
    if len(mapped.times) < 5:
        raise ValueError("need at least five grid points")
    h = mapped.step
    z = mapped.states
    deriv = (z[:-4] - 8 * z[1:-3] + 8 * z[3:-1] - z[4:]) / (12 * h)
    f = compile_many(rhs, mapped.symbols)
    field = np.array([f(list(v)) for v in z[2:-2]])
    return float(np.max(np.abs(deriv - field)))


def conservation_drift(expr, traj: Trajectory) -> float:
    """``max_t |f(z(t)) - f(z(0))|``."""
    f = compile_expr(expr, traj.symbols)
    vals = np.array([f(list(z)) for z in traj.states])
    return float(np.max(np.abs(vals - vals[0])))


def step_halving_ratio(rhs, symbols, z0, T: float, h: float, charts=(), refine: int = 64) -> float:
    """Endpoint error ratio ``err(h) / err(h/2)`` against a ``h/refine`` reference."""
    ref = integrate(rhs, symbols, z0, T, h / refine, charts).endpoint
    e1 = np.linalg.norm(integrate(rhs, symbols, z0, T, h, charts).endpoint - ref)
    e2 = np.linalg.norm(integrate(rhs, symbols, z0, T, h / 2, charts).endpoint - ref)
    return float(e1 / e2)


def first_viable_start(rhs, symbols, points, T, h, charts=(), chart_floor: float = 0.25):
    """First sample point whose trajectory stays on the charts for ``[0, T]``.

    Points with a chart value below ``chart_floor`` are skipped so that
    trajectories start well inside the region.  Returns ``(point, traj)`` or
    ``(None, None)``.
    """
    symbols = tuple(symbols)
    gs = [compile_expr(g, symbols) for g in charts]
    for pt in points:
        z0 = [float(pt[s]) for s in symbols]
        try:
            if any(g(z0) < chart_floor for g in gs):
                continue
            return pt, integrate(rhs, symbols, z0, T, h, charts)
        except (ChartExit, StepRejected, EvalDomainError):
            continue
    return None, None

