"""Lagrangian systems and the maximum-principle pipeline.

``LagrangianSystem -> PontryaginData -> Synthesis -> HamiltonianSystem``.
The abnormal multiplier is fixed to 1; singular extremals are not handled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from .errors import DegenerateSystem, EvalDomainError, RankUnstable, SingularPoint
from .evaluation import compile_expr, compile_many
from .expr import (
    ZeroTest,
    combine_tests,
    differentiate,
    is_zero,
    jacobian,
    jacobian_rank,
    numeric_rank,
    simplify,
    solve_linear,
)
from .frame import CoordinateFrame
from .sampling import SamplePlan, sample_points


@dataclass(frozen=True)
class LagrangianSystem:
    """Controlled dynamics ``q' = f(q, u)`` with running cost ``L(q, u)``.

    ``charts`` are expressions ``g`` defining the open region ``g > 0``.
    """

    name: str
    states: tuple
    controls: tuple
    dynamics: tuple
    cost: sp.Expr
    charts: tuple = ()

    def __post_init__(self):
        for attr in ("states", "controls", "dynamics", "charts"):
            object.__setattr__(self, attr, tuple(sp.sympify(v) for v in getattr(self, attr)))
        object.__setattr__(self, "cost", sp.sympify(self.cost))
        if len(self.dynamics) != len(self.states):
            raise ValueError(f"{len(self.dynamics)} dynamics for {len(self.states)} states")
        allowed = set(self.states) | set(self.controls)
        for e in (*self.dynamics, self.cost):
            extra = e.free_symbols - allowed
            if extra:
                raise ValueError(f"{e} uses symbols outside (q, u): {sorted(map(str, extra))}")

    @property
    def n(self) -> int:
        return len(self.states)

    @property
    def m(self) -> int:
        return len(self.controls)

    @property
    def frame(self) -> CoordinateFrame:
        return CoordinateFrame.lagrangian([str(s) for s in self.states], [str(u) for u in self.controls])

    @property
    def costates(self) -> tuple:
        return tuple(sp.Symbol(f"p{i}") for i in range(1, self.n + 1))

    @property
    def canonical_frame(self) -> CoordinateFrame:
        names = [str(p) for p in self.costates] + [str(q) for q in self.states]
        return CoordinateFrame(tuple(names), ("costate",) * self.n + ("state",) * self.n)


@dataclass(frozen=True)
class PontryaginData:
    system: LagrangianSystem
    function: sp.Expr
    stationarity: tuple


@dataclass(frozen=True)
class Synthesis:
    """Optimal synthesis ``u = u_hat(p, q)``; origin is "solved" or "user-supplied"."""

    controls: tuple
    values: tuple
    origin: str = "solved"

    def as_dict(self) -> dict:
        return dict(zip(self.controls, self.values))


@dataclass(frozen=True)
class HamiltonianSystem:
    system: LagrangianSystem
    synthesis: Synthesis
    hamiltonian: sp.Expr

    @property
    def frame(self) -> CoordinateFrame:
        return self.system.canonical_frame

    @property
    def costates(self) -> tuple:
        return self.system.costates

    @property
    def states(self) -> tuple:
        return self.system.states

    @property
    def charts(self) -> tuple:
        return self.system.charts

    @property
    def n(self) -> int:
        return self.system.n


def pontryagin_function(system: LagrangianSystem) -> PontryaginData:
    p = system.costates
    H = simplify(sum(pi * fi for pi, fi in zip(p, system.dynamics)) - system.cost)
    return PontryaginData(system, H, tuple(differentiate(H, u) for u in system.controls))


def solve_synthesis(data: PontryaginData) -> Synthesis:
    """Solve the stationarity system for the controls (affine case only).

    Raises NotLinear (supply the synthesis by hand) or Singular.
    """
    sol = solve_linear(data.stationarity, data.system.controls)
    synth = Synthesis(data.system.controls, tuple(sol[u] for u in data.system.controls), "solved")
    residual = stationarity_residual(data, synth)
    if not residual.holds:
        raise DegenerateSystem("stationarity", f"back-substitution left a residual: {residual}")
    return synth


def stationarity_residual(data: PontryaginData, synth: Synthesis, **kw) -> ZeroTest:
    sub = synth.as_dict()
    return combine_tests(
        is_zero(s.xreplace(sub), data.system.charts, **kw) for s in data.stationarity
    )


@dataclass(frozen=True)
class NondegeneracyReport:
    control_rank: int
    m: int
    n: int
    stationarity: ZeroTest
    hessian_rank: int | None = None


def check_nondegenerate(system: LagrangianSystem, synth: Synthesis, points=None,
                        data: PontryaginData | None = None) -> NondegeneracyReport:
    """Full rank of ``f_u``, stationarity at the synthesis, ``m <= n``.

    For user-supplied syntheses the control Hessian of the Pontryagin
    function must also be nonsingular at the sample points.
    """
    data = data or pontryagin_function(system)
    if system.m > system.n:
        raise DegenerateSystem("m<=n", f"{system.m} controls exceed {system.n} states")
    qu_points = None
    if points is not None:
        sub = synth.as_dict()
        qu_points = []
        for pt in points:
            vals = dict(pt)
            syms = list(vals)
            for u, uh in sub.items():
                vals[u] = compile_expr(uh, syms)([float(pt[s]) for s in syms])
            qu_points.append(vals)
    rank = jacobian_rank(system.dynamics, system.controls, qu_points, charts=system.charts)
    if rank < system.m:
        raise DegenerateSystem("rank f_u", f"rank {rank} < m={system.m}")
    stat = stationarity_residual(data, synth)
    if not stat.holds:
        raise DegenerateSystem("stationarity", f"dH/du does not vanish at the synthesis: {stat}")
    hess_rank = None
    if synth.origin != "solved":
        hess = [[differentiate(d, u) for u in system.controls] for d in data.stationarity]
        hess = [[h.xreplace(synth.as_dict()) for h in row] for row in hess]
        flat = [h for row in hess for h in row]
        syms = sorted(set().union(*(h.free_symbols for h in flat)) | set(data.system.costates)
                      | set(system.states), key=str)
        pts = sample_points(SamplePlan(tuple(syms), count=20, charts=system.charts, guards=tuple(flat)))
        hess_rank = min(
            numeric_rank([[compile_expr(h, syms)([float(p[s]) for s in syms]) for h in row] for row in hess])
            for p in pts
        )
        if hess_rank < system.m:
            raise DegenerateSystem("uniqueness", f"control Hessian rank {hess_rank} < m={system.m}")
    return NondegeneracyReport(rank, system.m, system.n, stat, hess_rank)


def hamiltonianize(data: PontryaginData, synth: Synthesis) -> HamiltonianSystem:
    H = simplify(data.function.xreplace(synth.as_dict()))
    if H.free_symbols & set(data.system.controls):
        raise DegenerateSystem("synthesis", "Hamiltonian still depends on controls")
    return HamiltonianSystem(data.system, synth, H)


def hamiltonian_system(system: LagrangianSystem, synth: Synthesis | None = None) -> HamiltonianSystem:
    """Convenience: Pontryagin function, synthesis (solved unless given), Hamiltonian."""
    data = pontryagin_function(system)
    if synth is None:
        synth = solve_synthesis(data)
    return hamiltonianize(data, synth)


def canonical_equations(hs: HamiltonianSystem) -> tuple:
    """Right-hand sides ``(p1', ..., pn', q1', ..., qn')``."""
    H = hs.hamiltonian
    pdot = tuple(-differentiate(H, q) for q in hs.states)
    qdot = tuple(differentiate(H, p) for p in hs.costates)
    return tuple(simplify(e) for e in pdot) + qdot


def lie_derivatives(hs: HamiltonianSystem, f, depth: int) -> list:
    """``[f, L_h f, ..., L_h^depth f]`` along the canonical field."""
    rhs = canonical_equations(hs)
    coords = hs.frame.symbols
    out = [simplify(f)]
    for _ in range(depth):
        g = out[-1]
        out.append(simplify(sum(differentiate(g, z) * r for z, r in zip(coords, rhs))))
    return out


@dataclass(frozen=True)
class RegularityReport:
    point: tuple
    field: tuple
    ranks: tuple  # rank of the family truncated at depth s, s = 0..depth
    stable: bool
    perturbed_ranks: tuple = field(default=())

    @property
    def rank(self) -> int:
        return self.ranks[-1]


def check_regularity(hs: HamiltonianSystem, point, depth: int | None = None, *,
                     radius: float = 1e-3, perturbations: int = 10, seed: int = 0) -> RegularityReport:
    """Field non-vanishing and local constancy of the rank of ``L_h^s q^i``.

    ``point`` lists values in canonical order ``(p1..pn, q1..qn)``.
    Raises SingularPoint or RankUnstable.
    """
    depth = 2 * hs.n if depth is None else depth
    coords = hs.frame.symbols
    z = [float(v) for v in point]
    try:
        field_val = compile_many(canonical_equations(hs), coords)(z)
    except EvalDomainError as exc:
        raise SingularPoint(f"canonical field undefined at {tuple(z)}: {exc}") from exc
    if max(abs(v) for v in field_val) == 0.0:
        raise SingularPoint(f"canonical field vanishes at {tuple(z)}")
    families = [lie_derivatives(hs, q, depth) for q in hs.states]
    J = jacobian([g for fam in families for g in fam], coords)

    def ranks_at(vals):
        full = [compile_many(row, coords)(vals) for row in J]
        # rows are grouped state-major; pick the rows belonging to each truncation
        out = []
        for s in range(depth + 1):
            idx = [k * (depth + 1) + j for k in range(hs.n) for j in range(s + 1)]
            out.append(numeric_rank([full[i] for i in idx]))
        return out

    ranks = ranks_at(z)
    stable = len(ranks) < 2 or ranks[-1] == ranks[-2]
    rng = np.random.default_rng(seed)
    perturbed = []
    for _ in range(perturbations):
        d = rng.normal(size=len(z))
        d *= radius * rng.uniform() / np.linalg.norm(d)
        try:
            r = ranks_at(list(np.asarray(z) + d))[-1]
        except EvalDomainError as exc:
            raise SingularPoint(f"field undefined near {tuple(z)}: {exc}") from exc
        perturbed.append(r)
        if r != ranks[-1]:
            raise RankUnstable(ranks[-1], r, tuple(np.asarray(z) + d))
    return RegularityReport(tuple(z), tuple(field_val), tuple(ranks), stable, tuple(perturbed))


__all__ = [
    "HamiltonianSystem",
    "LagrangianSystem",
    "NondegeneracyReport",
    "PontryaginData",
    "RegularityReport",
    "Synthesis",
    "canonical_equations",
    "check_nondegenerate",
    "check_regularity",
    "hamiltonian_system",
    "hamiltonianize",
    "lie_derivatives",
    "pontryagin_function",
    "solve_synthesis",
]
