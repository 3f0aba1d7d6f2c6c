"""Checking and building factorizations of Lagrangian systems.

A candidate supplies maps ``x_i(p, q), y_i(p, q)`` (``i = 1..nu``) and
optionally the potential ``Q~`` with ``L_h(sum x_i dy_i) = dQ~``.  From a
passing candidate the factor Hamiltonian ``G(x, y)`` and the factor
Lagrangian system ``y' = F(y, v)``, cost ``Q(y, v)`` are recovered.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import sympy as sp

from .control import HamiltonianSystem, canonical_equations, check_nondegenerate, pontryagin_function
from .errors import (
    DegenerateSystem,
    EliminationFailure,
    EvalDomainError,
    ExhaustedSampling,
    FiberObstruction,
    LinearSolveError,
    NonIntegrableTerm,
    NotClosed,
    RankDeficient,
)
from .evaluation import compile_expr, compile_many
from .expr import (
    OneForm,
    ZeroTest,
    combine_tests,
    differentiate,
    has_atoms,
    is_zero,
    jacobian,
    jacobian_rank,
    numeric_rank,
    pointwise_ranks,
    simplify,
    solve_linear,
    to_text,
)
from .frame import CoordinateFrame
from .numeric import (
    conservation_drift,
    first_viable_start,
    map_trajectory,
    residual_dynamics,
)
from .report import (
    FAIL,
    INCONCLUSIVE,
    PASS,
    SKIPPED,
    CheckResult,
    VerificationReport,
    check_from_test,
    status_from,
)
from .sampling import SamplePlan, sample_points
from .symplectic import (
    PulledBackTwoForm,
    drop_constant,
    interior_product,
    is_closed,
    lie_derivative_fn,
    lie_derivative_oneform,
    reconstruct_potential,
    tautological_form,
)

DRIFT_TOL = 1e-6
DYNAMICS_TOL = 1e-5


@dataclass(frozen=True)
class FactorSpec:
    """A declared factor Lagrangian system ``y' = F(y, v)``, cost ``Q(y, v)``."""

    dynamics: tuple
    cost: sp.Expr
    controls: tuple

    def __post_init__(self):
        object.__setattr__(self, "dynamics", tuple(sp.sympify(f) for f in self.dynamics))
        object.__setattr__(self, "cost", sp.sympify(self.cost))
        object.__setattr__(self, "controls", tuple(self.controls))


@dataclass(frozen=True)
class FactorizationCandidate:
    name: str
    xs: tuple
    ys: tuple
    qtilde: sp.Expr | None = None
    declared: FactorSpec | None = None

    def __post_init__(self):
        object.__setattr__(self, "xs", tuple(sp.sympify(x) for x in self.xs))
        object.__setattr__(self, "ys", tuple(sp.sympify(y) for y in self.ys))
        if self.qtilde is not None:
            object.__setattr__(self, "qtilde", sp.sympify(self.qtilde))
        if len(self.xs) != len(self.ys) or not self.xs:
            raise ValueError("candidate needs nu >= 1 matching x and y maps")
        if self.declared is not None and len(self.declared.dynamics) != self.nu:
            raise ValueError("declared factor dynamics count differs from nu")

    @property
    def nu(self) -> int:
        return len(self.xs)

    @property
    def factor_frame(self) -> CoordinateFrame:
        mu = 0 if self.declared is None else len(self.declared.controls)
        return CoordinateFrame.factor(self.nu, mu)

    @property
    def factor_xs(self) -> tuple:
        return self.factor_frame.of_role("factor-costate")

    @property
    def factor_ys(self) -> tuple:
        return self.factor_frame.of_role("factor-state")

    @property
    def maps(self) -> tuple:
        """Maps in factor-frame order ``(x_1..x_nu, y_1..y_nu)``."""
        return self.xs + self.ys

    @property
    def two_form(self) -> PulledBackTwoForm:
        return PulledBackTwoForm(self.xs, self.ys)

    def pullback(self, e):
        """``e o phi`` for ``e`` on the factor frame."""
        sub = dict(zip(self.factor_xs + self.factor_ys, self.maps))
        return sp.sympify(e).xreplace(sub)

    def with_qtilde(self, qtilde) -> "FactorizationCandidate":
        return replace(self, qtilde=qtilde)


def identity_candidate(hs: HamiltonianSystem) -> FactorizationCandidate:
    """``x = p, y = q`` with ``Q~`` the running cost at the synthesis."""
    qtilde = simplify(hs.system.cost.xreplace(hs.synthesis.as_dict()))
    return FactorizationCandidate("identity", hs.costates, hs.states, qtilde)


def canonical_points(hs: HamiltonianSystem, count: int = 100, seed: int = 42, guards: Sequence = ()):
    plan = SamplePlan(hs.frame.symbols, count=count, seed=seed, charts=hs.charts,
                      guards=(hs.hamiltonian, *guards))
    return sample_points(plan)


def _max_abs(exprs: Sequence, points, symbols) -> float | None:
    fns = [compile_expr(e, symbols) for e in exprs]
    worst = None
    for pt in points:
        vals = [float(pt[s]) for s in symbols]
        try:
            v = max((abs(f(vals)) for f in fns), default=0.0)
        except EvalDomainError:
            continue
        worst = v if worst is None else max(worst, v)
    return worst


# -- independence -----------------------------------------------------------


@dataclass(frozen=True)
class IndependenceResult:
    rank: int
    expected: int
    ranks: tuple


def check_independence(hs: HamiltonianSystem, cand: FactorizationCandidate, points=None) -> IndependenceResult:
    """The 2*nu maps have full-rank Jacobian at every sample point.

    Raises RankDeficient with the lowest rank found and a witness point.
    """
    points = points if points is not None else canonical_points(hs, 100, guards=cand.maps)
    ranks = pointwise_ranks(cand.maps, hs.frame.symbols, points)
    expected = 2 * cand.nu
    low = min(ranks)
    if low < expected:
        k = ranks.index(low)
        raise RankDeficient(low, expected, {str(s): v for s, v in points[k].items()})
    return IndependenceResult(low, expected, tuple(ranks))


# -- the factorization equation --------------------------------------------


def factorization_residual(hs: HamiltonianSystem, cand: FactorizationCandidate) -> OneForm:
    """``L_h(sum x_i dy_i) - dQ~`` on the canonical frame."""
    if cand.qtilde is None:
        raise ValueError("candidate has no Q~; reconstruct it first")
    coords = hs.frame.symbols
    lhs = lie_derivative_oneform(hs, tautological_form(cand.xs, cand.ys, coords))
    return lhs - OneForm.differential(cand.qtilde, coords)


def verify_factorization_equation(hs: HamiltonianSystem, cand: FactorizationCandidate, points=None,
                                  tol: float = 1e-8, **kw) -> CheckResult:
    residual = factorization_residual(hs, cand)
    test = residual.is_zero(hs.charts, **kw)
    points = points if points is not None else canonical_points(hs, 100, guards=cand.maps)
    num = _max_abs(residual.coeffs, points, hs.frame.symbols)
    check = check_from_test("factorization_equation", test, num, tol)
    if check.failed:
        check.detail = f"residual L_h(x dy) - dQ~ = {residual}"
        if is_closed(residual, hs.charts).test.holds:
            try:
                pot = drop_constant(reconstruct_potential(residual, _default_base(hs, residual)))
                check.detail += f" = d({to_text(pot)})"
            except (NotClosed, NonIntegrableTerm, EvalDomainError):
                pass
    return check


def interior_product_route(hs: HamiltonianSystem, cand: FactorizationCandidate, **kw) -> ZeroTest:
    """Closedness of ``i_h Omega`` plus ``d(x (y, H) - Q~) == i_h Omega``.

    Equivalent to the factorization equation through the Cartan formula.
    """
    coords = hs.frame.symbols
    ih = interior_product(hs, cand.two_form)
    closed = is_closed(ih, hs.charts, **kw).test
    if closed.is_no:
        return closed
    gbar = build_Gbar(hs, cand)
    match = (OneForm.differential(gbar, coords) - ih).is_zero(hs.charts, **kw)
    return combine_tests([closed, match])


def _default_base(hs: HamiltonianSystem, rho: OneForm) -> dict:
    coords = rho.symbols
    for value in (0, 1):
        pt = [float(value)] * len(coords)
        try:
            if all(compile_expr(g, coords)(pt) > 0 for g in hs.charts):
                for c in rho.coeffs:
                    compile_expr(c, coords)(pt)
                return {c: value for c in coords}
        except EvalDomainError:
            continue
    pt = sample_points(SamplePlan(coords, count=1, charts=hs.charts, guards=rho.coeffs))[0]
    return dict(pt)


def reconstruct_Qtilde(hs: HamiltonianSystem, cand: FactorizationCandidate, base: dict | None = None):
    """Potential of ``L_h(sum x_i dy_i)``, additive constant dropped.

    Raises NotClosed when the candidate cannot be a factorization, or
    NonIntegrableTerm when the antiderivative is out of reach.
    """
    coords = hs.frame.symbols
    rho = lie_derivative_oneform(hs, tautological_form(cand.xs, cand.ys, coords))
    closed = is_closed(rho, hs.charts)
    if closed.test.is_no:
        raise NotClosed(closed.pair, closed.test.witness)
    base = base if base is not None else _default_base(hs, rho)
    return drop_constant(reconstruct_potential(rho, base, hs.charts))


def build_Gbar(hs: HamiltonianSystem, cand: FactorizationCandidate):
    """``sum x_i (y_i, H) - Q~`` on the canonical frame."""
    if cand.qtilde is None:
        raise ValueError("candidate has no Q~")
    total = sum(x * lie_derivative_fn(hs, y) for x, y in zip(cand.xs, cand.ys))
    return simplify(total - cand.qtilde)


def check_first_integral(hs: HamiltonianSystem, gbar, **kw) -> ZeroTest:
    return is_zero(lie_derivative_fn(hs, gbar), hs.charts, **kw)


# -- elimination ------------------------------------------------------------


def _sign_from_charts(s, charts) -> int:
    for g in charts:
        ratio = simplify(sp.sympify(g) / s)
        if ratio.is_Rational and ratio != 0:
            return 1 if ratio > 0 else -1
    return 0


def _isolate(eq, s, charts):
    """Solve ``eq == 0`` for ``s`` if affine or a pure power in ``s``; else None."""
    num, _ = sp.fraction(sp.together(simplify(eq)))
    num = sp.expand(num)
    if any(s in a.free_symbols for a in sp.preorder_traversal(num) if a.is_Pow and not a.exp.is_Integer):
        return None
    try:
        poly = sp.Poly(num, s)
    except sp.PolynomialError:
        return None
    deg = poly.degree()
    if deg < 1:
        return None
    coeffs = poly.all_coeffs()
    lead, const = coeffs[0], coeffs[-1]
    if any(c != 0 for c in coeffs[1:-1]) or s in lead.free_symbols or s in const.free_symbols:
        return None
    if simplify(lead) == 0:
        return None
    rhs = simplify(-const / lead)
    if deg == 1:
        return rhs
    sign = _sign_from_charts(s, charts)
    if sign == 0:
        return None
    root = sp.Pow(sign * rhs if deg % 2 else rhs, sp.Rational(1, deg))
    return simplify(sign * root)


def _coefficient_rank(eq, s) -> int:
    """Preference order: affine with constant coefficient, affine, pure power."""
    d = differentiate(eq, s)
    if d.is_Number:
        return 0
    if s not in d.free_symbols:
        return 1
    return 2


def eliminate(fns: Sequence, equations: Sequence[tuple], sources: Sequence, charts: Sequence = (),
              node_limit: int = 2000) -> tuple:
    """Rewrite ``fns`` through ``target = expr(sources)`` relations.

    Solves the relations one by one for source symbols (affine or pure-power
    cases, even roots on their chart branch), substitutes, and succeeds when
    every function is free of ``sources``.  Raises EliminationFailure.
    """
    sources = tuple(sources)
    src = set(sources)
    budget = [node_limit]

    def search(eqs, cur):
        budget[0] -= 1
        if budget[0] < 0:
            return None
        if not eqs:
            cur = [simplify(f) for f in cur]
            if any(f.free_symbols & src for f in cur):
                return None
            return tuple(cur)
        options = []
        for k, (t, e) in enumerate(eqs):
            rel = simplify(t - e)
            for s in sources:
                if s in rel.free_symbols:
                    options.append((_coefficient_rank(rel, s), k, s, rel))
        options.sort(key=lambda o: (o[0], o[1], sources.index(o[2])))
        for _, k, s, rel in options:
            sol = _isolate(rel, s, charts)
            if sol is None:
                continue
            sub = {s: sol}
            rest = [(t, simplify(e.xreplace(sub))) for j, (t, e) in enumerate(eqs) if j != k]
            out = search(rest, [f.xreplace(sub) for f in cur])
            if out is not None:
                return out
        return None

    result = search([(t, sp.sympify(e)) for t, e in equations], [sp.sympify(f) for f in fns])
    if result is None:
        raise EliminationFailure(
            "could not express " + ", ".join(to_text(f) for f in fns)
            + " through " + ", ".join(f"{t} = {to_text(e)}" for t, e in equations)
        )
    return result


def fiber_constancy(hs: HamiltonianSystem, cand: FactorizationCandidate, f, points=None) -> dict | None:
    """Witness that ``df`` leaves the span of the map gradients, or None.

    The witness holds the point and a direction tangent to the fiber along
    which ``f`` changes.
    """
    coords = hs.frame.symbols
    points = points if points is not None else canonical_points(hs, 100, guards=(*cand.maps, f))
    J = jacobian(cand.maps, coords)
    df = [differentiate(f, c) for c in coords]
    for pt in points:
        vals = [float(pt[c]) for c in coords]
        try:
            A = np.array([compile_many(row, coords)(vals) for row in J])
            g = np.array(compile_many(df, coords)(vals))
        except EvalDomainError:
            continue
        if numeric_rank(np.vstack([A, g])) > numeric_rank(A):
            _, s, vt = np.linalg.svd(A)
            r = numeric_rank(A)
            kernel = vt[r:]
            direction = kernel.T @ (kernel @ g)
            return {"point": {str(c): v for c, v in pt.items()},
                    "direction": [float(d) for d in direction / np.linalg.norm(direction)]}
    return None


def express_through_map(f, cand: FactorizationCandidate, hs: HamiltonianSystem, points=None):
    """Find ``g(x, y)`` with ``g o phi == f``.

    Raises FiberObstruction when ``f`` is not constant on the fibers of the
    map, EliminationFailure when the symbolic inversion is out of reach.
    """
    witness = fiber_constancy(hs, cand, f, points)
    if witness is not None:
        raise FiberObstruction(f"{to_text(f)} varies along the fibers of the candidate map", witness)
    eqs = list(zip(cand.factor_xs + cand.factor_ys, cand.maps))
    (g,) = eliminate([f], eqs, hs.frame.symbols, hs.charts)
    check = is_zero(cand.pullback(g) - f, hs.charts)
    if not check.holds:
        raise EliminationFailure(f"elimination produced {to_text(g)}, which does not pull back to {to_text(f)}")
    return g


# -- phi-relatedness and observability -------------------------------------


def phi_related_residuals(hs: HamiltonianSystem, cand: FactorizationCandidate, G) -> list:
    """``(y_i, H) - G_x_i o phi`` and ``(x_i, H) + G_y_i o phi`` for each i."""
    out = []
    for x, y, X, Y in zip(cand.xs, cand.ys, cand.factor_xs, cand.factor_ys):
        out.append(simplify(lie_derivative_fn(hs, y) - cand.pullback(sp.diff(G, X))))
        out.append(simplify(lie_derivative_fn(hs, x) + cand.pullback(sp.diff(G, Y))))
    return out


def check_phi_related(hs: HamiltonianSystem, cand: FactorizationCandidate, G, **kw) -> ZeroTest:
    return combine_tests(is_zero(r, hs.charts, **kw) for r in phi_related_residuals(hs, cand, G))


@dataclass(frozen=True)
class ObservabilityResult:
    observable: bool
    function: sp.Expr | None = None  # first failing function
    witness: dict | None = None
    ranks: tuple = ()  # (rank without f, rank with f) at the witness


def check_observability(hs: HamiltonianSystem, fns: Sequence, points=None,
                        with_derivative: bool = True) -> ObservabilityResult:
    """Each function (and its derivative along the flow) factors through ``(q, u_hat)``.

    Tested as ``rank J(q, u_hat) == rank J(q, u_hat, f)`` at every point.
    """
    coords = hs.frame.symbols
    base = list(hs.states) + list(hs.synthesis.values)
    targets = []
    for f in fns:
        targets.append(simplify(f))
        if with_derivative:
            targets.append(lie_derivative_fn(hs, f))
    points = points if points is not None else canonical_points(hs, 100, guards=(*base, *targets))
    Jb = jacobian(base, coords)
    for f in targets:
        df = [differentiate(f, c) for c in coords]
        for pt in points:
            vals = [float(pt[c]) for c in coords]
            try:
                A = np.array([compile_many(row, coords)(vals) for row in Jb])
                g = np.array(compile_many(df, coords)(vals))
            except EvalDomainError:
                continue
            r0, r1 = numeric_rank(A), numeric_rank(np.vstack([A, g]))
            if r1 > r0:
                return ObservabilityResult(False, f, {str(c): v for c, v in pt.items()}, (r0, r1))
    return ObservabilityResult(True)


# -- factor systems ---------------------------------------------------------


@dataclass(frozen=True)
class FactorSystem:
    frame: CoordinateFrame
    hamiltonian: sp.Expr  # G(x, y)
    controls: tuple
    synthesis: tuple  # v_hat(x, y)
    dynamics: tuple  # F(y, v)
    cost: sp.Expr  # Q(y, v)
    mu: int
    stationarity: ZeroTest | None = None
    field_match: ZeroTest | None = None

    @property
    def nu(self) -> int:
        return len(self.dynamics)

    @property
    def xs(self) -> tuple:
        return self.frame.of_role("factor-costate")

    @property
    def ys(self) -> tuple:
        return self.frame.of_role("factor-state")

    def pontryagin(self):
        return simplify(sum(x * f for x, f in zip(self.xs, self.dynamics)) - self.cost)

    def canonical_equations(self) -> tuple:
        """``(x_1'..x_nu', y_1'..y_nu')`` of the factor Hamiltonian."""
        G = self.hamiltonian
        return tuple(-differentiate(G, y) for y in self.ys) + tuple(differentiate(G, x) for x in self.xs)

    def as_spec(self) -> FactorSpec:
        return FactorSpec(self.dynamics, self.cost, self.controls)


def factor_canonical_equations(G, nu: int) -> tuple:
    frame = CoordinateFrame.factor(nu)
    xs, ys = frame.of_role("factor-costate"), frame.of_role("factor-state")
    return tuple(-differentiate(G, y) for y in ys) + tuple(differentiate(G, x) for x in xs)


def _factor_points(exprs, symbols, count=20, seed=7):
    plan = SamplePlan(tuple(symbols), count=count, seed=seed, guards=tuple(exprs))
    return sample_points(plan)


def declared_hamiltonian(spec: FactorSpec, nu: int) -> tuple:
    """``(G, v_hat)`` of a declared factor system via its Pontryagin function."""
    frame = CoordinateFrame.factor(nu, len(spec.controls))
    xs = frame.of_role("factor-costate")
    T = simplify(sum(x * f for x, f in zip(xs, spec.dynamics)) - spec.cost)
    stationarity = [differentiate(T, v) for v in spec.controls]
    sol = solve_linear(stationarity, spec.controls)
    vhat = tuple(sol[v] for v in spec.controls)
    return simplify(T.xreplace(sol)), vhat


def build_factor_system(hs: HamiltonianSystem, cand: FactorizationCandidate, G=None) -> FactorSystem:
    """Factor Lagrangian system from the factor Hamiltonian.

    ``F~_i = dG/dx_i``; ``mu`` is the generic rank of the x-Hessian of G;
    ``v_hat`` are the lowest-index independent ``F~_i``; ``F`` and
    ``Q = sum x_i F~_i - G`` are rewritten through ``(y, v_hat)``.
    Raises EliminationFailure.
    """
    if G is None:
        G = express_through_map(build_Gbar(hs, cand), cand, hs)
    nu = cand.nu
    frame0 = CoordinateFrame.factor(nu)
    xs, ys = frame0.of_role("factor-costate"), frame0.of_role("factor-state")
    Ft = [differentiate(G, x) for x in xs]
    pts = None
    if any(has_atoms(f) for f in Ft) or nu > 4:
        pts = _factor_points(Ft + [d for f in Ft for d in (differentiate(f, x) for x in xs)], xs + ys)
    mu = jacobian_rank(Ft, xs, pts)
    chosen: list[int] = []
    for i, f in enumerate(Ft):
        if len(chosen) == mu:
            break
        if jacobian_rank([Ft[k] for k in chosen] + [f], xs, pts) > len(chosen):
            chosen.append(i)
    frame = CoordinateFrame.factor(nu, mu)
    vs = frame.of_role("factor-control")
    vhat = tuple(Ft[i] for i in chosen)
    Qbar = simplify(sum(x * f for x, f in zip(xs, Ft)) - G)
    eqs = list(zip(vs, vhat))
    *F, Q = eliminate(Ft + [Qbar], eqs, xs)
    sub = dict(zip(vs, vhat))
    T = simplify(sum(x * f for x, f in zip(xs, F)) - Q)
    stationarity = combine_tests(is_zero(differentiate(T, v).xreplace(sub)) for v in vs)
    match = combine_tests(is_zero(Ft[i] - F[i].xreplace(sub)) for i in range(nu))
    return FactorSystem(frame, simplify(G), vs, vhat, tuple(F), Q, mu, stationarity, match)


# -- boundary determinacy -----------------------------------------------------

OVER, WELL, UNDER = "OverDetermined", "WellDetermined", "UnderDetermined"


@dataclass(frozen=True)
class BoundaryFiber:
    q0: dict
    rank: int
    nu: int
    verdict: str


def classify_boundary(hs: HamiltonianSystem, cand: FactorizationCandidate, fibers: int = 20,
                      samples: int = 5, seed: int = 42) -> list[BoundaryFiber]:
    """Rank of ``p -> (x, y)(p, q0)`` on sampled fibers ``q = q0``.

    Rank below nu: over-determined; equal: well-determined; above: under.
    """
    ps, qs = hs.costates, hs.states
    base = canonical_points(hs, fibers, seed=seed, guards=cand.maps)
    out = []
    for k, pt in enumerate(base):
        q0 = {q: sp.Rational(pt[q].numerator, pt[q].denominator) for q in qs}
        maps = [m.xreplace(q0) for m in cand.maps]
        charts = tuple(sp.sympify(g).xreplace(q0) for g in hs.charts)
        charts = tuple(g for g in charts if g.free_symbols)
        plan = SamplePlan(ps, count=samples, seed=seed + k + 1, charts=charts, guards=tuple(maps))
        try:
            ppts = sample_points(plan)
        except ExhaustedSampling:
            ppts = [{p: pt[p] for p in ps}]
        d = max(pointwise_ranks(maps, ps, ppts))
        verdict = OVER if d < cand.nu else WELL if d == cand.nu else UNDER
        out.append(BoundaryFiber({str(q): v for q, v in q0.items()}, d, cand.nu, verdict))
    return out


# -- full pipeline -------------------------------------------------------------


@dataclass
class VerifyOptions:
    samples: int = 100
    seed: int = 42
    tol: float = 1e-8
    T: float = 1.0
    h: float = 1e-3


def _skip(name: str, why: str) -> CheckResult:
    return CheckResult(name, SKIPPED, detail=why)


def verify_candidate(hs: HamiltonianSystem, cand: FactorizationCandidate,
                     options: VerifyOptions | None = None) -> VerificationReport:
    """Run every factorization check on ``cand`` and collect a report."""
    opt = options or VerifyOptions()
    kw = {"samples": opt.samples, "seed": opt.seed}
    report = VerificationReport(hs.system.name, cand.name)
    report.values["candidate"] = cand
    coords = hs.frame.symbols
    points = canonical_points(hs, opt.samples, opt.seed, guards=cand.maps)

    # synthesis and non-degeneracy
    try:
        nd = check_nondegenerate(hs.system, hs.synthesis, points, pontryagin_function(hs.system))
        report.add(check_from_test("nondegenerate", nd.stationarity,
                                   detail=f"rank f_u = {nd.control_rank} = m, synthesis {hs.synthesis.origin}"))
    except DegenerateSystem as exc:
        report.add(CheckResult("nondegenerate", FAIL, detail=str(exc)))

    # independence of the maps
    try:
        ind = check_independence(hs, cand, points)
        detail = f"rank {ind.rank} = 2*nu at all {len(points)} points"
        if cand.nu >= hs.n:
            detail += f"; nu = {cand.nu} is not below n = {hs.n} (no order reduction)"
        report.add(CheckResult("independence", PASS, detail=detail))
    except RankDeficient as exc:
        report.add(CheckResult("independence", FAIL, witness=exc.witness, detail=str(exc)))

    # Q~: given, from the declared factor system, or reconstructed
    declared_G = None
    if cand.declared is not None:
        try:
            declared_G, vhat = declared_hamiltonian(cand.declared, cand.nu)
            report.artifacts["declared_G"] = to_text(declared_G)
        except LinearSolveError as exc:
            report.add(CheckResult("declared_factor", FAIL, detail=f"declared factor system: {exc}"))
            vhat = None
    if cand.qtilde is None:
        if cand.declared is not None and declared_G is not None:
            qsub = dict(zip(cand.declared.controls, vhat))
            qt = simplify(cand.pullback(cand.declared.cost.xreplace(qsub)))
            cand = cand.with_qtilde(qt)
            report.artifacts["qtilde"] = to_text(qt)
            report.artifacts["qtilde_source"] = "declared factor cost at its synthesis"
        else:
            rho = lie_derivative_oneform(hs, tautological_form(cand.xs, cand.ys, coords))
            closed = is_closed(rho, hs.charts, **kw)
            if closed.test.is_no:
                a, b = closed.pair
                report.add(CheckResult("closedness", FAIL, closed.test.verdict, witness=closed.test.witness,
                                       detail=f"mixed partials of L_h(x dy) differ in ({a}, {b})"))
            else:
                report.add(check_from_test("closedness", closed.test))
                try:
                    qt = reconstruct_Qtilde(hs, cand)
                    cand = cand.with_qtilde(qt)
                    report.artifacts["qtilde"] = to_text(qt)
                    report.artifacts["qtilde_source"] = "reconstructed"
                except NonIntegrableTerm as exc:
                    report.add(CheckResult("qtilde", INCONCLUSIVE, detail=str(exc)))
    else:
        report.artifacts["qtilde"] = to_text(cand.qtilde)
        report.artifacts["qtilde_source"] = "given"

    if cand.qtilde is None:
        for name in ("factorization_equation", "first_integral", "phi_related", "observability"):
            report.add(_skip(name, "no Q~ available"))
        return report

    report.add(verify_factorization_equation(hs, cand, points, opt.tol, **kw))
    prop2 = interior_product_route(hs, cand, **kw)
    report.add(check_from_test("interior_product_exact", prop2,
                               detail="closedness of i_h Omega and its match with d(G~)"))

    gbar = build_Gbar(hs, cand)
    report.artifacts["gbar"] = to_text(gbar)
    report.values.update(candidate=cand, gbar=gbar)

    # factor Hamiltonian
    G = declared_G
    if G is None:
        try:
            G = express_through_map(gbar, cand, hs, points)
            report.artifacts["G"] = to_text(G)
        except FiberObstruction as exc:
            report.add(CheckResult("fiber_constancy", FAIL, witness=exc.witness, detail=str(exc)))
        except EliminationFailure as exc:
            report.add(CheckResult("fiber_constancy", PASS, detail="G~ constant on fibers (numeric)"))
            report.add(CheckResult("elimination", INCONCLUSIVE, detail=str(exc)))
    else:
        consistent = OneForm.differential(simplify(cand.pullback(G) - gbar), coords).is_zero(hs.charts, **kw)
        report.add(check_from_test("declared_consistency", consistent,
                                   detail="G o phi equals G~ up to a constant"))

    report.values["G"] = G

    # numeric trajectory for drift and mapped-dynamics checks
    rhs = canonical_equations(hs)
    _, traj = first_viable_start(rhs, coords, points, opt.T, opt.h, hs.charts)

    fi = check_first_integral(hs, gbar, **kw)
    drift = None if traj is None else conservation_drift(gbar, traj)
    report.add(check_from_test("first_integral", fi, drift, DRIFT_TOL))

    if G is not None:
        residuals = phi_related_residuals(hs, cand, G)
        test = combine_tests(is_zero(r, hs.charts, **kw) for r in residuals)
        report.add(check_from_test("phi_related", test, _max_abs(residuals, points, coords), opt.tol))
    else:
        report.add(_skip("phi_related", "no factor Hamiltonian"))

    obs = check_observability(hs, cand.ys, points)
    obs_q = check_observability(hs, [cand.qtilde], points, with_derivative=False)
    bad = obs if not obs.observable else obs_q
    if bad.observable:
        report.add(CheckResult("observability", PASS, detail="y, L_h y and Q~ factor through (q, u_hat)"))
    else:
        report.add(CheckResult("observability", FAIL, witness=bad.witness,
                               detail=f"{to_text(bad.function)} not observable: rank {bad.ranks[0]} -> {bad.ranks[1]}"))

    if traj is None:
        report.add(CheckResult("numeric_flow", INCONCLUSIVE, detail="no sample trajectory stayed on the charts"))
        return report
    report.add(CheckResult("conservation_H", status_from(None, conservation_drift(hs.hamiltonian, traj), DRIFT_TOL),
                           numeric_residual=conservation_drift(hs.hamiltonian, traj), tolerance=DRIFT_TOL))
    if G is not None:
        frhs = factor_canonical_equations(G, cand.nu)
        mapped = map_trajectory(cand.maps, cand.factor_xs + cand.factor_ys, traj)
        try:
            res = residual_dynamics(frhs, mapped)
            report.add(CheckResult("mapped_dynamics", status_from(None, res, DYNAMICS_TOL),
                                   numeric_residual=res, tolerance=DYNAMICS_TOL,
                                   detail="central differences of phi(z(t)) vs factor field"))
        except EvalDomainError as exc:
            report.add(CheckResult("mapped_dynamics", INCONCLUSIVE, detail=str(exc)))
    return report


__all__ = [
    "BoundaryFiber",
    "FactorSpec",
    "FactorSystem",
    "FactorizationCandidate",
    "OVER",
    "UNDER",
    "WELL",
    "VerifyOptions",
    "build_Gbar",
    "build_factor_system",
    "check_first_integral",
    "check_independence",
    "check_observability",
    "check_phi_related",
    "classify_boundary",
    "declared_hamiltonian",
    "eliminate",
    "factor_canonical_equations",
    "fiber_constancy",
    "express_through_map",
    "factorization_residual",
    "identity_candidate",
    "interior_product_route",
    "reconstruct_Qtilde",
    "verify_candidate",
    "verify_factorization_equation",
]
