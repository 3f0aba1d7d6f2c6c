"""Exact expressions: normal forms, derivatives, zero tests, linear solving, ranks.

Expressions are plain sympy objects built over symbols of a
:class:`~ocfactor.frame.CoordinateFrame`.  Everything here is pure.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import sympy as sp

from .errors import DivisionByZeroExpr, ExhaustedSampling, NotLinear, Singular
from .evaluation import compile_expr, evaluate
from .frame import CoordinateFrame
from .parsing import parse_expression
from .sampling import SamplePlan, sample_points

TAU_ZERO = 1e-9
TAU_RANK = 1e-8
ZERO_SAMPLES = 100

__all__ = [
    "CoordinateFrame",
    "OneForm",
    "Verdict",
    "ZeroTest",
    "differentiate",
    "evaluate",
    "has_atoms",
    "is_zero",
    "jacobian",
    "jacobian_rank",
    "numeric_rank",
    "parse_expression",
    "pointwise_ranks",
    "simplify",
    "solve_linear",
    "substitute",
    "to_text",
]


def _is_atom(node) -> bool:
    return node.is_Pow and not node.exp.is_Integer


def has_atoms(e) -> bool:
    """True if ``e`` contains a sqrt or a fractional power."""
    return any(_is_atom(n) for n in sp.preorder_traversal(sp.sympify(e)))


def _outer_atoms(e) -> set:
    found = set()

    def walk(node):
        if _is_atom(node):
            found.add(node)
            return
        for a in node.args:
            walk(a)

    walk(e)
    return found


def _cancel(e):
    if e.has(sp.zoo, sp.nan, sp.oo, -sp.oo):
        raise DivisionByZeroExpr(f"denominator normalizes to zero in {e}")
    r = sp.cancel(sp.together(e))
    if r.has(sp.zoo, sp.nan):
        raise DivisionByZeroExpr(f"denominator normalizes to zero in {e}")
    return r


def simplify(e):
    """Canonical rational normal form.

    Atom-free input becomes an expanded numerator over an expanded
    denominator with exact rational coefficients.  Square roots and
    fractional powers are kept as opaque leaves whose arguments are
    normalized first.
    """
    e = sp.sympify(e)
    atoms = _outer_atoms(e)
    if not atoms:
        return _cancel(e)
    e = e.xreplace({a: sp.Pow(simplify(a.base), a.exp) for a in atoms})
    atoms = _outer_atoms(e)
    if not atoms:
        return _cancel(e)
    leaves = {a: sp.Dummy() for a in atoms}
    r = _cancel(e.xreplace(leaves))
    return r.xreplace({d: a for a, d in leaves.items()})


def differentiate(e, s):
    """Exact partial derivative, chain rule through sqrt and fractional powers."""
    return simplify(sp.diff(sp.sympify(e), s))


def substitute(e, mapping):
    return simplify(sp.sympify(e).xreplace(dict(mapping)))


def to_text(e) -> str:
    """Render ``e`` in the input grammar (``^`` for powers)."""
    return sp.sstr(sp.sympify(e)).replace("**", "^")


# -- zero testing ---------------------------------------------------------


class Verdict(enum.Enum):
    YES = "yes"
    NO = "no"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class ZeroTest:
    """Outcome of a zero test.

    ``exact`` marks verdicts decided by the normal form; sampled verdicts
    carry the number of points, the largest |value| and, for NO, a witness.
    """

    verdict: Verdict
    exact: bool
    samples: int = 0
    max_abs: float = 0.0
    witness: dict | None = field(default=None, compare=False)

    @property
    def is_yes(self) -> bool:
        return self.verdict is Verdict.YES

    @property
    def is_no(self) -> bool:
        return self.verdict is Verdict.NO

    @property
    def holds(self) -> bool:
        """YES, or UNKNOWN with every sample zero."""
        return self.verdict is Verdict.YES or (self.verdict is Verdict.UNKNOWN and self.samples > 0)


def combine_tests(tests: Iterable[ZeroTest]) -> ZeroTest:
    tests = list(tests)
    for t in tests:
        if t.is_no:
            return t
    if all(t.is_yes for t in tests):
        return ZeroTest(Verdict.YES, True)
    unknown = [t for t in tests if not t.is_yes]
    return ZeroTest(
        Verdict.UNKNOWN,
        False,
        samples=min(t.samples for t in unknown),
        max_abs=max(t.max_abs for t in unknown),
    )


def _sorted_symbols(exprs) -> tuple:
    syms = set()
    for e in exprs:
        syms |= sp.sympify(e).free_symbols
    return tuple(sorted(syms, key=lambda s: s.name))


_GRID = (0, 1, -1, 2, -2, 3, -3)


def _exact_witness(e, charts) -> dict | None:
    num, den = sp.fraction(sp.together(e))
    syms = _sorted_symbols([e, *charts])
    for k, combo in enumerate(itertools.product(_GRID, repeat=len(syms))):
        if k > 3000:
            break
        pt = dict(zip(syms, map(sp.Integer, reversed(combo))))
        if any(g.xreplace(pt) <= 0 for g in charts):
            continue
        if den.xreplace(pt) == 0:
            continue
        if num.xreplace(pt) != 0:
            return {str(s): Fraction(int(v)) for s, v in pt.items()}
    return None


def _sampled(e, charts, samples, seed, tol, bounds) -> ZeroTest:
    syms = _sorted_symbols([e, *charts])
    f = compile_expr(e, syms)
    plan = SamplePlan(syms, count=samples, seed=seed, bounds=bounds or {}, charts=tuple(charts), guards=(e,))
    try:
        points = sample_points(plan)
    except ExhaustedSampling:
        return ZeroTest(Verdict.UNKNOWN, False, 0, 0.0)
    worst = 0.0
    for pt in points:
        val = abs(f([float(pt[s]) for s in syms]))
        if val > tol:
            return ZeroTest(Verdict.NO, False, len(points), val, {str(s): v for s, v in pt.items()})
        worst = max(worst, val)
    return ZeroTest(Verdict.UNKNOWN, False, len(points), worst)


def is_zero(e, charts: Sequence = (), *, samples: int = ZERO_SAMPLES, seed: int = 42,
            tol: float = TAU_ZERO, bounds: dict | None = None) -> ZeroTest:
    """Decide whether ``e`` vanishes identically on the open set ``charts > 0``.

    Exact for atom-free expressions.  Otherwise ``e`` is evaluated at
    ``samples`` random rational points on the charts: any |value| > ``tol``
    gives NO with a witness, a clean sweep gives UNKNOWN with the evidence.
    """
    e = simplify(e)
    if e == 0:
        return ZeroTest(Verdict.YES, True)
    if not has_atoms(e):
        witness = _exact_witness(e, list(charts))
        if witness is None:
            t = _sampled(e, charts, samples, seed, 0.0, bounds)
            witness = t.witness
        return ZeroTest(Verdict.NO, True, witness=witness)
    return _sampled(e, charts, samples, seed, tol, bounds)


# -- linear algebra ---------------------------------------------------------


def _eliminate(rows: list[list], ncols: int):
    """Fraction-free Gauss-Jordan on the first ``ncols`` columns.

    Returns the reduced rows and the list of pivot columns.
    """
    rows = [list(r) for r in rows]
    pivots = []
    r = 0
    for c in range(ncols):
        k = next((i for i in range(r, len(rows)) if rows[i][c] != 0), None)
        if k is None:
            continue
        rows[r], rows[k] = rows[k], rows[r]
        piv = rows[r][c]
        for i in range(len(rows)):
            if i == r or rows[i][c] == 0:
                continue
            f = rows[i][c]
            rows[i] = [simplify(piv * a - f * b) for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
        if r == len(rows):
            break
    return rows, pivots


def solve_linear(equations: Sequence, unknowns: Sequence) -> dict:
    """Solve ``equations == 0`` for ``unknowns`` when they enter affinely.

    Raises NotLinear if an unknown enters nonlinearly and Singular if the
    coefficient matrix is not of full generic rank.
    """
    eqs = [simplify(e) for e in equations]
    unknowns = list(unknowns)
    uset = set(unknowns)
    rows = []
    for eq in eqs:
        row = []
        for u in unknowns:
            coef = differentiate(eq, u)
            if coef.free_symbols & uset:
                raise NotLinear(u, eq)
            row.append(coef)
        rest = simplify(eq.xreplace({u: 0 for u in unknowns}))
        row.append(-rest)
        rows.append(row)
    reduced, pivots = _eliminate(rows, len(unknowns))
    if len(pivots) < len(unknowns):
        raise Singular(len(pivots), len(unknowns))
    for extra in reduced[len(pivots):]:
        if simplify(extra[-1]) != 0:
            raise Singular(len(pivots), len(unknowns))
    return {unknowns[c]: simplify(reduced[i][-1] / reduced[i][c]) for i, c in enumerate(pivots)}


def jacobian(fns: Sequence, variables: Sequence) -> list[list]:
    return [[differentiate(f, v) for v in variables] for f in fns]


def numeric_rank(matrix, tol: float = TAU_RANK) -> int:
    """Count singular values above ``tol`` times the largest one."""
    m = np.asarray(matrix, dtype=float)
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def _minor_rank(rows: list[list]) -> int:
    nr, nc = len(rows), len(rows[0]) if rows else 0
    for k in range(min(nr, nc), 0, -1):
        for ri in itertools.combinations(range(nr), k):
            for ci in itertools.combinations(range(nc), k):
                det = sp.Matrix([[rows[i][j] for j in ci] for i in ri]).det(method="berkowitz")
                if simplify(det) != 0:
                    return k
    return 0


def pointwise_ranks(fns: Sequence, variables: Sequence, points: Sequence[dict],
                    tol: float = TAU_RANK) -> list[int]:
    """Numeric rank of the Jacobian of ``fns`` w.r.t. ``variables`` at each point."""
    J = jacobian(fns, variables)
    ranks = []
    for pt in points:
        syms = list(pt)
        vals = [float(pt[s]) for s in syms]
        mat = [[compile_expr(d, syms)(vals) for d in row] for row in J]
        ranks.append(numeric_rank(mat, tol))
    return ranks


def jacobian_rank(fns: Sequence, variables: Sequence, points: Sequence[dict] | None = None,
                  *, charts: Sequence = (), tol: float = TAU_RANK, seed: int = 42) -> int:
    """Generic rank of the Jacobian.

    Small atom-free Jacobians (at most 4x4) are ranked exactly through
    minors; otherwise the maximum numeric rank over ``points`` is used
    (sampled on ``charts`` if no points are given).
    """
    fns = [sp.sympify(f) for f in fns]
    if not fns or not variables:
        return 0
    J = jacobian(fns, variables)
    if len(fns) <= 4 and len(variables) <= 4 and not any(has_atoms(d) for row in J for d in row):
        return _minor_rank(J)
    if points is None:
        syms = _sorted_symbols([*fns, *variables, *charts])
        points = sample_points(SamplePlan(syms, count=20, seed=seed, charts=tuple(charts),
                                          guards=tuple(d for row in J for d in row)))
    return max(pointwise_ranks(fns, variables, points, tol), default=0)


# -- one-forms --------------------------------------------------------------


@dataclass(frozen=True)
class OneForm:
    """``sum(coeffs[k] * d symbols[k])`` over an ordered coordinate list."""

    symbols: tuple
    coeffs: tuple

    def __post_init__(self):
        syms = self.symbols.symbols if isinstance(self.symbols, CoordinateFrame) else tuple(self.symbols)
        object.__setattr__(self, "symbols", syms)
        object.__setattr__(self, "coeffs", tuple(sp.sympify(c) for c in self.coeffs))
        if len(self.coeffs) != len(self.symbols):
            raise ValueError("one coefficient per coordinate required")

    @classmethod
    def zero(cls, symbols) -> "OneForm":
        syms = symbols.symbols if isinstance(symbols, CoordinateFrame) else tuple(symbols)
        return cls(syms, (sp.Integer(0),) * len(syms))

    @classmethod
    def differential(cls, f, symbols) -> "OneForm":
        syms = symbols.symbols if isinstance(symbols, CoordinateFrame) else tuple(symbols)
        return cls(syms, tuple(differentiate(f, s) for s in syms))

    def _check(self, other: "OneForm"):
        if self.symbols != other.symbols:
            raise ValueError("one-forms live on different coordinate lists")

    def __add__(self, other: "OneForm") -> "OneForm":
        self._check(other)
        return OneForm(self.symbols, tuple(simplify(a + b) for a, b in zip(self.coeffs, other.coeffs)))

    def __sub__(self, other: "OneForm") -> "OneForm":
        self._check(other)
        return OneForm(self.symbols, tuple(simplify(a - b) for a, b in zip(self.coeffs, other.coeffs)))

    def __neg__(self) -> "OneForm":
        return OneForm(self.symbols, tuple(-c for c in self.coeffs))

    def scaled(self, factor) -> "OneForm":
        return OneForm(self.symbols, tuple(simplify(factor * c) for c in self.coeffs))

    def simplified(self) -> "OneForm":
        return OneForm(self.symbols, tuple(simplify(c) for c in self.coeffs))

    def coefficient(self, sym):
        return self.coeffs[self.symbols.index(sym)]

    def is_zero(self, charts: Sequence = (), **kw) -> ZeroTest:
        return combine_tests(is_zero(c, charts, **kw) for c in self.coeffs)

    def __str__(self) -> str:
        terms = [f"({to_text(c)}) d{s}" for s, c in zip(self.symbols, self.coeffs) if c != 0]
        return " + ".join(terms) if terms else "0"
