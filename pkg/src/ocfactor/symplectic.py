"""Poisson brackets, Lie derivatives along the Hamiltonian field, closed forms.

Bracket orientation: ``(f, g) = sum_i df/dq_i dg/dp_i - df/dp_i dg/dq_i``,
so that ``(f, H)`` is the time derivative of ``f`` along the canonical flow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import sympy as sp

from .errors import NonIntegrableTerm, NotClosed
from .expr import OneForm, Verdict, ZeroTest, combine_tests, differentiate, is_zero, simplify
from .frame import CoordinateFrame


def canonical_pairs(frame: CoordinateFrame) -> list[tuple]:
    """``(costate, state)`` pairs of a canonical or factor frame."""
    if frame.of_role("costate"):
        return list(zip(frame.of_role("costate"), frame.of_role("state")))
    return list(zip(frame.of_role("factor-costate"), frame.of_role("factor-state")))


def poisson_bracket(f, g, frame: CoordinateFrame):
    f, g = sp.sympify(f), sp.sympify(g)
    total = 0
    for p, q in canonical_pairs(frame):
        total += sp.diff(f, q) * sp.diff(g, p) - sp.diff(f, p) * sp.diff(g, q)
    return simplify(total)


def lie_derivative_fn(hs, f):
    """Derivative of ``f`` along the canonical flow of ``hs``: ``(f, H)``."""
    return poisson_bracket(f, hs.hamiltonian, hs.frame)


def _field(hs) -> dict:
    """Canonical vector field as ``{coordinate: rhs}``."""
    H = hs.hamiltonian
    out = {}
    for p, q in canonical_pairs(hs.frame):
        out[p] = -differentiate(H, q)
        out[q] = differentiate(H, p)
    return out


def lie_derivative_oneform(hs, rho: OneForm) -> OneForm:
    """``L_h(sum a_w dw) = sum (L_h a_w) dw + sum a_w d(L_h w)``."""
    coords = rho.symbols
    field = _field(hs)
    result = OneForm(coords, tuple(lie_derivative_fn(hs, a) for a in rho.coeffs))
    for w, a in zip(coords, rho.coeffs):
        if a == 0:
            continue
        result = result + OneForm.differential(field[w], coords).scaled(a)
    return result


@dataclass(frozen=True)
class PulledBackTwoForm:
    """``sum_i dx_i ^ dy_i`` with ``x_i, y_i`` functions on the canonical frame."""

    xs: tuple
    ys: tuple

    def __post_init__(self):
        object.__setattr__(self, "xs", tuple(sp.sympify(x) for x in self.xs))
        object.__setattr__(self, "ys", tuple(sp.sympify(y) for y in self.ys))
        if len(self.xs) != len(self.ys) or not self.xs:
            raise ValueError("need nu >= 1 matching x and y maps")

    @property
    def nu(self) -> int:
        return len(self.xs)


def interior_product(hs, omega: PulledBackTwoForm) -> OneForm:
    """``sum_i (y_i, H) dx_i - (x_i, H) dy_i`` expanded on the canonical frame."""
    coords = hs.frame.symbols
    out = OneForm.zero(coords)
    for x, y in zip(omega.xs, omega.ys):
        out = out + OneForm.differential(x, coords).scaled(lie_derivative_fn(hs, y))
        out = out - OneForm.differential(y, coords).scaled(lie_derivative_fn(hs, x))
    return out


def tautological_form(xs: Sequence, ys: Sequence, coords) -> OneForm:
    """``sum_i x_i dy_i`` on ``coords``."""
    out = OneForm.zero(coords)
    for x, y in zip(xs, ys):
        out = out + OneForm.differential(y, coords).scaled(x)
    return out


@dataclass(frozen=True)
class ClosednessTest:
    test: ZeroTest
    pair: tuple | None = None  # first coordinate pair whose mixed partials disagree

    @property
    def verdict(self):
        return self.test.verdict


def is_closed(rho: OneForm, charts: Sequence = (), **kw) -> ClosednessTest:
    """Tri-state test of ``d a_w / d w' == d a_w' / d w`` for all pairs."""
    coords, coeffs = rho.symbols, rho.coeffs
    tests = []
    for i in range(len(coords)):
        for j in range(i + 1, len(coords)):
            t = is_zero(sp.diff(coeffs[i], coords[j]) - sp.diff(coeffs[j], coords[i]), charts, **kw)
            if t.is_no:
                return ClosednessTest(t, (coords[i], coords[j]))
            tests.append(t)
    return ClosednessTest(combine_tests(tests) if tests else ZeroTest(Verdict.YES, True))


_ALLOWED = (sp.Add, sp.Mul, sp.Pow, sp.Symbol, sp.Number, sp.Dummy)


def _in_class(e) -> bool:
    return all(isinstance(n, _ALLOWED) for n in sp.preorder_traversal(e))


def antiderivative(f, s):
    """Polynomial or rational antiderivative of ``f`` in ``s``.

    Raises NonIntegrableTerm when the result would need logarithms or other
    transcendental functions.
    """
    f = simplify(f)
    if s not in f.free_symbols:
        return f * s
    if f.is_polynomial(s):
        poly = sp.Poly(f, s)
        return simplify(poly.integrate().as_expr())
    result = sp.integrate(f, s)
    if result.has(sp.Integral) or not _in_class(result):
        raise NonIntegrableTerm(f"antiderivative of {f} in {s} leaves the rational/algebraic class")
    return simplify(result)


def reconstruct_potential(rho: OneForm, base: Mapping, charts: Sequence = ()):
    """Potential ``Q`` with ``dQ = rho`` and ``Q(base) = 0``.

    Integrates along the axis-parallel path from ``base`` that moves one
    coordinate at a time in declaration order.  Raises NotClosed or
    NonIntegrableTerm.
    """
    closed = is_closed(rho, charts)
    if closed.test.is_no:
        raise NotClosed(closed.pair, closed.test.witness)
    coords = rho.symbols
    base = {(s if isinstance(s, sp.Symbol) else sp.Symbol(str(s))): sp.nsimplify(v) for s, v in base.items()}
    total = sp.Integer(0)
    for k, (w, a) in enumerate(zip(coords, rho.coeffs)):
        if a == 0:
            continue
        frozen = {c: base[c] for c in coords[k + 1:]}
        integrand = simplify(a.xreplace(frozen))
        A = antiderivative(integrand, w)
        total += A - A.xreplace({w: base[w]})
    return simplify(total)


def drop_constant(e):
    """Remove the additive constant of a polynomial (or constant-denominator) expression."""
    e = simplify(e)
    num, den = sp.fraction(e)
    if den.free_symbols or not num.free_symbols:
        return e if num.free_symbols else sp.Integer(0)
    const = num.as_coeff_Add()[0]
    return simplify((num - const) / den)


def equal_modulo_constant(a, b, coords, charts: Sequence = (), **kw) -> ZeroTest:
    return OneForm.differential(simplify(a - b), coords).is_zero(charts, **kw)


__all__ = [
    "ClosednessTest",
    "PulledBackTwoForm",
    "antiderivative",
    "canonical_pairs",
    "drop_constant",
    "equal_modulo_constant",
    "interior_product",
    "is_closed",
    "lie_derivative_fn",
    "lie_derivative_oneform",
    "poisson_bracket",
    "reconstruct_potential",
    "tautological_form",
]
