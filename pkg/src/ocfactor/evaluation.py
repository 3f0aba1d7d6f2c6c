"""Floating-point evaluation of exact expressions with domain checks."""

from __future__ import annotations

import math
from typing import Callable, Mapping, Sequence

import sympy as sp

from .errors import EvalDomainError

# |denominator| below this is treated as a division by zero
DIVISION_TOL = 1e-12


def _compile(node: sp.Basic, index: dict) -> Callable[[Sequence[float]], float]:
    if node.is_Symbol:
        try:
            k = index[node]
        except KeyError:
            raise EvalDomainError(f"no value supplied for {node}") from None
        return lambda v: v[k]
    if node.is_Number:
        if not node.is_finite:
            raise EvalDomainError(f"non-finite constant {node}")
        c = float(node)
        return lambda v: c
    if node.is_Add:
        parts = [_compile(a, index) for a in node.args]
        return lambda v: math.fsum(f(v) for f in parts)
    if node.is_Mul:
        parts = [_compile(a, index) for a in node.args]

        def mul(v):
            out = 1.0
            for f in parts:
                out *= f(v)
            return out

        return mul
    if node.is_Pow:
        base = _compile(node.base, index)
        exp = node.exp
        if not exp.is_Rational:
            raise EvalDomainError(f"unsupported exponent {exp}")
        if exp.is_Integer:
            n = int(exp)
            if n >= 0:
                return lambda v: base(v) ** n

            def inv(v):
                b = base(v)
                if abs(b) < DIVISION_TOL:
                    raise EvalDomainError(f"division by ~0 in {node}")
                return b**n

            return inv
        r = float(exp)

        def rpow(v):
            b = base(v)
            if b < 0:
                raise EvalDomainError(f"negative base {b:.3g} in {node}")
            if b < DIVISION_TOL and r < 0:
                raise EvalDomainError(f"division by ~0 in {node}")
            return b**r

        return rpow
    raise EvalDomainError(f"cannot evaluate {type(node).__name__}: {node}")


def compile_expr(e, symbols: Sequence[sp.Symbol]) -> Callable[[Sequence[float]], float]:
    """Return ``f(values)`` evaluating ``e`` with ``values`` ordered like ``symbols``."""
    index = {s: k for k, s in enumerate(symbols)}
    return _compile(sp.sympify(e), index)


def compile_many(exprs, symbols: Sequence[sp.Symbol]) -> Callable[[Sequence[float]], list[float]]:
    fns = [compile_expr(e, symbols) for e in exprs]
    return lambda v: [f(v) for f in fns]


def evaluate(e, point: Mapping) -> float:
    """Evaluate ``e`` at ``point`` (a mapping from symbols or names to numbers).

    Raises EvalDomainError on division by ~0 or a negative radicand.
    """
    syms = [s if isinstance(s, sp.Symbol) else sp.Symbol(str(s)) for s in point]
    vals = [float(x) for x in point.values()]
    return compile_expr(e, syms)(vals)
