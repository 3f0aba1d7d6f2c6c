"""Exception hierarchy shared by all ocfactor modules."""

from __future__ import annotations


class OCFactorError(Exception):
    """Base class for every error raised by ocfactor."""


class ExpressionSyntaxError(OCFactorError, ValueError):
    def __init__(self, message: str, position: int, expected=()):
        self.position = position
        self.expected = frozenset(expected)
        detail = message
        if self.expected:
            detail += " (expected one of: " + ", ".join(sorted(self.expected)) + ")"
        super().__init__(f"column {position + 1}: {detail}")


class UnknownSymbol(OCFactorError, ValueError):
    def __init__(self, name: str, position: int | None = None):
        self.name = name
        self.position = position
        where = "" if position is None else f" at column {position + 1}"
        super().__init__(f"unknown symbol {name!r}{where}")


class DivisionByZeroExpr(OCFactorError, ZeroDivisionError):
    pass


class EvalDomainError(OCFactorError, ArithmeticError):
    pass


class ExhaustedSampling(OCFactorError):
    pass


class LinearSolveError(OCFactorError):
    pass


class NotLinear(LinearSolveError):
    def __init__(self, unknown, equation):
        self.unknown = unknown
        self.equation = equation
        super().__init__(f"{unknown} enters {equation} nonlinearly")


class Singular(LinearSolveError):
    def __init__(self, rank: int, size: int):
        self.rank = rank
        self.size = size
        super().__init__(f"coefficient matrix has generic rank {rank} < {size}")


class DegenerateSystem(OCFactorError):
    def __init__(self, condition: str, message: str):
        self.condition = condition
        super().__init__(f"{condition}: {message}")


class SingularPoint(OCFactorError):
    pass


class RankUnstable(OCFactorError):
    def __init__(self, rank: int, other_rank: int, point=None):
        self.rank = rank
        self.other_rank = other_rank
        self.point = point
        super().__init__(f"rank changes from {rank} to {other_rank} near the point")


class NotClosed(OCFactorError):
    def __init__(self, pair, witness=None):
        self.pair = pair
        self.witness = witness
        a, b = pair
        super().__init__(f"mixed partials disagree for ({a}, {b})")


class NonIntegrableTerm(OCFactorError):
    pass


class RankDeficient(OCFactorError):
    def __init__(self, rank: int, expected: int, witness=None):
        self.rank = rank
        self.expected = expected
        self.witness = witness
        super().__init__(f"rank {rank} < {expected}")


class FiberObstruction(OCFactorError):
    def __init__(self, message: str, witness=None):
        self.witness = witness
        super().__init__(message)


class EliminationFailure(OCFactorError):
    pass


class ChartExit(OCFactorError):
    def __init__(self, t: float, state):
        self.t = t
        self.state = tuple(state)
        super().__init__(f"trajectory left the chart at t={t:.6g}")


class StepRejected(OCFactorError):
    pass


class OcsFormatError(OCFactorError):
    def __init__(self, message: str, line: int, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")
