"""Coordinate frames: ordered, role-tagged symbol sets."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import sympy as sp

ROLES = (
    "state",
    "costate",
    "control",
    "factor-state",
    "factor-costate",
    "factor-control",
)


@dataclass(frozen=True)
class CoordinateFrame:
    """Ordered symbol names with one role tag each.

    Declaration order is the variable order used for normal forms,
    Jacobians and one-form coefficient lists.
    """

    names: tuple[str, ...]
    roles: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "roles", tuple(self.roles))
        if len(self.names) != len(self.roles):
            raise ValueError("one role per name required")
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate names in frame: {self.names}")
        bad = set(self.roles) - set(ROLES)
        if bad:
            raise ValueError(f"unknown roles: {sorted(bad)}")
        for pair in (("state", "costate"), ("factor-state", "factor-costate")):
            a, b = (self.roles.count(r) for r in pair)
            if a and b and a != b:
                raise ValueError(f"{pair[1]} count {b} does not match {pair[0]} count {a}")

    @classmethod
    def lagrangian(cls, states, controls) -> "CoordinateFrame":
        states, controls = list(states), list(controls)
        return cls(tuple(states + controls), ("state",) * len(states) + ("control",) * len(controls))

    @classmethod
    def canonical(cls, n: int) -> "CoordinateFrame":
        """Costates p1..pn followed by states q1..qn."""
        names = [f"p{i}" for i in range(1, n + 1)] + [f"q{i}" for i in range(1, n + 1)]
        return cls(tuple(names), ("costate",) * n + ("state",) * n)

    @classmethod
    def factor(cls, nu: int, mu: int = 0) -> "CoordinateFrame":
        names = (
            [f"x{i}" for i in range(1, nu + 1)]
            + [f"y{i}" for i in range(1, nu + 1)]
            + [f"v{i}" for i in range(1, mu + 1)]
        )
        roles = ("factor-costate",) * nu + ("factor-state",) * nu + ("factor-control",) * mu
        return cls(tuple(names), roles)

    @cached_property
    def symbols(self) -> tuple[sp.Symbol, ...]:
        return tuple(sp.Symbol(n) for n in self.names)

    @cached_property
    def _lookup(self) -> dict[str, sp.Symbol]:
        return dict(zip(self.names, self.symbols))

    def __contains__(self, name) -> bool:
        return str(name) in self._lookup

    def __len__(self) -> int:
        return len(self.names)

    def symbol(self, name: str) -> sp.Symbol:
        return self._lookup[name]

    def of_role(self, role: str) -> tuple[sp.Symbol, ...]:
        return tuple(s for s, r in zip(self.symbols, self.roles) if r == role)

    def index(self, sym) -> int:
        return self.names.index(str(sym))

    def merge(self, other: "CoordinateFrame") -> "CoordinateFrame":
        """Union of two frames; shared names must carry the same role."""
        names, roles = list(self.names), list(self.roles)
        for n, r in zip(other.names, other.roles):
            if n in self._lookup:
                if roles[names.index(n)] != r:
                    raise ValueError(f"{n} has conflicting roles")
                continue
            names.append(n)
            roles.append(r)
        return CoordinateFrame(tuple(names), tuple(roles))
