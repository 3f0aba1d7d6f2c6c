"""Per-check verification records and their JSON form."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

from .expr import Verdict, ZeroTest

PASS = "pass"
PASS_NUMERIC = "pass (numeric)"
FAIL = "fail"
INCONCLUSIVE = "inconclusive"
SKIPPED = "skipped"


@dataclass
class CheckResult:
    name: str
    status: str
    symbolic: Verdict | None = None
    numeric_residual: float | None = None
    tolerance: float | None = None
    witness: dict | None = None
    detail: str = ""

    @property
    def failed(self) -> bool:
        return self.status == FAIL

    @property
    def passed(self) -> bool:
        return self.status in (PASS, PASS_NUMERIC)

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "status": self.status,
            "symbolic": None if self.symbolic is None else self.symbolic.value,
            "numeric_residual": self.numeric_residual,
            "tolerance": self.tolerance,
            "detail": self.detail,
        }
        if self.witness is not None:
            out["witness"] = {k: _jsonable(v) for k, v in self.witness.items()}
        return out


def _jsonable(v):
    if isinstance(v, Fraction):
        return float(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (int, float, str)) or v is None:
        return v
    try:
        return float(v)
    except (TypeError, ValueError):
        return str(v)


def status_from(test: ZeroTest | None, residual: float | None = None, tol: float | None = None) -> str:
    """A check fails on a definite NO or a residual above ``tol``.

    A clean YES passes; UNKNOWN with sample evidence passes numerically.
    """
    if test is not None and test.is_no:
        return FAIL
    if residual is not None and tol is not None and residual > tol:
        return FAIL
    if test is None:
        return PASS if residual is not None else INCONCLUSIVE
    if test.is_yes:
        return PASS
    return PASS_NUMERIC if test.samples > 0 else INCONCLUSIVE


def check_from_test(name: str, test: ZeroTest, residual: float | None = None, tol: float | None = None,
                    detail: str = "") -> CheckResult:
    status = status_from(test, residual, tol)
    witness = test.witness if test.is_no else None
    if status == FAIL and witness is None and residual is not None:
        detail = detail or f"numeric residual {residual:.3g} exceeds {tol:g}"
    return CheckResult(name, status, test.verdict, residual, tol, witness, detail)


@dataclass
class VerificationReport:
    system: str
    candidate: str
    checks: list[CheckResult] = field(default_factory=list)
    artifacts: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict, repr=False)  # expression objects, not serialized

    def add(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        return check

    def get(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(c.name == name for c in self.checks)

    @property
    def overall(self) -> str:
        if any(c.failed for c in self.checks):
            return FAIL
        if all(c.passed for c in self.checks):
            return PASS
        return INCONCLUSIVE

    @property
    def exit_code(self) -> int:
        return {PASS: 0, FAIL: 1, INCONCLUSIVE: 3}[self.overall]

    def to_dict(self) -> dict:
        return {
            "system": self.system,
            "candidate": self.candidate,
            "overall": self.overall,
            "checks": [c.to_dict() for c in self.checks],
            "artifacts": {k: _jsonable(v) for k, v in self.artifacts.items()},
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def format_text(self) -> str:
        lines = [f"system {self.system}  candidate {self.candidate}"]
        width = max((len(c.name) for c in self.checks), default=0)
        for c in self.checks:
            res = "" if c.numeric_residual is None else f"  residual={c.numeric_residual:.3g}"
            sym = "" if c.symbolic is None else f"  symbolic={c.symbolic.value}"
            lines.append(f"  {c.name:<{width}}  {c.status:<15}{sym}{res}")
            if c.detail:
                lines.append(f"  {'':<{width}}    {c.detail}")
            if c.witness:
                w = ", ".join(f"{k}={_jsonable(v):.6g}" if isinstance(_jsonable(v), float) else f"{k}={v}"
                              for k, v in c.witness.items())
                lines.append(f"  {'':<{width}}    witness: {w}")
        for k, v in self.artifacts.items():
            lines.append(f"  {k}: {v}")
        lines.append(f"overall: {self.overall}")
        return "\n".join(lines)
