"""Reader and writer for ``.ocs`` system files.

One declaration per line, ``#`` starts a comment::

    system e1
    states q1 q2
    controls u1 u2
    dyn q1' = u1
    dyn q2' = u2
    cost q1*u1*u2 + q1*q2
    chart q1 > 0
    synth u1 = p2/q1          # optional, for non-affine stationarity
    candidate reduce1
    x1 = 2*p2
    y1 = q1^2
    qtilde = 2*p2^2 + (4/3)*q1^3   # optional
    factor dyn y1' = v1            # optional declared factor system
    factor cost (1/2)*v1^2 + (4/3)*y1^(3/2)
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import sympy as sp

from .control import HamiltonianSystem, LagrangianSystem, Synthesis, hamiltonian_system
from .errors import ExpressionSyntaxError, OcsFormatError, UnknownSymbol
from .expr import to_text
from .factorization import FactorizationCandidate, FactorSpec
from .frame import CoordinateFrame
from .parsing import parse_expression

NAME = r"[a-z][a-z0-9_]*"
_VAR = re.compile(r"[a-z][a-z0-9]*")


@dataclass(frozen=True)
class SystemFile:
    system: LagrangianSystem
    candidates: tuple = ()
    synthesis: Synthesis | None = None
    path: str | None = None

    def candidate(self, name: str) -> FactorizationCandidate:
        for c in self.candidates:
            if c.name == name:
                return c
        known = ", ".join(c.name for c in self.candidates) or "none"
        raise KeyError(f"no candidate {name!r} (available: {known})")

    def hamiltonian_system(self) -> HamiltonianSystem:
        return hamiltonian_system(self.system, self.synthesis)

    def summary(self) -> str:
        s = self.system
        k = len(self.candidates)
        return (f"system {s.name}: {s.n} state{'s' * (s.n != 1)}, {s.m} control{'s' * (s.m != 1)}, "
                f"{k} candidate{'s' * (k != 1)}")


@dataclass
class _Line:
    number: int
    text: str  # comment stripped
    offset: int = 0  # column offset of ``text`` in the raw line


@dataclass
class _Candidate:
    name: str
    line: int
    xs: dict = field(default_factory=dict)
    ys: dict = field(default_factory=dict)
    qtilde: tuple | None = None
    fdyn: dict = field(default_factory=dict)
    fcost: tuple | None = None
    fcontrols: tuple | None = None


class _Reader:
    def __init__(self, text: str):
        self.lines = []
        for k, raw in enumerate(text.splitlines(), 1):
            body = raw.split("#", 1)[0].rstrip()
            stripped = body.lstrip()
            if stripped:
                self.lines.append(_Line(k, stripped, len(body) - len(stripped)))

    @staticmethod
    def fail(message: str, line: _Line, col: int = 0):
        raise OcsFormatError(message, line.number, line.offset + col + 1)

    def expression(self, text: str, frame: CoordinateFrame, line: _Line, col: int):
        try:
            return parse_expression(text, frame)
        except UnknownSymbol as exc:
            self.fail(f"unknown symbol {exc.name!r}", line, col + (exc.position or 0))
        except ExpressionSyntaxError as exc:
            self.fail(str(exc).split(": ", 1)[-1], line, col + exc.position)

    def read(self) -> SystemFile:
        if not self.lines:
            raise OcsFormatError("empty file: expected 'system <name>'", 1)
        first = self.lines[0]
        m = re.fullmatch(rf"system\s+({NAME})", first.text)
        if not m:
            self.fail("expected 'system <name>' as the first declaration", first)
        name = m.group(1)
        states = controls = None
        dyn: dict = {}
        cost = None
        charts: list = []
        synth: dict = {}
        cands: list[_Candidate] = []
        lag_frame = None
        can_frame = None

        def need_frames(line):
            nonlocal lag_frame, can_frame
            if states is None or controls is None:
                self.fail("'states' and 'controls' must precede expressions", line)
            if lag_frame is None:
                lag_frame = CoordinateFrame.lagrangian(states, controls)
                n = len(states)
                can_frame = CoordinateFrame(tuple([f"p{i}" for i in range(1, n + 1)] + states),
                                            ("costate",) * n + ("state",) * n)

        for line in self.lines[1:]:
            t = line.text
            if cands:
                cand = cands[-1]
                if self._candidate_line(cand, line):
                    continue
            word = t.split(None, 1)[0]
            if cands and word in ("dyn", "cost", "chart", "synth"):
                self.fail(f"'{word}' after a candidate block", line)
            if word == "system":
                self.fail("only one system per file", line)
            elif word in ("states", "controls"):
                if cands:
                    self.fail(f"'{word}' inside a candidate block", line)
                names = t.split()[1:]
                if not names:
                    self.fail(f"'{word}' needs at least one name", line)
                for nm in names:
                    if not _VAR.fullmatch(nm) or nm[0] in "pxyv":
                        self.fail(f"invalid {word[:-1]} name {nm!r}", line, t.index(nm))
                if word == "states":
                    if states is not None:
                        self.fail("duplicate 'states' line", line)
                    states = names
                else:
                    if controls is not None:
                        self.fail("duplicate 'controls' line", line)
                    controls = names
                if len(set(names)) != len(names):
                    self.fail(f"repeated name in '{word}'", line)
            elif word == "dyn":
                need_frames(line)
                m = re.fullmatch(rf"dyn\s+({NAME})'\s*=\s*(.*)", t)
                if not m:
                    self.fail("expected \"dyn <state>' = <expr>\"", line)
                if m.group(1) in dyn:
                    self.fail(f"duplicate dynamics for {m.group(1)}", line, m.start(1))
                dyn[m.group(1)] = (line, self.expression(m.group(2), lag_frame, line, m.start(2)))
            elif word == "cost":
                need_frames(line)
                if cost is not None:
                    self.fail("duplicate 'cost' line", line)
                body = t[4:].lstrip()
                cost = self.expression(body, lag_frame, line, len(t) - len(body))
            elif word == "chart":
                need_frames(line)
                m = re.fullmatch(r"chart\s+(.+?)\s*([<>])\s*(.+)", t)
                if not m:
                    self.fail("expected 'chart <expr> > <expr>' or 'chart <expr> < <expr>'", line)
                st_frame = CoordinateFrame(tuple(states), ("state",) * len(states))
                a = self.expression(m.group(1), st_frame, line, m.start(1))
                b = self.expression(m.group(3), st_frame, line, m.start(3))
                charts.append(a - b if m.group(2) == ">" else b - a)
            elif word == "synth":
                need_frames(line)
                m = re.fullmatch(rf"synth\s+({NAME})\s*=\s*(.*)", t)
                if not m or m.group(1) not in controls:
                    self.fail("expected 'synth <control> = <expr(p, q)>'", line)
                synth[m.group(1)] = self.expression(m.group(2), can_frame, line, m.start(2))
            elif word == "candidate":
                need_frames(line)
                m = re.fullmatch(rf"candidate\s+({NAME})", t)
                if not m:
                    self.fail("expected 'candidate <name>'", line)
                if any(c.name == m.group(1) for c in cands):
                    self.fail(f"duplicate candidate {m.group(1)!r}", line, m.start(1))
                cands.append(_Candidate(m.group(1), line.number))
            else:
                self.fail(f"unknown declaration {word!r}", line)

        if states is None or controls is None:
            self.fail("missing 'states' or 'controls'", first)
        if len(dyn) != len(states):
            self.fail(f"dynamics/state count mismatch: {len(dyn)} dynamics for {len(states)} states", first)
        for target, (line, _) in dyn.items():
            if target not in states:
                self.fail(f"dynamics for {target!r}, which is not a declared state", line, 4)
        if cost is None:
            self.fail("missing 'cost' line", first)
        st = tuple(sp.Symbol(s) for s in states)
        system = LagrangianSystem(name, st, tuple(sp.Symbol(u) for u in controls),
                                  tuple(dyn[s][1] for s in states), cost, tuple(charts))
        synthesis = None
        if synth:
            if set(synth) != set(controls):
                self.fail("'synth' must give every control", first)
            synthesis = Synthesis(system.controls, tuple(synth[u] for u in controls), "user-supplied")
        built = tuple(self._build(c, can_frame, len(states)) for c in cands)
        return SystemFile(system, built, synthesis)

    # -- candidate blocks --------------------------------------------------

    def _candidate_line(self, cand: _Candidate, line: _Line) -> bool:
        t = line.text
        m = re.fullmatch(r"([xy])([1-9][0-9]*)\s*=\s*(.*)", t)
        if m:
            store = cand.xs if m.group(1) == "x" else cand.ys
            k = int(m.group(2))
            if k in store:
                self.fail(f"duplicate {m.group(1)}{k}", line)
            store[k] = (line, m.group(3), m.start(3))
            return True
        m = re.fullmatch(r"qtilde\s*=\s*(.*)", t)
        if m:
            if cand.qtilde is not None:
                self.fail("duplicate 'qtilde'", line)
            cand.qtilde = (line, m.group(1), m.start(1))
            return True
        if t.startswith("factor"):
            m = re.fullmatch(r"factor\s+dyn\s+y([1-9][0-9]*)'\s*=\s*(.*)", t)
            if m:
                k = int(m.group(1))
                if k in cand.fdyn:
                    self.fail(f"duplicate factor dynamics for y{k}", line)
                cand.fdyn[k] = (line, m.group(2), m.start(2))
                return True
            m = re.fullmatch(r"factor\s+cost\s+(.*)", t)
            if m:
                if cand.fcost is not None:
                    self.fail("duplicate 'factor cost'", line)
                cand.fcost = (line, m.group(1), m.start(1))
                return True
            m = re.fullmatch(r"factor\s+controls((?:\s+v[1-9][0-9]*)+)", t)
            if m:
                cand.fcontrols = tuple(m.group(1).split())
                return True
            self.fail("expected 'factor dyn y<k>' = ...', 'factor cost ...' or 'factor controls ...'", line)
        return False

    def _build(self, c: _Candidate, frame: CoordinateFrame, n: int) -> FactorizationCandidate:
        head = _Line(c.line, f"candidate {c.name}")
        nu = len(c.xs)
        if nu == 0:
            self.fail(f"candidate {c.name!r} declares no maps", head)
        if sorted(c.xs) != list(range(1, nu + 1)) or sorted(c.ys) != list(range(1, nu + 1)):
            self.fail(f"candidate {c.name!r} needs x1..x{nu} and y1..y{nu}", head)
        if nu > n:
            self.fail(f"candidate {c.name!r} has nu = {nu} > n = {n}", head)
        xs = tuple(self.expression(t, frame, ln, col) for ln, t, col in (c.xs[k] for k in range(1, nu + 1)))
        ys = tuple(self.expression(t, frame, ln, col) for ln, t, col in (c.ys[k] for k in range(1, nu + 1)))
        qt = None if c.qtilde is None else self.expression(c.qtilde[1], frame, c.qtilde[0], c.qtilde[2])
        declared = None
        if c.fdyn or c.fcost is not None:
            if sorted(c.fdyn) != list(range(1, nu + 1)) or c.fcost is None:
                self.fail(f"candidate {c.name!r}: factor block needs 'factor dyn' for y1..y{nu} and "
                          "'factor cost'", head)
            texts = [c.fdyn[k] for k in range(1, nu + 1)] + [c.fcost]
            if c.fcontrols is not None:
                names = c.fcontrols
                if list(names) != [f"v{i}" for i in range(1, len(names) + 1)]:
                    self.fail("factor controls must be v1..vmu in order", head)
                mu = len(names)
            else:
                used = {int(m.group(1)) for _, t, _ in texts for m in re.finditer(r"\bv([1-9][0-9]*)\b", t)}
                mu = max(used, default=0)
            ff = CoordinateFrame.factor(nu, mu)
            yv = CoordinateFrame(tuple(ff.names[nu:]), ff.roles[nu:])
            exprs = [self.expression(t, yv, ln, col) for ln, t, col in texts]
            declared = FactorSpec(tuple(exprs[:-1]), exprs[-1], ff.of_role("factor-control"))
        return FactorizationCandidate(c.name, xs, ys, qt, declared)


def loads(text: str, path: str | None = None) -> SystemFile:
    sf = _Reader(text).read()
    return SystemFile(sf.system, sf.candidates, sf.synthesis, path)


def load(path) -> SystemFile:
    p = Path(path)
    return loads(p.read_text(), str(p))


def format_candidate(cand: FactorizationCandidate) -> str:
    """Candidate block in file syntax."""
    lines = [f"candidate {cand.name}"]
    lines += [f"x{i} = {to_text(x)}" for i, x in enumerate(cand.xs, 1)]
    lines += [f"y{i} = {to_text(y)}" for i, y in enumerate(cand.ys, 1)]
    if cand.qtilde is not None:
        lines.append(f"qtilde = {to_text(cand.qtilde)}")
    if cand.declared is not None:
        d = cand.declared
        lines += [f"factor dyn y{i}' = {to_text(f)}" for i, f in enumerate(d.dynamics, 1)]
        lines.append(f"factor cost {to_text(d.cost)}")
        if d.controls:
            lines.append("factor controls " + " ".join(str(v) for v in d.controls))
    return "\n".join(lines)


def dumps(sf: SystemFile) -> str:
    s = sf.system
    lines = [f"system {s.name}",
             "states " + " ".join(map(str, s.states)),
             "controls " + " ".join(map(str, s.controls))]
    lines += [f"dyn {q}' = {to_text(f)}" for q, f in zip(s.states, s.dynamics)]
    lines.append(f"cost {to_text(s.cost)}")
    lines += [f"chart {to_text(g)} > 0" for g in s.charts]
    if sf.synthesis is not None:
        lines += [f"synth {u} = {to_text(v)}" for u, v in zip(sf.synthesis.controls, sf.synthesis.values)]
    for c in sf.candidates:
        lines += ["", format_candidate(c)]
    return "\n".join(lines) + "\n"


__all__ = ["SystemFile", "dumps", "format_candidate", "load", "loads"]
