"""Command-line interface: ``ocfactor {parse,verify,reduce,simulate,boundary} FILE``.

Exit codes: 0 pass, 1 fail, 2 usage or parse error, 3 inconclusive.
"""

from __future__ import annotations

import argparse
import json
import sys
from collections import Counter
from importlib import resources
from pathlib import Path

import numpy as np

from .control import canonical_equations
from .errors import ChartExit, EliminationFailure, OCFactorError, OcsFormatError, StepRejected
from .expr import to_text
from .factorization import (
    VerifyOptions,
    build_factor_system,
    canonical_points,
    classify_boundary,
    factor_canonical_equations,
)
from .factorization import verify_candidate as run_pipeline
from .numeric import conservation_drift, first_viable_start, integrate, map_trajectory, residual_dynamics
from .ocs import SystemFile, dumps, load
from .report import FAIL, INCONCLUSIVE, PASS

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3


class UsageError(Exception):
    pass


def corpus_dir() -> Path:
    return Path(str(resources.files("ocfactor") / "corpus"))


def resolve_path(arg: str) -> Path:
    """A readable file path, falling back to the bundled corpus by file name."""
    p = Path(arg)
    if p.is_file():
        return p
    bundled = corpus_dir() / p.name
    if bundled.is_file():
        return bundled
    raise UsageError(f"no such file: {arg}")


def _load(args) -> SystemFile:
    return load(resolve_path(args.file))


def _select(sf: SystemFile, name: str | None, single: bool = False) -> list:
    if name is not None:
        try:
            return [sf.candidate(name)]
        except KeyError as exc:
            raise UsageError(exc.args[0]) from None
    if not sf.candidates:
        raise UsageError(f"{sf.path}: no candidate blocks")
    if single and len(sf.candidates) > 1:
        names = ", ".join(c.name for c in sf.candidates)
        raise UsageError(f"several candidates ({names}); choose one with --candidate")
    return list(sf.candidates)


def _options(args) -> VerifyOptions:
    return VerifyOptions(samples=args.samples, seed=args.seed, tol=args.tol,
                         T=getattr(args, "T", 1.0), h=getattr(args, "h", 1e-3))


def _emit(args, payload: dict, text: str):
    out = json.dumps(payload, indent=2) if args.json else text
    print(out)
    if getattr(args, "output", None):
        Path(args.output).write_text(out + "\n")


# -- subcommands ------------------------------------------------------------


def cmd_parse(args) -> int:
    sf = _load(args)
    hs = sf.hamiltonian_system()
    s = sf.system
    eqs = canonical_equations(hs)
    coords = hs.frame.symbols
    payload = {
        "system": s.name,
        "states": [str(q) for q in s.states],
        "controls": [str(u) for u in s.controls],
        "dynamics": [to_text(f) for f in s.dynamics],
        "cost": to_text(s.cost),
        "charts": [to_text(g) for g in s.charts],
        "candidates": [c.name for c in sf.candidates],
        "synthesis": {str(u): to_text(v) for u, v in hs.synthesis.as_dict().items()},
        "hamiltonian": to_text(hs.hamiltonian),
        "canonical_equations": {f"{z}'": to_text(e) for z, e in zip(coords, eqs)},
    }
    lines = [sf.summary(), "", dumps(sf).rstrip(), ""]
    lines += [f"synthesis {u} = {v}" for u, v in payload["synthesis"].items()]
    lines.append(f"H = {payload['hamiltonian']}")
    lines += [f"{z} = {e}" for z, e in payload["canonical_equations"].items()]
    _emit(args, payload, "\n".join(lines))
    return EXIT_PASS


def _worst(statuses) -> int:
    statuses = set(statuses)
    if FAIL in statuses:
        return EXIT_FAIL
    if INCONCLUSIVE in statuses:
        return EXIT_INCONCLUSIVE
    return EXIT_PASS


def cmd_verify(args) -> int:
    sf = _load(args)
    hs = sf.hamiltonian_system()
    reports = [run_pipeline(hs, c, _options(args)) for c in _select(sf, args.candidate)]
    payload = {"system": sf.system.name, "overall": _overall(reports), "reports": [r.to_dict() for r in reports]}
    _emit(args, payload, "\n\n".join(r.format_text() for r in reports))
    return _worst(r.overall for r in reports)


def _overall(reports) -> str:
    return {EXIT_PASS: PASS, EXIT_FAIL: FAIL, EXIT_INCONCLUSIVE: INCONCLUSIVE}[_worst(r.overall for r in reports)]


def cmd_reduce(args) -> int:
    sf = _load(args)
    hs = sf.hamiltonian_system()
    (cand,) = _select(sf, args.candidate, single=True)
    report = run_pipeline(hs, cand, _options(args))
    if report.overall != PASS:
        print(report.format_text(), file=sys.stderr)
        print(f"candidate {cand.name!r} does not verify ({report.overall}); no factor system built",
              file=sys.stderr)
        return EXIT_FAIL if report.overall == FAIL else EXIT_INCONCLUSIVE
    resolved = report.values["candidate"]
    try:
        fs = build_factor_system(hs, resolved, report.values.get("G"))
    except EliminationFailure as exc:
        print(f"elimination failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    generated = type(resolved)(f"{cand.name}_factor", resolved.xs, resolved.ys, resolved.qtilde, fs.as_spec())
    roundtrip = SystemFile(sf.system, (generated,), sf.synthesis)
    payload = {
        "system": sf.system.name,
        "candidate": cand.name,
        "nu": fs.nu,
        "mu": fs.mu,
        "G": to_text(fs.hamiltonian),
        "synthesis": {str(v): to_text(e) for v, e in zip(fs.controls, fs.synthesis)},
        "dynamics": {f"{y}'": to_text(F) for y, F in zip(fs.ys, fs.dynamics)},
        "cost": to_text(fs.cost),
        "qtilde": to_text(resolved.qtilde),
        "file": dumps(roundtrip),
    }
    lines = [f"factor system of {sf.system.name} via {cand.name}  (nu={fs.nu}, mu={fs.mu})",
             f"  G = {payload['G']}"]
    lines += [f"  {v} = {e}   (synthesis)" for v, e in payload["synthesis"].items()]
    lines += [f"  {y} = {F}" for y, F in payload["dynamics"].items()]
    lines.append(f"  Q = {payload['cost']}")
    lines += ["", payload["file"].rstrip()]
    print(json.dumps(payload, indent=2) if args.json else "\n".join(lines))
    if args.output:
        Path(args.output).write_text(payload["file"])
    return EXIT_PASS


def _parse_init(text: str, size: int) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"--init must be {size} comma-separated numbers") from None
    if len(vals) != size:
        raise UsageError(f"--init needs {size} values (p1..pn, q1..qn), got {len(vals)}")
    return vals


def cmd_simulate(args) -> int:
    sf = _load(args)
    hs = sf.hamiltonian_system()
    (cand,) = _select(sf, args.candidate, single=True)
    coords = hs.frame.symbols
    rhs = canonical_equations(hs)
    if args.init is not None:
        z0 = _parse_init(args.init, len(coords))
        try:
            traj = integrate(rhs, coords, z0, args.T, args.h, hs.charts)
        except ChartExit as exc:
            if exc.t == 0:
                raise UsageError(f"initial point {args.init} is off the chart region") from None
            print(f"trajectory left the chart at t={exc.t:.6g}", file=sys.stderr)
            return EXIT_FAIL
        except StepRejected as exc:
            print(f"integration failed: {exc}", file=sys.stderr)
            return EXIT_FAIL
    else:
        pts = canonical_points(hs, args.samples, args.seed, guards=cand.maps)
        _, traj = first_viable_start(rhs, coords, pts, args.T, args.h, hs.charts)
        if traj is None:
            print("no sampled start point stays on the charts", file=sys.stderr)
            return EXIT_INCONCLUSIVE
    report = run_pipeline(hs, cand, _options(args))
    resolved = report.values["candidate"]
    gbar, G = report.values.get("gbar"), report.values.get("G")
    mapped = map_trajectory(resolved.maps, resolved.factor_xs + resolved.factor_ys, traj)
    payload = {
        "system": sf.system.name,
        "candidate": cand.name,
        "start": [float(v) for v in traj.states[0]],
        "T": traj.horizon,
        "h": traj.step,
        "endpoint": [float(v) for v in traj.endpoint],
        "mapped_endpoint": {str(s): float(v) for s, v in zip(mapped.symbols, mapped.endpoint)},
        "drift_H": conservation_drift(hs.hamiltonian, traj),
        "drift_Gbar": None if gbar is None else conservation_drift(gbar, traj),
        "mapped_residual": None,
    }
    if G is not None:
        payload["mapped_residual"] = residual_dynamics(factor_canonical_equations(G, resolved.nu), mapped)
    fmt = lambda v: "n/a" if v is None else f"{v:.3g}"  # noqa: E731
    lines = [
        f"{sf.system.name} / {cand.name}: T={payload['T']:g}, h={payload['h']:g}",
        "  start    " + ", ".join(f"{s}={v:.6g}" for s, v in zip(coords, payload["start"])),
        "  endpoint " + ", ".join(f"{s}={v:.6g}" for s, v in zip(coords, payload["endpoint"])),
        "  mapped   " + ", ".join(f"{s}={v:.6g}" for s, v in payload["mapped_endpoint"].items()),
        f"  drift H        {fmt(payload['drift_H'])}",
        f"  drift G~       {fmt(payload['drift_Gbar'])}",
        f"  mapped residual {fmt(payload['mapped_residual'])}",
    ]
    _emit(args, payload, "\n".join(lines))
    return EXIT_PASS


def cmd_boundary(args) -> int:
    sf = _load(args)
    hs = sf.hamiltonian_system()
    (cand,) = _select(sf, args.candidate, single=True)
    fibers = classify_boundary(hs, cand, args.fibers, seed=args.seed)
    counts = Counter(f.verdict for f in fibers)
    payload = {
        "system": sf.system.name,
        "candidate": cand.name,
        "nu": cand.nu,
        "fibers": [{"q0": {k: float(v) for k, v in f.q0.items()}, "rank": f.rank, "verdict": f.verdict}
                   for f in fibers],
        "counts": dict(counts),
    }
    lines = [f"{sf.system.name} / {cand.name}: nu={cand.nu}, {len(fibers)} fibers"]
    for f in fibers:
        q0 = ", ".join(f"{k}={float(v):.4g}" for k, v in f.q0.items())
        lines.append(f"  {q0:<40} rank {f.rank}  {f.verdict}")
    lines.append("  " + ", ".join(f"{k}: {v}/{len(fibers)}" for k, v in sorted(counts.items())))
    _emit(args, payload, "\n".join(lines))
    return EXIT_PASS


# -- argument parsing -------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ocfactor", description="Verify and build factorizations of optimal control systems.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, candidate=True):
        p.add_argument("file", help=".ocs file (bundled corpus names such as e1.ocs also work)")
        if candidate:
            p.add_argument("--candidate", help="candidate block name")
        p.add_argument("--json", action="store_true", help="machine-readable output on stdout")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--samples", type=int, default=100)
        p.add_argument("--tol", type=float, default=1e-8)

    p = sub.add_parser("parse", help="check a file and echo the normalized system")
    common(p, candidate=False)
    p.add_argument("--output", help="also write the output to this file")
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("verify", help="run the verification pipeline")
    common(p)
    p.add_argument("--T", type=float, default=1.0, help="horizon of the numeric cross-checks")
    p.add_argument("--h", type=float, default=1e-3, help="RK4 step")
    p.add_argument("--output", help="also write the report to this file")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reduce", help="build the factor Lagrangian system")
    common(p)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--output", help="write a round-trip .ocs file with the generated candidate")
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("simulate", help="integrate the canonical flow and map it to the factor system")
    common(p)
    p.add_argument("--init", help="start point p1,..,pn,q1,..,qn (default: first sampled point)")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--output", help="also write the output to this file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("boundary", help="classify the transformed boundary problem per fiber")
    common(p)
    p.add_argument("--fibers", type=int, default=20)
    p.add_argument("--output", help="also write the output to this file")
    p.set_defaults(func=cmd_boundary)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    np.seterr(all="ignore")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ocfactor: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OcsFormatError as exc:
        print(f"{args.file}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OCFactorError as exc:
        print(f"ocfactor: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
