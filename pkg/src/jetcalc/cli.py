"""``jetc``: batch driver over ``.jet`` problem files.

Exit codes: 0 the property holds (or the computation succeeded), 1 the
property fails, 2 error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import connection as conn_mod
from . import frobenius, phg
from .connection import CONVENTION_NOTE
from .problemfile import JetFileError, load
from .symexpr import EvalDomainError, ExprSyntaxError, UnknownVariable

SCHEMA = 1

COMMANDS = (
    "curvature", "flat", "geometric", "prolong", "surjective-at", "solve",
    "paths", "eps-check", "phg-curvature", "exactness-at",
)


class CommandError(Exception):
    pass


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise CommandError(f"expected comma-separated numbers, got {text!r}") from None


def _connection(prob):
    if prob.connection is not None:
        return prob.connection
    if prob.pde is not None:
        return phg.reduce_to_first_order(prob.pde)
    raise CommandError("no connection in problem file")


def _epsilon(prob):
    if prob.epsilon is None:
        raise CommandError("this command needs a solved PDE with g[...] lines")
    return prob.epsilon


def _point_space(prob):
    return prob.space.with_order(prob.space.order - 1) if prob.kind == "pde" else prob.space


def _point(prob, args, coords, flag="at"):
    if args.point:
        if args.point not in prob.points:
            raise CommandError(f"no point named {args.point!r}")
        values = prob.points[args.point]
        missing = [c for c in coords if c not in values]
        if missing:
            raise CommandError(f"point {args.point!r} lacks {missing}")
        return {c: values[c] for c in coords}
    text = getattr(args, flag, None)
    if text is None:
        raise CommandError(f"need --point NAME or --{flag} v,... ({', '.join(coords)})")
    values = _floats(text)
    if len(values) != len(coords):
        raise CommandError(f"--{flag} needs {len(coords)} values: {', '.join(coords)}")
    return dict(zip(coords, values))


def _box(prob, args, n):
    if args.step is None:
        raise CommandError("need --step")
    if args.box is None:
        raise CommandError("need --box a:b,... or --box NAME")
    if args.box in prob.boxes:
        intervals = prob.boxes[args.box]
        return frobenius.GridBox([a for a, _ in intervals], [b for _, b in intervals], args.step)
    box = frobenius.GridBox.parse(args.box, args.step)
    if box.dim != n:
        raise CommandError(f"--box needs {n} intervals")
    return box


def _fmt(v: float) -> str:
    return f"{v + 0.0:.17g}"


# -- commands: each returns (lines, result dict, exit code) ---------------


def cmd_curvature(prob, args):
    c = _connection(prob)
    curv = conn_mod.curvature(c)
    lines = [f"{lbl} = {e}" for lbl, e in curv.labelled()]
    if not lines:
        lines.append("no curvature components (one-dimensional base)")
    if not args.symbolic:
        report = conn_mod.is_flat(c, n_samples=args.samples, tol=args.tol, seed=args.seed, curv=curv)
        lines.append(f"verdict: {report.kind}")
    lines.append(f"note: {CONVENTION_NOTE}")
    return lines, {"components": curv.to_dict(), "convention": CONVENTION_NOTE}, 0


def cmd_flat(prob, args):
    c = _connection(prob)
    report = conn_mod.is_flat(c, n_samples=args.samples, tol=args.tol, symbolic=args.symbolic, seed=args.seed)
    lines = [report.kind]
    for lbl, v in report.verdicts.items():
        lines.append(f"  {lbl}: {v.kind.value}")
        if v.witness is not None:
            w = " ".join(f"{k}={_fmt(x)}" for k, x in v.witness.items())
            lines.append(f"    witness {w} value {_fmt(v.value)}")
    return lines, report.to_dict(), 0 if report.flat else 1


def cmd_geometric(prob, args):
    c = _connection(prob)
    report = conn_mod.is_geometric(c, n_samples=args.samples, tol=args.tol, seed=args.seed)
    lines = ["GEOMETRIC" if report.geometric else "NOT GEOMETRIC"]
    lines += [f"  {v}" for v in report.violations]
    return lines, report.to_dict(), 0 if report.geometric else 1


def cmd_prolong(prob, args):
    c = _connection(prob)
    if c.order != 0:
        raise CommandError("prolong needs a first-order connection on E (order 0)")
    system = phg.prolong_equations(c)
    lines = [f"{lbl}: {e} = 0" for lbl, e in system.equations()]
    return lines, system.to_dict(), 0


def cmd_surjective_at(prob, args):
    c = _connection(prob)
    p = _point(prob, args, c.space.coordinates)
    curv = conn_mod.curvature(c)
    ok = phg.prolongation_surjective_at(c, p, tol=args.tol, curv=curv)
    values = curv.evaluate_at(p)
    report = conn_mod.is_geometric(c, n_samples=args.samples, tol=args.tol, seed=args.seed)
    search = None
    if report.geometric:
        search = phg.graph_preimage_search(c.space, phg.geometric_top(c), p, args.tol).to_dict()
    lines = ["SURJECTIVE" if ok else "NOT SURJECTIVE"]
    lines += [f"  {lbl} = {_fmt(v)}" for lbl, v in values.items()]
    if search is not None:
        lines.append(f"  preimage search: {'found' if search['preimage_exists'] else 'none'}")
    result = {"surjective": ok, "curvature_at_p": values, "preimage_search": search}
    return lines, result, 0 if ok else 1


def cmd_solve(prob, args):
    c = _connection(prob)
    space = c.space
    init = _point(prob, args, space.coordinates, flag="init")
    box = _box(prob, args, space.n)
    geometric_kind = prob.kind == "geometric" or (c.order >= 1 and args.strict)
    if geometric_kind:
        sol = frobenius.solve_geometric(c, init, box, strict=args.strict, n_samples=args.samples, tol=args.tol)
        trace = sol.trace
        result = sol.to_dict()
    else:
        trace = frobenius.integrate(c, init, box)
        result = {}
        if c.order >= 1:
            from .jetcore import holonomy_defect

            result["holonomy_defect"] = holonomy_defect(trace)
    result["nodes"] = list(box.shape)
    result["h"] = box.h
    errors = {}
    for fib, exact in prob.exact.items():
        errors[fib] = frobenius.max_error(trace, fib, exact)
    result["max_error"] = errors
    if args.out:
        trace.to_csv(args.out)
        result["trace"] = args.out
    lines = [f"solved on {'x'.join(str(n) for n in box.shape)} nodes, h = {_fmt(box.h)} (RK4)"]
    for fib, err in errors.items():
        lines.append(f"  max|{fib} - ({prob.exact[fib]})| = {_fmt(err)}")
    for key in ("holonomy_defect", "second_difference_residual"):
        if result.get(key) is not None:
            lines.append(f"  {key.replace('_', ' ')} = {_fmt(result[key])}")
    if args.out:
        lines.append(f"  trace written to {args.out}")
    return lines, result, 0


def cmd_paths(prob, args):
    c = _connection(prob)
    space = c.space
    init = _point(prob, args, space.coordinates, flag="init")
    if args.corner:
        corner = _floats(args.corner)
    elif args.box:
        corner = list(_box(prob, args, space.n).hi)
    else:
        raise CommandError("need --corner v,... or --box")
    if len(corner) != space.n:
        raise CommandError(f"--corner needs {space.n} values")
    if args.step is None:
        raise CommandError("need --step")
    d = frobenius.path_dependence(c, init, corner, args.step)
    result = {"discrepancy": d, "h": args.step, "corner": corner}
    lines = [f"path discrepancy = {_fmt(d)} (h = {_fmt(args.step)})"]
    if space.n >= 2:
        signed = frobenius.signed_holonomy(c, init, corner, args.step)
        result["signed_holonomy_12"] = [float(v) for v in signed]
        lines.append("  signed holonomy (2 first) - (1 first): " + ", ".join(_fmt(v) for v in signed))
    return lines, result, 0


def cmd_eps_check(prob, args):
    eps = _epsilon(prob)
    report = phg.epsilon_is_connection(eps, n_samples=args.samples, tol=args.tol, seed=args.seed)
    lines = ["EPSILON IS A CONNECTION" if report.is_connection else "EPSILON IS NOT A CONNECTION"]
    for lbl, v in report.verdicts.items():
        lines.append(f"  {lbl} = {report.defects[lbl]}  [{v.kind.value}]")
    return lines, report.to_dict(), 0 if report.is_connection else 1


def cmd_phg_curvature(prob, args):
    eps = _epsilon(prob)
    curv = phg.phg_curvature(eps)
    verdicts = curv.verdicts(n_samples=args.samples, tol=args.tol, seed=args.seed)
    if args.symbolic:
        vanishes = all(v.kind.value == "SymbolicZero" for v in verdicts.values())
    else:
        vanishes = all(v.is_zero for v in verdicts.values())
    lines = [f"{lbl} = {e}" for lbl, e in curv.labelled()]
    lines.append(f"rank F1 = {curv.rank}")
    lines.append("phg curvature " + ("VANISHES" if vanishes else "DOES NOT VANISH"))
    result = {
        "components": curv.to_dict(),
        "rank": curv.rank,
        "vanishes": vanishes,
        "verdicts": {k: v.to_dict() for k, v in verdicts.items()},
    }
    return lines, result, 0


def cmd_exactness_at(prob, args):
    eps = _epsilon(prob)
    p = _point(prob, args, eps.base.lower.coordinates)
    res = phg.exactness_check_at(eps, p, tol=args.tol)
    lines = [
        f"preimage {'exists' if res.preimage_exists else 'does not exist'}; "
        f"max|R| = {_fmt(res.max_abs_r)}; exact at p: {'yes' if res.consistent else 'NO'}"
    ]
    lines += [f"  {lbl} = {_fmt(v)}" for lbl, v in res.r_at_p.items()]
    return lines, res.to_dict(), 0 if res.preimage_exists else 1


HANDLERS = {
    "curvature": cmd_curvature,
    "flat": cmd_flat,
    "geometric": cmd_geometric,
    "prolong": cmd_prolong,
    "surjective-at": cmd_surjective_at,
    "solve": cmd_solve,
    "paths": cmd_paths,
    "eps-check": cmd_eps_check,
    "phg-curvature": cmd_phg_curvature,
    "exactness-at": cmd_exactness_at,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jetc", description="Jet-calculus analyses of .jet problem files.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("file")
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--box")
    p.add_argument("--step", type=float)
    p.add_argument("--init", help="initial values in coordinate order")
    p.add_argument("--at", help="point values in coordinate order")
    p.add_argument("--point", help="named point from the file")
    p.add_argument("--corner", help="target base point for 'paths'")
    p.add_argument("--out", help="CSV trace output for 'solve'")
    p.add_argument("--json", action="store_true")
    p.add_argument("--symbolic", action="store_true")
    p.add_argument("--strict", action="store_true")
    return p


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        prob = load(args.file)
        lines, result, code = HANDLERS[args.command](prob, args)
    except (JetFileError, CommandError, ExprSyntaxError, UnknownVariable, EvalDomainError,
            frobenius.NonFiniteEncountered, phg.NotGeometric, ValueError, OSError) as exc:
        print(f"error: {exc}", file=stderr)
        return 2
    if args.json:
        report = {
            "schema": SCHEMA,
            "command": args.command,
            "problem": prob.name,
            "exit_code": code,
            "result": result,
        }
        stdout.write(json.dumps(report, indent=2) + "\n")
    else:
        stdout.write("\n".join(lines) + "\n")
    return code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
