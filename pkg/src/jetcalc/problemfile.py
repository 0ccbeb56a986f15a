"""Reader for the line-oriented ``.jet`` problem format.

Example::

    base 2 x1 x2
    fiber 1 y
    order 0
    c[y;;1] = y
    c[y;;2] = y
    point P: x1=0 x2=0 y=1
    box B: x1=0:1 x2=0:1

Coefficient lines: ``c[fiber;mu;j]`` (connection), ``ctop[fiber;sigma]``
(geometric connection), ``f[fiber;nu]`` with optional ``g[fiber;sigma]``
(solved-form PDE and epsilon section).  ``exact[fiber] = expr`` records a
closed-form solution over the base, used by ``solve`` to report errors.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .connection import Connection, GeometricSpec, make_geometric
from .jetcore import JetSpace, mu_text, multi_indices, parse_mu
from .phg import EpsilonSection, SolvedPde
from .symexpr import ExprSyntaxError, UnknownVariable, parse


class JetFileError(ValueError):
    def __init__(self, message, line=None, column=None, path=None):
        self.line = line
        self.column = column
        self.path = path
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        prefix = f"{path}: " if path else ""
        super().__init__(prefix + where + message)


class ParseError(JetFileError):
    pass


class MissingCoefficient(JetFileError):
    pass


class DuplicateDefinition(JetFileError):
    pass


class UnknownCoordinate(JetFileError):
    pass


KINDS = {"c": "connection", "ctop": "geometric", "f": "pde", "g": "pde"}

_HEADER = re.compile(r"^(base|fiber)\s+(\d+)((?:\s+\S+)*)\s*$")
_ORDER = re.compile(r"^order\s+(\d+)\s*$")
_COEF = re.compile(r"^(ctop|c|f|g|exact)\[([^\]]*)\]\s*=\s*(.*)$")
_NAMED = re.compile(r"^(point|box)\s+([A-Za-z_][A-Za-z0-9_]*)\s*:(.*)$")


@dataclass
class ProblemFile:
    space: JetSpace
    kind: str
    name: str = ""
    connection: Connection | None = None
    pde: SolvedPde | None = None
    epsilon: EpsilonSection | None = None
    geometric_spec: GeometricSpec | None = None
    points: dict = field(default_factory=dict)
    boxes: dict = field(default_factory=dict)
    exact: dict = field(default_factory=dict)

    def require_connection(self) -> Connection:
        if self.connection is None:
            raise JetFileError(f"this command needs a connection; the file defines a {self.kind}")
        return self.connection


def _col(raw: str, fragment: str) -> int:
    i = raw.find(fragment)
    return i + 1 if i >= 0 else 1


def loads(text: str, path: str | None = None, name: str = "") -> ProblemFile:
    header = {}
    entries: dict = {"c": {}, "ctop": {}, "f": {}, "g": {}, "exact": {}}
    points, boxes = {}, {}
    kind = None
    kind_line = None
    deferred = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m:
            key, count, names = m.group(1), int(m.group(2)), m.group(3).split()
            if key in header:
                raise DuplicateDefinition(f"second '{key}' line", lineno, 1, path)
            if count != len(names):
                raise ParseError(f"'{key}' declares {count} names but lists {len(names)}", lineno, 1, path)
            header[key] = tuple(names)
            continue
        m = _ORDER.match(line)
        if m:
            if "order" in header:
                raise DuplicateDefinition("second 'order' line", lineno, 1, path)
            header["order"] = int(m.group(1))
            continue
        m = _COEF.match(line)
        if m:
            tag, index, expr_text = m.group(1), m.group(2), m.group(3)
            if tag in KINDS:
                this = KINDS[tag]
                if kind is None:
                    kind, kind_line = this, lineno
                elif kind != this:
                    raise DuplicateDefinition(
                        f"'{tag}[...]' conflicts with the {kind} defined on line {kind_line}",
                        lineno, 1, path,
                    )
            deferred.append((lineno, raw, tag, index, expr_text))
            continue
        m = _NAMED.match(line)
        if m:
            what, label, body = m.groups()
            table = points if what == "point" else boxes
            if label in table:
                raise DuplicateDefinition(f"{what} {label!r} defined twice", lineno, 1, path)
            table[label] = (lineno, raw, body)
            continue
        raise ParseError(f"cannot read {line!r}", lineno, 1, path)

    for key in ("base", "fiber", "order"):
        if key not in header:
            raise ParseError(f"missing '{key}' line", None, None, path)
    if kind is None:
        raise ParseError("no coefficient lines", None, None, path)
    try:
        space = JetSpace(header["base"], header["fiber"], header["order"])
    except ValueError as exc:
        raise ParseError(str(exc), None, None, path) from None

    fiber_index = {nm: a for a, nm in enumerate(space.fiber, start=1)}
    if kind == "pde":
        expr_vars = space.with_order(space.order - 1).coordinates if space.order >= 1 else ()
        if space.order < 1:
            raise ParseError("a solved-form PDE needs order >= 1", None, None, path)
    else:
        expr_vars = space.coordinates
    allowed = frozenset(expr_vars)

    for lineno, raw, tag, index, expr_text in deferred:
        parts = [p.strip() for p in index.split(";")]
        want = {"c": 3, "ctop": 2, "f": 2, "g": 2, "exact": 1}[tag]
        if len(parts) != want:
            raise ParseError(f"{tag}[...] takes {want} ';'-separated fields", lineno, _col(raw, "["), path)
        fib = parts[0]
        if fib not in fiber_index:
            raise UnknownCoordinate(f"unknown fiber coordinate {fib!r}", lineno, _col(raw, fib), path)
        alpha = fiber_index[fib]
        try:
            mu = parse_mu(parts[1]) if want >= 2 else ()
            j = int(parts[2]) if want == 3 else None
        except ValueError:
            raise ParseError(f"bad index in {tag}[{index}]", lineno, _col(raw, "["), path) from None
        if any(not 1 <= i <= space.n for i in mu) or (j is not None and not 1 <= j <= space.n):
            raise UnknownCoordinate(f"index out of range in {tag}[{index}]", lineno, _col(raw, "["), path)
        scope = frozenset(space.base) if tag == "exact" else allowed
        try:
            e = parse(expr_text, scope)
        except ExprSyntaxError as exc:
            raise ParseError(str(exc), lineno, _col(raw, expr_text) + exc.pos, path) from None
        except UnknownVariable as exc:
            col = _col(raw, expr_text) + (exc.pos or 0)
            raise UnknownCoordinate(f"unknown coordinate {exc.name!r}", lineno, col, path) from None
        key = {"c": (alpha, mu, j), "ctop": (alpha, mu), "f": (alpha, mu), "g": (alpha, mu), "exact": alpha}[tag]
        if key in entries[tag]:
            raise DuplicateDefinition(f"{tag}[{index}] defined twice", lineno, 1, path)
        entries[tag][key] = (lineno, e)

    def check_total(tag, keys, fmt):
        for key in keys:
            if key not in entries[tag]:
                raise MissingCoefficient(f"missing {fmt(key)}", None, None, path)
        extra = set(entries[tag]) - set(keys)
        if extra:
            lineno = min(entries[tag][k][0] for k in extra)
            raise ParseError(f"{tag}[...] index of the wrong order", lineno, 1, path)

    fname = space.fiber
    prob = ProblemFile(space=space, kind=kind, name=name)
    if kind == "connection":
        keys = [(a, mu, j) for a, mu in space.fiber_coordinates for j in range(1, space.n + 1)]
        check_total("c", keys, lambda k: f"c[{fname[k[0] - 1]};{mu_text(k[1])};{k[2]}]")
        prob.connection = Connection(space, {k: v[1] for k, v in entries["c"].items()}, name=name)
    elif kind == "geometric":
        keys = [(a, s) for a in range(1, space.m + 1) for s in multi_indices(space.n, space.order + 1)]
        check_total("ctop", keys, lambda k: f"ctop[{fname[k[0] - 1]};{mu_text(k[1])}]")
        prob.geometric_spec = GeometricSpec(space, {k: v[1] for k, v in entries["ctop"].items()})
        prob.connection = make_geometric(prob.geometric_spec, name=name)
    else:
        keys = [(a, s) for a in range(1, space.m + 1) for s in multi_indices(space.n, space.order)]
        check_total("f", keys, lambda k: f"f[{fname[k[0] - 1]};{mu_text(k[1])}]")
        prob.pde = SolvedPde(space, {k: v[1] for k, v in entries["f"].items()}, name=name)
        if entries["g"]:
            gkeys = [(a, s) for a in range(1, space.m + 1) for s in multi_indices(space.n, space.order + 1)]
            check_total("g", gkeys, lambda k: f"g[{fname[k[0] - 1]};{mu_text(k[1])}]")
            prob.epsilon = EpsilonSection(prob.pde, {k: v[1] for k, v in entries["g"].items()}, name=name)
    prob.exact = {fname[a - 1]: v[1] for a, v in entries["exact"].items()}

    point_space = space.with_order(space.order - 1) if kind == "pde" else space
    for label, (lineno, raw, body) in points.items():
        values = {}
        for item in body.split():
            if "=" not in item:
                raise ParseError(f"expected name=value, got {item!r}", lineno, _col(raw, item), path)
            key, val = item.split("=", 1)
            if key not in point_space.coordinates:
                raise UnknownCoordinate(f"unknown coordinate {key!r}", lineno, _col(raw, item), path)
            try:
                values[key] = float(val)
            except ValueError:
                raise ParseError(f"bad number {val!r}", lineno, _col(raw, item), path) from None
        prob.points[label] = values
    for label, (lineno, raw, body) in boxes.items():
        intervals = {}
        for item in body.split():
            key, _, rng = item.partition("=")
            if key not in space.base:
                raise UnknownCoordinate(f"unknown base coordinate {key!r}", lineno, _col(raw, item), path)
            try:
                lo, hi = (float(v) for v in rng.split(":"))
            except ValueError:
                raise ParseError(f"bad interval {rng!r}", lineno, _col(raw, item), path) from None
            intervals[key] = (lo, hi)
        if set(intervals) != set(space.base):
            raise ParseError(f"box {label!r} must give every base coordinate", lineno, 1, path)
        prob.boxes[label] = tuple(intervals[b] for b in space.base)
    return prob


def load(path) -> ProblemFile:
    path = str(path)
    with open(path) as fh:
        text = fh.read()
    stem = path.rsplit("/", 1)[-1].rsplit(".", 1)[0]
    return loads(text, path=path, name=stem)
