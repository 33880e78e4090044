"""A small text format for measurement-tree protocols.

A protocol file names the initial canonical coordinates and a tree of
measurement nodes.  Each node names the acting party, a measurement,
and one edge per outcome; edges either continue to another node, halt
with a claimed product (an A-B or A-C Bell pair, a B-C pair at the
target concurrence, or an explicit discard), or loop back to an
ancestor for another pass.

    protocol example
    param alpha = 0.5
    state 0.33 0.33 0.34    # x1 x2 x3
    node r1 party=C measure=wpp(alpha) outcomes=halt:AB,node:r2
    node r2 party=A measure=hadamard outcomes=halt:BC,halt:BC

Measurements: wpp(x) is the weighted pair {diag(sqrt(x),0),
diag(sqrt(1-x),1)}; projz the computational readout; hadamard the
plus/minus readout with its phase repair; nielsen(c_src, c_tgt) the
deterministic pair conversion; kraus{[a,b;c,d],...} explicit operators
with complex entries written re+imi.  Arguments are numbers or param
names.  `#` starts a comment.  The first node is the entry point.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .states import Party, WClassState

UNBOUNDED = math.inf
"""Round count of a protocol containing a loop edge."""

_F = r"(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_FLOAT_RE = re.compile(rf"^[+-]?{_F}$")
_COMPLEX_RE = re.compile(rf"^(?P<re>[+-]?{_F})(?:(?P<im>[+-]{_F})i)?$")
_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class HaltLabel(Enum):
    AB = "AB"
    AC = "AC"
    BC = "BC"
    DISCARD = "DISCARD"

    @property
    def token(self) -> str:
        return self.value


@dataclass(frozen=True)
class Edge:
    kind: str  # "continue" | "halt" | "loop"
    target: str | None = None
    label: HaltLabel | None = None

    def token(self) -> str:
        if self.kind == "halt":
            return f"halt:{self.label.token}"
        return f"{self.kind if self.kind == 'loop' else 'node'}:{self.target}"


@dataclass(frozen=True)
class MeasureSpec:
    kind: str  # "wpp" | "projz" | "hadamard" | "nielsen" | "kraus"
    args: tuple = ()

    def n_outcomes(self) -> int:
        return len(self.args) if self.kind == "kraus" else 2


@dataclass(frozen=True)
class ProtocolNode:
    node_id: str
    party: Party
    spec: MeasureSpec
    edges: tuple[Edge, ...]


@dataclass
class ProtocolGraph:
    name: str
    params: dict[str, float]
    initial: WClassState
    entry: str
    nodes: dict[str, ProtocolNode]


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str

    def __str__(self):
        return f"{self.line}:{self.col}: {self.message}"


class ProtocolError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = tuple(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


def resolve_arg(graph: ProtocolGraph, arg) -> float:
    """Numeric value of a measurement argument (literal or param name)."""
    if isinstance(arg, str):
        return graph.params[arg]
    return float(arg)


def _parse_float(tok: str):
    if not _FLOAT_RE.match(tok):
        return None
    return float(tok)


def _parse_complex(tok: str):
    m = _COMPLEX_RE.match(tok)
    if not m:
        return None
    re_part = float(m.group("re"))
    im_part = float(m.group("im")) if m.group("im") else 0.0
    return complex(re_part, im_part)


def _parse_arg(tok: str):
    """Measurement argument: float literal or identifier reference."""
    v = _parse_float(tok)
    if v is not None:
        return v
    if _IDENT_RE.match(tok):
        return tok
    return None


def _parse_measure(tok: str, line: int, col: int, errs: list[Diagnostic]):
    if tok == "projz" or tok == "hadamard":
        return MeasureSpec(tok)
    m = re.match(r"^wpp\((.*)\)$", tok)
    if m:
        arg = _parse_arg(m.group(1))
        if arg is None:
            errs.append(Diagnostic(line, col + 4, f"bad wpp argument {m.group(1)!r}"))
            return None
        return MeasureSpec("wpp", (arg,))
    m = re.match(r"^nielsen\((.*)\)$", tok)
    if m:
        parts = m.group(1).split(",")
        if len(parts) != 2:
            errs.append(Diagnostic(line, col, "nielsen takes two arguments"))
            return None
        args = []
        off = col + 8
        for part in parts:
            a = _parse_arg(part)
            if a is None:
                errs.append(Diagnostic(line, off, f"bad nielsen argument {part!r}"))
                return None
            args.append(a)
            off += len(part) + 1
        return MeasureSpec("nielsen", tuple(args))
    m = re.match(r"^kraus\{(.*)\}$", tok)
    if m:
        body = m.group(1)
        if not re.match(r"^\[[^\[\]]*\](,\[[^\[\]]*\])*$", body):
            errs.append(Diagnostic(line, col + 6, "malformed kraus operator list"))
            return None
        mats = []
        off = col + 6
        for chunk in re.findall(r"\[[^\[\]]*\]", body):
            rows = chunk[1:-1].split(";")
            if len(rows) != 2 or any(len(r.split(",")) != 2 for r in rows):
                errs.append(Diagnostic(line, off, "kraus operator must be [a,b;c,d]"))
                return None
            entries = []
            for r in rows:
                for e in r.split(","):
                    z = _parse_complex(e)
                    if z is None:
                        errs.append(Diagnostic(line, off, f"bad complex entry {e!r}"))
                        return None
                    entries.append(z)
            mats.append(((entries[0], entries[1]), (entries[2], entries[3])))
            off += len(chunk) + 1
        return MeasureSpec("kraus", tuple(mats))
    errs.append(Diagnostic(line, col, f"unknown measurement {tok!r}"))
    return None


def _parse_edge(tok: str, line: int, col: int, errs: list[Diagnostic]):
    m = re.match(r"^(node|halt|loop):(.+)$", tok)
    if not m:
        errs.append(Diagnostic(line, col, f"bad outcome edge {tok!r}"))
        return None
    kind, rest = m.group(1), m.group(2)
    if kind == "halt":
        try:
            return Edge("halt", label=HaltLabel(rest))
        except ValueError:
            errs.append(Diagnostic(line, col + 5, f"unknown halt label {rest!r}"))
            return None
    if not _IDENT_RE.match(rest):
        errs.append(Diagnostic(line, col + len(kind) + 1, f"bad node id {rest!r}"))
        return None
    return Edge("continue" if kind == "node" else "loop", target=rest)


def parse(text: str) -> ProtocolGraph:
    """Parse protocol text; raises ProtocolError with line:col diagnostics."""
    errs: list[Diagnostic] = []
    name = None
    params: dict[str, float] = {}
    initial = None
    saw_state = False
    nodes: dict[str, ProtocolNode] = {}
    positions: dict[str, tuple[int, int]] = {}
    edge_positions: dict[tuple[str, int], tuple[int, int]] = {}
    state_pos = (1, 1)
    section = "protocol"  # expected next section

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = [(m.start() + 1, m.group()) for m in re.finditer(r"\S+", line)]
        if not toks:
            continue
        col0, head = toks[0]

        if head == "protocol":
            if name is not None:
                errs.append(Diagnostic(lineno, col0, "duplicate protocol line"))
                continue
            if section != "protocol":
                errs.append(Diagnostic(lineno, col0, "protocol line must come first"))
            if len(toks) != 2 or not _IDENT_RE.match(toks[1][1]):
                errs.append(Diagnostic(lineno, col0, "expected: protocol <name>"))
                continue
            name = toks[1][1]
            section = "param"
        elif head == "param":
            if section not in ("param",):
                errs.append(Diagnostic(lineno, col0, "param lines must precede state"))
                continue
            if (
                len(toks) != 4
                or not _IDENT_RE.match(toks[1][1])
                or toks[2][1] != "="
            ):
                errs.append(Diagnostic(lineno, col0, "expected: param <name> = <value>"))
                continue
            v = _parse_float(toks[3][1])
            if v is None:
                errs.append(Diagnostic(lineno, toks[3][0], f"bad number {toks[3][1]!r}"))
                continue
            if toks[1][1] in params:
                errs.append(Diagnostic(lineno, toks[1][0], f"duplicate param {toks[1][1]!r}"))
                continue
            params[toks[1][1]] = v
        elif head == "state":
            if section not in ("param",):
                errs.append(Diagnostic(lineno, col0, "unexpected state line"))
                continue
            # a malformed state line still counts as the state section so
            # later node lines are not blamed for the ordering
            saw_state = True
            state_pos = (lineno, col0)
            section = "node"
            if len(toks) != 4:
                errs.append(Diagnostic(lineno, col0, "expected: state <x1> <x2> <x3>"))
                continue
            vals = []
            ok = True
            for c, t in toks[1:]:
                v = _parse_float(t)
                if v is None:
                    errs.append(Diagnostic(lineno, c, f"bad number {t!r}"))
                    ok = False
                    break
                vals.append(v)
            if not ok:
                continue
            try:
                initial = WClassState(*vals)
            except ValueError as e:
                errs.append(Diagnostic(lineno, toks[1][0], str(e)))
                continue
        elif head == "node":
            if section == "param":
                errs.append(Diagnostic(lineno, col0, "node before state line"))
                continue
            if section == "protocol":
                errs.append(Diagnostic(lineno, col0, "node before protocol line"))
                continue
            if len(toks) != 5:
                errs.append(
                    Diagnostic(
                        lineno,
                        col0,
                        "expected: node <id> party=<P> measure=<spec> outcomes=<edges>",
                    )
                )
                continue
            nid_col, nid = toks[1]
            if not _IDENT_RE.match(nid):
                errs.append(Diagnostic(lineno, nid_col, f"bad node id {nid!r}"))
                continue
            if nid in nodes:
                errs.append(Diagnostic(lineno, nid_col, f"duplicate node id {nid!r}"))
                continue
            pcol, ptok = toks[2]
            if not ptok.startswith("party="):
                errs.append(Diagnostic(lineno, pcol, "expected party=<A|B|C>"))
                continue
            try:
                party = Party[ptok[6:]]
            except KeyError:
                errs.append(Diagnostic(lineno, pcol + 6, f"unknown party {ptok[6:]!r}"))
                continue
            mcol, mtok = toks[3]
            if not mtok.startswith("measure="):
                errs.append(Diagnostic(lineno, mcol, "expected measure=<spec>"))
                continue
            spec = _parse_measure(mtok[8:], lineno, mcol + 8, errs)
            if spec is None:
                continue
            ocol, otok = toks[4]
            if not otok.startswith("outcomes="):
                errs.append(Diagnostic(lineno, ocol, "expected outcomes=<edges>"))
                continue
            body = otok[9:]
            parts = body.split(",")
            if len(parts) < 2:
                errs.append(Diagnostic(lineno, ocol + 9, "outcomes needs at least two edges"))
                continue
            edges = []
            off = ocol + 9
            bad = False
            for part in parts:
                e = _parse_edge(part, lineno, off, errs)
                if e is None:
                    bad = True
                    break
                edges.append(e)
                edge_positions[(nid, len(edges) - 1)] = (lineno, off)
                off += len(part) + 1
            if bad:
                continue
            nodes[nid] = ProtocolNode(nid, party, spec, tuple(edges))
            positions[nid] = (lineno, nid_col)
        else:
            errs.append(Diagnostic(lineno, col0, f"unknown directive {head!r}"))

    if name is None:
        errs.append(Diagnostic(1, 1, "missing protocol line"))
    if initial is None and not saw_state:
        errs.append(Diagnostic(1, 1, "missing state line"))
    if not nodes:
        errs.append(Diagnostic(1, 1, "protocol has no nodes"))
    if errs:
        raise ProtocolError(errs)

    entry = next(iter(nodes))
    graph = ProtocolGraph(name, params, initial, entry, nodes)
    errs = validate_graph(graph, positions, edge_positions, state_pos)
    if errs:
        raise ProtocolError(errs)
    return graph


def _continue_children(node: ProtocolNode):
    return [e.target for e in node.edges if e.kind == "continue"]


def validate_graph(
    graph: ProtocolGraph,
    positions=None,
    edge_positions=None,
    state_pos=(1, 1),
) -> list[Diagnostic]:
    """Structural checks shared by the parser and the graph builders."""
    positions = positions or {}
    edge_positions = edge_positions or {}
    errs: list[Diagnostic] = []

    def npos(nid):
        return positions.get(nid, (0, 0))

    def epos(nid, k):
        return edge_positions.get((nid, k), npos(nid))

    for nid, node in graph.nodes.items():
        ln, c = npos(nid)
        spec = node.spec
        if spec.kind in ("wpp", "nielsen"):
            vals = []
            for a in spec.args:
                if isinstance(a, str) and a not in graph.params:
                    errs.append(Diagnostic(ln, c, f"unknown param {a!r} in node {nid!r}"))
                    break
                vals.append(resolve_arg(graph, a))
            else:
                for v in vals:
                    if not (-1e-12 <= v <= 1.0 + 1e-12):
                        errs.append(
                            Diagnostic(ln, c, f"argument {v!r} outside [0, 1] in node {nid!r}")
                        )
                if spec.kind == "nielsen" and len(vals) == 2:
                    if vals[0] < vals[1] - 1e-12:
                        errs.append(
                            Diagnostic(
                                ln,
                                c,
                                f"nielsen source concurrence below target in node {nid!r}",
                            )
                        )
        elif spec.kind == "kraus":
            acc = np.zeros((2, 2), dtype=complex)
            for mat in spec.args:
                m = np.array(mat, dtype=complex)
                if np.linalg.norm(m, 2) > 1.0 + 1e-10:
                    errs.append(Diagnostic(ln, c, f"kraus operator norm exceeds 1 in node {nid!r}"))
                acc += m.conj().T @ m
            if np.abs(acc - np.eye(2)).max() > 1e-10:
                errs.append(Diagnostic(ln, c, f"kraus operators incomplete in node {nid!r}"))
        if len(node.edges) != spec.n_outcomes():
            errs.append(
                Diagnostic(
                    ln,
                    c,
                    f"node {nid!r} has {len(node.edges)} outcomes, measurement has {spec.n_outcomes()}",
                )
            )
        for k, e in enumerate(node.edges):
            if e.kind in ("continue", "loop") and e.target not in graph.nodes:
                le, ce = epos(nid, k)
                errs.append(Diagnostic(le, ce, f"edge target {e.target!r} does not exist"))

    if graph.entry not in graph.nodes:
        errs.append(Diagnostic(1, 1, f"entry node {graph.entry!r} does not exist"))
        return errs
    if errs:
        return errs

    # reachability over continue edges
    seen = set()
    stack = [graph.entry]
    order = {}
    while stack:
        nid = stack.pop()
        if nid in seen:
            continue
        seen.add(nid)
        stack.extend(_continue_children(graph.nodes[nid]))
    for nid in graph.nodes:
        if nid not in seen:
            ln, c = npos(nid)
            errs.append(Diagnostic(ln, c, f"node {nid!r} is unreachable from the entry"))

    # continue edges must be acyclic
    color = {}

    def dfs(nid):
        color[nid] = 1
        for ch in _continue_children(graph.nodes[nid]):
            if ch not in graph.nodes:
                continue
            st = color.get(ch, 0)
            if st == 1:
                ln, c = npos(nid)
                errs.append(Diagnostic(ln, c, f"continue edges form a cycle through {ch!r}"))
            elif st == 0:
                dfs(ch)
        color[nid] = 2

    dfs(graph.entry)
    if errs:
        return errs

    # ancestor sets via continue edges (worklist; the graph is a DAG here)
    ancestors: dict[str, set] = {nid: set() for nid in graph.nodes}
    work = [graph.entry]
    while work:
        nid = work.pop()
        new = ancestors[nid] | {nid}
        for ch in _continue_children(graph.nodes[nid]):
            if not new <= ancestors[ch]:
                ancestors[ch] |= new
                work.append(ch)

    for nid, node in graph.nodes.items():
        for k, e in enumerate(node.edges):
            if e.kind == "loop":
                if e.target == nid or e.target not in ancestors.get(nid, set()):
                    le, ce = epos(nid, k)
                    errs.append(
                        Diagnostic(
                            le, ce, f"loop target {e.target!r} is not a proper ancestor of {nid!r}"
                        )
                    )
    return errs


def round_count(graph: ProtocolGraph):
    """Longest root-to-halt chain of measurements; UNBOUNDED with a loop."""
    for node in graph.nodes.values():
        for e in node.edges:
            if e.kind == "loop":
                return UNBOUNDED
    memo: dict[str, int] = {}

    def depth(nid: str) -> int:
        if nid in memo:
            return memo[nid]
        node = graph.nodes[nid]
        best = 0
        for ch in _continue_children(node):
            best = max(best, depth(ch))
        memo[nid] = 1 + best
        return memo[nid]

    return depth(graph.entry)


def _fmt_float(v: float) -> str:
    return f"{v:.17g}"


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.17g}{z.imag:+.17g}i"


def _fmt_measure(spec: MeasureSpec) -> str:
    if spec.kind in ("projz", "hadamard"):
        return spec.kind
    if spec.kind in ("wpp", "nielsen"):
        args = ",".join(a if isinstance(a, str) else _fmt_float(a) for a in spec.args)
        return f"{spec.kind}({args})"
    mats = ",".join(
        "[{},{};{},{}]".format(
            _fmt_complex(m[0][0]), _fmt_complex(m[0][1]),
            _fmt_complex(m[1][0]), _fmt_complex(m[1][1]),
        )
        for m in spec.args
    )
    return f"kraus{{{mats}}}"


def serialize(graph: ProtocolGraph) -> str:
    """Deterministic text form: params sorted, entry node first, then the
    remaining nodes sorted by id.  parse(serialize(g)) reproduces g."""
    lines = [f"protocol {graph.name}"]
    for k in sorted(graph.params):
        lines.append(f"param {k} = {_fmt_float(graph.params[k])}")
    s = graph.initial
    lines.append(f"state {_fmt_float(s.x1)} {_fmt_float(s.x2)} {_fmt_float(s.x3)}")
    ordered = [graph.entry] + sorted(n for n in graph.nodes if n != graph.entry)
    for nid in ordered:
        node = graph.nodes[nid]
        edges = ",".join(e.token() for e in node.edges)
        lines.append(
            f"node {nid} party={node.party.name} "
            f"measure={_fmt_measure(node.spec)} outcomes={edges}"
        )
    return "\n".join(lines) + "\n"
