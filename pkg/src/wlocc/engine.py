"""Protocol execution and the built-in protocol families.

Executors simulate the full 8-amplitude state down every branch; they
never shortcut through canonical coordinates, so they double as an
independent check on every closed-form claim in `measurement` and
`analysis`.  Three run modes cover the three protocol shapes: finite
trees, loop-carrying trees cut off after a fixed number of passes, and
loop-carrying trees resummed exactly when each pass returns to the
initial state (the per-pass outcome masses then form a geometric series
whose sum is per-pass mass divided by one minus the loop mass).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .states import Party, PureState3Q, WClassState, canonicalize, embed
from .entanglement import (
    ExtractionError,
    PairLabel,
    concurrence,
    pair_schmidt,
    pair_state_of,
)
from .measurement import (
    KrausOp,
    LocalMeasurement,
    MeasurementStep,
    apply_step,
    assisted_conversion_plan,
    hadamard_step,
    nielsen_step_for,
    projective_z,
    weighted_pair,
)
from .protocol import (
    UNBOUNDED,
    Edge,
    HaltLabel,
    MeasureSpec,
    ProtocolError,
    ProtocolGraph,
    ProtocolNode,
    resolve_arg,
    round_count,
    validate_graph,
)

HALT_TOL = 1e-9
REENTRY_TOL = 1e-10


class ExecutionError(RuntimeError):
    """A protocol could not be executed as declared."""


class HaltAssertionError(ExecutionError):
    """A halt edge's claimed product does not match the simulated state."""


@dataclass(frozen=True)
class HaltRecord:
    label: HaltLabel
    prob: float
    concurrence: float | None
    node: str
    outcome: int
    depth: int


@dataclass(frozen=True)
class OutcomeDistribution:
    """Where the probability mass ends up.

    `residual` is everything that did not land on a labeled pair:
    explicitly discarded branches, mass still circulating when a
    truncated run stops, and pruning dust.  `expected_rounds` is the
    mean halt depth conditioned on halting (None for resummed runs);
    `max_rounds_observed` is the deepest halt seen.
    """

    p_AB: float
    p_AC: float
    p_BC: float
    residual: float
    halts: tuple[HaltRecord, ...]
    expected_rounds: float | None
    max_rounds_observed: int


def _graph_or_raise(graph: ProtocolGraph):
    errs = validate_graph(graph)
    if errs:
        raise ProtocolError(errs)


def _loop_edges(graph: ProtocolGraph):
    out = []
    for node in graph.nodes.values():
        for k, e in enumerate(node.edges):
            if e.kind == "loop":
                out.append((node.node_id, k, e))
    return out


def _nielsen_pair(graph: ProtocolGraph, acting: Party, psi: PureState3Q) -> PairLabel:
    for label in PairLabel:
        if acting in label.parties:
            try:
                pair_state_of(psi, label)
                return label
            except ExtractionError:
                continue
    raise ExecutionError(
        f"nielsen conversion by {acting.name} needs an unentangled bystander"
    )


def concrete_step(graph: ProtocolGraph, node: ProtocolNode, psi: PureState3Q) -> MeasurementStep:
    """Resolve a node's measurement spec against the live state."""
    spec = node.spec
    if spec.kind == "wpp":
        return MeasurementStep(weighted_pair(resolve_arg(graph, spec.args[0]), node.party))
    if spec.kind == "projz":
        return MeasurementStep(projective_z(node.party))
    if spec.kind == "hadamard":
        return hadamard_step(node.party)
    if spec.kind == "nielsen":
        c_tgt = resolve_arg(graph, spec.args[1])
        pair = _nielsen_pair(graph, node.party, psi)
        return nielsen_step_for(psi, pair, node.party, c_tgt)
    if spec.kind == "kraus":
        ops = tuple(KrausOp(np.array(m, dtype=complex)) for m in spec.args)
        return MeasurementStep(LocalMeasurement(node.party, ops))
    raise ExecutionError(f"unknown measurement kind {spec.kind!r}")


def check_halt(psi: PureState3Q, label: HaltLabel, t: float) -> float | None:
    """Assert a halt edge's claim against the simulated state.

    Bell halts need the bystander pure and the pair maximally entangled;
    the B-C halt needs party A pure and pair concurrence at least t.
    Returns the halt pair's concurrence (None for a discard).
    """
    if label is HaltLabel.DISCARD:
        return None
    pair = PairLabel[label.value]
    try:
        block = pair_state_of(psi, pair)
    except ExtractionError as e:
        raise HaltAssertionError(f"halt {label.token}: {e}") from e
    c = concurrence(block)
    if label is HaltLabel.BC:
        if c < t - HALT_TOL:
            raise HaltAssertionError(
                f"halt BC: concurrence {c:.12g} below target {t:.12g}"
            )
        return c
    sp = pair_schmidt(block)
    if abs(sp.lambda_max - 0.5) > HALT_TOL:
        raise HaltAssertionError(
            f"halt {label.token}: pair is not maximally entangled "
            f"(weights {sp.lambda_max:.12g}, {sp.lambda_min:.12g})"
        )
    return c


def _distribution(halts: list[HaltRecord]) -> OutcomeDistribution:
    sums = {HaltLabel.AB: 0.0, HaltLabel.AC: 0.0, HaltLabel.BC: 0.0}
    for h in halts:
        if h.label in sums:
            sums[h.label] += h.prob
    p_ab, p_ac, p_bc = sums[HaltLabel.AB], sums[HaltLabel.AC], sums[HaltLabel.BC]
    residual = max(0.0, 1.0 - p_ab - p_ac - p_bc)
    total = sum(h.prob for h in halts)
    if total > 0.0:
        expected = sum(h.prob * h.depth for h in halts) / total
    else:
        expected = 0.0
    deepest = max((h.depth for h in halts), default=0)
    return OutcomeDistribution(
        p_ab, p_ac, p_bc, residual, tuple(halts), expected, deepest
    )


def _walk(graph: ProtocolGraph, t: float, passes: int | None, visit=None):
    """Shared depth-first executor.

    `passes` bounds how many times execution may enter the protocol from
    the top (via the initial state or a loop edge); None means the graph
    must be loop-free.  Returns (halt records, loop events) where each
    loop event is (probability, re-entry state, target node).
    """
    halts: list[HaltRecord] = []
    loops: list[tuple[float, PureState3Q, str]] = []
    psi0 = embed(graph.initial)
    if passes is not None and passes == 0:
        return halts, loops
    stack = [(graph.entry, psi0, 1.0, 0, passes)]
    while stack:
        nid, psi, p, depth, budget = stack.pop()
        node = graph.nodes[nid]
        step = concrete_step(graph, node, psi)
        for br in apply_step(psi, step):
            edge = node.edges[br.outcome]
            bp = p * br.probability
            if bp < 1e-14:
                continue
            if visit is not None:
                visit(nid, br.outcome, bp, br.state, depth + 1)
            if edge.kind == "halt":
                c = check_halt(br.state, edge.label, t)
                halts.append(
                    HaltRecord(edge.label, bp, c, nid, br.outcome, depth + 1)
                )
            elif edge.kind == "continue":
                stack.append((edge.target, br.state, bp, depth + 1, budget))
            else:  # loop
                if budget is None:
                    raise ExecutionError(
                        f"loop edge at node {nid!r} in a finite run"
                    )
                if budget - 1 <= 0:
                    loops.append((bp, br.state, edge.target))
                else:
                    stack.append((edge.target, br.state, bp, depth + 1, budget - 1))
    return halts, loops


def run_finite(graph: ProtocolGraph, t: float) -> OutcomeDistribution:
    """Execute a loop-free protocol exactly."""
    _graph_or_raise(graph)
    if _loop_edges(graph):
        raise ValueError("protocol has a loop edge; use truncated or resummed")
    halts, _ = _walk(graph, t, None)
    return _distribution(halts)


def run_truncated(graph: ProtocolGraph, t: float, cycles: int) -> OutcomeDistribution:
    """Execute a looping protocol for at most `cycles` passes.

    A pass consumes its budget up front, so zero cycles executes nothing
    and leaves all mass in the residual; mass reaching the loop edge
    with no budget left stays unhalted.
    """
    _graph_or_raise(graph)
    if not _loop_edges(graph):
        raise ValueError("protocol has no loop edge; use the finite mode")
    if cycles < 0:
        raise ValueError("cycle count must be nonnegative")
    halts, _ = _walk(graph, t, cycles)
    return _distribution(halts)


def run_resummed(graph: ProtocolGraph, t: float) -> OutcomeDistribution:
    """Sum a looping protocol's geometric series in closed form.

    Requires exactly one loop edge, re-entering at the entry node with
    the initial state (checked within REENTRY_TOL); every per-pass halt
    mass is then scaled by 1 / (1 - loop mass).
    """
    _graph_or_raise(graph)
    loops_static = _loop_edges(graph)
    if len(loops_static) != 1:
        raise ValueError("resummation needs exactly one loop edge")
    halts, loops = _walk(graph, t, 1)
    psi0 = embed(graph.initial)
    q = 0.0
    for bp, state, target in loops:
        if target != graph.entry:
            raise ValueError("resummation requires the loop to re-enter at the entry")
        overlap = abs(np.vdot(psi0.amps, state.amps))
        if overlap < 1.0 - REENTRY_TOL:
            raise ExecutionError(
                f"loop re-entry state deviates from the initial state "
                f"(overlap {overlap:.12g})"
            )
        q += bp
    if q >= 1.0 - 1e-14:
        raise ExecutionError("loop mass is 1; nothing ever halts")
    scale = 1.0 / (1.0 - q)
    scaled = [
        HaltRecord(h.label, h.prob * scale, h.concurrence, h.node, h.outcome, h.depth)
        for h in halts
    ]
    sums = {HaltLabel.AB: 0.0, HaltLabel.AC: 0.0, HaltLabel.BC: 0.0}
    discard = 0.0
    for h in scaled:
        if h.label in sums:
            sums[h.label] += h.prob
        else:
            discard += h.prob
    residual = max(0.0, 1.0 - sums[HaltLabel.AB] - sums[HaltLabel.AC] - sums[HaltLabel.BC])
    deepest = max((h.depth for h in scaled), default=0)
    return OutcomeDistribution(
        sums[HaltLabel.AB],
        sums[HaltLabel.AC],
        sums[HaltLabel.BC],
        residual,
        tuple(scaled),
        None,
        deepest,
    )


@dataclass(frozen=True)
class ProtocolParams:
    """Closed-form parameters of the staged distillation at target t.

    alpha is the halting weight 2u/(1+u) with u = sqrt(1-t^2); s and
    beta exist only for t <= 1/sqrt(2), where the four-round protocol is
    available: s = ((1 + sqrt(1-2t^2)) / (2t))^2 and beta = 1-(1-alpha)s.
    """

    t: float
    alpha: float
    s: float | None
    beta: float | None

    @classmethod
    def from_t(cls, t: float) -> "ProtocolParams":
        if not (0.0 < t <= 1.0):
            raise ValueError("target concurrence must lie in (0, 1]")
        u = math.sqrt(max(1.0 - t * t, 0.0))
        alpha = 2.0 * u / (1.0 + u)
        s = beta = None
        if 1.0 - 2.0 * t * t >= -1e-12:
            root = math.sqrt(max(1.0 - 2.0 * t * t, 0.0))
            s = ((1.0 + root) / (2.0 * t)) ** 2
            beta = 1.0 - (1.0 - alpha) * s
        return cls(t, alpha, s, beta)


_W = WClassState(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)


def _mk_graph(name, params, nodes):
    graph = ProtocolGraph(name, params, _W, nodes[0].node_id, {n.node_id: n for n in nodes})
    errs = validate_graph(graph)
    if errs:  # pragma: no cover - builder bug
        raise ProtocolError(errs)
    return graph


def build_w_distillation(t: float) -> ProtocolGraph:
    """Four-round tree reaching every target t <= 1/sqrt(2) from W.

    Round for round: C trades x3 against an A-B Bell halt, A trades x1
    against a B-C halt that lands exactly on t, B trades x2 against an
    A-C Bell halt with the weight beta tuned so the leftover state's
    assisted concurrence is exactly t, and a final plus/minus readout by
    A hands B-C that concurrence deterministically.
    """
    p = ProtocolParams.from_t(t)
    if p.s is None:
        raise ValueError("four-round distillation needs t <= 1/sqrt(2)")
    params = {"alpha": p.alpha, "beta": p.beta}
    nodes = [
        ProtocolNode(
            "r1",
            Party.C,
            MeasureSpec("wpp", ("alpha",)),
            (Edge("halt", label=HaltLabel.AB), Edge("continue", target="r2")),
        ),
        ProtocolNode(
            "r2",
            Party.A,
            MeasureSpec("wpp", ("alpha",)),
            (Edge("halt", label=HaltLabel.BC), Edge("continue", target="r3")),
        ),
        ProtocolNode(
            "r3",
            Party.B,
            MeasureSpec("wpp", ("beta",)),
            (Edge("halt", label=HaltLabel.AC), Edge("continue", target="r4")),
        ),
        ProtocolNode(
            "r4",
            Party.A,
            MeasureSpec("hadamard"),
            (Edge("halt", label=HaltLabel.BC), Edge("halt", label=HaltLabel.BC)),
        ),
    ]
    return _mk_graph("staged_distillation", params, nodes)


def build_simple3(t: float) -> ProtocolGraph:
    """Three fixed rounds from W: an even coin by C (halting on an A-B
    Bell), a plus/minus readout by A, and one Nielsen trim by B down to
    the target."""
    if not (0.0 < t <= 1.0 / math.sqrt(2.0) + 1e-12):
        raise ValueError("three-round protocol needs t <= 1/sqrt(2)")
    src = 1.0 / math.sqrt(2.0)
    params = {"half": 0.5, "src": src, "tgt": float(t)}
    nodes = [
        ProtocolNode(
            "r1",
            Party.C,
            MeasureSpec("wpp", ("half",)),
            (Edge("halt", label=HaltLabel.AB), Edge("continue", target="r2")),
        ),
        ProtocolNode(
            "r2",
            Party.A,
            MeasureSpec("hadamard"),
            (Edge("continue", target="r3"), Edge("continue", target="r3")),
        ),
        ProtocolNode(
            "r3",
            Party.B,
            MeasureSpec("nielsen", ("src", "tgt")),
            (Edge("halt", label=HaltLabel.BC), Edge("halt", label=HaltLabel.BC)),
        ),
    ]
    return _mk_graph("three_round", params, nodes)


def build_looping(t: float) -> ProtocolGraph:
    """The round-robin weighted-pair cycle from W.

    All three parties use the same weight alpha; each pass peels off an
    A-B Bell, a B-C pair at exactly t, or an A-C Bell, and the leftover
    pass returns to W for another go.  For t above 1/sqrt(2) this is the
    only route, and no finite truncation of it reaches the target with
    certainty.
    """
    if not (0.0 < t < 1.0 - 1e-12):
        raise ValueError("recycling protocol needs t in (0, 1)")
    p = ProtocolParams.from_t(t)
    params = {"alpha": p.alpha}
    nodes = [
        ProtocolNode(
            "r1",
            Party.C,
            MeasureSpec("wpp", ("alpha",)),
            (Edge("halt", label=HaltLabel.AB), Edge("continue", target="r2")),
        ),
        ProtocolNode(
            "r2",
            Party.A,
            MeasureSpec("wpp", ("alpha",)),
            (Edge("halt", label=HaltLabel.BC), Edge("continue", target="r3")),
        ),
        ProtocolNode(
            "r3",
            Party.B,
            MeasureSpec("wpp", ("alpha",)),
            (Edge("halt", label=HaltLabel.AC), Edge("loop", target="r1")),
        ),
    ]
    return _mk_graph("recycling", params, nodes)


def build_fortescue_lo(epsilon: float) -> ProtocolGraph:
    """Bell distillation from W by small nibbles of weight epsilon.

    The cycle matches the recycling protocol at weight epsilon, except
    the B-C branch is not yet maximally entangled and gets one extra
    conversion measurement: it either reaches a perfect B-C Bell pair or
    is discarded.  Run it with target 1.
    """
    if not (0.0 < epsilon < 1.0):
        raise ValueError("epsilon must lie in (0, 1)")
    params = {"eps": float(epsilon)}
    nodes = [
        ProtocolNode(
            "r1",
            Party.C,
            MeasureSpec("wpp", ("eps",)),
            (Edge("halt", label=HaltLabel.AB), Edge("continue", target="r2")),
        ),
        ProtocolNode(
            "r2",
            Party.A,
            MeasureSpec("wpp", ("eps",)),
            (Edge("continue", target="conv"), Edge("continue", target="r3")),
        ),
        ProtocolNode(
            "conv",
            Party.B,
            MeasureSpec("wpp", ("eps",)),
            (Edge("halt", label=HaltLabel.DISCARD), Edge("halt", label=HaltLabel.BC)),
        ),
        ProtocolNode(
            "r3",
            Party.B,
            MeasureSpec("wpp", ("eps",)),
            (Edge("halt", label=HaltLabel.AC), Edge("loop", target="r1")),
        ),
    ]
    return _mk_graph("bell_recycling", params, nodes)


def fl_success(epsilon: float, n_cycles: int) -> float:
    """Total Bell yield of `build_fortescue_lo(epsilon)` after n passes:
    (6 - 4 eps) / (6 - 3 eps) * (1 - (1 - eps)^(2 n))."""
    if not (0.0 < epsilon < 1.0):
        raise ValueError("epsilon must lie in (0, 1)")
    if n_cycles < 0:
        raise ValueError("cycle count must be nonnegative")
    return (
        (6.0 - 4.0 * epsilon)
        / (6.0 - 3.0 * epsilon)
        * (1.0 - (1.0 - epsilon) ** (2 * n_cycles))
    )


FAMILY_BUILDERS: dict[str, Callable] = {
    "thm1": build_w_distillation,
    "simple3": build_simple3,
    "thm2": build_looping,
    "fort-lo": build_fortescue_lo,
}

# the registry tokens double as stable callable names
build_thm1 = build_w_distillation
build_thm2 = build_looping


@dataclass(frozen=True)
class LiftParams:
    """How a finite protocol's last Bell round gets split and extended."""

    node_id: str
    depth: int
    label: HaltLabel
    q: float  # Bell mass the original round produced
    s: float  # bystander weight going into that round
    delta: float  # replacement weight reproducing q
    s_prime: float  # bystander weight after the replacement round
    branch: str  # "squeeze" (s' < 1/2) or "restage" (s' >= 1/2)
    gamma: float | None
    alpha_prime: float | None
    beta_prime: float | None
    conv_concurrence: float


def _fresh(existing, base: str) -> str:
    if base not in existing:
        return base
    k = 2
    while f"{base}{k}" in existing:
        k += 1
    return f"{base}{k}"


def _trace_states(graph: ProtocolGraph, t: float):
    """Pre-measurement state, mass, and depth seen at every node."""
    records: dict[str, list[tuple[PureState3Q, float, int]]] = {
        graph.entry: [(embed(graph.initial), 1.0, 1)]
    }
    stack = [(graph.entry, embed(graph.initial), 1.0, 1)]
    while stack:
        nid, psi, p, depth = stack.pop()
        node = graph.nodes[nid]
        step = concrete_step(graph, node, psi)
        for br in apply_step(psi, step):
            edge = node.edges[br.outcome]
            bp = p * br.probability
            if bp < 1e-14 or edge.kind != "continue":
                continue
            records.setdefault(edge.target, []).append((br.state, bp, depth + 1))
            stack.append((edge.target, br.state, bp, depth + 1))
    return records


def _descendants(graph: ProtocolGraph, nid: str) -> set:
    seen = set()
    stack = [e.target for e in graph.nodes[nid].edges if e.kind == "continue"]
    while stack:
        cur = stack.pop()
        if cur in seen:
            continue
        seen.add(cur)
        stack.extend(
            e.target for e in graph.nodes[cur].edges if e.kind == "continue"
        )
    return seen


def _epr_edges(node: ProtocolNode):
    return [
        (k, e)
        for k, e in enumerate(node.edges)
        if e.kind == "halt" and e.label in (HaltLabel.AB, HaltLabel.AC)
    ]


@dataclass(frozen=True)
class LastBellRound:
    """The unique final Bell-producing node and its local data."""

    node_id: str
    depth: int
    label: HaltLabel
    outcome: int
    s: float  # bystander weight entering the node (Bell-pair picture)
    q: float  # probability of the Bell halt at that node


def locate_last_bell_round(graph: ProtocolGraph, t: float) -> LastBellRound:
    """Find the one node that halts on an A-B or A-C Bell pair with no
    such halt deeper in the tree, and read off its split data.

    The protocol must be loop-free; the state entering the node must
    carry no |000> weight and equal pair weights, and the acting party
    must be the one left out of the Bell pair.  Anything else raises
    ExecutionError.
    """
    _graph_or_raise(graph)
    if _loop_edges(graph):
        raise ValueError("only loop-free protocols can be analyzed this way")
    if not (0.0 < t <= 1.0):
        raise ValueError("target concurrence must lie in (0, 1]")

    candidates = []
    for nid, node in graph.nodes.items():
        mine = _epr_edges(node)
        if not mine:
            continue
        below = _descendants(graph, nid)
        if any(_epr_edges(graph.nodes[d]) for d in below):
            continue
        candidates.append((nid, mine))
    if len(candidates) != 1:
        raise ExecutionError(
            f"need exactly one last Bell round, found {len(candidates)}"
        )
    nid, mine = candidates[0]
    if len(mine) != 1:
        raise ExecutionError(f"node {nid!r} halts on more than one Bell pair")
    (epr_outcome, epr_edge) = mine[0]
    label = epr_edge.label
    node = graph.nodes[nid]
    if node.party is not PairLabel[label.value].excluded:
        raise ExecutionError(
            f"node {nid!r} produces {label.token} but is measured by {node.party.name}"
        )

    records = _trace_states(graph, t).get(nid)
    if not records:
        raise ExecutionError(f"node {nid!r} is never reached")
    coords0, _ = canonicalize(records[0][0])
    depth = records[0][2]
    for psi, _, d in records[1:]:
        c, _ = canonicalize(psi)
        if max(abs(a - b) for a, b in zip(c.coords, coords0.coords)) > 1e-9 or d != depth:
            raise ExecutionError(f"node {nid!r} sees inconsistent states")
    if coords0.x0 > 1e-9:
        raise ExecutionError("state entering the Bell round carries |000> weight")

    # picture with the Bell pair on (A, B): for an A-C halt read x2 <-> x3
    if label is HaltLabel.AB:
        pair_a, pair_b, bystander = coords0.x1, coords0.x2, coords0.x3
    else:
        pair_a, pair_b, bystander = coords0.x1, coords0.x3, coords0.x2
    if abs(pair_a - pair_b) > 1e-9:
        raise ExecutionError("state entering the Bell round is not symmetric")
    s = bystander

    psi_m = records[0][0]
    step = concrete_step(graph, node, psi_m)
    q = 0.0
    for br in apply_step(psi_m, step):
        if br.outcome == epr_outcome:
            q = br.probability
    if q <= 1e-12:
        raise ExecutionError("original Bell round has no Bell mass to reproduce")
    if s + q > 1.0 + 1e-12:
        raise ExecutionError("Bell mass exceeds the pair weight; cannot split")
    return LastBellRound(nid, depth, label, epr_outcome, s, q)


def plan_lift(graph: ProtocolGraph, t: float) -> LiftParams:
    """Derive the split-and-extend parameters for `lift`."""
    ctx = locate_last_bell_round(graph, t)
    nid, label, s, q, depth = ctx.node_id, ctx.label, ctx.s, ctx.q, ctx.depth

    delta = min(q / (1.0 - s), 1.0)
    s_prime = min(s / (1.0 - q), 1.0)
    conv_c = math.sqrt(max(2.0 * s_prime * (1.0 - s_prime), 0.0))
    if conv_c < t - 1e-9:
        raise ExecutionError(
            f"post-split assisted concurrence {conv_c:.12g} falls below target {t:.12g}"
        )

    # near 1/2 the weight function's slope blows up and s_prime carries
    # ~1e-8 noise; prefer restaging there, where the squeeze would be a
    # near-no-op (gamma -> 0 quadratically).
    if s_prime < 0.5 - 1e-7:
        gamma = (1.0 - 2.0 * s_prime) / (1.0 - s_prime) ** 2
        return LiftParams(
            nid, depth, label, q, s, delta, s_prime, "squeeze", gamma, None, None, conv_c
        )
    alpha_prime = (3.0 - 1.0 / s_prime) / 2.0
    alpha_prime = min(max(alpha_prime, 0.0), 1.0)
    p = ProtocolParams.from_t(t)
    if p.s is None:
        raise ExecutionError("restaging needs t <= 1/sqrt(2)")
    beta_prime = 1.0 - (1.0 - alpha_prime) * p.s
    if not (0.0 < beta_prime <= 1.0 + 1e-12):
        raise ExecutionError("restaged weight falls outside (0, 1]")
    return LiftParams(
        nid,
        depth,
        label,
        q,
        s,
        delta,
        s_prime,
        "restage",
        None,
        alpha_prime,
        min(beta_prime, 1.0),
        conv_c,
    )


def lift(graph: ProtocolGraph, t: float) -> ProtocolGraph:
    """Strictly improve a finite protocol's Bell yield at equal target.

    The last Bell-producing round is replaced by a weaker weighted pair
    that reproduces the original Bell probability, and the leftover
    state (now carrying more pair weight) is either squeezed once more
    for an extra Bell chance and converted down to the target, or, when
    its bystander weight reaches 1/2, restaged through the three
    remaining rounds of the staged distillation at a recomputed weight.
    Every new B-C halt lands on concurrence exactly t (a trailing
    Nielsen trim is inserted where a halt would overshoot).  The
    original continuation below the replaced round is dropped along
    with any nodes it alone reached.
    """
    plan = plan_lift(graph, t)
    label = plan.label
    pic_swap = label is HaltLabel.AC

    def real_party(pic: Party) -> Party:
        if not pic_swap or pic is Party.A:
            return pic
        return Party.C if pic is Party.B else Party.B

    def real_label(pic: HaltLabel) -> HaltLabel:
        if not pic_swap or pic in (HaltLabel.BC, HaltLabel.DISCARD):
            return pic
        return HaltLabel.AC if pic is HaltLabel.AB else HaltLabel.AB

    params = dict(graph.params)
    nodes = dict(graph.nodes)
    old = nodes[plan.node_id]

    def add_param(base: str, value: float) -> str:
        name = _fresh(params, base)
        params[name] = float(value)
        return name

    def add_node(base: str, party: Party, spec: MeasureSpec, edges) -> str:
        name = _fresh(nodes, base)
        nodes[name] = ProtocolNode(name, party, spec, tuple(edges))
        return name

    def bc_halt_edge(c_here: float) -> Edge:
        """halt:BC, via a trailing trim when the pair overshoots t."""
        if c_here > t + 1e-9:
            cs = add_param("trim_src", c_here)
            ct = add_param("trim_tgt", t)
            trim = add_node(
                "trim",
                real_party(Party.B),
                MeasureSpec("nielsen", (cs, ct)),
                (Edge("halt", label=HaltLabel.BC), Edge("halt", label=HaltLabel.BC)),
            )
            return Edge("continue", target=trim)
        return Edge("halt", label=HaltLabel.BC)

    delta_name = add_param("delta", plan.delta)
    sp = plan.s_prime

    if plan.branch == "squeeze":
        gamma_name = add_param("gamma", plan.gamma)
        # state after the squeeze's continue branch, in real coordinates
        pic = (sp / 2.0, sp / 2.0, 1.0 - sp)
        coords = (pic[0], pic[2], pic[1]) if pic_swap else pic
        conv_state = WClassState(*coords)
        conv_plan = assisted_conversion_plan(conv_state, t)
        # two fixed conversion rounds, so the result is always the
        # original round count plus two; at equality the trim is an
        # identity conversion with one effective outcome
        if len(conv_plan.steps) > 1:
            c_src = conv_plan.steps[1].c_src
        else:
            c_src = max(plan.conv_concurrence, t)
        cs = add_param("conv_src", c_src)
        ct = add_param("conv_tgt", t)
        nid2 = add_node(
            "convert",
            real_party(Party.B),
            MeasureSpec("nielsen", (cs, ct)),
            (Edge("halt", label=HaltLabel.BC), Edge("halt", label=HaltLabel.BC)),
        )
        hid = add_node(
            "finish",
            Party.A,
            MeasureSpec("hadamard"),
            (Edge("continue", target=nid2), Edge("continue", target=nid2)),
        )
        squeeze_id = add_node(
            "squeeze",
            old.party,
            MeasureSpec("wpp", (gamma_name,)),
            (Edge("halt", label=label), Edge("continue", target=hid)),
        )
        follow = squeeze_id
    else:
        a_name = add_param("alpha2", plan.alpha_prime)
        b_name = add_param("beta2", plan.beta_prime)
        # concurrence of the restage's first B-C halt (see module tests)
        c_first = 2.0 * math.sqrt(2.0 * sp * (1.0 - sp)) / (1.0 + sp)
        g3 = add_node(
            "finish",
            Party.A,
            MeasureSpec("hadamard"),
            (Edge("halt", label=HaltLabel.BC), Edge("halt", label=HaltLabel.BC)),
        )
        g2 = add_node(
            "restage_b",
            real_party(Party.B),
            MeasureSpec("wpp", (b_name,)),
            (Edge("halt", label=real_label(HaltLabel.AC)), Edge("continue", target=g3)),
        )
        g1 = add_node(
            "restage_a",
            Party.A,
            MeasureSpec("wpp", (a_name,)),
            (bc_halt_edge(c_first), Edge("continue", target=g2)),
        )
        follow = g1

    nodes[plan.node_id] = ProtocolNode(
        plan.node_id,
        old.party,
        MeasureSpec("wpp", (delta_name,)),
        (Edge("halt", label=label), Edge("continue", target=follow)),
    )

    # drop whatever only the replaced continuation reached
    reachable = {graph.entry}
    stack = [graph.entry]
    while stack:
        for e in nodes[stack.pop()].edges:
            if e.kind == "continue" and e.target not in reachable:
                reachable.add(e.target)
                stack.append(e.target)
    nodes = {nid: n for nid, n in nodes.items() if nid in reachable}
    used_params = {
        a for n in nodes.values() for a in n.spec.args if isinstance(a, str)
    }
    params = {k: v for k, v in params.items() if k in used_params}

    out = ProtocolGraph(
        graph.name + "_lifted",
        params,
        graph.initial,
        graph.entry,
        nodes,
    )
    errs = validate_graph(out)
    if errs:  # pragma: no cover - construction bug
        raise ProtocolError(errs)
    return out
