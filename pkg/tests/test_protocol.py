import math

import pytest

from wlocc import (
    Diagnostic,
    Edge,
    HaltLabel,
    MeasureSpec,
    ProtocolError,
    ProtocolGraph,
    ProtocolNode,
    Party,
    UNBOUNDED,
    WClassState,
    build_fortescue_lo,
    build_looping,
    build_simple3,
    build_w_distillation,
    parse,
    round_count,
    serialize,
    validate_graph,
)
from wlocc.protocol import resolve_arg

GOOD = """\
protocol demo
param alpha = 0.5
state 0.3 0.3 0.4   # leading coordinates
node r1 party=C measure=wpp(alpha) outcomes=halt:AB,node:r2
node r2 party=A measure=hadamard outcomes=halt:BC,halt:BC
"""


def diags(text):
    with pytest.raises(ProtocolError) as e:
        parse(text)
    return [str(d) for d in e.value.diagnostics]


def test_parse_good():
    g = parse(GOOD)
    assert g.name == "demo"
    assert g.params == {"alpha": 0.5}
    assert g.initial.coords == (0.3, 0.3, 0.4)
    assert g.entry == "r1"
    assert set(g.nodes) == {"r1", "r2"}
    r1 = g.nodes["r1"]
    assert r1.party is Party.C
    assert r1.spec == MeasureSpec("wpp", ("alpha",))
    assert r1.edges[0] == Edge("halt", label=HaltLabel.AB)
    assert r1.edges[1] == Edge("continue", target="r2")
    assert resolve_arg(g, "alpha") == 0.5
    assert resolve_arg(g, 0.25) == 0.25


def test_empty_file_diagnostics():
    assert diags("") == [
        "1:1: missing protocol line",
        "1:1: missing state line",
        "1:1: protocol has no nodes",
    ]


def test_positioned_diagnostics():
    base = "protocol p\nstate 0.3 0.3 0.4\n"
    assert diags(base + "node r1 party=D measure=projz outcomes=halt:AB,halt:BC\n")[
        0
    ] == "3:15: unknown party 'D'"
    assert diags(base + "node r1 party=A measure=zap outcomes=halt:AB,halt:BC\n")[
        0
    ] == "3:25: unknown measurement 'zap'"
    assert diags(base + "node r1 party=A measure=projz outcomes=halt:XY,halt:BC\n")[
        0
    ] == "3:45: unknown halt label 'XY'"
    assert diags(base + "node r1 party=A measure=projz outcomes=halt:AB,node:r9\n") == [
        "3:48: edge target 'r9' does not exist"
    ]
    assert diags(base + "node r1 party=A measure=wpp(beta) outcomes=halt:AB,halt:BC\n")[
        0
    ] == "3:6: unknown param 'beta' in node 'r1'"


def test_state_line_diagnostics():
    assert diags("protocol p\nstate 0.5 0.9 0.4\nnode r1 party=A measure=projz outcomes=halt:AB,halt:BC\n") == [
        "2:7: coordinates sum past 1"
    ]
    assert diags("protocol p\nstate 0.5 oops 0.4\nnode r1 party=A measure=projz outcomes=halt:AB,halt:BC\n") == [
        "2:11: bad number 'oops'"
    ]


def test_duplicate_node_id():
    text = (
        "protocol p\nstate 0.3 0.3 0.4\n"
        "node r1 party=A measure=projz outcomes=halt:AB,halt:BC\n"
        "node r1 party=B measure=projz outcomes=halt:AB,halt:BC\n"
    )
    assert diags(text) == ["4:6: duplicate node id 'r1'"]


def test_self_loop_rejected():
    text = (
        "protocol p\nstate 0.3 0.3 0.4\n"
        "node r1 party=A measure=projz outcomes=halt:AB,loop:r1\n"
    )
    assert diags(text) == ["3:48: loop target 'r1' is not a proper ancestor of 'r1'"]


def test_unreachable_node():
    text = (
        "protocol p\nstate 0.3 0.3 0.4\n"
        "node r1 party=A measure=projz outcomes=halt:AB,halt:BC\n"
        "node r2 party=B measure=projz outcomes=halt:AB,halt:BC\n"
    )
    msgs = diags(text)
    assert any("unreachable" in m and "'r2'" in m for m in msgs)


def test_diagnostic_str():
    assert str(Diagnostic(7, 3, "boom")) == "7:3: boom"


def test_comment_and_blank_lines():
    g = parse("protocol p\n\n# intro\nstate 0.3 0.3 0.4\nnode r1 party=A measure=projz outcomes=halt:AB,halt:BC  # tail\n")
    assert g.nodes["r1"].spec.kind == "projz"


def test_kraus_roundtrip():
    r = 1 / math.sqrt(2)
    text = (
        "protocol p\nstate 0.3 0.3 0.4\n"
        f"node r1 party=A measure=kraus{{[{r},{r};0,0],[{r},-{r};0,0]}} "
        "outcomes=halt:BC,halt:BC\n"
    )
    g = parse(text)
    spec = g.nodes["r1"].spec
    assert spec.kind == "kraus"
    assert len(spec.args) == 2
    again = parse(serialize(g))
    assert serialize(again) == serialize(g)


def test_kraus_incomplete_rejected():
    text = (
        "protocol p\nstate 0.3 0.3 0.4\n"
        "node r1 party=A measure=kraus{[0.5477225575051661,0;0,0],"
        "[0.8366600265340756,0;0,0]} outcomes=halt:AB,halt:BC\n"
    )
    msgs = diags(text)
    assert any("incomplete" in m for m in msgs)


def test_nielsen_order_check():
    text = (
        "protocol p\nstate 0.3 0.3 0.4\n"
        "node r1 party=B measure=nielsen(0.5,0.9) outcomes=halt:BC,halt:BC\n"
    )
    msgs = diags(text)
    assert any("below target" in m for m in msgs)


def test_arity_mismatch_detected():
    g = parse(GOOD)
    bad = ProtocolNode("r2", Party.A, MeasureSpec("hadamard"),
                       (Edge("halt", label=HaltLabel.BC),) * 3)
    g2 = ProtocolGraph(g.name, dict(g.params), g.initial, g.entry,
                       {**g.nodes, "r2": bad})
    msgs = [d.message for d in validate_graph(g2)]
    assert any("3 outcomes" in m for m in msgs)


def test_loop_to_ancestor_accepted():
    text = (
        "protocol p\nstate 0.3 0.3 0.4\n"
        "node r1 party=A measure=projz outcomes=halt:AB,node:r2\n"
        "node r2 party=B measure=projz outcomes=halt:AC,loop:r1\n"
    )
    g = parse(text)
    assert round_count(g) is UNBOUNDED


# --- round counting and serialization ---------------------------------------


def test_round_counts_of_builders():
    assert round_count(build_w_distillation(0.6)) == 4
    assert round_count(build_simple3(0.5)) == 3
    assert round_count(build_looping(0.6)) is UNBOUNDED
    assert round_count(build_fortescue_lo(0.1)) is UNBOUNDED


def test_serialize_full_precision():
    g = build_w_distillation(0.6)
    text = serialize(g)
    # full 17-digit precision, so parse is an exact inverse
    assert f"param alpha = {g.params['alpha']:.17g}" in text
    assert g.params["alpha"] == pytest.approx(8 / 9, abs=1e-15)
    lines = text.strip().split("\n")
    assert lines[0].startswith("protocol ")
    # entry node appears first among node lines
    node_lines = [ln for ln in lines if ln.startswith("node ")]
    assert node_lines[0].split()[1] == g.entry


def test_roundtrip_all_builders():
    builders = [
        build_w_distillation(0.6),
        build_w_distillation(1 / math.sqrt(2)),
        build_simple3(0.5),
        build_looping(0.6),
        build_looping(0.35),
        build_fortescue_lo(0.1),
    ]
    for g in builders:
        text = serialize(g)
        h = parse(text)
        assert serialize(h) == text
        assert h.entry == g.entry
        assert set(h.nodes) == set(g.nodes)
        assert h.initial.coords == pytest.approx(g.initial.coords, abs=0)
        for nid, node in g.nodes.items():
            other = h.nodes[nid]
            assert other.party is node.party
            assert other.spec.kind == node.spec.kind
            assert [e.token() for e in other.edges] == [e.token() for e in node.edges]


def test_validate_graph_entry_missing():
    g = ProtocolGraph("p", {}, WClassState(0.3, 0.3, 0.4), "nope", {})
    msgs = [d.message for d in validate_graph(g)]
    assert msgs == ["entry node 'nope' does not exist"]


def test_continue_cycle_rejected():
    n1 = ProtocolNode("a", Party.A, MeasureSpec("projz"),
                      (Edge("halt", label=HaltLabel.AB), Edge("continue", target="b")))
    n2 = ProtocolNode("b", Party.B, MeasureSpec("projz"),
                      (Edge("halt", label=HaltLabel.AC), Edge("continue", target="a")))
    g = ProtocolGraph("p", {}, WClassState(0.3, 0.3, 0.4), "a", {"a": n1, "b": n2})
    msgs = [d.message for d in validate_graph(g)]
    assert any("cycle" in m for m in msgs)


def test_discard_label_parses():
    text = (
        "protocol p\nstate 0.3 0.3 0.4\n"
        "node r1 party=A measure=projz outcomes=halt:AB,halt:DISCARD\n"
    )
    g = parse(text)
    assert g.nodes["r1"].edges[1].label is HaltLabel.DISCARD
