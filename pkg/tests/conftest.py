"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the library's own state machinery:
coordinates come from reduced-density determinants, and protocol runs
from a straight kron-matrix walk over the full eight amplitudes.  Tests
compare library output against these second routes.
"""

import math

import numpy as np
import pytest

from wlocc import WClassState, embed


@pytest.fixture
def rng():
    return np.random.default_rng(20260816)


def random_wclass(rng, zero_x0: bool = False, floor: float = 0.0) -> WClassState:
    """Random canonical coordinates, optionally without |000> weight."""
    while True:
        if zero_x0:
            x = rng.dirichlet((1.0, 1.0, 1.0))
            cand = WClassState(float(x[0]), float(x[1]), float(x[2]))
        else:
            x = rng.dirichlet((1.0, 1.0, 1.0, 1.0))
            cand = WClassState(float(x[1]), float(x[2]), float(x[3]))
        if min(cand.x1, cand.x2, cand.x3) > floor:
            return cand


def random_unitary(rng) -> np.ndarray:
    """Haar-ish 2x2 unitary via QR with phase-normalized diagonal."""
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    q, r = np.linalg.qr(z)
    return q @ np.diag(np.diag(r) / np.abs(np.diag(r)))


def scramble(psi, rng):
    """Hide the canonical form behind a random product unitary."""
    from wlocc import LocalUnitary, Party, apply_local_unitary

    out = psi
    lus = []
    for party in Party:
        u = LocalUnitary(party, random_unitary(rng))
        out = apply_local_unitary(out, u)
        lus.append(u)
    return out, lus


def det_coords(psi):
    """(x0, x1, x2, x3) recovered from single-party density determinants.

    For the canonical form, det rho_A = x1(x2+x3), det rho_B = x2(x1+x3),
    det rho_C = x3(x1+x2); pairwise products follow by elimination and
    each coordinate by a ratio.  Local-unitary invariant, so it works on
    scrambled states directly.  None for degenerate states where a
    pairwise product vanishes.
    """
    a = np.asarray(psi.amps, dtype=complex).reshape(2, 2, 2)
    dets = []
    for axis in range(3):
        m = np.moveaxis(a, axis, 0).reshape(2, 4)
        rho = m @ m.conj().T
        dets.append(float(np.linalg.det(rho).real))
    d1, d2, d3 = dets
    p12 = max((d1 + d2 - d3) / 2.0, 0.0)
    p13 = max((d1 + d3 - d2) / 2.0, 0.0)
    p23 = max((d2 + d3 - d1) / 2.0, 0.0)
    if min(p12, p13, p23) < 1e-12:
        return None
    x1 = math.sqrt(p12 * p13 / p23)
    x2 = math.sqrt(p12 * p23 / p13)
    x3 = math.sqrt(p13 * p23 / p12)
    return (max(1.0 - x1 - x2 - x3, 0.0), x1, x2, x3)


# --- brute-force protocol walk -------------------------------------------

_EYE = np.eye(2)
_Z = np.diag([1.0, -1.0])


def _on_party(op: np.ndarray, party: int) -> np.ndarray:
    mats = [_EYE, _EYE, _EYE]
    mats[party] = op
    return np.kron(np.kron(mats[0], mats[1]), mats[2])


def _pair_schmidt_kets(vec8: np.ndarray, acting: int):
    """Schmidt kets of the entangled pair around `acting`, keyed by party."""
    a = vec8.reshape(2, 2, 2)
    low = {}
    for axis in range(3):
        m = np.moveaxis(a, axis, 0).reshape(2, 4)
        low[axis] = float(np.linalg.eigvalsh(m @ m.conj().T)[0])
    bystander = min((p for p in range(3) if p != acting), key=low.get)
    mb = np.moveaxis(a, bystander, 0).reshape(2, 4)
    _, vb = np.linalg.eigh(mb @ mb.conj().T)
    pair = np.tensordot(vb[:, 1].conj(), np.moveaxis(a, bystander, 0), axes=(0, 0))
    pair = pair / np.linalg.norm(pair)
    first, second = (p for p in range(3) if p != bystander)
    u, _, vh = np.linalg.svd(pair)
    # |psi> = sum_k s_k |u_k>|w_k> with w_k amplitudes given by Vh rows
    return {first: (u[:, 0], u[:, 1]), second: (vh[0, :], vh[1, :])}


def _nielsen_kraus(vec8: np.ndarray, acting: int, c_src: float, c_tgt: float):
    """Outcome operators plus outcome-2 swap correction for a trim,
    rebuilt from scratch in the pair's Schmidt bases."""
    kets = _pair_schmidt_kets(vec8, acting)
    l0 = (1.0 + math.sqrt(max(1.0 - c_src**2, 0.0))) / 2.0
    mu0 = (1.0 + math.sqrt(max(1.0 - c_tgt**2, 0.0))) / 2.0
    l1, mu1 = 1.0 - l0, 1.0 - mu0
    if mu0 - mu1 < 1e-12 or l1 < 1e-15:
        d1, d2 = (1.0, 1.0), (0.0, 0.0)
    else:
        p = (l0 - mu1) / (mu0 - mu1)
        d1 = (math.sqrt(p * mu0 / l0), math.sqrt(p * mu1 / l1))
        d2 = (math.sqrt((1 - p) * mu1 / l0), math.sqrt((1 - p) * mu0 / l1))
    mine = kets[acting]
    ops = [
        sum(d[k] * np.outer(mine[k], mine[k].conj()) for k in range(2))
        for d in (d1, d2)
    ]
    fix = np.eye(8)
    for party, pk in kets.items():
        swap = np.outer(pk[1], pk[0].conj()) + np.outer(pk[0], pk[1].conj())
        fix = _on_party(swap, party) @ fix
    return ops, fix


def oracle_run(graph, cycles=None):
    """Walk a protocol over raw kron matrices; returns (masses, residual).

    `cycles` is the number of passes a loop edge may re-enter, engine
    convention: 0 means nothing runs at all.  Finite graphs take None.
    """
    if cycles == 0:
        return {}, 1.0
    masses: dict = {}
    residual = 0.0

    def resolve(arg):
        return graph.params[arg] if isinstance(arg, str) else float(arg)

    def branch_ops(node, vec):
        kind = node.spec.kind
        k = node.party.value
        if kind == "wpp":
            x = resolve(node.spec.args[0])
            m1 = np.array([[math.sqrt(x), 0.0], [0.0, 0.0]])
            m2 = np.array([[math.sqrt(1.0 - x), 0.0], [0.0, 1.0]])
            return [_on_party(m1, k), _on_party(m2, k)], {}
        if kind == "projz":
            return [
                _on_party(np.diag([1.0, 0.0]), k),
                _on_party(np.diag([0.0, 1.0]), k),
            ], {}
        if kind == "hadamard":
            r = 1.0 / math.sqrt(2.0)
            plus = np.array([[r, r], [0.0, 0.0]])
            minus = np.array([[r, -r], [0.0, 0.0]])
            o1, o2 = (p for p in range(3) if p != k)
            return [_on_party(plus, k), _on_party(minus, k)], {
                1: _on_party(_Z, o1) @ _on_party(_Z, o2)
            }
        if kind == "nielsen":
            ops, fix = _nielsen_kraus(
                vec, k, resolve(node.spec.args[0]), resolve(node.spec.args[1])
            )
            return [_on_party(o, k) for o in ops], {1: fix}
        if kind == "kraus":
            return [_on_party(np.asarray(m, dtype=complex), k) for m in node.spec.args], {}
        raise AssertionError(f"unhandled spec {kind}")

    def walk(nid, vec, mass, budget):
        nonlocal residual
        node = graph.nodes[nid]
        ops, fixes = branch_ops(node, vec)
        for i, (op, edge) in enumerate(zip(ops, node.edges)):
            child = op @ vec
            p = float(np.vdot(child, child).real)
            if p < 1e-14:
                continue
            child = child / math.sqrt(p)
            if i in fixes:
                child = fixes[i] @ child
            if edge.kind == "halt":
                key = edge.label.token
                masses[key] = masses.get(key, 0.0) + mass * p
            elif edge.kind == "continue":
                walk(edge.target, child, mass * p, budget)
            else:
                assert budget is not None, "loop edge in a finite walk"
                if budget <= 1:
                    residual += mass * p
                else:
                    walk(edge.target, child, mass * p, budget - 1)

    vec0 = np.asarray(embed(graph.initial).amps, dtype=complex)
    walk(graph.entry, vec0, 1.0, cycles)
    return masses, residual
