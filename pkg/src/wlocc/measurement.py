"""Local measurements: construction, validation, and application.

A measurement is a complete set of 2x2 Kraus operators acting on one
party.  The distillation protocols are built from three families: the
weighted pair that trades one canonical coordinate against halting, the
plus/minus readout that resets the |000> weight, and the two-outcome
Nielsen conversion between pair states.  Measurements that need unitary
corrections on the passive parties carry them alongside as a
MeasurementStep.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .states import (
    LocalUnitary,
    Party,
    PureState3Q,
    WClassState,
    _apply_axis,
    apply_local_unitary,
)
from .entanglement import (
    MAJORIZATION_TOL,
    PairLabel,
    SchmidtPair,
    pair_state_of,
    schmidt_of_concurrence,
)

COMPLETENESS_TOL = 1e-10
PRUNE_TOL = 1e-14
_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


class IncompleteMeasurementError(ValueError):
    """Raised when Kraus operators do not resolve the identity."""


class MajorizationError(ValueError):
    """Raised when a deterministic pair conversion would gain entanglement."""


@dataclass(frozen=True)
class KrausOp:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("Kraus operator must be 2x2")
        top = np.linalg.norm(m, 2)
        if top > 1.0 + 1e-10:
            raise ValueError(f"Kraus operator norm {top!r} exceeds 1")
        object.__setattr__(self, "matrix", m)


@dataclass(frozen=True)
class LocalMeasurement:
    party: Party
    ops: tuple[KrausOp, ...]

    def __post_init__(self):
        if len(self.ops) < 1:
            raise ValueError("measurement needs at least one operator")
        object.__setattr__(self, "ops", tuple(self.ops))


@dataclass(frozen=True)
class OutcomeBranch:
    outcome: int
    probability: float
    state: PureState3Q


@dataclass(frozen=True)
class MeasurementStep:
    """A measurement plus per-outcome unitary corrections on other parties."""

    measurement: LocalMeasurement
    corrections: Mapping[int, tuple[LocalUnitary, ...]] = field(default_factory=dict)


def validate(m: LocalMeasurement) -> bool:
    """True when the operators sum to the identity (completeness)."""
    acc = np.zeros((2, 2), dtype=complex)
    for op in m.ops:
        acc += op.matrix.conj().T @ op.matrix
    return bool(np.abs(acc - np.eye(2)).max() <= COMPLETENESS_TOL)


def apply(psi: PureState3Q, m: LocalMeasurement) -> list[OutcomeBranch]:
    """All measurement branches with probability at least PRUNE_TOL.

    Branch states are renormalized; outcome indices refer to positions
    in the operator tuple, so pruning never renumbers outcomes.
    """
    if not validate(m):
        raise IncompleteMeasurementError(
            f"operators on party {m.party.name} do not sum to the identity"
        )
    out = []
    for k, op in enumerate(m.ops):
        a = _apply_axis(psi.amps, op.matrix, m.party.axis)
        p = float(np.vdot(a, a).real)
        if p < PRUNE_TOL:
            continue
        out.append(OutcomeBranch(k, p, PureState3Q(a / np.sqrt(p))))
    return out


def apply_step(psi: PureState3Q, step: MeasurementStep) -> list[OutcomeBranch]:
    """Apply a measurement and its outcome-conditioned corrections."""
    branches = apply(psi, step.measurement)
    fixed = []
    for b in branches:
        s = b.state
        for lu in step.corrections.get(b.outcome, ()):
            s = apply_local_unitary(s, lu)
        fixed.append(OutcomeBranch(b.outcome, b.probability, s))
    return fixed


def weighted_pair(x: float, party: Party) -> LocalMeasurement:
    """Two-outcome measurement {diag(sqrt(x), 0), diag(sqrt(1-x), 1)}.

    The first outcome deletes the acting party's excited component and
    rescales the rest; the second renormalizes toward it.  Note the
    second operator keeps the full excited amplitude: the pair
    {diag(sqrt(x), 0), diag(sqrt(1-x), 0)} is not a measurement at all
    (see `validate`).
    """
    if not (-1e-12 <= x <= 1.0 + 1e-12):
        raise ValueError("weight outside [0, 1]")
    x = min(max(x, 0.0), 1.0)
    m1 = np.array([[np.sqrt(x), 0.0], [0.0, 0.0]], dtype=complex)
    m2 = np.array([[np.sqrt(1.0 - x), 0.0], [0.0, 1.0]], dtype=complex)
    return LocalMeasurement(party, (KrausOp(m1), KrausOp(m2)))


def projective_z(party: Party) -> LocalMeasurement:
    m1 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    m2 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
    return LocalMeasurement(party, (KrausOp(m1), KrausOp(m2)))


def hadamard_step(party: Party) -> MeasurementStep:
    """Plus/minus readout |0><+|, |0><-| with phase repair on the others.

    On a state with no |000> weight this moves the acting party's
    excited weight into the |000> slot, leaving the other pair's
    concurrence untouched; the minus outcome needs a Z on each passive
    party to line the branches up.
    """
    r = 1.0 / np.sqrt(2.0)
    plus = np.array([[r, r], [0.0, 0.0]], dtype=complex)
    minus = np.array([[r, -r], [0.0, 0.0]], dtype=complex)
    meas = LocalMeasurement(party, (KrausOp(plus), KrausOp(minus)))
    o1, o2 = party.others
    corr = {1: (LocalUnitary(o1, _Z), LocalUnitary(o2, _Z))}
    return MeasurementStep(meas, corr)


def apply_canonical(
    state: WClassState, party: Party, x: float
) -> list[tuple[float, WClassState]]:
    """Closed-form action of `weighted_pair(x, party)` on canonical
    coordinates.

    With xk the acting party's coordinate, the first outcome has
    probability x (1 - xk) and sets xk to zero while dividing every
    other coordinate by (1 - xk); note the result does not depend on x.
    The second outcome has probability (1 - x)(1 - xk) + xk, keeps
    xk / p2, and scales the others by (1 - x) / p2.  Branches with
    vanishing probability are returned with probability 0 and the input
    state as a placeholder.
    """
    if not (-1e-12 <= x <= 1.0 + 1e-12):
        raise ValueError("weight outside [0, 1]")
    x = min(max(x, 0.0), 1.0)
    xk = state.coord(party)
    rest = 1.0 - xk
    p1 = x * rest
    p2 = (1.0 - x) * rest + xk

    if rest < 1e-15:
        first = (0.0, state)
    else:
        c = [v / rest for v in state.coords]
        c[party.value] = 0.0
        first = (p1, WClassState(*(min(v, 1.0) for v in c)))

    if p2 < 1e-15:
        second = (0.0, state)
    else:
        c = [v * (1.0 - x) / p2 for v in state.coords]
        c[party.value] = min(xk / p2, 1.0)
        second = (p2, WClassState(*(min(v, 1.0) for v in c)))

    return [first, second]


@dataclass(frozen=True)
class NielsenConversion:
    """Two-outcome deterministic pair conversion in the Schmidt frame.

    `diags` are the diagonal entries of the two Kraus operators in the
    source Schmidt basis; the second outcome lands on the target with
    its Schmidt weights reversed and needs an X (x) X repair in the
    Schmidt frames of both pair parties (`swap_second`).
    """

    probability_first: float
    diags: tuple[tuple[float, float], tuple[float, float]]
    swap_second: bool


def nielsen_conversion(src: SchmidtPair, tgt: SchmidtPair) -> NielsenConversion:
    if src.lambda_max > tgt.lambda_max + MAJORIZATION_TOL:
        raise MajorizationError(
            f"cannot reach lambda_max {tgt.lambda_max!r} from {src.lambda_max!r}"
        )
    l0, l1 = src.lambda_max, src.lambda_min
    m0, m1 = tgt.lambda_max, tgt.lambda_min
    if m0 - m1 < 1e-12 or l1 < 1e-15:
        # target is a Bell pair (so the source already is), or the source
        # is a product (so the target is): nothing to do
        return NielsenConversion(1.0, ((1.0, 1.0), (0.0, 0.0)), False)
    p = (l0 - m1) / (m0 - m1)
    p = min(max(p, 0.0), 1.0)
    q = 1.0 - p
    d1 = (np.sqrt(p * m0 / l0), np.sqrt(p * m1 / l1))
    d2 = (np.sqrt(q * m1 / l0), np.sqrt(q * m0 / l1))
    return NielsenConversion(float(p), (d1, d2), q > 0.0)


def nielsen_step_for(
    psi: PureState3Q, pair: PairLabel, acting: Party, c_tgt: float
) -> MeasurementStep:
    """Realize a Nielsen conversion of `pair` toward concurrence c_tgt as
    a measurement step on `acting` (which must belong to the pair)."""
    first, second = pair.parties
    if acting not in (first, second):
        raise ValueError("acting party must belong to the pair")
    block = pair_state_of(psi, pair).reshape(2, 2)
    u, sv, vh = np.linalg.svd(block)
    lam = np.clip(sv**2, 0.0, None)
    lam = lam / lam.sum()
    src = SchmidtPair(float(lam[0]), float(lam[1]))
    conv = nielsen_conversion(src, schmidt_of_concurrence(c_tgt))

    def in_first_frame(d):
        return u @ np.diag(d).astype(complex) @ u.conj().T

    def in_second_frame(d):
        return vh.T @ np.diag(d).astype(complex) @ np.conj(vh)

    frame = in_first_frame if acting is first else in_second_frame
    ops = tuple(KrausOp(frame(np.asarray(d))) for d in conv.diags)
    meas = LocalMeasurement(acting, ops)
    corr = {}
    if conv.swap_second:
        corr[1] = (
            LocalUnitary(first, u @ _X @ u.conj().T),
            LocalUnitary(second, vh.T @ _X @ np.conj(vh)),
        )
    return MeasurementStep(meas, corr)


@dataclass(frozen=True)
class PlanStep:
    party: Party
    kind: str  # "hadamard" or "nielsen"
    c_src: float | None = None
    c_tgt: float | None = None


@dataclass(frozen=True)
class ConversionPlan:
    steps: tuple[PlanStep, ...]

    @property
    def rounds(self) -> int:
        return len(self.steps)


def assisted_conversion_plan(state: WClassState, target: float) -> ConversionPlan:
    """Plan taking a zero-|000>-weight state to a B-C pair of concurrence
    `target`: one plus/minus readout by A, then a Nielsen trim by B when
    the assisted concurrence strictly exceeds the target.
    """
    if state.x0 > 1e-9:
        raise ValueError("plan requires vanishing |000> weight")
    c = 2.0 * np.sqrt(max(state.x2 * state.x3, 0.0))
    if c + 1e-9 < target:
        raise ValueError(f"assisted concurrence {c!r} cannot reach {target!r}")
    steps = [PlanStep(Party.A, "hadamard")]
    if abs(c - target) > 1e-9:
        steps.append(PlanStep(Party.B, "nielsen", c_src=float(c), c_tgt=float(target)))
    return ConversionPlan(tuple(steps))
