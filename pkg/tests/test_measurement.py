import math

import numpy as np
import pytest

from conftest import random_wclass
from wlocc import (
    IncompleteMeasurementError,
    KrausOp,
    LocalMeasurement,
    MajorizationError,
    PairLabel,
    Party,
    PureState3Q,
    SchmidtPair,
    WClassState,
    apply,
    apply_canonical,
    assisted_conversion_plan,
    canonicalize,
    concurrence,
    embed,
    hadamard_step,
    nielsen_conversion,
    pair_state_of,
    projective_z,
    validate,
    weighted_pair,
)
from wlocc.measurement import apply_step, nielsen_step_for

W = WClassState(1 / 3, 1 / 3, 1 / 3)


def test_kraus_guards():
    with pytest.raises(ValueError):
        KrausOp(np.eye(3))
    with pytest.raises(ValueError):
        KrausOp(2 * np.eye(2))
    with pytest.raises(ValueError):
        LocalMeasurement(Party.A, ())


def test_validate_rejects_leaky_pair():
    m = LocalMeasurement(
        Party.A,
        (
            KrausOp(np.diag([math.sqrt(0.3), 0.0])),
            KrausOp(np.diag([math.sqrt(0.7), 0.0])),
        ),
    )
    assert not validate(m)
    with pytest.raises(IncompleteMeasurementError):
        apply(embed(W), m)


def test_weighted_pair_limits():
    m = weighted_pair(1.0, Party.B)
    np.testing.assert_allclose(m.ops[0].matrix, np.diag([1.0, 0.0]), atol=1e-15)
    np.testing.assert_allclose(m.ops[1].matrix, np.diag([0.0, 1.0]), atol=1e-15)
    with pytest.raises(ValueError):
        weighted_pair(1.5, Party.B)


def test_weighted_pair_complete(rng):
    for x in rng.uniform(0, 1, size=50):
        assert validate(weighted_pair(float(x), Party.C))


def test_projective_z_on_w():
    branches = apply(embed(W), projective_z(Party.C))
    assert len(branches) == 2
    b0, b1 = branches
    assert b0.probability == pytest.approx(2 / 3, abs=1e-12)
    got, _ = canonicalize(b0.state)
    assert got.coords == pytest.approx((0.5, 0.5, 0.0), abs=1e-12)
    assert b1.probability == pytest.approx(1 / 3, abs=1e-12)


def test_half_weight_split_of_w():
    branches = apply(embed(W), weighted_pair(0.5, Party.C))
    b0, b1 = branches
    assert b0.probability == pytest.approx(1 / 3, abs=1e-12)
    got, _ = canonicalize(b0.state)
    assert got.coords == pytest.approx((0.5, 0.5, 0.0), abs=1e-12)
    assert b1.probability == pytest.approx(2 / 3, abs=1e-12)
    got, _ = canonicalize(b1.state)
    assert got.coords == pytest.approx((0.25, 0.25, 0.5), abs=1e-12)


def test_branch_probabilities_sum_to_one(rng):
    for _ in range(100):
        s = random_wclass(rng)
        party = Party(int(rng.integers(3)))
        x = float(rng.uniform(0, 1))
        branches = apply(embed(s), weighted_pair(x, party))
        assert sum(b.probability for b in branches) == pytest.approx(1.0, abs=1e-12)


# --- canonical update rule -------------------------------------------------


def test_apply_canonical_first_round():
    alpha = 8 / 9
    (p1, s1), (p2, s2) = apply_canonical(W, Party.C, alpha)
    assert p1 == pytest.approx(16 / 27, abs=1e-12)
    assert s1.coords == pytest.approx((0.5, 0.5, 0.0), abs=1e-12)
    assert p2 == pytest.approx(11 / 27, abs=1e-12)
    assert s2.coords == pytest.approx((1 / 11, 1 / 11, 9 / 11), abs=1e-12)


def test_apply_canonical_second_round_mass():
    alpha = 8 / 9
    _, (p2, s2) = apply_canonical(W, Party.C, alpha)
    (q1, e1), _ = apply_canonical(s2, Party.A, alpha)
    assert p2 * q1 == pytest.approx(80 / 243, abs=1e-12)
    # BC halt state (0, (1-a)/(2-a), 1/(2-a)): concurrence 0.6
    assert e1.coords == pytest.approx((0.0, 0.1, 0.9), abs=1e-12)


def test_apply_canonical_zero_weight():
    (p1, _), (p2, s2) = apply_canonical(W, Party.A, 0.0)
    assert p1 == 0.0
    assert p2 == pytest.approx(1.0, abs=1e-15)
    assert s2.coords == pytest.approx(W.coords, abs=1e-12)


def test_apply_canonical_matches_apply(rng):
    for _ in range(200):
        s = random_wclass(rng)
        party = Party(int(rng.integers(3)))
        x = float(rng.uniform(0, 1))
        closed = apply_canonical(s, party, x)
        branches = apply(embed(s), weighted_pair(x, party))
        by_outcome = {b.outcome: b for b in branches}
        for k, (p, out) in enumerate(closed):
            if p < 1e-12:
                assert k not in by_outcome
                continue
            b = by_outcome[k]
            assert b.probability == pytest.approx(p, abs=1e-10)
            got, _ = canonicalize(b.state)
            assert got.coords == pytest.approx(out.coords, abs=1e-9)


# --- plus/minus readout ----------------------------------------------------


def test_hadamard_branches_agree_after_correction(rng):
    for _ in range(50):
        s = random_wclass(rng, zero_x0=True)
        branches = apply_step(embed(s), hadamard_step(Party.A))
        assert len(branches) == 2
        assert [b.probability for b in branches] == pytest.approx([0.5, 0.5], abs=1e-10)
        a0, a1 = (np.asarray(b.state.amps) for b in branches)
        k = int(np.argmax(np.abs(a0)))
        phase = a1[k] / a0[k]
        assert abs(abs(phase) - 1.0) < 1e-9
        np.testing.assert_allclose(a1, a0 * phase, atol=1e-9)


def test_hadamard_preserves_pair_concurrence():
    branches = apply_step(embed(W), hadamard_step(Party.A))
    for b in branches:
        pair = pair_state_of(b.state, PairLabel.BC)
        assert concurrence(pair) == pytest.approx(2 / 3, abs=1e-12)


# --- Nielsen conversion ----------------------------------------------------


def test_nielsen_conversion_numbers():
    src = SchmidtPair((1 + math.sqrt(0.5)) / 2, (1 - math.sqrt(0.5)) / 2)
    conv = nielsen_conversion(src, SchmidtPair(0.9, 0.1))
    assert conv.probability_first == pytest.approx(0.941942, abs=5e-7)
    assert conv.swap_second
    # completeness in the Schmidt frame
    d1, d2 = (np.asarray(d) for d in conv.diags)
    np.testing.assert_allclose(d1 * d1 + d2 * d2, np.ones(2), atol=1e-12)


def test_nielsen_conversion_infeasible():
    with pytest.raises(MajorizationError):
        nielsen_conversion(SchmidtPair(0.9, 0.1), SchmidtPair(0.5, 0.5))


def test_nielsen_conversion_degenerate():
    conv = nielsen_conversion(SchmidtPair(0.5, 0.5), SchmidtPair(0.5, 0.5))
    assert conv.probability_first == 1.0
    assert not conv.swap_second


def test_nielsen_step_trims_pair():
    # post-readout state: A pure, BC pair of concurrence 2/3
    amps = np.zeros(8, dtype=complex)
    amps[0] = amps[2] = amps[1] = math.sqrt(1 / 3)
    psi = PureState3Q(amps)
    step = nielsen_step_for(psi, PairLabel.BC, Party.B, 0.6)
    branches = apply_step(psi, step)
    assert sum(b.probability for b in branches) == pytest.approx(1.0, abs=1e-12)
    for b in branches:
        pair = pair_state_of(b.state, PairLabel.BC)
        assert concurrence(pair) == pytest.approx(0.6, abs=1e-9)


# --- conversion planning ---------------------------------------------------


def test_plan_single_round_at_equality():
    t = 0.6
    s = ((1 + math.sqrt(1 - 2 * t * t)) / (2 * t)) ** 2
    state = WClassState(s / (1 + 2 * s), 1 / (1 + 2 * s), s / (1 + 2 * s))
    plan = assisted_conversion_plan(state, t)
    assert plan.rounds == 1
    assert plan.steps[0].kind == "hadamard"
    assert plan.steps[0].party is Party.A


def test_plan_two_rounds_with_slack():
    plan = assisted_conversion_plan(WClassState(0.25, 0.25, 0.5), 0.6)
    assert plan.rounds == 2
    trim = plan.steps[1]
    assert trim.kind == "nielsen"
    assert trim.party is Party.B
    assert trim.c_src == pytest.approx(math.sqrt(0.5), abs=1e-12)
    assert trim.c_tgt == 0.6


def test_plan_equality_at_sqrt_half():
    plan = assisted_conversion_plan(WClassState(0.25, 0.25, 0.5), math.sqrt(0.5))
    assert plan.rounds == 1


def test_plan_domain_errors():
    with pytest.raises(ValueError):
        assisted_conversion_plan(W, 0.9)
    with pytest.raises(ValueError):
        assisted_conversion_plan(WClassState(0.2, 0.2, 0.2), 0.1)
