"""Pairwise entanglement measures and two-qubit conversion predicates.

Pair states are length-4 amplitude vectors indexed by 2i + j for the
(first, second) party of the pair.  Mixed two-qubit states enter only
through the concurrence of assistance, which is what the distillation
protocols optimize.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .states import Party, PureState3Q, WClassState, reduced_density

PURITY_TOL = 1e-9
PAIR_NORM_TOL = 1e-9
FEASIBLE_TOL = 1e-9
MAJORIZATION_TOL = 1e-12

_SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_YY = np.kron(_SIGMA_Y, _SIGMA_Y)


class ExtractionError(ValueError):
    """Raised when a party is still entangled with the pair being read off."""


class PairLabel(Enum):
    AB = (Party.A, Party.B)
    AC = (Party.A, Party.C)
    BC = (Party.B, Party.C)

    @property
    def parties(self) -> tuple[Party, Party]:
        return self.value

    @property
    def excluded(self) -> Party:
        (p, q) = self.value
        return next(r for r in Party if r not in (p, q))


@dataclass(frozen=True)
class SchmidtPair:
    """Descending Schmidt weights (lambda_max, lambda_min) of a pair state."""

    lambda_max: float
    lambda_min: float

    def __post_init__(self):
        if not (-1e-12 <= self.lambda_min <= self.lambda_max <= 1.0 + 1e-12):
            raise ValueError("Schmidt weights must satisfy 1 >= max >= min >= 0")
        if abs(self.lambda_max + self.lambda_min - 1.0) > 1e-9:
            raise ValueError("Schmidt weights must sum to 1")


def concurrence(pair_amps) -> float:
    """Concurrence 2 |a00 a11 - a01 a10| of a two-qubit pure state."""
    a = np.asarray(pair_amps, dtype=complex).reshape(4)
    n = np.linalg.norm(a)
    if abs(n - 1.0) > PAIR_NORM_TOL:
        raise ValueError(f"pair state norm {n!r} is not 1")
    return float(2.0 * abs(a[0] * a[3] - a[1] * a[2]))


def pair_state_of(psi: PureState3Q, pair: PairLabel) -> np.ndarray:
    """Project out the excluded party and return the pair amplitudes.

    The excluded party must be pure (unentangled) up to PURITY_TOL,
    otherwise there is no pair state to speak of and ExtractionError is
    raised.  The result is a normalized 4-vector ordered (first,
    second); its overall phase follows from the excluded party's
    dominant eigenvector and is not otherwise pinned down.
    """
    other = pair.excluded
    rho = reduced_density(psi.amps, other)
    w, v = np.linalg.eigh(rho)
    if w[0] > PURITY_TOL:
        raise ExtractionError(
            f"party {other.name} still carries entanglement (residual {w[0]:.3g})"
        )
    vec = v[:, 1]  # eigenvalue ~1
    p, q = pair.parties
    t = np.moveaxis(psi.amps.reshape(2, 2, 2), (p.axis, q.axis, other.axis), (0, 1, 2))
    block = np.tensordot(t, np.conj(vec), axes=([2], [0]))
    block = block.reshape(4)
    nrm = np.linalg.norm(block)
    return block / nrm


def pair_schmidt(pair_amps) -> SchmidtPair:
    """Schmidt weights of a two-qubit pure state."""
    a = np.asarray(pair_amps, dtype=complex).reshape(2, 2)
    sv = np.linalg.svd(a, compute_uv=False)
    lmax = float(min(sv[0] ** 2, 1.0))
    lmin = float(max(sv[1] ** 2, 0.0))
    s = lmax + lmin
    return SchmidtPair(lmax / s, lmin / s)


def concurrence_of_assistance(psi: PureState3Q, assisting: Party) -> float:
    """Best average pair concurrence the assisting party can steer to.

    For a pure tripartite state this is the trace norm sum
    sum_k sqrt(eig_k(rho rho~)) of the remaining pair's density matrix
    rho, with rho~ = (Y (x) Y) rho* (Y (x) Y).
    """
    keep = [p for p in Party if p is not assisting]
    t = np.moveaxis(
        psi.amps.reshape(2, 2, 2),
        (keep[0].axis, keep[1].axis, assisting.axis),
        (0, 1, 2),
    )
    m = t.reshape(4, 2)
    # with rho = m m^dag, the nonzero sqrt-eigenvalues of rho rho~ are the
    # singular values of the 2x2 symmetric matrix m^T (Y (x) Y) m, which a
    # small SVD evaluates to machine precision
    a = m.T @ _YY @ m
    return float(np.linalg.svd(a, compute_uv=False).sum())


def coa_closed_form(state: WClassState, assisting: Party) -> float:
    """Assistance concurrence 2 sqrt(xi xj) for states with x0 = 0."""
    if state.x0 > 1e-10:
        raise ValueError("closed form needs the |000> weight to vanish")
    xi, xj = (state.coord(p) for p in assisting.others)
    return float(2.0 * np.sqrt(max(xi * xj, 0.0)))


def coa_upper_bound(state: WClassState, assisting: Party = Party.A) -> float:
    """General upper bound 2 sqrt(xi (x0 + xj)) on the assisted pair
    concurrence, absorbing the |000> weight into the later pair slot.

    Monotonicity argument: the state is reachable deterministically from
    the one with x0 folded into xj, whose assisted concurrence is the
    closed form.  Tight when x0 = 0.
    """
    xi, xj = (state.coord(p) for p in assisting.others)
    return float(2.0 * np.sqrt(max(xi * (state.x0 + xj), 0.0)))


class GourResult(NamedTuple):
    feasible: bool
    rounds: int | None


def gour_feasible(ca: float, target: float) -> GourResult:
    """Can an assisted pair with assistance concurrence `ca` reach a pair
    of concurrence `target`, and in how many rounds (1 when already
    exact, else 2)?"""
    if ca < -FEASIBLE_TOL or target < -FEASIBLE_TOL:
        raise ValueError("concurrences must be nonnegative")
    if ca + FEASIBLE_TOL < target:
        return GourResult(False, None)
    if abs(ca - target) <= FEASIBLE_TOL:
        return GourResult(True, 1)
    return GourResult(True, 2)


def nielsen_feasible(c_src: float, c_tgt: float) -> bool:
    """Deterministic pure-pair conversion: possible iff the source is at
    least as entangled (concurrence-monotone majorization)."""
    return c_src >= c_tgt - MAJORIZATION_TOL


def bell_conversion_prob(c: float) -> float:
    """Best probability of converting a pair of concurrence c to a Bell
    pair: twice the smaller Schmidt weight, i.e. 1 - sqrt(1 - c^2)."""
    if not (-1e-12 <= c <= 1.0 + 1e-12):
        raise ValueError("concurrence outside [0, 1]")
    c = min(max(c, 0.0), 1.0)
    return float(1.0 - np.sqrt(max(1.0 - c * c, 0.0)))


def schmidt_of_concurrence(c: float) -> SchmidtPair:
    """Schmidt weights (1 +- sqrt(1 - c^2)) / 2 of a pair of concurrence c."""
    if not (-1e-12 <= c <= 1.0 + 1e-12):
        raise ValueError("concurrence outside [0, 1]")
    c = min(max(c, 0.0), 1.0)
    r = np.sqrt(max(1.0 - c * c, 0.0))
    return SchmidtPair((1.0 + r) / 2.0, (1.0 - r) / 2.0)
