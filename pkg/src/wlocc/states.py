"""Canonical coordinates and local-unitary algebra for three-qubit states.

Amplitude vectors are length 8, indexed by 4a + 2b + c for the bits
(a, b, c) of parties A, B, C.  A state is W-class when local unitaries
bring it to

    sqrt(x0)|000> + sqrt(x1)|100> + sqrt(x2)|010> + sqrt(x3)|001>

with nonnegative weights summing to one.  The triple (x1, x2, x3) then
labels the local-unitary orbit, and everything downstream (measures,
measurements, protocol execution) is phrased in terms of it.  The
workhorse here is `canonicalize`, which recovers the triple and the
rotations from a raw amplitude vector, refusing states outside the
class.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10
TANGLE_TOL = 1e-8
COORD_TOL = 1e-12
_READOFF_TOL = 1e-12
_PHASE_TOL = 1e-12


class NotWClassError(ValueError):
    """Raised when an amplitude vector has no W-class canonical form."""


class Party(Enum):
    A = 0
    B = 1
    C = 2

    @property
    def axis(self) -> int:
        """Tensor axis of this party in the (2, 2, 2) reshape."""
        return self.value

    @property
    def others(self) -> tuple["Party", "Party"]:
        rest = [p for p in Party if p is not self]
        return (rest[0], rest[1])


@dataclass(frozen=True)
class WClassState:
    """Canonical coordinates (x1, x2, x3); x0 is the implicit remainder."""

    x1: float
    x2: float
    x3: float

    def __post_init__(self):
        for name in ("x1", "x2", "x3"):
            v = getattr(self, name)
            if not (-COORD_TOL <= v <= 1.0 + COORD_TOL):
                raise ValueError(f"{name}={v!r} outside [0, 1]")
        if self.x1 + self.x2 + self.x3 > 1.0 + COORD_TOL:
            raise ValueError("coordinates sum past 1")

    @property
    def x0(self) -> float:
        # remainders below coordinate precision are summation dust; clip
        # them so sqrt(x0) cannot smear ~1e-8 amplitude onto |000>
        r = 1.0 - self.x1 - self.x2 - self.x3
        return r if r >= COORD_TOL else 0.0

    @property
    def coords(self) -> tuple[float, float, float]:
        return (self.x1, self.x2, self.x3)

    def coord(self, party: Party) -> float:
        return self.coords[party.value]

    def replace_coord(self, party: Party, value: float) -> "WClassState":
        c = list(self.coords)
        c[party.value] = value
        return WClassState(*c)


class PureState3Q:
    """A normalized three-qubit pure state as a length-8 amplitude vector."""

    __slots__ = ("amps",)

    def __init__(self, amps):
        a = np.asarray(amps, dtype=complex).reshape(8).copy()
        n = np.linalg.norm(a)
        if abs(n - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {n!r} is not 1")
        a.flags.writeable = False
        self.amps = a

    @property
    def tensor(self) -> np.ndarray:
        return self.amps.reshape(2, 2, 2)

    def __repr__(self):
        return f"PureState3Q({np.array2string(self.amps, precision=6)})"


@dataclass(frozen=True)
class LocalUnitary:
    """A 2x2 unitary acting on a single party."""

    party: Party
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError("local unitary must be 2x2")
        dev = np.abs(m.conj().T @ m - np.eye(2)).max()
        if dev > UNITARY_TOL:
            raise ValueError(f"matrix is not unitary (deviation {dev:.3g})")
        object.__setattr__(self, "matrix", m)


def _apply_axis(amps: np.ndarray, m: np.ndarray, axis: int) -> np.ndarray:
    t = amps.reshape(2, 2, 2)
    t = np.moveaxis(np.tensordot(m, t, axes=([1], [axis])), 0, axis)
    return t.reshape(8)


def reduced_density(amps: np.ndarray, party: Party) -> np.ndarray:
    """One-party reduced density matrix (2x2) of an 8-amplitude vector."""
    t = np.moveaxis(np.asarray(amps, dtype=complex).reshape(2, 2, 2), party.axis, 0)
    m = t.reshape(2, 4)
    return m @ m.conj().T


def embed(state: WClassState) -> PureState3Q:
    """Lay canonical coordinates down as an amplitude vector.

    Amplitudes are the real square roots of (x0, x1, x2, x3) at indices
    (0, 4, 2, 1); everything else is zero.
    """
    a = np.zeros(8, dtype=complex)
    a[0] = np.sqrt(state.x0)
    a[4] = np.sqrt(max(state.x1, 0.0))
    a[2] = np.sqrt(max(state.x2, 0.0))
    a[1] = np.sqrt(max(state.x3, 0.0))
    return PureState3Q(a)


def apply_local_unitary(psi: PureState3Q, u: LocalUnitary) -> PureState3Q:
    return PureState3Q(_apply_axis(psi.amps, u.matrix, u.party.axis))


def three_tangle(psi: PureState3Q) -> float:
    """Residual three-way entanglement; zero exactly on the W class.

    Computed from the degree-4 invariant of the amplitude hypermatrix:
    with a_ijk the amplitudes,

        d1 = a000^2 a111^2 + a001^2 a110^2 + a010^2 a101^2 + a100^2 a011^2
        d2 = a000 a111 (a011 a100 + a101 a010 + a110 a001)
           + a011 a100 a101 a010 + a011 a100 a110 a001 + a101 a010 a110 a001
        d3 = a000 a110 a101 a011 + a111 a001 a010 a100

    and the tangle is 4 |d1 - 2 d2 + 4 d3|.
    """
    a = psi.amps
    a000, a001, a010, a011, a100, a101, a110, a111 = a
    d1 = a000**2 * a111**2 + a001**2 * a110**2 + a010**2 * a101**2 + a100**2 * a011**2
    d2 = (
        a000 * a111 * (a011 * a100 + a101 * a010 + a110 * a001)
        + a011 * a100 * a101 * a010
        + a011 * a100 * a110 * a001
        + a101 * a010 * a110 * a001
    )
    d3 = a000 * a110 * a101 * a011 + a111 * a001 * a010 * a100
    return float(4.0 * abs(d1 - 2.0 * d2 + 4.0 * d3))


def _phase_fix(amps, lus):
    """Rotate single-party phases so the four canonical amplitudes are
    real and nonnegative.  Mutates nothing; returns (amps, lus)."""
    ua, ub, uc = lus

    def diag(p0, p1):
        return np.array([[p0, 0.0], [0.0, p1]], dtype=complex)

    # |000>: phase on A row 0 (also sweeps indices 1..3).
    if abs(amps[0]) > _PHASE_TOL:
        d = diag(np.conj(amps[0]) / abs(amps[0]), 1.0)
        amps = _apply_axis(amps, d, 0)
        ua = d @ ua
    # |010>: phase on B row 1.
    if abs(amps[2]) > _PHASE_TOL:
        d = diag(1.0, np.conj(amps[2]) / abs(amps[2]))
        amps = _apply_axis(amps, d, 1)
        ub = d @ ub
    # |001>: phase on C row 1.
    if abs(amps[1]) > _PHASE_TOL:
        d = diag(1.0, np.conj(amps[1]) / abs(amps[1]))
        amps = _apply_axis(amps, d, 2)
        uc = d @ uc
    # |100>: phase on A row 1 (indices 0..3 already settled, untouched).
    if abs(amps[4]) > _PHASE_TOL:
        d = diag(1.0, np.conj(amps[4]) / abs(amps[4]))
        amps = _apply_axis(amps, d, 0)
        ua = d @ ua
    return amps, (ua, ub, uc)


def _coords_from_canonical(amps) -> WClassState:
    x1 = float(abs(amps[4]) ** 2)
    x2 = float(abs(amps[2]) ** 2)
    x3 = float(abs(amps[1]) ** 2)
    return WClassState(min(x1, 1.0), min(x2, 1.0), min(x3, 1.0))


def _schmidt_vectors(mat):
    """SVD of a 2x2 with columns/rows ordered by descending singular value."""
    u, sv, vh = np.linalg.svd(mat)
    return u, sv, vh


def _rank1_factors(mat, tol=1e-12):
    u, sv, vh = _schmidt_vectors(mat)
    if sv[1] > max(tol, 1e-9 * sv[0]):
        return None
    return u[:, 0], vh[0, :]


def _row_unitary(vec) -> np.ndarray:
    """Unitary sending the unit vector `vec` to |0>."""
    b0, b1 = vec
    return np.array([[np.conj(b0), np.conj(b1)], [-b1, b0]], dtype=complex)


def _canonicalize_product_like(amps):
    """Handle states whose A-conditioned pencil is identically singular:
    every such W-class state has a pure party.  Returns (amps, lus)."""
    purity = []
    for p in Party:
        rho = reduced_density(amps, p)
        ev = np.linalg.eigvalsh(rho)
        purity.append(ev[0])  # smaller eigenvalue; 0 means pure
    pure = [p for p, e in zip(Party, purity) if e < 1e-10]
    if not pure:
        raise NotWClassError("degenerate pencil but no pure party")

    lus = [np.eye(2, dtype=complex) for _ in range(3)]

    def rotate_pure_to_zero(p: Party):
        nonlocal amps
        rho = reduced_density(amps, p)
        w, v = np.linalg.eigh(rho)
        vec = v[:, int(np.argmax(w))]
        u = _row_unitary(vec)
        amps = _apply_axis(amps, u, p.axis)
        lus[p.value] = u @ lus[p.value]

    def pair_axes(p: Party, q: Party):
        """Schmidt-rotate the entangled pair (p, q) onto the antidiagonal
        span {|01>, |10>} with the larger weight on p's excited slot."""
        nonlocal amps
        third = [r for r in Party if r not in (p, q)][0]
        t = np.moveaxis(amps.reshape(2, 2, 2), (p.axis, q.axis, third.axis), (0, 1, 2))
        m = t[:, :, 0]  # third party already pinned to |0>
        u, sv, vh = _schmidt_vectors(m)
        x_swap = np.array([[0.0, 1.0], [1.0, 0.0]])
        # target m = [[0, sqrt(l-)], [sqrt(l+), 0]]: p excited carries l+
        up = x_swap @ u.conj().T
        uq = np.conj(vh)
        amps = _apply_axis(amps, up, p.axis)
        amps = _apply_axis(amps, uq, q.axis)
        lus[p.value] = up @ lus[p.value]
        lus[q.value] = uq @ lus[q.value]

    for p in pure:
        rotate_pure_to_zero(p)

    if len(pure) >= 2:
        # fully product: remaining party to |0> as well
        for p in Party:
            if p not in pure:
                rotate_pure_to_zero(p)
    else:
        others = [q for q in Party if q not in pure]
        pair_axes(others[0], others[1])
    return amps, lus


def canonicalize(psi: PureState3Q):
    """Recover canonical coordinates and the rotations that produce them.

    Returns (state, (ua, ub, uc)) such that applying the three rotations
    to `psi` reproduces `embed(state)` up to global phase.  Raises
    `NotWClassError` for states with genuine three-way entanglement.

    Already-canonical inputs (support on indices 0, 4, 2, 1) take a
    moduli read-off path, so embedded coordinates survive a round trip
    without arithmetic drift.
    """
    if three_tangle(psi) > TANGLE_TOL:
        raise NotWClassError("three-tangle is nonzero")

    amps = psi.amps.copy()

    off = [3, 5, 6, 7]
    if max(abs(amps[i]) for i in off) <= _READOFF_TOL:
        lus = (np.eye(2, dtype=complex),) * 3
        amps, lus = _phase_fix(amps, lus)
        state = _coords_from_canonical(amps)
        return state, tuple(LocalUnitary(p, lus[p.value]) for p in Party)

    t = amps.reshape(2, 2, 2)
    r0, r1 = t[0], t[1]

    # pencil det(z r0 + r1) = A z^2 + B z + C; W-class makes it a square
    qa = np.linalg.det(r0)
    qc = np.linalg.det(r1)
    qb = (
        r0[0, 0] * r1[1, 1]
        + r1[0, 0] * r0[1, 1]
        - r0[0, 1] * r1[1, 0]
        - r1[0, 1] * r0[1, 0]
    )

    scale = max(abs(qa), abs(qb), abs(qc))
    if scale <= 1e-14:
        amps2, lus = _canonicalize_product_like(amps)
        amps2, lus = _phase_fix(amps2, lus)
        state = _coords_from_canonical(amps2)
        _check_residual(amps2)
        return state, tuple(LocalUnitary(p, lus[p.value]) for p in Party)

    # double root direction (u10 : u11) of the A-side rotation
    if abs(qa) >= abs(qc):
        u10, u11 = -qb, 2.0 * qa
    else:
        u10, u11 = 2.0 * qc, -qb
    nrm = np.hypot(abs(u10), abs(u11))
    if nrm <= 1e-14:
        amps2, lus = _canonicalize_product_like(amps)
        amps2, lus = _phase_fix(amps2, lus)
        state = _coords_from_canonical(amps2)
        _check_residual(amps2)
        return state, tuple(LocalUnitary(p, lus[p.value]) for p in Party)
    u10, u11 = u10 / nrm, u11 / nrm

    ua = np.array([[np.conj(u11), -np.conj(u10)], [u10, u11]], dtype=complex)
    amps = _apply_axis(amps, ua, 0)
    t = amps.reshape(2, 2, 2)
    eta1 = t[1]

    ub = np.eye(2, dtype=complex)
    uc = np.eye(2, dtype=complex)
    if np.abs(eta1).max() < 1e-10:
        # A decoupled: split the (B, C) block on the antidiagonal
        m = t[0]
        u, sv, vh = _schmidt_vectors(m)
        x_swap = np.array([[0.0, 1.0], [1.0, 0.0]])
        ub = x_swap @ u.conj().T
        uc = np.conj(vh)
        amps = _apply_axis(amps, ub, 1)
        amps = _apply_axis(amps, uc, 2)
    else:
        fac = _rank1_factors(eta1, tol=1e-9)
        if fac is None:
            raise NotWClassError("excited block is not rank one")
        beta, gamma = fac
        ub = _row_unitary(beta)
        uc = _row_unitary(gamma)
        amps = _apply_axis(amps, ub, 1)
        amps = _apply_axis(amps, uc, 2)

    amps, lus = _phase_fix(amps, (ua, ub, uc))
    _check_residual(amps)
    state = _coords_from_canonical(amps)
    return state, tuple(LocalUnitary(p, lus[p.value]) for p in Party)


def _check_residual(amps, tol=1e-8):
    off = [3, 5, 6, 7]
    r = max(abs(amps[i]) for i in off)
    if r > tol:
        raise NotWClassError(f"residual off-canonical amplitude {r:.3g}")
