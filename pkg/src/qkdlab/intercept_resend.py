"""Exact information analysis of intercept-and-resend eavesdropping.

Everything here is closed-form enumeration: Alice's basis and symbol, Eve's basis
choice and Born-rule outcome, the resent state, and Bob's outcome are summed over
explicitly, so error rates and mutual informations carry no sampling noise.  The
partial-interception channel mixes the full-interception tables with the identity,
which makes both the error rate and Eve's information exactly linear in the
intercepted fraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .entropy import mutual_information_bits
from .protocols import Basis, Protocol

CROSSING_DELTA_TOL = 1e-10


@dataclass(frozen=True)
class AttackModel:
    """Intercept-resend attack: intercepted fraction plus Eve's basis strategy.

    eve_basis None means Eve picks uniformly among the protocol's own bases.
    """

    intercept_fraction: float
    eve_basis: Basis | None = None

    def __post_init__(self):
        if not 0.0 <= self.intercept_fraction <= 1.0:
            raise ValueError(f"intercept fraction must lie in [0, 1], got {self.intercept_fraction}")


@dataclass(frozen=True)
class IRPoint:
    """Error rate and mutual informations at one interception fraction."""

    p: float
    error_rate: float
    i_ab_bits: float
    i_ae_bits: float

    @property
    def delta_bits(self) -> float:
        return self.i_ab_bits - self.i_ae_bits


@dataclass(frozen=True)
class IRJoint:
    """Full-interception joint tables, one per announced (sifted) basis.

    p_ab[i, a, b]  : probability Alice sent symbol a and Bob got b, given basis i.
    p_aek[i, a, e, k]: probability of symbol a and Eve's (basis, outcome) pair.
    """

    p_ab: np.ndarray
    p_aek: np.ndarray

    @property
    def error_rate(self) -> float:
        m, d, _ = self.p_ab.shape
        off = 1.0 - np.trace(self.p_ab, axis1=1, axis2=2)
        return float(np.mean(off))


def _overlap_sq(a: Basis, b: Basis) -> np.ndarray:
    """o[k, a] = |<b_k|a_a>|^2 for rows of the two basis matrices."""
    return np.abs(b.matrix().conj() @ a.matrix().T) ** 2


def ir_full_joint(protocol: Protocol, eve_basis: Basis | None = None) -> IRJoint:
    """Enumerate the p=1 attack exactly.

    Alice's basis (revealed by sifting) and symbol are uniform; Eve measures in a
    basis drawn from her strategy, resends her outcome state, and Bob measures in
    Alice's announced basis.
    """
    bases = protocol.bases
    d = protocol.dimension
    m = len(bases)
    eve_bases = list(bases) if eve_basis is None else [eve_basis]
    w = 1.0 / len(eve_bases)

    p_ab = np.zeros((m, d, d))
    p_aek = np.zeros((m, d, len(eve_bases), d))
    for i, bi in enumerate(bases):
        for e, be in enumerate(eve_bases):
            eve_given_a = _overlap_sq(bi, be).T  # [a, k] = |<e_k|i_a>|^2
            bob_given_k = _overlap_sq(be, bi).T  # [k, b] = |<i_b|e_k>|^2
            p_aek[i, :, e, :] = (w / d) * eve_given_a
            p_ab[i] += (w / d) * eve_given_a @ bob_given_k
    return IRJoint(p_ab, p_aek)


def ir_point(protocol: Protocol, p: float, eve_basis: Basis | None = None) -> IRPoint:
    """Error rate and informations at interception fraction p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"interception fraction must lie in [0, 1], got {p}")
    joint = ir_full_joint(protocol, eve_basis)
    return _point_from_joint(protocol, joint, p)


def _point_from_joint(protocol: Protocol, joint: IRJoint, p: float) -> IRPoint:
    d = protocol.dimension
    m = joint.p_ab.shape[0]
    identity = np.eye(d) / d
    i_ab = 0.0
    i_ae_full = 0.0
    for i in range(m):
        mixed = (1.0 - p) * identity + p * joint.p_ab[i]
        i_ab += mutual_information_bits(mixed)
        # Eve knows which symbols she intercepted, so her information is exactly
        # p times the full-interception value.
        i_ae_full += mutual_information_bits(joint.p_aek[i].reshape(d, -1))
    return IRPoint(p, p * joint.error_rate, i_ab / m, p * i_ae_full / m)


def ir_sweep(protocol: Protocol, n_points: int, eve_basis: Basis | None = None) -> list[IRPoint]:
    """IRPoints at n_points interception fractions uniform on [0, 1]."""
    if n_points < 2:
        raise ValueError("a sweep needs at least two points")
    joint = ir_full_joint(protocol, eve_basis)
    return [_point_from_joint(protocol, joint, p) for p in np.linspace(0.0, 1.0, n_points)]


def ir_crossing(protocol: Protocol, eve_basis: Basis | None = None) -> float | None:
    """Error rate where Bob's information advantage over Eve vanishes.

    Bisects the interception fraction until |I_AB - I_AE| < 1e-10 and returns the
    error rate there; returns None when Eve never catches up even at p = 1.
    """
    joint = ir_full_joint(protocol, eve_basis)

    def delta(p: float) -> float:
        return _point_from_joint(protocol, joint, p).delta_bits

    if delta(1.0) >= 0.0:
        return None
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        d_mid = delta(mid)
        if abs(d_mid) < CROSSING_DELTA_TOL or hi - lo < 1e-15:
            return mid * joint.error_rate
        if d_mid > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) * joint.error_rate
