"""Biphoton polarization states and the sphere/dome geometry of single-photon operations.

A biphoton (two indistinguishable photons in one spatial mode) carries a qutrit in
its polarization: amplitudes over the Fock triple ``|2,0>, |1,1>, |0,2>`` of
horizontal/vertical photon counts.  Applying the same polarization rotation to both
photons sweeps out two disjoint 2-parameter orbits, one anchored at ``|2,0>`` (the
sphere) and one at ``|1,1>`` (the dome, which identifies antipodal points).  This
module provides the state algebra, the orbit constructors, and the inverse map from
a state back to its orbit coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

NORM_TOL = 1e-12
UNITARY_TOL = 1e-10
SAME_STATE_TOL = 1e-9
MANIFOLD_TOL = 1e-8

# Phase products below this modulus carry no usable phase information.
_PHASE_EPS = 1e-9


@dataclass(frozen=True)
class Rotation:
    """Single-photon operation moving the Poincare-sphere north pole to (theta, phi).

    theta in [0, pi], phi in [0, 2*pi); at theta = 0 the phi coordinate is
    degenerate (every phi is the identity).
    """

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not -1e-12 <= self.theta <= math.pi + 1e-12:
            raise ValueError(f"theta must lie in [0, pi], got {self.theta}")
        if not -1e-12 <= self.phi < 2.0 * math.pi + 1e-12:
            raise ValueError(f"phi must lie in [0, 2*pi), got {self.phi}")


@dataclass(frozen=True)
class Direction:
    """Unit vector on the Poincare sphere (z = cos(theta), phi measured from +x)."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        n = math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
        if abs(n - 1.0) > NORM_TOL:
            raise ValueError(f"direction must be a unit vector, |v| = {n}")

    @classmethod
    def from_xyz(cls, x: float, y: float, z: float) -> "Direction":
        """Build from an arbitrary nonzero vector, normalizing it."""
        n = math.sqrt(x * x + y * y + z * z)
        if n == 0.0:
            raise ValueError("zero vector has no direction")
        return cls(x / n, y / n, z / n)

    @classmethod
    def from_spherical(cls, theta: float, phi: float) -> "Direction":
        st = math.sin(theta)
        return cls.from_xyz(st * math.cos(phi), st * math.sin(phi), math.cos(theta))

    @property
    def theta(self) -> float:
        return math.acos(min(1.0, max(-1.0, self.z)))

    @property
    def phi(self) -> float:
        p = math.atan2(self.y, self.x)
        return p if p >= 0.0 else p + 2.0 * math.pi

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def antipode(self) -> "Direction":
        return Direction(-self.x, -self.y, -self.z)

    def angle_to(self, other: "Direction") -> float:
        """Angle in [0, pi] between the two directions."""
        a, b = self.as_array(), other.as_array()
        return math.atan2(float(np.linalg.norm(np.cross(a, b))), float(np.dot(a, b)))


@dataclass(frozen=True, eq=False)
class BiphotonState:
    """Normalized complex amplitude vector over {|2,0>, |1,1>, |0,2>} (or a qubit pair)."""

    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.ndim != 1 or a.shape[0] not in (2, 3):
            raise ValueError(f"amplitudes must be a complex 2- or 3-vector, got shape {a.shape}")
        n = float(np.linalg.norm(a))
        if abs(n - 1.0) > NORM_TOL:
            raise ValueError(f"state must be normalized, |a| = {n}")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def normalized(cls, amplitudes) -> "BiphotonState":
        """Build from an arbitrary nonzero amplitude vector, normalizing it."""
        a = np.asarray(amplitudes, dtype=complex)
        n = float(np.linalg.norm(a))
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return cls(a / n)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def same_state(self, other: "BiphotonState", tol: float = SAME_STATE_TOL) -> bool:
        """Equality modulo a global phase: |<self|other>| = 1 within tol."""
        return abs(abs(overlap(self, other)) - 1.0) <= tol


class Region(Enum):
    SPHERE = "sphere"
    DOME = "dome"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class Classification:
    """Result of locating a state on the sphere/dome manifolds."""

    region: Region
    direction: Direction | None
    fidelity: float


def rotation_matrix(r: Rotation) -> np.ndarray:
    """2x2 unitary of the single-photon operation (theta, phi).

    First column (cos(theta/2), sin(theta/2) e^{i phi}); the second column is the
    fixed completion making the matrix special unitary.
    """
    c, s = math.cos(r.theta / 2.0), math.sin(r.theta / 2.0)
    e = np.exp(1j * r.phi)
    return np.array([[c, -s * np.conj(e)], [s * e, c]])


def lift_su2(u: np.ndarray) -> np.ndarray:
    """Lift a 2x2 unitary to its symmetric (spin-1) action on the biphoton triple.

    The same operation acts on both photons, so the biphoton transforms under the
    symmetric square of u.  Raises ValueError if u is not unitary within 1e-10.
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {u.shape}")
    dev = float(np.max(np.abs(u.conj().T @ u - np.eye(2))))
    if dev > UNITARY_TOL:
        raise ValueError(f"input is not unitary (deviation {dev:.3e} > {UNITARY_TOL:.0e})")
    a, b = u[0, 0], u[0, 1]
    c, d = u[1, 0], u[1, 1]
    r2 = math.sqrt(2.0)
    return np.array(
        [
            [a * a, r2 * a * b, b * b],
            [r2 * a * c, a * d + b * c, r2 * b * d],
            [c * c, r2 * c * d, d * d],
        ]
    )


def sphere_state(n: Direction) -> BiphotonState:
    """Biphoton state reached from |2,0> by the single-photon operation toward n."""
    th, ph = n.theta, n.phi
    c2, s2 = math.cos(th / 2.0) ** 2, math.sin(th / 2.0) ** 2
    e = np.exp(1j * ph)
    return BiphotonState(np.array([c2, math.sin(th) / math.sqrt(2.0) * e, s2 * e * e]))


def dome_state(n: Direction) -> BiphotonState:
    """Biphoton state reached from |1,1> by the single-photon operation toward n.

    Antipodal directions give the same amplitudes (not merely the same ray), so the
    orbit is a dome: only the upper half-sphere of directions is distinct.

    The middle-component sign is fixed so that the dome is the exact unitary orbit
    of |1,1> in the same parametrization as the sphere: dome_state(n) is orthogonal
    to sphere_state(+-n) for every n, and the sphere-dome overlap is sin(angle)/sqrt(2).
    The anchor-state transformation fixes phases only up to this convention, and the
    commonly printed variant (positive middle sign) satisfies those orthogonality
    relations only on the equator and poles.
    """
    th, ph = n.theta, n.phi
    s = math.sin(th) / math.sqrt(2.0)
    e = np.exp(1j * ph)
    return BiphotonState(np.array([s, -math.cos(th) * e, -s * e * e]))


def overlap(u: BiphotonState, v: BiphotonState) -> complex:
    """Inner product <u|v> (conjugation on u)."""
    return complex(np.vdot(u.amplitudes, v.amplitudes))


def _fidelity(u: BiphotonState, v: BiphotonState) -> float:
    return abs(overlap(u, v))


def _sphere_candidates(a: np.ndarray) -> list[tuple[float, float]]:
    m0, m2 = abs(a[0]), abs(a[2])
    theta = 2.0 * math.atan2(math.sqrt(m2), math.sqrt(m0))
    p01 = a[1] * np.conj(a[0])
    p12 = a[2] * np.conj(a[1])
    p = p01 if abs(p01) >= abs(p12) else p12
    if abs(p) < _PHASE_EPS:
        return [(theta, 0.0)]
    return [(theta, float(np.angle(p)))]


def _dome_candidates(a: np.ndarray) -> list[tuple[float, float]]:
    # Upper-half representative: theta in [0, pi/2].
    theta = math.atan2(math.sqrt(2.0) * abs(a[0]), abs(a[1]))
    p01 = a[1] * np.conj(a[0])
    if abs(p01) >= _PHASE_EPS:
        # a1*conj(a0) = -cos(t) sin(t)/sqrt(2) e^{i phi}: arg is phi + pi on the upper half.
        return [(theta, float(np.angle(p01)) + math.pi)]
    p02 = -a[2] * np.conj(a[0])
    if abs(p02) >= _PHASE_EPS:
        # Near the equator only phi mod pi is determined; try both lifts.
        half = float(np.angle(p02)) / 2.0
        return [(theta, half), (theta, half + math.pi)]
    return [(theta, 0.0)]


def classify_state(s: BiphotonState, tol: float = MANIFOLD_TOL) -> Classification:
    """Locate a qutrit state on the sphere or dome manifold, or report it outside.

    Inverts the orbit formulas through their modulus equations, then accepts the
    candidate only if the state distance 1 - |<candidate|s>| is below tol.  The
    pole ambiguity resolves to phi = 0; dome directions are reported on the upper
    half-sphere (antipodal identification).
    """
    if s.dim != 3:
        raise ValueError("classification is defined for qutrit states only")
    a = s.amplitudes
    best = Classification(Region.OUTSIDE, None, 0.0)
    for region, maker, candidates in (
        (Region.SPHERE, sphere_state, _sphere_candidates(a)),
        (Region.DOME, dome_state, _dome_candidates(a)),
    ):
        for theta, phi in candidates:
            n = Direction.from_spherical(theta, phi % (2.0 * math.pi))
            fid = _fidelity(maker(n), s)
            if fid > best.fidelity:
                best = Classification(region, n, fid)
    if 1.0 - best.fidelity < tol:
        return best
    return Classification(Region.OUTSIDE, None, best.fidelity)
