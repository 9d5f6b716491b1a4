"""Measurement bases and protocol definitions for biphoton-qutrit and qubit QKD.

Seven named protocols are exposed through a registry: the two standard qubit MUB
protocols, the qutrit 3- and 4-MUB protocols, and the three constructions living
inside the single-photon-operation subspace (umbrella, three rays, seven rays).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import BiphotonState, Direction, dome_state, sphere_state

ORTHONORMAL_TOL = 1e-12


@dataclass(frozen=True)
class Basis:
    """Named orthonormal d-tuple of states."""

    name: str
    vectors: tuple[BiphotonState, ...]

    def __post_init__(self):
        m = self.matrix()
        dev = float(np.max(np.abs(m.conj() @ m.T - np.eye(len(self.vectors)))))
        if dev > ORTHONORMAL_TOL:
            raise ValueError(f"basis {self.name!r} is not orthonormal (deviation {dev:.3e})")

    @property
    def dim(self) -> int:
        return self.vectors[0].dim

    def matrix(self) -> np.ndarray:
        """Vectors stacked as rows."""
        return np.array([v.amplitudes for v in self.vectors])


@dataclass(frozen=True)
class Protocol:
    """Named list of measurement bases sharing one dimension."""

    name: str
    dimension: int
    bases: tuple[Basis, ...]

    def __post_init__(self):
        if len(self.bases) < 2:
            raise ValueError("a protocol needs at least two bases")
        for b in self.bases:
            if b.dim != self.dimension:
                raise ValueError(f"basis {b.name!r} has dimension {b.dim}, expected {self.dimension}")

    @property
    def n_bases(self) -> int:
        return len(self.bases)


def measurement_basis() -> Basis:
    """The biphoton Fock triple |2,0>, |1,1>, |0,2> itself."""
    return Basis("measurement", tuple(BiphotonState(v) for v in np.eye(3, dtype=complex)))


def umbrella_basis() -> Basis:
    """The dome triplet mutually unbiased to the measurement basis.

    Vectors (1,1,-1), (1,t,-t^2), (1,t^2,-t) over sqrt(3) with t = e^{2 pi i/3};
    all three sit on the dome at the tetrahedral angle arccos(1/sqrt(3)).
    """
    t = np.exp(2j * np.pi / 3.0)
    rows = [(1, 1, -1), (1, t, -t * t), (1, t * t, -t)]
    return Basis("umbrella", tuple(BiphotonState(np.array(r) / math.sqrt(3.0)) for r in rows))


def umbrella_protocol() -> Protocol:
    return Protocol("umbrella", 3, (measurement_basis(), umbrella_basis()))


def ray_basis(n: Direction, name: str | None = None) -> Basis:
    """Orthonormal triplet cut by the ray through n: sphere(n), sphere(-n), dome(n).

    The ordering is canonical so symbol labels are reproducible across runs.
    """
    if name is None:
        name = f"ray({n.x:+.4f},{n.y:+.4f},{n.z:+.4f})"
    return Basis(name, (sphere_state(n), sphere_state(n.antipode()), dome_state(n)))


_AXIS_Z = Direction(0.0, 0.0, 1.0)
_AXIS_X = Direction(1.0, 0.0, 0.0)
_AXIS_Y = Direction(0.0, 1.0, 0.0)

# One representative per antipodal pair of cube diagonals (even sign product).
TETRAHEDRAL_DIRECTIONS: tuple[Direction, ...] = tuple(
    Direction.from_xyz(*v)
    for v in [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)]
)


def three_rays_protocol() -> Protocol:
    bases = (
        ray_basis(_AXIS_Z, "ray-z"),
        ray_basis(_AXIS_X, "ray-x"),
        ray_basis(_AXIS_Y, "ray-y"),
    )
    return Protocol("three-rays", 3, bases)


def seven_rays_protocol() -> Protocol:
    bases = list(three_rays_protocol().bases)
    bases += [ray_basis(n, f"ray-d{i}") for i, n in enumerate(TETRAHEDRAL_DIRECTIONS, start=1)]
    return Protocol("seven-rays", 3, tuple(bases))


def _mub_basis_qutrit(t: int) -> Basis:
    w = np.exp(2j * np.pi / 3.0)
    vecs = []
    for s in range(3):
        comps = [w ** ((r * s + (t - 1) * r * r) % 3) for r in range(3)]
        vecs.append(BiphotonState(np.array(comps) / math.sqrt(3.0)))
    return Basis(f"mub{t}", tuple(vecs))


def _mub_basis_qubit(t: int) -> Basis:
    # Quartic phases: t=1 gives the Hadamard basis, t=2 the circular one.
    vecs = []
    for s in range(2):
        comps = [1j ** ((2 * r * s + (t - 1) * r) % 4) for r in range(2)]
        vecs.append(BiphotonState(np.array(comps) / math.sqrt(2.0)))
    return Basis(f"mub{t}", tuple(vecs))


def mub_protocol(d: int, m: int, name: str | None = None) -> Protocol:
    """First m of the d+1 mutually unbiased bases of a prime dimension d in {2, 3}.

    Basis 0 is computational; for d=3 basis t has components
    (1/sqrt(3)) w^{r s + (t-1) r^2} with w = e^{2 pi i/3} (basis 1 is the Fourier
    basis).  d=2 uses the standard quartic-phase completion so that m=3 yields
    three pairwise-unbiased bases (the printed cubic-root form degenerates there).
    """
    if d not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {d}")
    if not 2 <= m <= d + 1:
        raise ValueError(f"basis count must lie in [2, {d + 1}] for d={d}, got {m}")
    if d == 2:
        comp = Basis("computational", tuple(BiphotonState(v) for v in np.eye(2, dtype=complex)))
        extra = [_mub_basis_qubit(t) for t in range(1, m)]
    else:
        comp = measurement_basis()
        extra = [_mub_basis_qutrit(t) for t in range(1, m)]
    if name is None:
        name = f"{d}d-{m}mub"
    return Protocol(name, d, (comp, *extra))


def unbiasedness_matrix(a: Basis, b: Basis) -> np.ndarray:
    """Overlap probabilities |<a_i|b_j>|^2 between two same-dimension bases."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return np.abs(a.matrix().conj() @ b.matrix().T) ** 2


@dataclass(frozen=True)
class PackingCertificate:
    """Exhaustive proof record that two mutually unbiased dome triplets cannot coexist.

    Two unbiased dome triplets would need a 3x3 change-of-frame matrix with every
    entry of modulus 1/sqrt(3); all 512 sign patterns of such a matrix are checked
    for orthogonal rows.
    """

    patterns_checked: int
    feasible_count: int
    min_abs_row_dot: float  # smallest |row_i . row_j| seen over all patterns/pairs

    @property
    def infeasible(self) -> bool:
        return self.feasible_count == 0


def dome_mub_pair_infeasibility() -> PackingCertificate:
    """Enumerate all 2^9 sign patterns of a (+-1/sqrt(3))-entry matrix.

    A dome triplet is an orthogonal direction frame (dome overlap law |cos(angle)|),
    and mutual unbiasedness forces every frame-to-frame direction dot product to
    +-1/sqrt(3).  Row dot products of the sign pattern are sums of three odd terms,
    hence never zero: no pattern is an orthogonal matrix.
    """
    bits = np.arange(512)
    signs = np.where((bits[:, None] >> np.arange(9)) & 1, 1.0, -1.0).reshape(512, 3, 3)
    mats = signs / math.sqrt(3.0)
    feasible = 0
    min_dot = math.inf
    for pattern in mats:
        dots = [abs(float(pattern[i] @ pattern[j])) for i, j in ((0, 1), (0, 2), (1, 2))]
        min_dot = min(min_dot, *dots)
        if max(dots) < 1e-12:
            feasible += 1
    return PackingCertificate(512, feasible, min_dot)


@lru_cache(maxsize=None)
def _build(name: str) -> Protocol:
    if name == "bb84":
        return mub_protocol(2, 2, "bb84")
    if name == "qubit-3mub":
        return mub_protocol(2, 3, "qubit-3mub")
    if name == "umbrella":
        return umbrella_protocol()
    if name == "three-rays":
        return three_rays_protocol()
    if name == "seven-rays":
        return seven_rays_protocol()
    if name == "qutrit-3mub":
        return mub_protocol(3, 3, "qutrit-3mub")
    if name == "qutrit-4mub":
        return mub_protocol(3, 4, "qutrit-4mub")
    raise KeyError(name)


PROTOCOL_NAMES: tuple[str, ...] = (
    "bb84",
    "qubit-3mub",
    "umbrella",
    "three-rays",
    "seven-rays",
    "qutrit-3mub",
    "qutrit-4mub",
)


def get_protocol(name: str) -> Protocol:
    """Look up a registry protocol by name; raises ValueError for unknown names."""
    if name not in PROTOCOL_NAMES:
        raise ValueError(f"unknown protocol {name!r}; choose from {', '.join(PROTOCOL_NAMES)}")
    return _build(name)
