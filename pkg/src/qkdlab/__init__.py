"""Biphoton-qutrit QKD: subspace geometry, protocols, eavesdropping and key-rate analysis."""

__version__ = "0.1.0"

from .geometry import (
    BiphotonState,
    Classification,
    Direction,
    Region,
    Rotation,
    classify_state,
    dome_state,
    lift_su2,
    overlap,
    rotation_matrix,
    sphere_state,
)
from .protocols import (
    PROTOCOL_NAMES,
    Basis,
    Protocol,
    dome_mub_pair_infeasibility,
    get_protocol,
    measurement_basis,
    mub_protocol,
    ray_basis,
    seven_rays_protocol,
    three_rays_protocol,
    umbrella_protocol,
    unbiasedness_matrix,
)

__all__ = [
    "__version__",
    "BiphotonState",
    "Classification",
    "Direction",
    "Region",
    "Rotation",
    "classify_state",
    "dome_state",
    "lift_su2",
    "overlap",
    "rotation_matrix",
    "sphere_state",
    "PROTOCOL_NAMES",
    "Basis",
    "Protocol",
    "dome_mub_pair_infeasibility",
    "get_protocol",
    "measurement_basis",
    "mub_protocol",
    "ray_basis",
    "seven_rays_protocol",
    "three_rays_protocol",
    "umbrella_protocol",
    "unbiasedness_matrix",
]
