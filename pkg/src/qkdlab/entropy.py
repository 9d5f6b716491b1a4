"""Entropy and mutual-information helpers, all in bits."""

from __future__ import annotations

import numpy as np

# Probabilities / eigenvalues at or below this are treated as exact zeros
# (0 * log 0 = 0); guards the simplex boundary against log underflow.
ZERO_CLAMP = 1e-15


def shannon_bits(p) -> float:
    """Shannon entropy -sum p log2 p of a nonnegative weight vector."""
    p = np.asarray(p, dtype=float).ravel()
    p = p[p > ZERO_CLAMP]
    if p.size == 0:
        return 0.0
    return float(-np.sum(p * np.log2(p)))


def binary_entropy(q: float) -> float:
    """h(q) = -q log2 q - (1-q) log2 (1-q)."""
    return shannon_bits([q, 1.0 - q])


def von_neumann_bits(mat: np.ndarray) -> float:
    """-sum eig log2 eig over the (possibly unnormalized) spectrum of a Hermitian matrix."""
    eig = np.linalg.eigvalsh(mat)
    return shannon_bits(np.clip(eig, 0.0, None))


def mutual_information_bits(joint: np.ndarray) -> float:
    """I(X;Y) from a joint probability table (rows X, columns Y)."""
    joint = np.asarray(joint, dtype=float)
    return (
        shannon_bits(joint.sum(axis=1))
        + shannon_bits(joint.sum(axis=0))
        - shannon_bits(joint)
    )
