"""Seeded Monte-Carlo simulation of a full QKD session.

Alice prepares symbols in random bases, the channel (ideal, depolarizing, or an
intercept-resend attacker) acts, Bob measures in random bases, matching-basis
symbols are sifted, a prefix is revealed to estimate the error rate, and the
asymptotic key length is accounted from the coherent-attack rate bound.

Randomness comes from a PCG64 stream; symbol i consumes exactly the eight doubles
at stream offsets 8i..8i+7 regardless of which branches it takes, so per-symbol
parallel generation (jump to offset 8i) and the vectorized whole-run draw are
bit-identical and aggregation order cannot affect the report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import __version__
from .intercept_resend import ir_full_joint
from .keyrate import KEYRATE_PROTOCOL_NAMES, min_rate, optimal_rate
from .protocols import Protocol, get_protocol

DRAWS_PER_SYMBOL = 8


@dataclass(frozen=True)
class ChannelModel:
    """Channel acting between Alice and Bob.

    kind "ideal": symbols arrive untouched.
    kind "depolarizing": with probability f Bob's outcome distribution is replaced
    by the uniform one (parameter f).
    kind "intercept": an intercept-resend attacker measures a fraction p of the
    symbols in a uniformly random protocol basis and resends her outcome state.
    """

    kind: str
    parameter: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ideal", "depolarizing", "intercept"):
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.kind != "ideal" and not 0.0 <= self.parameter <= 1.0:
            raise ValueError(f"channel parameter must lie in [0, 1], got {self.parameter}")

    @classmethod
    def parse(cls, spec: str) -> "ChannelModel":
        """Parse 'ideal', 'depolarizing:<f>' or 'intercept:<p>'."""
        if spec == "ideal":
            return cls("ideal")
        kind, sep, value = spec.partition(":")
        if sep and kind in ("depolarizing", "intercept"):
            try:
                return cls(kind, float(value))
            except ValueError as exc:
                raise ValueError(f"bad channel parameter in {spec!r}") from exc
        raise ValueError(f"malformed channel spec {spec!r}; use ideal, depolarizing:<f> or intercept:<p>")

    def label(self) -> str:
        return self.kind if self.kind == "ideal" else f"{self.kind}:{self.parameter:g}"


@dataclass(frozen=True)
class SessionConfig:
    protocol: str
    n_symbols: int
    channel: ChannelModel
    reveal_fraction: float = 0.2
    seed: int = 0
    preprocessing: bool = False

    def __post_init__(self):
        if self.n_symbols < 1:
            raise ValueError("n_symbols must be at least 1")
        if not 0.0 < self.reveal_fraction < 1.0:
            raise ValueError("reveal_fraction must lie in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class SessionReport:
    config: SessionConfig
    n_sent: int
    n_sifted: int
    n_revealed: int
    q_estimated: float
    q_analytic: float
    rate_bits: float
    rate_supported: bool
    key_length: int
    per_basis: dict[str, dict[str, float]]

    def to_dict(self) -> dict:
        """JSON-stable report; field order and float reprs are deterministic."""
        return {
            "library_version": __version__,
            "config": {
                "protocol": self.config.protocol,
                "n_symbols": self.config.n_symbols,
                "channel": self.config.channel.label(),
                "reveal_fraction": self.config.reveal_fraction,
                "seed": self.config.seed,
                "preprocessing": self.config.preprocessing,
            },
            "n_sent": self.n_sent,
            "n_sifted": self.n_sifted,
            "n_revealed": self.n_revealed,
            "q_estimated": self.q_estimated,
            "q_analytic": self.q_analytic,
            "rate_bits": self.rate_bits,
            "rate_supported": self.rate_supported,
            "key_length": self.key_length,
            "per_basis": self.per_basis,
        }


def analytic_error(protocol: Protocol, channel: ChannelModel) -> float:
    """Exact sifted error probability of the channel, for Monte-Carlo validation."""
    if channel.kind == "ideal":
        return 0.0
    d = protocol.dimension
    if channel.kind == "depolarizing":
        return channel.parameter * (d - 1) / d
    return channel.parameter * ir_full_joint(protocol).error_rate


def _born_tables(protocol: Protocol):
    """Cumulative outcome tables for vectorized Born sampling.

    direct[i, a, g]: Bob's outcome CDF in basis g for Alice's state (i, a).
    eve[i, a, e]:    Eve's outcome CDF in basis e for the same state.
    resend[e, k, g]: Bob's outcome CDF in basis g for Eve's resent state (e, k).
    """
    mats = [b.matrix() for b in protocol.bases]
    m, d = len(mats), protocol.dimension
    probs = np.empty((m, d, m, d))
    for i in range(m):
        for g in range(m):
            probs[i, :, g, :] = np.abs(mats[g].conj() @ mats[i].T).T ** 2
    cdf = np.cumsum(probs, axis=-1)
    return cdf


def _sample_outcomes(cdf_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sampling, one row per draw."""
    return np.sum(cdf_rows < u[:, None], axis=1)


def run_session(config: SessionConfig) -> SessionReport:
    """Simulate one session; deterministic for a fixed seed."""
    protocol = get_protocol(config.protocol)
    m, d = protocol.n_bases, protocol.dimension
    n = config.n_symbols
    chan = config.channel

    rng = np.random.Generator(np.random.PCG64(config.seed))
    u = rng.random((n, DRAWS_PER_SYMBOL))

    cdf = _born_tables(protocol)
    alice_basis = np.minimum((u[:, 0] * m).astype(np.int64), m - 1)
    alice_symbol = np.minimum((u[:, 1] * d).astype(np.int64), d - 1)
    bob_basis = np.minimum((u[:, 5] * m).astype(np.int64), m - 1)

    if chan.kind == "intercept":
        attacked = u[:, 2] < chan.parameter
        eve_basis = np.minimum((u[:, 3] * m).astype(np.int64), m - 1)
        eve_outcome = _sample_outcomes(cdf[alice_basis, alice_symbol, eve_basis], u[:, 4])
        # Unattacked symbols propagate Alice's state; attacked ones Eve's resend.
        source_basis = np.where(attacked, eve_basis, alice_basis)
        source_symbol = np.where(attacked, eve_outcome, alice_symbol)
        bob_outcome = _sample_outcomes(cdf[source_basis, source_symbol, bob_basis], u[:, 6])
    elif chan.kind == "depolarizing":
        scrambled = u[:, 2] < chan.parameter
        born = _sample_outcomes(cdf[alice_basis, alice_symbol, bob_basis], u[:, 6])
        uniform = np.minimum((u[:, 7] * d).astype(np.int64), d - 1)
        bob_outcome = np.where(scrambled, uniform, born)
    else:
        bob_outcome = _sample_outcomes(cdf[alice_basis, alice_symbol, bob_basis], u[:, 6])

    sifted = alice_basis == bob_basis
    n_sifted = int(sifted.sum())
    if n_sifted == 0:
        return SessionReport(
            config, n, 0, 0, 0.0, analytic_error(protocol, chan), 0.0, False, 0, {}
        )

    sift_basis = alice_basis[sifted]
    errors = (alice_symbol != bob_outcome)[sifted]
    n_revealed = math.ceil(config.reveal_fraction * n_sifted)
    revealed_errors = errors[:n_revealed]
    q_estimated = float(revealed_errors.sum()) / n_revealed

    per_basis = {}
    revealed_basis = sift_basis[:n_revealed]
    for t, basis in enumerate(protocol.bases):
        mask = revealed_basis == t
        count = int(mask.sum())
        wrong = int(revealed_errors[mask].sum())
        per_basis[basis.name] = {
            "revealed": count,
            "errors": wrong,
            "error_rate": wrong / count if count else 0.0,
        }

    rate_bits, rate_supported = _rate_lookup(protocol, q_estimated, config.preprocessing)
    key_length = max(0, math.floor(rate_bits * (n_sifted - n_revealed)))
    return SessionReport(
        config,
        n,
        n_sifted,
        n_revealed,
        q_estimated,
        analytic_error(protocol, chan),
        rate_bits,
        rate_supported,
        key_length,
        per_basis,
    )


def _rate_lookup(protocol: Protocol, q_estimated: float, preprocessing: bool) -> tuple[float, bool]:
    """Asymptotic rate bound at the estimated error rate.

    A zero estimate means no attack is compatible with the observations, so the
    rate is log2(d) for any protocol.  Away from zero the bound exists only for
    the protocols whose coherent-attack analysis is proven; the ray protocols
    report an unsupported (zero) rate.
    """
    if q_estimated == 0.0:
        return math.log2(protocol.dimension), True
    if protocol.name not in KEYRATE_PROTOCOL_NAMES:
        return 0.0, False
    if preprocessing:
        return optimal_rate(protocol, q_estimated).rate_bits, True
    return min_rate(protocol, q_estimated)[0], True
