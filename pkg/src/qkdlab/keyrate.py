"""Secret-key-rate lower bounds against general coherent attacks.

The attack is reduced to a Bell-diagonal state shared by Alice and Bob, with Eve
holding its purification.  Each protocol basis pins the same observable error rate
Q, which becomes a linear constraint on the Bell weights; the key rate for a given
weight vector follows from Eve's conditional states (block-diagonal over the
displacement index), optionally with Alice's noisy preprocessing mixed in.  The
reported rate at error rate Q is the minimum over all weight vectors compatible
with the constraints - the worst attack Eve can mount without changing the
observed statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog, minimize

from .entropy import shannon_bits, von_neumann_bits
from .protocols import Basis, Protocol

WEIGHT_NEGATIVE_TOL = 1e-14
WEIGHT_SUM_TOL = 1e-12
CONSTRAINT_RESIDUAL_TOL = 1e-9
RATE_IMPROVEMENT_TOL = 1e-10
_LOG_CLAMP = 1e-300
_MULTISTART_SEED = 0x5EED

# Protocols whose coherent-attack security the Bell-diagonal model covers.
KEYRATE_PROTOCOL_NAMES: tuple[str, ...] = (
    "bb84",
    "qubit-3mub",
    "umbrella",
    "qutrit-3mub",
    "qutrit-4mub",
)


class InfeasibleErrorRate(ValueError):
    """No Bell-diagonal state reproduces the requested error rate in every basis."""


class SolverConvergenceError(RuntimeError):
    """No multistart descent produced a feasible converged point."""


@dataclass(frozen=True, eq=False)
class BellDiagonalState:
    """Nonnegative weights lambda[j][k] on the d^2 generalized Bell states."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1] or w.shape[0] not in (2, 3):
            raise ValueError(f"weights must be a dxd matrix with d in (2, 3), got {w.shape}")
        if float(w.min()) < -WEIGHT_NEGATIVE_TOL:
            raise ValueError(f"negative Bell weight {w.min():.3e}")
        w = np.clip(w, 0.0, None)
        if abs(float(w.sum()) - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"Bell weights must sum to 1, got {w.sum()}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def d(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class ConstraintSet:
    """Per-basis error functionals e_t and their common target error rate."""

    coefficients: np.ndarray  # (n_bases, d, d)
    error_rate: float

    def matrix(self) -> np.ndarray:
        """Flattened constraint rows, one per basis."""
        m = self.coefficients.shape[0]
        return self.coefficients.reshape(m, -1)


@dataclass(frozen=True)
class KeyRatePoint:
    """Rate lower bound at one (error rate, preprocessing) setting."""

    error_rate: float
    preprocessing: float
    rate_bits: float
    dimension: int

    def __post_init__(self):
        if self.rate_bits > math.log2(self.dimension) + 1e-9:
            raise ValueError(f"rate {self.rate_bits} exceeds log2(d)")

    @property
    def rate_normalized(self) -> float:
        return self.rate_bits / math.log2(self.dimension)


def bell_vector(j: int, k: int, d: int) -> np.ndarray:
    """Generalized Bell state (1/sqrt(d)) sum_s w^{js} |s>|s+k>, flattened to length d^2."""
    if not (0 <= j < d and 0 <= k < d):
        raise ValueError(f"indices must lie in [0, {d}), got ({j}, {k})")
    w = np.exp(2j * np.pi / d)
    v = np.zeros((d, d), dtype=complex)
    for s in range(d):
        v[s, (s + k) % d] = w ** (j * s)
    return v.ravel() / math.sqrt(d)


def error_coefficients(alice_basis: Basis) -> np.ndarray:
    """Discord probability of each Bell state when Alice measures in the given basis.

    Bob's matching basis is the entrywise complex conjugate of Alice's, so the
    j = k = 0 Bell state is perfectly correlated and e[0][0] = 0 for every basis.
    """
    v = alice_basis.matrix()
    d = alice_basis.dim
    w = np.exp(2j * np.pi / d)
    f = w ** np.outer(np.arange(d), np.arange(d))  # f[j, x] = w^{jx}
    e = np.empty((d, d))
    for k in range(d):
        vk = np.roll(v, -k, axis=1)  # vk[t, x] = v_t[x + k]
        # amp[s, t, j] = (1/sqrt d) sum_x conj(v_s[x]) v_t[x+k] w^{jx}
        amp = np.einsum("sx,tx,jx->stj", v.conj(), vk, f) / math.sqrt(d)
        concordant = np.abs(np.einsum("ssj->sj", amp)) ** 2
        e[:, k] = 1.0 - concordant.sum(axis=0)
    return np.clip(e, 0.0, 1.0)


def _security_frame(protocol: Protocol) -> Protocol:
    """Representative of the protocol whose bases align with the Bell-state structure.

    The Bell-diagonal reduction is derived for bases that are eigenbases of the
    displacement operators defining the Bell states.  A protocol that differs from
    such a set only by a local unitary relabeling has identical security, but its
    constraints must be derived in the aligned frame.  The umbrella basis is
    diag(1, 1, -1) times the Fourier basis, and that phase maps the measurement
    basis onto itself, so the umbrella protocol is equivalent to the plain
    computational + Fourier pair.
    """
    if protocol.name == "umbrella":
        from .protocols import mub_protocol

        return mub_protocol(3, 2, "umbrella")
    return protocol


def constraint_set(protocol: Protocol, error_rate: float) -> ConstraintSet:
    """Equality constraints: every protocol basis shows the same error rate."""
    coeffs = np.array([error_coefficients(b) for b in _security_frame(protocol).bases])
    return ConstraintSet(coeffs, error_rate)


def _mixing_coefficients(d: int, q: float) -> np.ndarray:
    """c[m]: attenuation of Eve's m-offset coherences under preprocessing noise q."""
    c = np.full(d, 1.0 - q * d / (d - 1.0))
    c[0] = 1.0
    return c


def _eve_blocks(lam: np.ndarray, q: float) -> list[np.ndarray]:
    """Eve's conditional state, block per Bob displacement k; trace of block k is mu_k."""
    d = lam.shape[0]
    c = _mixing_coefficients(d, q)
    idx = np.arange(d)
    cmat = c[(idx[:, None] - idx[None, :]) % d]
    roots = np.sqrt(np.clip(lam, 0.0, None))
    return [np.outer(roots[:, k], roots[:, k]) * cmat for k in range(d)]


def _noisy_marginal(lam: np.ndarray, q: float) -> np.ndarray:
    mu = lam.sum(axis=0)
    return (1.0 - q) * mu + q / (lam.shape[0] - 1.0) * (1.0 - mu)


def _check_preprocessing(d: int, q: float):
    if not 0.0 <= q < (d - 1.0) / d:
        raise ValueError(f"preprocessing noise must lie in [0, {(d - 1.0) / d}), got {q}")


def _rate_value(lam: np.ndarray, q: float) -> float:
    d = lam.shape[0]
    blocks = _eve_blocks(lam, q)
    return (
        math.log2(d)
        + sum(von_neumann_bits(b) for b in blocks)
        - shannon_bits(lam)
        - shannon_bits(_noisy_marginal(lam, q))
    )


def _rate_gradient(lam: np.ndarray, q: float) -> np.ndarray:
    d = lam.shape[0]
    inv_ln2 = 1.0 / math.log(2.0)
    c = _mixing_coefficients(d, q)
    idx = np.arange(d)
    cmat = c[(idx[:, None] - idx[None, :]) % d]
    lam_c = np.clip(lam, _LOG_CLAMP, None)
    grad = np.log2(lam_c) + inv_ln2
    c1 = 1.0 - q * d / (d - 1.0)
    mu_prime = np.clip(_noisy_marginal(lam, q), _LOG_CLAMP, None)
    grad += c1 * (np.log2(mu_prime) + inv_ln2)[None, :]
    roots = np.sqrt(np.clip(lam, 1e-18, None))
    for k in range(d):
        s = roots[:, k]
        block = np.outer(s, s) * cmat
        w, u = np.linalg.eigh(block)
        fw = np.log2(np.clip(w, _LOG_CLAMP, None)) + inv_ln2
        g = (u * fw) @ u.T
        grad[:, k] -= (g * cmat) @ s / s
    return grad


def rate_functional(state, q: float = 0.0) -> float:
    """Key-rate value log2 d + sum_k S(B_k) - H(lambda) - H(mu') in bits.

    At q = 0 this collapses to log2 d - H(lambda) exactly: the Eve blocks become
    rank one with eigenvalues mu_k, so their entropy cancels the noisy marginal's.
    """
    lam = state.weights if isinstance(state, BellDiagonalState) else BellDiagonalState(np.asarray(state, dtype=float)).weights
    _check_preprocessing(lam.shape[0], q)
    return _rate_value(lam, q)


def rate_functional_reference(state, q: float = 0.0) -> float:
    """Generic-path evaluation: explicit purification, partial trace, full eigendecompositions.

    Builds |Psi>_ABE from the Bell weights, conditions on Alice's measured symbol,
    traces out Bob, mixes the preprocessing noise classically, and evaluates every
    entropy from d^2 x d^2 spectra.  Exists as an independent check of the block
    construction; the two must agree to 1e-9.
    """
    lam = state.weights if isinstance(state, BellDiagonalState) else BellDiagonalState(np.asarray(state, dtype=float)).weights
    d = lam.shape[0]
    _check_preprocessing(d, q)
    roots = np.sqrt(lam)
    # psi[a, b, e] over Alice, Bob, Eve=(j,k); Eve keeps a copy label per Bell state.
    psi = np.zeros((d, d, d * d), dtype=complex)
    for j in range(d):
        for k in range(d):
            psi[:, :, j * d + k] = roots[j, k] * bell_vector(j, k, d).reshape(d, d)

    # Eve's states conditioned on Alice's raw symbol s (each has weight 1/d).
    rho_s = []
    p_b_given_s = np.empty((d, d))
    for s in range(d):
        m = psi[s]  # (b, e)
        rho_s.append(d * (m.T @ m.conj()))
        p_b_given_s[s] = d * np.sum(np.abs(m) ** 2, axis=1)
    rho_e = sum(rho_s) / d

    p_flip = np.full((d, d), q / (d - 1.0))
    np.fill_diagonal(p_flip, 1.0 - q)  # p_flip[s, x] = P(X = x | raw symbol s)

    # S(X|E) from the block-diagonal cq state.
    s_xe = math.log2(d)
    for x in range(d):
        rho_x = sum(p_flip[s, x] * rho_s[s] for s in range(d))
        s_xe += von_neumann_bits(rho_x) / d
    s_xe -= von_neumann_bits(rho_e)

    # H(X|B) from the explicit joint of preprocessed symbol and Bob's outcome.
    joint = np.einsum("sx,sb->xb", p_flip, p_b_given_s) / d
    h_x_given_b = shannon_bits(joint) - shannon_bits(joint.sum(axis=0))
    return s_xe - h_x_given_b


def max_feasible_error(protocol: Protocol) -> float:
    """Largest Q for which the per-basis equality constraints admit Bell weights."""
    cons = constraint_set(protocol, 0.0)
    rows = cons.matrix()
    m, n = rows.shape
    # Variables (lambda, Q): maximize Q subject to e_t . lambda = Q, sum lambda = 1.
    a_eq = np.zeros((m + 1, n + 1))
    a_eq[:m, :n] = rows
    a_eq[:m, n] = -1.0
    a_eq[m, :n] = 1.0
    b_eq = np.zeros(m + 1)
    b_eq[m] = 1.0
    c = np.zeros(n + 1)
    c[n] = -1.0
    res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=[(0.0, 1.0)] * (n + 1), method="highs")
    if not res.success:
        raise SolverConvergenceError(f"feasibility LP failed: {res.message}")
    return float(res.x[n])


def _feasible_center(rows: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Point of the feasible polytope maximizing its smallest coordinate."""
    m, n = rows.shape
    a_eq = np.hstack([rows, np.zeros((m, 1))])
    a_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
    c = np.zeros(n + 1)
    c[n] = -1.0
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=np.zeros(n),
        A_eq=a_eq,
        b_eq=b,
        bounds=[(0.0, 1.0)] * n + [(0.0, 1.0)],
        method="highs",
    )
    if res.status == 2:
        raise InfeasibleErrorRate("no Bell-diagonal state matches the requested error rate")
    if not res.success:
        raise SolverConvergenceError(f"feasibility LP failed: {res.message}")
    return res.x[:n]


def _constraint_system(protocol: Protocol, error_rate: float) -> tuple[np.ndarray, np.ndarray]:
    """Equality system A lambda = b: observed error rate plus normalization.

    The observable is the pooled sifted error rate: with uniform basis choice the
    sifted key draws equally from every basis, so the measured disturbance is the
    basis average of the per-basis error functionals.  (Constraining each basis
    individually reproduces the qubit benchmarks identically but overshoots the
    published two-basis qutrit threshold.)
    """
    cons = constraint_set(protocol, error_rate)
    rows = cons.matrix()
    n = rows.shape[1]
    a = np.vstack([rows.mean(axis=0), np.ones(n)])
    b = np.array([error_rate, 1.0])
    return a, b


def min_rate(
    protocol: Protocol,
    error_rate: float,
    q: float = 0.0,
    n_starts: int = 20,
    extra_starts=None,
) -> tuple[float, BellDiagonalState]:
    """Worst-case rate over Bell weights showing the observed pooled error rate Q.

    Multistart local descent (seeded, deterministic) from feasible interior points;
    each converged point is projected back onto the affine constraint set and must
    satisfy the constraints to 1e-9.  Raises InfeasibleErrorRate when the constraint
    polytope is empty and SolverConvergenceError when no start converges.
    """
    d = protocol.dimension
    _check_preprocessing(d, q)
    if error_rate < 0.0:
        raise InfeasibleErrorRate(f"error rate must be nonnegative, got {error_rate}")
    a, b = _constraint_system(protocol, error_rate)
    n = a.shape[1]
    center = _feasible_center(a, b)
    kernel = null_space(a)
    pinv = np.linalg.pinv(a)

    def polish(x: np.ndarray) -> np.ndarray | None:
        x = x - pinv @ (a @ x - b)
        x = np.where((x < 0.0) & (x > -1e-12), 0.0, x)
        if x.min() < 0.0 or np.max(np.abs(a @ x - b)) > CONSTRAINT_RESIDUAL_TOL:
            return None
        return x

    if kernel.shape[1] == 0:
        # Fully determined by the constraints; nothing to optimize.
        x = polish(center)
        if x is None:
            raise InfeasibleErrorRate("constraints admit no nonnegative solution")
        lam = BellDiagonalState(x.reshape(d, d))
        return _rate_value(lam.weights, q), lam

    rng = np.random.default_rng(_MULTISTART_SEED)
    starts = [center]
    for s in extra_starts or []:
        arr = s.weights if isinstance(s, BellDiagonalState) else np.asarray(s, dtype=float)
        fixed = polish(arr.ravel())
        if fixed is not None:
            starts.append(fixed)
    attempts = 0
    while len(starts) < n_starts and attempts < 50 * n_starts:
        attempts += 1
        if attempts % 2:
            step = kernel @ rng.normal(scale=0.5, size=kernel.shape[1])
        else:
            # Dirichlet draws projected onto the constraint plane reach basins
            # far from the center, including the polytope boundary.
            y = rng.dirichlet(np.ones(n))
            step = (y - pinv @ (a @ y - b)) - center
        x = center + step
        neg = x < 0.0
        if neg.any():
            shrink = 0.95 * float(np.min(center[neg] / (center[neg] - x[neg])))
            x = center + shrink * step
        x = np.clip(x, 0.0, None)
        if (fixed := polish(x)) is not None:
            starts.append(fixed)

    fun = lambda x: _rate_value(x.reshape(d, d), q)
    jac = lambda x: _rate_gradient(x.reshape(d, d), q).ravel()
    constraints = [{"type": "eq", "fun": lambda x: a @ x - b, "jac": lambda x: a}]
    best = None
    diagnostics = []
    for x0 in starts:
        res = minimize(
            fun,
            x0,
            jac=jac,
            method="SLSQP",
            bounds=[(0.0, 1.0)] * n,
            constraints=constraints,
            options={"maxiter": 400, "ftol": RATE_IMPROVEMENT_TOL * 1e-2},
        )
        diagnostics.append(f"start rate={fun(x0):.6f} -> {res.fun:.6f} ({res.message})")
        x = polish(res.x)
        if x is None:
            continue
        value = fun(x)
        if best is None or value < best[0]:
            best = (value, x)
    if best is None:
        raise SolverConvergenceError(
            "no feasible converged point among starts:\n" + "\n".join(diagnostics)
        )
    return best[0], BellDiagonalState(best[1].reshape(d, d))


def _golden_max(f, lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Golden-section maximum of a unimodal scalar function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    e = a + invphi * (b - a)
    fc, fe = f(c), f(e)
    while b - a > tol:
        if fc >= fe:
            b, e, fe = e, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, e, fe
            e = a + invphi * (b - a)
            fe = f(e)
    x = c if fc >= fe else e
    return x, max(fc, fe)


def _max_rate_over_q(
    protocol: Protocol,
    error_rate: float,
    grid_step: float,
    refine_tol: float,
    n_starts: int,
    warm=None,
    q_ceiling: float | None = None,
) -> tuple[float, float, BellDiagonalState]:
    """Maximize the minimal rate over the preprocessing noise by grid + golden section.

    The rate vanishes quadratically in (q_max - q) at maximal noise for every
    weight vector, so threshold searches pass a q_ceiling slightly below q_max to
    keep the sign of the maximum numerically resolvable; the threshold itself is
    unchanged because the sign of the boundary coefficient decides it.
    """
    d = protocol.dimension
    q_hi = (d - 1.0) / d - 1e-9 if q_ceiling is None else q_ceiling
    qs = np.arange(0.0, q_hi, grid_step)
    best_q, best_r = 0.0, -math.inf
    lam = warm
    cache: dict[float, float] = {}

    def rate_at(qv: float) -> float:
        nonlocal lam
        if qv not in cache:
            r, lam = min_rate(protocol, error_rate, qv, n_starts=n_starts, extra_starts=[lam] if lam is not None else None)
            cache[qv] = r
        return cache[qv]

    for qv in qs:
        r = rate_at(float(qv))
        if r > best_r:
            best_q, best_r = float(qv), r
    lo = max(0.0, best_q - grid_step)
    hi = min(q_hi, best_q + grid_step)
    q_star, r_star = _golden_max(rate_at, lo, hi, refine_tol)
    if best_r > r_star:
        q_star, r_star = best_q, best_r
    r_final, lam_final = min_rate(protocol, error_rate, q_star, n_starts=n_starts, extra_starts=[lam] if lam is not None else None)
    return q_star, r_final, lam_final


def optimal_rate(protocol: Protocol, error_rate: float) -> KeyRatePoint:
    """Best rate over preprocessing noise: 1e-3 grid then golden-section to 1e-6."""
    q_star, r_star, _ = _max_rate_over_q(
        protocol, error_rate, grid_step=1e-3, refine_tol=1e-6, n_starts=3
    )
    return KeyRatePoint(error_rate, q_star, r_star, protocol.dimension)


def critical_error_rate(protocol: Protocol, preprocessing: bool = False) -> float:
    """Largest error rate with a positive rate bound, by bisection to 1e-8.

    With preprocessing enabled the rate at each probe is maximized over q
    (coarse grid plus golden refinement, warm-started across probes).
    """
    if protocol.name not in KEYRATE_PROTOCOL_NAMES:
        raise ValueError(
            f"coherent-attack rates are proven only for {', '.join(KEYRATE_PROTOCOL_NAMES)}; "
            f"got {protocol.name!r}"
        )
    state = {"lam": None, "q": 0.0}

    def rate_at(qq: float) -> float:
        if not preprocessing:
            r, lam = min_rate(protocol, qq, 0.0, n_starts=6, extra_starts=[state["lam"]] if state["lam"] is not None else None)
            state["lam"] = lam
            return r
        # Positive at the warm q means positive at the max; skip the scan.
        if state["lam"] is not None:
            r_warm, lam = min_rate(protocol, qq, state["q"], n_starts=3, extra_starts=[state["lam"]])
            state["lam"] = lam
            if r_warm > 1e-6:
                return r_warm
        q_ceiling = (protocol.dimension - 1.0) / protocol.dimension - 0.01
        q_star, r, lam = _max_rate_over_q(
            protocol, qq, grid_step=0.02, refine_tol=1e-6, n_starts=3, warm=state["lam"],
            q_ceiling=q_ceiling,
        )
        state["lam"], state["q"] = lam, q_star
        return r

    q_max = max_feasible_error(protocol)
    lo, hi = 0.0, 0.12
    while hi < q_max - 1e-9 and rate_at(hi) > 0.0:
        lo, hi = hi, min(hi + 0.04, q_max - 1e-9)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        r_mid = rate_at(mid)
        # At the q-optimum the rate magnitude is not a distance proxy (it vanishes
        # quadratically toward the noise boundary), so only the plain search may
        # stop on a small rate.
        if (not preprocessing and abs(r_mid) < 1e-8) or hi - lo < 1e-8:
            return mid
        if r_mid > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def rate_curve(protocol: Protocol, error_rates, preprocessing: bool = False) -> list[KeyRatePoint]:
    """Pointwise rate bounds over an error-rate grid."""
    points = []
    warm = None
    for qq in error_rates:
        if preprocessing:
            points.append(optimal_rate(protocol, float(qq)))
        else:
            r, warm = min_rate(protocol, float(qq), 0.0, n_starts=6, extra_starts=[warm] if warm is not None else None)
            points.append(KeyRatePoint(float(qq), 0.0, r, protocol.dimension))
    return points
