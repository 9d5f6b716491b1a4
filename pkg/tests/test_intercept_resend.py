import math

import numpy as np
import pytest

from qkdlab.entropy import mutual_information_bits
from qkdlab.intercept_resend import (
    AttackModel,
    ir_crossing,
    ir_full_joint,
    ir_point,
    ir_sweep,
)
from qkdlab.protocols import PROTOCOL_NAMES, get_protocol


def brute_force_point(protocol, p):
    """Independent oracle: enumerate with an explicit intercept flag.

    Joint over (a, flag, e, k, b) per announced basis; Eve's variable is
    (flag, e, k) with (e, k) meaningful only when flag = 1.
    """
    d, bases = protocol.dimension, protocol.bases
    m = len(bases)
    q_sum = i_ab_sum = i_ae_sum = 0.0
    for i, bi in enumerate(bases):
        mi = bi.matrix()
        p_ab = np.zeros((d, d))
        # Eve rows: index 0 = not intercepted, then one per (e, k).
        p_ae = np.zeros((d, 1 + m * d))
        for a in range(d):
            pa = 1.0 / d
            # flag = 0: symbol reaches Bob untouched.
            p_ab[a, a] += pa * (1.0 - p)
            p_ae[a, 0] += pa * (1.0 - p)
            for e, be in enumerate(bases):
                me = be.matrix()
                for k in range(d):
                    pk = abs(np.vdot(me[k], mi[a])) ** 2 / m
                    p_ae[a, 1 + e * d + k] += pa * p * pk
                    for b in range(d):
                        pb = abs(np.vdot(mi[b], me[k])) ** 2
                        p_ab[a, b] += pa * p * pk * pb
        q_sum += 1.0 - np.trace(p_ab)
        i_ab_sum += mutual_information_bits(p_ab)
        i_ae_sum += mutual_information_bits(p_ae)
    return q_sum / m, i_ab_sum / m, i_ae_sum / m


class TestFullJoint:
    @pytest.mark.parametrize(
        "name,q1",
        [("bb84", 0.25), ("umbrella", 1.0 / 3.0), ("qutrit-4mub", 0.5)],
    )
    def test_exact_error_rates(self, name, q1):
        joint = ir_full_joint(get_protocol(name))
        assert abs(joint.error_rate - q1) < 1e-12

    def test_tables_normalized_with_uniform_marginals(self):
        for name in PROTOCOL_NAMES:
            proto = get_protocol(name)
            joint = ir_full_joint(proto)
            d = proto.dimension
            for i in range(proto.n_bases):
                assert abs(joint.p_ab[i].sum() - 1.0) < 1e-12
                assert abs(joint.p_aek[i].sum() - 1.0) < 1e-12
                np.testing.assert_allclose(joint.p_ab[i].sum(axis=1), 1.0 / d, atol=1e-12)
                np.testing.assert_allclose(
                    joint.p_aek[i].reshape(d, -1).sum(axis=1), 1.0 / d, atol=1e-12
                )

    def test_fixed_basis_strategy(self):
        proto = get_protocol("bb84")
        joint = ir_full_joint(proto, eve_basis=proto.bases[0])
        # Eve always in the computational basis: announced basis 0 is error-free,
        # announced basis 1 has error rate 1/2.
        assert abs((1.0 - np.trace(joint.p_ab[0]))) < 1e-12
        assert abs((1.0 - np.trace(joint.p_ab[1])) - 0.5) < 1e-12


class TestIRPoint:
    def test_no_interception(self):
        for name in PROTOCOL_NAMES:
            proto = get_protocol(name)
            pt = ir_point(proto, 0.0)
            assert pt.error_rate == 0.0
            assert abs(pt.i_ab_bits - math.log2(proto.dimension)) < 1e-12
            assert pt.i_ae_bits == 0.0

    def test_bb84_full_interception_eve_information(self):
        pt = ir_point(get_protocol("bb84"), 1.0)
        assert abs(pt.i_ae_bits - 0.5) < 1e-12

    def test_umbrella_beyond_crossing_at_full_interception(self):
        pt = ir_point(get_protocol("umbrella"), 1.0)
        assert pt.i_ab_bits < pt.i_ae_bits

    def test_linearity_against_explicit_flag_enumeration(self):
        for name in ("bb84", "umbrella", "three-rays"):
            proto = get_protocol(name)
            q1 = ir_full_joint(proto).error_rate
            iae1 = ir_point(proto, 1.0).i_ae_bits
            for p in (0.2, 0.55, 0.9):
                pt = ir_point(proto, p)
                q_ref, iab_ref, iae_ref = brute_force_point(proto, p)
                assert abs(pt.error_rate - p * q1) < 1e-12
                assert abs(pt.i_ae_bits - p * iae1) < 1e-12
                assert abs(pt.error_rate - q_ref) < 1e-12
                assert abs(pt.i_ab_bits - iab_ref) < 1e-10
                assert abs(pt.i_ae_bits - iae_ref) < 1e-10

    def test_mub_protocols_basis_symmetric(self):
        for name in ("bb84", "qubit-3mub", "qutrit-4mub"):
            proto = get_protocol(name)
            joint = ir_full_joint(proto)
            infos = [mutual_information_bits(joint.p_ab[i]) for i in range(proto.n_bases)]
            assert max(infos) - min(infos) < 1e-10

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            ir_point(get_protocol("bb84"), 1.5)
        with pytest.raises(ValueError):
            AttackModel(-0.1)


class TestSweep:
    def test_endpoints_match_points(self):
        proto = get_protocol("umbrella")
        sweep = ir_sweep(proto, 11)
        assert sweep[0] == ir_point(proto, 0.0)
        assert sweep[-1] == ir_point(proto, 1.0)

    def test_error_rate_monotone(self):
        for name in PROTOCOL_NAMES:
            qs = [pt.error_rate for pt in ir_sweep(get_protocol(name), 21)]
            assert all(b >= a for a, b in zip(qs, qs[1:]))

    def test_delta_strictly_decreasing(self):
        for name in PROTOCOL_NAMES:
            deltas = [pt.delta_bits for pt in ir_sweep(get_protocol(name), 41)]
            assert all(b < a for a, b in zip(deltas, deltas[1:]))

    def test_rejects_single_point(self):
        with pytest.raises(ValueError):
            ir_sweep(get_protocol("bb84"), 1)


class TestCrossing:
    def test_bb84_against_dense_grid_oracle(self):
        proto = get_protocol("bb84")
        joint = ir_full_joint(proto)
        # Dense grid oracle: finest sign change of delta over p.
        ps = np.linspace(0.0, 1.0, 1_000_001)
        iae1 = ir_point(proto, 1.0).i_ae_bits
        deltas = np.array(
            [
                mutual_information_bits((1 - p) * np.eye(2) / 2 + p * joint.p_ab[0]) - p * iae1
                for p in ps[:: 10_000]
            ]
        )
        coarse = ps[::10_000]
        k = int(np.argmax(deltas < 0.0))
        lo, hi = coarse[k - 1], coarse[k]
        fine = np.arange(lo, hi, 1e-6)
        deltas_fine = np.array(
            [
                mutual_information_bits((1 - p) * np.eye(2) / 2 + p * joint.p_ab[0]) - p * iae1
                for p in fine
            ]
        )
        p_star = fine[int(np.argmax(deltas_fine < 0.0))]
        q_oracle = p_star * joint.error_rate
        assert abs(ir_crossing(proto) - q_oracle) < 1e-5

    def test_hierarchy(self):
        q = {name: ir_crossing(get_protocol(name)) for name in PROTOCOL_NAMES}
        assert q["bb84"] < q["qubit-3mub"] < q["umbrella"] < q["three-rays"]
        assert q["three-rays"] <= q["seven-rays"] <= q["qutrit-4mub"]

    def test_crossing_delta_residual(self):
        for name in ("bb84", "qutrit-4mub"):
            proto = get_protocol(name)
            q_star = ir_crossing(proto)
            joint = ir_full_joint(proto)
            p_star = q_star / joint.error_rate
            assert abs(ir_point(proto, p_star).delta_bits) < 1e-9

    def test_no_crossing_signal(self):
        # Against a fixed computational-basis Eve the 4-MUB protocol never loses.
        proto = get_protocol("qutrit-4mub")
        assert ir_crossing(proto, eve_basis=proto.bases[0]) is None
