"""Tests for the comparison detectors."""

import math

import numpy as np
import pytest

from qofdm import baselines as bl
from qofdm import gturbo as gt
from qofdm import numerics as nm
from qofdm import signal_model as sm

QPSK = sm.make_qam(4)


def _instance(bits, noise_var, n=512, taps=4, seed=0, constellation=QPSK):
    rng = nm.seeded_rng(0xBA5E + seed, 0)
    ch = sm.draw_channel(n, taps, rng)
    vx = float(np.mean(np.abs(ch.freq_response) ** 2))
    spec = (sm.bypass_quantizer() if bits is None
            else sm.design_quantizer(bits, math.sqrt((vx + noise_var) / 2)))
    s = sm.draw_symbols(rng, n, constellation)
    q, _ = sm.forward(s, ch, sm.PowerProfile(np.ones(n)), noise_var, spec, rng)
    return q, ch.freq_response, s, spec


class TestConventional:
    def test_noiseless_bypass_recovery(self):
        for order in (4, 16):
            c = sm.make_qam(order)
            q, h, s, _ = _instance(None, 0.0, n=64, seed=order, constellation=c)
            np.testing.assert_array_equal(bl.conventional_detect(q, h, c), s)

    def test_flat_channel_passthrough(self):
        rng = nm.seeded_rng(120, 0)
        s = sm.draw_symbols(rng, 32, QPSK)
        q = nm.idft(s)  # h = 1, no noise
        np.testing.assert_array_equal(
            bl.conventional_detect(q, np.ones(32, complex), QPSK), s)

    def test_elementwise_argmin_oracle(self):
        q, h, _, _ = _instance(2, 0.1, n=32, seed=1)
        got = bl.conventional_detect(q, h, QPSK)
        q_freq = nm.dft(q)
        for j in range(32):
            d = np.abs(q_freq[j] / h[j] - QPSK.points)
            assert got[j] == QPSK.points[np.argmin(d)]

    def test_dead_subchannel_raises(self):
        h = np.ones(8, complex)
        h[3] = 0
        with pytest.raises(bl.ZeroChannel):
            bl.conventional_detect(np.ones(8, complex), h, QPSK)

    def test_worse_than_iterative_detector(self):
        noise_var = 10 ** (-1.5)
        e_conv = e_iter = 0
        for trial in range(20):
            q, h, s, spec = _instance(2, noise_var, seed=100 + trial)
            e_conv += int(np.sum(bl.conventional_detect(q, h, QPSK) != s))
            e_iter += int(np.sum(gt.detect(q, h, noise_var, spec, QPSK).s_hat != s))
        assert e_conv > e_iter


class TestGamp:
    def test_bypass_matches_one_tap_decisions(self):
        noise_var = 10 ** (-1.5)
        q, h, _, spec = _instance(None, noise_var, seed=2)
        rep = bl.gamp_detect(q, h, noise_var, spec, QPSK)
        np.testing.assert_array_equal(rep.s_hat,
                                      bl.conventional_detect(q, h, QPSK))

    def test_report_shape(self):
        noise_var = 0.1
        q, h, _, spec = _instance(2, noise_var, n=64, seed=3)
        rep = bl.gamp_detect(q, h, noise_var, spec, QPSK)
        assert len(rep.v_b_pri_trace) == rep.iterations_used
        assert isinstance(rep.converged, bool)
        pts = set(np.round(QPSK.points, 12))
        assert all(complex(np.round(v, 12)) in pts for v in rep.s_hat)

    def test_not_better_than_main_detector(self):
        noise_var = 10 ** (-1.5)
        e_gamp = e_main = 0
        for trial in range(30):
            q, h, s, spec = _instance(2, noise_var, seed=200 + trial)
            e_gamp += int(np.sum(bl.gamp_detect(q, h, noise_var, spec,
                                                QPSK).s_hat != s))
            e_main += int(np.sum(gt.detect(q, h, noise_var, spec,
                                           QPSK).s_hat != s))
        assert e_gamp >= e_main

    def test_damping_consistent_or_flagged(self):
        # one-bit stress case: either both runs agree closely or at least
        # one reports its budget ran out before the variances settled
        noise_var = 10 ** (-0.5)
        q, h, s, spec = _instance(1, noise_var, seed=4)
        plain = bl.gamp_detect(q, h, noise_var, spec, QPSK,
                               gt.DetectorOptions(t_max=20))
        damped = bl.gamp_detect(q, h, noise_var, spec, QPSK,
                                gt.DetectorOptions(t_max=20, damping=0.8))
        gap = abs(float(np.mean(plain.s_hat != s)) - float(np.mean(damped.s_hat != s)))
        assert gap <= 1e-3 or not (plain.converged and damped.converged)


class TestAqnm:
    def test_bypass_matches_one_tap_decisions(self):
        noise_var = 0.1
        q, h, _, spec = _instance(None, noise_var, seed=5)
        np.testing.assert_array_equal(
            bl.aqnm_detect(q, h, noise_var, spec, QPSK),
            bl.conventional_detect(q, h, QPSK))

    def test_distortion_factor_matches_monte_carlo(self):
        rng = nm.seeded_rng(121, 0)
        for bits in (1, 2, 3):
            spec = sm.design_quantizer(bits, 1.0)
            z = rng.standard_normal(200_000) + 1j * rng.standard_normal(200_000)
            err = np.mean(np.abs(z - sm.quantize(z, spec)) ** 2)
            assert spec.rho == pytest.approx(float(err) / 2, abs=5e-3)

    def test_amplitude_scaling_changes_wide_constellation_decisions(self):
        c16 = sm.make_qam(16)
        noise_var = 0.01
        q, h, _, spec = _instance(2, noise_var, seed=6, constellation=c16)
        aq = bl.aqnm_detect(q, h, noise_var, spec, c16)
        conv = bl.conventional_detect(q, h, c16)
        assert np.any(aq != conv)

    def test_error_floor_above_exact_model(self):
        noise_var = 10 ** (-2.5)
        e_aq = e_main = 0
        for trial in range(20):
            q, h, s, spec = _instance(2, noise_var, seed=300 + trial)
            e_aq += int(np.sum(bl.aqnm_detect(q, h, noise_var, spec, QPSK) != s))
            e_main += int(np.sum(gt.detect(q, h, noise_var, spec, QPSK).s_hat != s))
        assert e_aq > 1.5 * e_main
