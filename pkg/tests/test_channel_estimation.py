"""Tests for comb-pilot channel estimation and joint detection."""

import math

import numpy as np
import pytest

from qofdm import channel_estimation as ce
from qofdm import gturbo as gt
from qofdm import numerics as nm
from qofdm import signal_model as sm

QPSK = sm.make_qam(4)


class TestPilotPattern:
    def test_partition(self):
        pat = ce.comb_pattern(64, 16)
        assert pat.pilot_indices.size == 4
        assert pat.data_indices.size == 60
        merged = np.sort(np.concatenate([pat.pilot_indices, pat.data_indices]))
        np.testing.assert_array_equal(merged, np.arange(64))

    def test_unit_modulus_pilots(self):
        pat = ce.comb_pattern(512, 16)
        np.testing.assert_allclose(np.abs(pat.pilot_symbols), 1.0, atol=1e-12)

    def test_deterministic(self):
        a = ce.comb_pattern(128, 8)
        b = ce.comb_pattern(128, 8)
        np.testing.assert_array_equal(a.pilot_symbols, b.pilot_symbols)

    def test_spacing_must_divide(self):
        with pytest.raises(ValueError):
            ce.comb_pattern(100, 16)

    def test_place_symbols_roundtrip(self):
        pat = ce.comb_pattern(32, 8)
        rng = nm.seeded_rng(90, 0)
        data = sm.draw_symbols(rng, pat.data_indices.size, QPSK)
        s = ce.place_symbols(pat, data)
        np.testing.assert_array_equal(s[pat.pilot_indices], pat.pilot_symbols)
        np.testing.assert_array_equal(s[pat.data_indices], data)
        with pytest.raises(nm.LengthMismatch):
            ce.place_symbols(pat, data[:-1])


class TestLsInit:
    def test_all_pilot_flat_channel(self):
        pat = ce.comb_pattern(16, 1)
        x = pat.pilot_symbols.copy()  # h = 1, noiseless observation
        np.testing.assert_allclose(ce.ls_init(x, pat), np.ones(16), atol=1e-14)

    def test_zero_on_data_subchannels(self):
        pat = ce.comb_pattern(64, 16)
        rng = nm.seeded_rng(91, 0)
        x = nm.complex_normal(rng, 64)
        h = ce.ls_init(x, pat)
        assert np.all(h[pat.data_indices] == 0)
        np.testing.assert_allclose(
            h[pat.pilot_indices], 16 * x[pat.pilot_indices] / pat.pilot_symbols)

    def test_single_tap_interpolates_exactly(self):
        # one-tap channel has a flat spectrum: comb samples + projection
        # reconstruct it everywhere
        n, sf = 64, 16
        pat = ce.comb_pattern(n, sf)
        rng = nm.seeded_rng(92, 0)
        ch = sm.draw_channel(n, 1, rng)
        x = np.zeros(n, complex)
        x[pat.pilot_indices] = ch.freq_response[pat.pilot_indices] * pat.pilot_symbols
        h_hat = ce.refine(ce.ls_init(x, pat), 1)
        np.testing.assert_allclose(h_hat, ch.freq_response, atol=1e-12)


class TestDdUpdate:
    def test_perfect_decisions_recover_channel(self):
        rng = nm.seeded_rng(93, 0)
        ch = sm.draw_channel(32, 4, rng)
        s = sm.draw_symbols(rng, 32, QPSK)
        np.testing.assert_allclose(ce.dd_update(ch.freq_response * s, s),
                                   ch.freq_response, atol=1e-14)

    def test_unit_modulus_preserves_magnitude(self):
        rng = nm.seeded_rng(94, 0)
        x = nm.complex_normal(rng, 32)
        s = sm.draw_symbols(rng, 32, QPSK)
        np.testing.assert_allclose(np.abs(ce.dd_update(x, s)), np.abs(x),
                                   atol=1e-13)

    def test_elementwise_oracle(self):
        rng = nm.seeded_rng(95, 0)
        x = nm.complex_normal(rng, 16)
        s = sm.draw_symbols(rng, 16, sm.make_qam(16))
        got = ce.dd_update(x, s)
        for j in range(16):
            assert got[j] == x[j] / s[j]

    def test_zero_symbol_raises(self):
        s = np.ones(4, complex)
        s[2] = 0
        with pytest.raises(ce.ZeroSymbol):
            ce.dd_update(np.ones(4, complex), s)


class TestRefine:
    def test_supported_input_unchanged(self):
        rng = nm.seeded_rng(96, 0)
        ch = sm.draw_channel(64, 4, rng)
        out = ce.refine(ch.freq_response, 4)
        np.testing.assert_allclose(out, ch.freq_response, atol=1e-12)

    def test_idempotent(self):
        rng = nm.seeded_rng(97, 0)
        x = nm.complex_normal(rng, 64)
        once = ce.refine(x, 4)
        np.testing.assert_allclose(ce.refine(once, 4), once, atol=1e-12)

    def test_linear(self):
        rng = nm.seeded_rng(98, 0)
        x = nm.complex_normal(rng, 32)
        y = nm.complex_normal(rng, 32)
        a, b = 1.7 - 0.4j, -0.3 + 2.1j
        np.testing.assert_allclose(ce.refine(a * x + b * y, 4),
                                   a * ce.refine(x, 4) + b * ce.refine(y, 4),
                                   atol=1e-12)

    def test_white_noise_energy_ratio(self):
        rng = nm.seeded_rng(99, 0)
        n, taps = 256, 8
        ratios = []
        for _ in range(50):
            x = nm.complex_normal(rng, n)
            ratios.append(np.sum(np.abs(ce.refine(x, taps)) ** 2)
                          / np.sum(np.abs(x) ** 2))
        assert np.mean(ratios) == pytest.approx(taps / n, rel=0.2)


class TestJointEstimation:
    def _pilot_block(self, ch, pat, noise_var, spec, rng):
        data = sm.draw_symbols(rng, pat.data_indices.size, QPSK)
        s_tx = ce.place_symbols(pat, data)
        pw = sm.PowerProfile(np.ones(pat.size))
        q, _ = sm.forward(s_tx, ch, pw, noise_var, spec, rng)
        return q, s_tx

    def test_noiseless_bypass_exact_recovery(self):
        n, taps = 512, 4
        pat = ce.comb_pattern(n, 16)
        rng = nm.seeded_rng(100, 0)
        ch = sm.draw_channel(n, taps, rng)
        q, s_tx = self._pilot_block(ch, pat, 0.0, sm.bypass_quantizer(), rng)
        rep = ce.estimate_and_detect(q, pat, 0.0, sm.bypass_quantizer(), QPSK,
                                     taps, true_channel=ch.freq_response)
        assert rep.mse_trace[-1] < 1e-20
        assert np.array_equal(rep.s_hat, s_tx)

    def test_estimate_has_exact_tap_support(self):
        n, taps = 128, 4
        pat = ce.comb_pattern(n, 16)
        rng = nm.seeded_rng(101, 0)
        ch = sm.draw_channel(n, taps, rng)
        noise_var = 0.05
        vx = float(np.mean(np.abs(ch.freq_response) ** 2))
        spec = sm.design_quantizer(3, math.sqrt((vx + noise_var) / 2))
        q, _ = self._pilot_block(ch, pat, noise_var, spec, rng)
        rep = ce.estimate_and_detect(q, pat, noise_var, spec, QPSK, taps)
        g = nm.idft(rep.h_hat)
        assert np.max(np.abs(g[taps:])) < 1e-12

    def test_pilot_positions_keep_known_symbols(self):
        n, taps = 128, 4
        pat = ce.comb_pattern(n, 8)
        rng = nm.seeded_rng(102, 0)
        ch = sm.draw_channel(n, taps, rng)
        noise_var = 0.1
        vx = float(np.mean(np.abs(ch.freq_response) ** 2))
        spec = sm.design_quantizer(2, math.sqrt((vx + noise_var) / 2))
        q, _ = self._pilot_block(ch, pat, noise_var, spec, rng)
        rep = ce.estimate_and_detect(q, pat, noise_var, spec, QPSK, taps)
        np.testing.assert_array_equal(rep.s_hat[pat.pilot_indices],
                                      pat.pilot_symbols)

    def test_all_pilot_bypass_is_unbiased(self):
        n, taps, noise_var = 64, 4, 0.1
        pat = ce.comb_pattern(n, 1)
        ch = sm.draw_channel(n, taps, nm.seeded_rng(103, 0))
        pw = sm.PowerProfile(np.ones(n))
        acc = np.zeros(n, complex)
        trials = 400
        for trial in range(trials):
            rng = nm.seeded_rng(104, trial)
            s_tx = ce.place_symbols(pat, np.empty(0, complex))
            q, _ = sm.forward(s_tx, ch, pw, noise_var, sm.bypass_quantizer(), rng)
            rep = ce.estimate_and_detect(q, pat, noise_var, sm.bypass_quantizer(),
                                         QPSK, taps,
                                         opts=gt.DetectorOptions(t_max=1))
            acc += rep.h_hat
        bias = np.abs(acc / trials - ch.freq_response)
        # per-entry estimator std is sqrt(noise_var * taps / n) / sqrt(trials)
        assert np.max(bias) < 5 * math.sqrt(noise_var * taps / n / trials)

    def test_mse_improves_then_holds(self):
        # median over 200 trials: strong decrease while converging, then a
        # plateau that never regresses by more than 1%
        n, taps, noise_var = 512, 4, 10 ** (-1.5)
        pat = ce.comb_pattern(n, 16)
        pw = sm.PowerProfile(np.ones(n))
        traces = []
        for trial in range(200):
            rng = nm.seeded_rng(105, trial)
            ch = sm.draw_channel(n, taps, rng)
            vx = float(np.mean(np.abs(ch.freq_response) ** 2))
            spec = sm.design_quantizer(3, math.sqrt((vx + noise_var) / 2))
            q, _ = self._pilot_block(ch, pat, noise_var, spec, rng)
            rep = ce.estimate_and_detect(q, pat, noise_var, spec, QPSK, taps,
                                         opts=gt.DetectorOptions(t_max=5, tol=0.0),
                                         true_channel=ch.freq_response)
            traces.append(rep.mse_trace)
        med = np.median(np.array(traces), axis=0)
        assert med[1] < med[0]
        assert med[2] < med[1]
        floor = np.minimum.accumulate(med)
        assert np.all(med[3:] <= 1.01 * floor[2:-1])

    def test_detection_with_estimate_close_to_perfect_csi(self):
        n, taps, noise_var = 512, 4, 10 ** (-1.5)
        pat = ce.comb_pattern(n, 16)
        pw = sm.PowerProfile(np.ones(n))
        err_hat = err_true = 0
        for trial in range(40):
            rng = nm.seeded_rng(106, trial)
            ch = sm.draw_channel(n, taps, rng)
            vx = float(np.mean(np.abs(ch.freq_response) ** 2))
            spec = sm.design_quantizer(3, math.sqrt((vx + noise_var) / 2))
            q, _ = self._pilot_block(ch, pat, noise_var, spec, rng)
            rep = ce.estimate_and_detect(q, pat, noise_var, spec, QPSK, taps)
            s = sm.draw_symbols(rng, n, QPSK)
            q2, _ = sm.forward(s, ch, pw, noise_var, spec, rng)
            err_hat += int(np.sum(gt.detect(q2, rep.h_hat, noise_var, spec,
                                            QPSK).s_hat != s))
            err_true += int(np.sum(gt.detect(q2, ch.freq_response, noise_var,
                                             spec, QPSK).s_hat != s))
        assert err_hat <= 2 * err_true
