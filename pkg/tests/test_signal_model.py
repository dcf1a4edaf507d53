"""Tests for constellations, quantizer design, channels and the forward model.

Oracles: dense grid search for the optimal quantizer step, adaptive
quadrature for bin likelihoods, Monte-Carlo moment checks for channel and
forward-model statistics.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from qofdm import numerics as nm
from qofdm import signal_model as sm


class TestConstellation:
    @pytest.mark.parametrize("order", [4, 16, 64])
    def test_unit_energy_and_distinct(self, order):
        c = sm.make_qam(order)
        assert np.mean(np.abs(c.points) ** 2) == pytest.approx(1.0, abs=1e-12)
        assert len(set(np.round(c.points, 12))) == order
        assert c.gain_factor == pytest.approx(3.0 / (order - 1))

    def test_qpsk_points(self):
        c = sm.make_qam(4)
        want = {(1 + 1j), (1 - 1j), (-1 + 1j), (-1 - 1j)}
        got = {complex(round(p.real * math.sqrt(2)), round(p.imag * math.sqrt(2))) for p in c.points}
        assert got == want

    def test_gray_labels_differ_by_one_bit_for_neighbours(self):
        c = sm.make_qam(16)
        # nearest horizontal/vertical neighbours at distance d_min differ in one bit
        d_min = np.min([abs(a - b) for i, a in enumerate(c.points) for b in c.points[i + 1:]])
        for i, a in enumerate(c.points):
            for j, b in enumerate(c.points):
                if i != j and abs(a - b) < d_min * 1.01:
                    diff = int(c.labels[i]) ^ int(c.labels[j])
                    assert bin(diff).count("1") == 1

    def test_nearest(self):
        c = sm.make_qam(4)
        vals = np.array([0.9 + 0.8j, -2 - 0.1j])
        got = c.nearest(vals)
        assert got[0] == pytest.approx((1 + 1j) / math.sqrt(2))
        assert got[1] == pytest.approx((-1 - 1j) / math.sqrt(2))

    def test_rejects_unsupported_order(self):
        with pytest.raises(ValueError):
            sm.make_qam(8)

    def test_draw_symbols_uniform(self):
        c = sm.make_qam(4)
        s = sm.draw_symbols(nm.seeded_rng(1, 0), 4000, c)
        _, counts = np.unique(np.round(s, 9), return_counts=True)
        assert counts.min() > 800


class TestQuantizerDesign:
    def test_one_bit_levels(self):
        spec = sm.design_quantizer(1, 1.0)
        np.testing.assert_array_equal(spec.thresholds, [-np.inf, 0.0, np.inf])
        want = math.sqrt(2 / math.pi)
        np.testing.assert_allclose(spec.levels, [-want, want], rtol=1e-12)

    def test_one_bit_scale_equivariance(self):
        spec = sm.design_quantizer(1, 2.0)
        np.testing.assert_allclose(spec.levels, [-2 * math.sqrt(2 / math.pi), 2 * math.sqrt(2 / math.pi)], rtol=1e-12)

    def test_two_bit_step_matches_grid_search_oracle(self):
        spec = sm.design_quantizer(2, 1.0)
        step = spec.thresholds[2] - spec.thresholds[1]
        grid = np.linspace(0.5, 1.5, 4001)
        distortions = [sm._unit_distortion(2, d) for d in grid]
        best = grid[int(np.argmin(distortions))]
        assert step == pytest.approx(best, abs=5e-4)
        # frozen value of the optimal step for regression
        assert step == pytest.approx(0.98159882, abs=1e-6)

    @pytest.mark.parametrize("bits", [1, 2, 3, 4, 6, 8])
    def test_structure_invariants(self, bits):
        spec = sm.design_quantizer(bits, 1.3)
        assert spec.thresholds[0] == -np.inf and spec.thresholds[-1] == np.inf
        assert np.all(np.diff(spec.thresholds) > 0)
        assert np.all(np.diff(spec.levels) > 0)  # monotone level map
        assert np.all(spec.levels > spec.thresholds[:-1])
        assert np.all(spec.levels < spec.thresholds[1:])

    def test_distortion_monotone_in_bits(self):
        rhos = [sm.design_quantizer(b, 1.0).rho for b in range(1, 7)]
        assert all(a > b for a, b in zip(rhos, rhos[1:]))

    def test_rho_matches_closed_form(self):
        for bits in (1, 2, 3):
            spec = sm.design_quantizer(bits, 1.0)
            assert spec.rho == pytest.approx(sm.quantizer_distortion(spec), abs=2e-3)

    def test_scale_equivariance_general(self):
        a = sm.design_quantizer(3, 1.0)
        b = sm.design_quantizer(3, 2.5)
        np.testing.assert_allclose(b.thresholds[1:-1], 2.5 * a.thresholds[1:-1], rtol=1e-12)
        np.testing.assert_allclose(b.levels, 2.5 * a.levels, rtol=1e-12)
        assert b.rho == pytest.approx(a.rho)  # normalized distortion is scale-free

    def test_invalid_bits(self):
        with pytest.raises(sm.InvalidBits):
            sm.design_quantizer(0, 1.0)
        with pytest.raises(sm.InvalidBits):
            sm.design_quantizer(13, 1.0)


class TestQuantize:
    def test_sign_quantizer(self):
        spec = sm.design_quantizer(1, 1.0)
        q = sm.quantize(np.array([0.1 + 0.1j]), spec)
        lvl = spec.levels[1]
        assert q[0] == pytest.approx(lvl + 1j * lvl)

    def test_threshold_tie_goes_to_lower_bin(self):
        spec = sm.design_quantizer(2, 1.0)
        t = spec.thresholds[2]  # interior threshold at 0
        assert t == 0.0
        q = sm.quantize(np.array([t + 0j]), spec)
        assert q[0].real == pytest.approx(spec.levels[1])  # bin (r1, 0]
        q2 = sm.quantize(np.array([spec.thresholds[1] + 0j]), spec)
        assert q2[0].real == pytest.approx(spec.levels[0])

    def test_idempotent_on_own_outputs(self):
        spec = sm.design_quantizer(3, 1.0)
        y = nm.complex_normal(nm.seeded_rng(5, 0), 1000)
        q = sm.quantize(y, spec)
        np.testing.assert_array_equal(sm.quantize(q, spec), q)

    def test_fine_quantizer_small_distortion(self):
        spec = sm.design_quantizer(12, math.sqrt(0.5))
        y = nm.complex_normal(nm.seeded_rng(6, 0), 10**5)  # per-dim std sqrt(1/2)
        q = sm.quantize(y, spec)
        assert np.linalg.norm(q - y) / np.linalg.norm(y) < 1e-2

    def test_bypass_identity(self):
        y = nm.complex_normal(nm.seeded_rng(7, 0), 64)
        np.testing.assert_array_equal(sm.quantize(y, sm.bypass_quantizer()), y)


class TestLikelihoodBin:
    def test_one_bit_symmetry(self):
        spec = sm.design_quantizer(1, 1.0)
        assert sm.likelihood_bin(spec.levels[1], 0.0, spec, 1.0) == pytest.approx(0.5, abs=1e-14)

    def test_noiseless_indicator(self):
        spec = sm.design_quantizer(2, 1.0)
        # z strictly inside the bin of its own quantized value
        z = 0.3
        q = sm.quantize(np.array([z + 0j]), spec)[0].real
        assert sm.likelihood_bin(q, z, spec, 0.0) == pytest.approx(1.0)

    def test_matches_quadrature_oracle(self):
        spec = sm.design_quantizer(2, 1.0)
        z, noise_var = 0.3, 1.0
        for lvl in spec.levels:
            lo, hi = (float(v[0]) for v in sm.level_bounds(lvl, spec))
            want, _ = integrate.quad(
                lambda y: math.exp(-((y - z) ** 2) / noise_var) / math.sqrt(math.pi * noise_var),
                lo if np.isfinite(lo) else -30, hi if np.isfinite(hi) else 30,
                epsabs=1e-13,
            )
            assert sm.likelihood_bin(lvl, z, spec, noise_var) == pytest.approx(want, abs=1e-10)

    @given(st.floats(-4, 4), st.floats(0.05, 3))
    @settings(max_examples=40, deadline=None)
    def test_sums_to_one_over_levels(self, z, noise_var):
        spec = sm.design_quantizer(3, 1.0)
        total = sum(sm.likelihood_bin(lvl, z, spec, noise_var) for lvl in spec.levels)
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_unknown_level(self):
        spec = sm.design_quantizer(2, 1.0)
        with pytest.raises(sm.UnknownLevel):
            sm.likelihood_bin(0.123456, 0.0, spec, 1.0)


class TestChannel:
    def test_single_tap_is_flat(self):
        ch = sm.draw_channel(64, 1, nm.seeded_rng(2, 0))
        mags = np.abs(ch.freq_response)
        np.testing.assert_allclose(mags, mags[0], rtol=1e-10)

    def test_tap_support(self):
        ch = sm.draw_channel(512, 4, nm.seeded_rng(2, 1))
        assert np.all(ch.taps[4:] == 0)
        assert np.count_nonzero(ch.taps[:4]) == 4

    def test_unit_average_gain(self):
        tot = 0.0
        for t in range(10**4):
            ch = sm.draw_channel(16, 4, nm.seeded_rng(77, t))
            tot += np.mean(np.abs(ch.freq_response) ** 2)
        assert tot / 10**4 == pytest.approx(1.0, abs=0.03)

    def test_parseval_consistency(self):
        ch = sm.draw_channel(256, 4, nm.seeded_rng(3, 0))
        assert np.linalg.norm(ch.freq_response) == pytest.approx(np.linalg.norm(ch.taps), rel=1e-10)

    def test_serialization_round_trip(self):
        ch = sm.draw_channel(32, 4, nm.seeded_rng(4, 0))
        back = sm.deserialize_channel(sm.serialize_channel(ch))
        np.testing.assert_array_equal(back.taps, ch.taps)
        np.testing.assert_array_equal(back.freq_response, ch.freq_response)
        assert back.n_taps == ch.n_taps and back.size == ch.size

    def test_quantizer_serialization_round_trip(self):
        spec = sm.design_quantizer(3, 1.2)
        back = sm.deserialize_quantizer(sm.serialize_quantizer(spec))
        np.testing.assert_array_equal(back.thresholds, spec.thresholds)
        np.testing.assert_array_equal(back.levels, spec.levels)
        assert back.rho == spec.rho and back.bits == spec.bits


class TestForward:
    def test_noiseless_bypass_identity_chain(self):
        n = 16
        flat = sm.ChannelRealization(
            taps=np.eye(n, dtype=complex)[0] * math.sqrt(n),
            freq_response=np.ones(n, dtype=complex),
            n_taps=1,
            size=n,
        )
        c = sm.make_qam(4)
        s = sm.draw_symbols(nm.seeded_rng(8, 0), n, c)
        q, y = sm.forward(s, flat, sm.PowerProfile(np.ones(n)), 0.0,
                          sm.bypass_quantizer(), nm.seeded_rng(8, 1))
        np.testing.assert_allclose(nm.dft(y), s, atol=1e-12)
        np.testing.assert_array_equal(q, y)

    def test_received_variance_moment(self):
        n, noise_var, trials = 256, 0.5, 200
        c = sm.make_qam(4)
        acc = 0.0
        vx_acc = 0.0
        for t in range(trials):
            rng = nm.seeded_rng(99, t)
            ch = sm.draw_channel(n, 4, rng)
            pw = sm.PowerProfile(np.ones(n))
            s = sm.draw_symbols(rng, n, c)
            _, y = sm.forward(s, ch, pw, noise_var, sm.bypass_quantizer(), rng)
            acc += np.var(y.real) + np.var(y.imag)
            vx_acc += np.mean(np.abs(pw.effective_response(ch)) ** 2)
        got = acc / (2 * trials)  # per-dimension variance
        want = (vx_acc / trials + noise_var) / 2
        assert got == pytest.approx(want, rel=0.05)

    def test_deterministic_given_seed(self):
        n = 64
        c = sm.make_qam(4)
        spec = sm.design_quantizer(2, 1.0)

        def run():
            rng = nm.seeded_rng(123, 9)
            ch = sm.draw_channel(n, 4, rng)
            s = sm.draw_symbols(rng, n, c)
            return sm.forward(s, ch, sm.PowerProfile(np.ones(n)), 0.1, spec, rng)

        q1, y1 = run()
        q2, y2 = run()
        np.testing.assert_array_equal(q1, q2)
        np.testing.assert_array_equal(y1, y2)

    def test_unitarity_keeps_noise_white(self):
        # frequency-domain noise from the bypass chain stays CN(0, noise_var)
        n, noise_var = 512, 0.3
        rng = nm.seeded_rng(31, 0)
        noise_f = nm.dft(nm.complex_normal(rng, n, var=noise_var))
        assert np.mean(np.abs(noise_f) ** 2) == pytest.approx(noise_var, rel=0.1)

    def test_length_mismatch(self):
        ch = sm.draw_channel(16, 2, nm.seeded_rng(1, 1))
        with pytest.raises(nm.LengthMismatch):
            sm.forward(np.ones(8, dtype=complex), ch, sm.PowerProfile(np.ones(16)),
                       0.1, sm.bypass_quantizer(), nm.seeded_rng(1, 2))
