"""Joint channel estimation and data detection on comb-pilot blocks.

A single OFDM symbol carries known unit-modulus pilots on every S_f-th
subchannel and regular data elsewhere.  Each round runs the quantizer-side
module of the detector, re-estimates the channel (least squares from the
pilots on the first pass, decision-directed afterwards), projects the
estimate onto the known delay spread, and then runs the symbol-side module
with the estimate standing in for the true response.  Pilot positions keep
a degenerate symbol posterior so they anchor both the channel and the
extrinsic messages.
"""

from dataclasses import dataclass

import numpy as np

from .gturbo import (
    V_MAX,
    DetectorOptions,
    DetectorState,
    module_a_extrinsic,
    module_a_posterior,
    module_b_extrinsic,
    module_b_posterior,
)
from .numerics import LengthMismatch, dft, idft, seeded_rng
from .signal_model import draw_symbols, make_qam

PILOT_SEED = 0x9E77


class ZeroSymbol(ValueError):
    """Decision-directed division hit a zero reference symbol."""


@dataclass(frozen=True)
class PilotPattern:
    """Comb arrangement: pilots every s_f subchannels, one block per s_t."""

    s_f: int
    s_t: int
    pilot_indices: np.ndarray
    data_indices: np.ndarray
    pilot_symbols: np.ndarray

    @property
    def size(self):
        return self.pilot_indices.size + self.data_indices.size


@dataclass
class EstimationReport:
    """Outcome of one joint estimation/detection run."""

    h_hat: np.ndarray
    s_hat: np.ndarray
    mse_trace: list | None
    iterations_used: int


def comb_pattern(n, s_f, s_t=1, seed=PILOT_SEED):
    """Uniformly spaced pilots with a fixed pseudorandom QPSK sequence."""
    if n % s_f != 0:
        raise ValueError(f"pilot spacing {s_f} must divide block size {n}")
    pilot_indices = np.arange(0, n, s_f)
    data_indices = np.setdiff1d(np.arange(n), pilot_indices)
    rng = seeded_rng(seed, 0)
    pilot_symbols = draw_symbols(rng, pilot_indices.size, make_qam(4))
    return PilotPattern(s_f, s_t, pilot_indices, data_indices, pilot_symbols)


def place_symbols(pattern, data_symbols):
    """Assemble the transmitted block: pilots plus data symbols."""
    if data_symbols.size != pattern.data_indices.size:
        raise LengthMismatch(
            f"expected {pattern.data_indices.size} data symbols, "
            f"got {data_symbols.size}")
    s = np.empty(pattern.size, dtype=complex)
    s[pattern.pilot_indices] = pattern.pilot_symbols
    s[pattern.data_indices] = data_symbols
    return s


def ls_init(x_b_pri, pattern):
    """Least-squares channel seed from the pilot subchannels only.

    The s_f gain compensates the zero-filled spectrum so the later
    time-domain truncation recovers the correct tap amplitudes.
    """
    x_b_pri = np.asarray(x_b_pri, dtype=complex)
    h_tilde = np.zeros(x_b_pri.size, dtype=complex)
    h_tilde[pattern.pilot_indices] = (
        pattern.s_f * x_b_pri[pattern.pilot_indices] / pattern.pilot_symbols)
    return h_tilde


def dd_update(x_b_pri, s_hat_prev):
    """Decision-directed raw estimate: elementwise division by the symbols."""
    s_hat_prev = np.asarray(s_hat_prev, dtype=complex)
    if np.any(s_hat_prev == 0):
        raise ZeroSymbol("reference symbol is exactly zero")
    return np.asarray(x_b_pri, dtype=complex) / s_hat_prev


def refine(h_tilde, n_taps):
    """Project a raw frequency-domain estimate onto the known delay spread."""
    g = idft(h_tilde)
    g[n_taps:] = 0.0
    return dft(g)


def estimate_and_detect(q, pattern, noise_var, spec, constellation, n_taps,
                        opts=None, true_channel=None):
    """Run the joint schedule on one quantized comb-pilot block.

    When ``true_channel`` is supplied, the per-iteration estimation error
    (1/N)||h - h_hat||^2 is recorded for diagnostics.
    """
    opts = opts or DetectorOptions()
    q = np.asarray(q, dtype=complex)
    n = q.size
    if pattern.size != n:
        raise LengthMismatch(f"pattern covers {pattern.size} subchannels, block has {n}")
    rho = opts.damping
    truth = None if true_channel is None else np.asarray(true_channel, dtype=complex)

    state = DetectorState(
        z_a_pri=np.zeros(n, dtype=complex),
        v_a_pri=1.0,
        x_b_pri=np.zeros(n, dtype=complex),
        v_b_pri=V_MAX,
        s_post=np.zeros(n, dtype=complex),
        v_s_post=np.ones(n),
    )

    h_hat = np.zeros(n, dtype=complex)
    s_ref = None
    mse_trace = [] if truth is not None else None
    converged = False
    for t in range(1, opts.t_max + 1):
        z_post, v_post = module_a_posterior(state.z_a_pri, state.v_a_pri, q,
                                            spec, noise_var)
        x_b_pri, v_b_pri = module_a_extrinsic(state, z_post, float(np.mean(v_post)),
                                              clamp=opts.clamp)
        if rho < 1.0 and t > 1:
            x_b_pri = rho * x_b_pri + (1 - rho) * state.x_b_pri
            v_b_pri = rho * v_b_pri + (1 - rho) * state.v_b_pri
        prev = state.v_b_pri
        state.x_b_pri, state.v_b_pri = x_b_pri, v_b_pri
        if t > 1 and abs(v_b_pri - prev) / abs(prev) < opts.tol:
            converged = True

        h_tilde = ls_init(x_b_pri, pattern) if t == 1 else dd_update(x_b_pri, s_ref)
        h_hat = refine(h_tilde, n_taps)
        if mse_trace is not None:
            mse_trace.append(float(np.mean(np.abs(truth - h_hat) ** 2)))

        s_post, v_s_post = module_b_posterior(state.x_b_pri, state.v_b_pri,
                                              h_hat, constellation)
        s_post[pattern.pilot_indices] = pattern.pilot_symbols
        v_s_post[pattern.pilot_indices] = 0.0
        state.s_post, state.v_s_post = s_post, v_s_post
        s_ref = constellation.nearest(s_post)
        s_ref[pattern.pilot_indices] = pattern.pilot_symbols
        state.iteration = t
        if converged:
            break

        z_a_pri, v_a_pri = module_b_extrinsic(state, s_post, v_s_post, h_hat,
                                              clamp=opts.clamp)
        if rho < 1.0 and t > 1:
            z_a_pri = rho * z_a_pri + (1 - rho) * state.z_a_pri
            v_a_pri = rho * v_a_pri + (1 - rho) * state.v_a_pri
        state.z_a_pri, state.v_a_pri = z_a_pri, v_a_pri

    return EstimationReport(
        h_hat=h_hat,
        s_hat=s_ref,
        mse_trace=mse_trace,
        iterations_used=state.iteration,
    )
