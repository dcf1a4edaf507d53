"""Comparison detectors: one-tap nearest point, GAMP, and the
additive-quantization-noise approximation.

GAMP reuses the two scalar posterior functions of the main detector, so
any performance gap between the two is attributable to the message
schedule rather than the scalar math.  The additive model treats the
quantizer as a linear gain plus white noise and then decides per
subchannel.
"""

from dataclasses import dataclass

import numpy as np

from .gturbo import (
    V_FLOOR,
    V_MAX,
    DetectorOptions,
    DetectorReport,
    module_a_posterior,
    module_b_posterior,
)
from .numerics import dft, idft
from .signal_model import Constellation, QuantizerSpec


class ZeroChannel(ValueError):
    """One-tap equalization is undefined on a dead subchannel."""


@dataclass
class GampState:
    """Per-component first/second moments plus the correction memory."""

    s_hat: np.ndarray
    v_s: np.ndarray
    g_hat: np.ndarray
    v_g: float
    iteration: int = 0


def conventional_detect(q, h_eff, constellation):
    """One-tap equalization followed by nearest-point decisions."""
    h_eff = np.asarray(h_eff, dtype=complex)
    if np.any(h_eff == 0):
        raise ZeroChannel("subchannel gain is exactly zero")
    q_freq = dft(np.asarray(q, dtype=complex))
    return constellation.nearest(q_freq / h_eff)


def gamp_detect(q, h_eff, noise_var, spec, constellation, opts=None):
    """Generalized approximate message passing on the quantized model.

    Scalar-variance form: the mixing operator is the unitary inverse DFT
    times the diagonal subchannel response, whose rows all carry the same
    energy, so a single variance per side is exact.  Runs t_max rounds,
    keeps the lowest-uncertainty iterate, and flags non-convergence
    instead of raising.
    """
    opts = opts or DetectorOptions()
    q = np.asarray(q, dtype=complex)
    h_eff = np.asarray(h_eff, dtype=complex)
    n = q.size
    gains = np.abs(h_eff) ** 2
    rho = opts.damping

    state = GampState(
        s_hat=np.zeros(n, dtype=complex),
        v_s=np.ones(n),
        g_hat=np.zeros(n, dtype=complex),
        v_g=0.0,
    )
    trace = []
    converged = False
    best = (np.inf, state.s_hat)
    prev_metric = None
    for t in range(1, opts.t_max + 1):
        v_p = max(float(np.mean(gains * state.v_s)), V_FLOOR)
        p_hat = idft(h_eff * state.s_hat) - v_p * state.g_hat
        z_hat, v_z = module_a_posterior(p_hat, v_p, q, spec, noise_var)
        v_z_avg = float(np.mean(v_z))
        g_hat = (z_hat - p_hat) / v_p
        v_g = max((1.0 - v_z_avg / v_p) / v_p, V_FLOOR)
        if rho < 1.0 and t > 1:
            g_hat = rho * g_hat + (1 - rho) * state.g_hat
            v_g = rho * v_g + (1 - rho) * state.v_g
        state.g_hat, state.v_g = g_hat, v_g

        v_r = np.minimum(1.0 / np.maximum(gains * v_g, 1.0 / V_MAX), V_MAX)
        r_hat = state.s_hat + v_r * np.conj(h_eff) * dft(g_hat)
        state.s_hat, state.v_s = module_b_posterior(r_hat, v_r, np.ones(n), constellation)
        state.iteration = t

        metric = float(np.mean(state.v_s))
        trace.append(metric)
        if metric < best[0]:
            best = (metric, state.s_hat)
        if prev_metric is not None and abs(metric - prev_metric) < opts.tol * max(prev_metric, V_FLOOR):
            converged = True
            break
        prev_metric = metric

    s_post = state.s_hat if converged else best[1]
    return DetectorReport(
        s_hat=constellation.nearest(s_post),
        s_post=s_post,
        v_b_pri_trace=trace,
        iterations_used=state.iteration,
        converged=converged,
    )


def aqnm_detect(q, h_eff, noise_var, spec, constellation):
    """Per-subchannel decisions under the linear-gain quantizer model.

    The quantizer output is modeled as alpha * y plus white noise, with
    alpha set by the quantizer's Gaussian distortion factor; decisions
    minimize the distance to the correspondingly scaled constellation.
    """
    h_eff = np.asarray(h_eff, dtype=complex)
    alpha = 1.0 - spec.rho
    q_freq = dft(np.asarray(q, dtype=complex))
    # total effective noise alpha^2 sigma^2 + alpha (1-alpha)(v_x + sigma^2)
    # is white under the model, so it scales all point distances equally
    # and drops out of the uniform-prior decision rule.
    dist = np.abs(q_freq[:, None] - alpha * h_eff[:, None]
                  * constellation.points[None, :]) ** 2
    return constellation.points[np.argmin(dist, axis=1)]
