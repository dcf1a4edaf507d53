"""Iterative two-module detector for quantized OFDM observations.

Module A forms the componentwise Bayesian posterior of the time-domain
signal given the quantizer outputs under a Gaussian prior; Module B forms
the posterior of the frequency-domain symbols under the constellation
prior.  The modules exchange extrinsic means and scalar extrinsic
variances through the unitary DFT until the extrinsic variance settles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import dft, idft, interval_ratios
from .signal_model import Constellation, QuantizerSpec, level_bounds

V_MAX = 1e8     # extrinsic variance meaning "no information from this module"
V_FLOOR = 1e-13  # floor applied to every variance that gets divided by


class DegenerateBin(FloatingPointError):
    """Interval posterior hit an impossible (observation, prior) pairing."""


@dataclass
class DetectorOptions:
    """Iteration controls shared by the message-passing detectors."""

    t_max: int = 10
    tol: float = 1e-6
    damping: float = 1.0   # 1.0 = undamped, the default schedule
    clamp: bool = True     # nonpositive extrinsic precision -> variance V_MAX


@dataclass
class DetectorState:
    """Messages live here: time-domain prior (z side) and frequency-domain
    prior (x side), plus the current symbol posterior."""

    z_a_pri: np.ndarray
    v_a_pri: float
    x_b_pri: np.ndarray
    v_b_pri: float
    s_post: np.ndarray
    v_s_post: np.ndarray
    iteration: int = 0


@dataclass
class DetectorReport:
    s_hat: np.ndarray
    s_post: np.ndarray
    v_b_pri_trace: list
    iterations_used: int
    converged: bool


# ---------------------------------------------------------------------------
# Module A: interval posterior of the time-domain signal
# ---------------------------------------------------------------------------

def _interval_posterior_part(z_part, v_pri, lo, hi, noise_var):
    """Posterior mean/variance of one real dimension given that the noisy
    sample landed in (lo, hi].

    z_part ~ N(mean z_part, v_pri/2) prior; observation adds N(0, noise_var/2).
    """
    scale = math.sqrt((v_pri + noise_var) / 2.0)
    a = (z_part - hi) / scale
    b = (z_part - lo) / scale
    ratio, slope = interval_ratios(a, b)
    coef = 0.5 * v_pri / scale
    mean = z_part + coef * ratio
    var = 0.5 * v_pri - (v_pri**2 / (2.0 * (v_pri + noise_var))) * (ratio**2 + slope)
    return mean, np.maximum(var, 0.0)


def module_a_posterior(z_pri, v_pri: float, q, spec: QuantizerSpec, noise_var: float):
    """Componentwise posterior of the time-domain signal given quantizer output.

    Real and imaginary parts are independent.  Returns (z_post, v_post) with
    v_post the per-sample total (both dimensions) posterior variance.  With a
    bypass spec, q is the unquantized observation and the update is plain
    Gaussian conjugacy.
    """
    z_pri = np.asarray(z_pri, dtype=complex)
    q = np.asarray(q, dtype=complex)
    if spec.bypass:
        gain = v_pri / (v_pri + max(noise_var, V_FLOOR)) if noise_var > 0 else 1.0
        z_post = z_pri + gain * (q - z_pri)
        v_post = np.full(z_pri.shape, v_pri * noise_var / (v_pri + noise_var)
                         if noise_var > 0 else 0.0)
        return z_post, v_post
    if not v_pri > 0 or not np.isfinite(v_pri):
        raise DegenerateBin(f"prior variance {v_pri} is not usable")
    lo_re, hi_re = level_bounds(q.real, spec)
    lo_im, hi_im = level_bounds(q.imag, spec)
    mean_re, var_re = _interval_posterior_part(z_pri.real, v_pri, lo_re, hi_re, noise_var)
    mean_im, var_im = _interval_posterior_part(z_pri.imag, v_pri, lo_im, hi_im, noise_var)
    z_post = mean_re + 1j * mean_im
    v_post = var_re + var_im
    if not (np.all(np.isfinite(z_post)) and np.all(np.isfinite(v_post))):
        raise DegenerateBin("interval posterior is not finite")
    return z_post, v_post


def module_a_extrinsic(state: DetectorState, z_post, v_post_avg: float, clamp: bool = True):
    """Extrinsic frequency-domain message out of Module A.

    Removes the prior's contribution in precision space and maps through the
    DFT.  When the posterior carries no information beyond the prior
    (nonpositive precision difference) the variance is set to V_MAX and the
    mean falls back to the posterior mean — the message is declared
    uninformative rather than amplified.
    """
    v_post_avg = max(float(v_post_avg), V_FLOOR)
    v_pri = max(float(state.v_a_pri), V_FLOOR)
    prec_diff = 1.0 / v_post_avg - 1.0 / v_pri
    if prec_diff <= 0:
        if clamp:
            return dft(z_post), V_MAX
        v_ext = math.inf if prec_diff == 0 else 1.0 / prec_diff
    else:
        v_ext = min(1.0 / prec_diff, V_MAX)
    x_ext = v_ext * (dft(z_post) / v_post_avg - dft(state.z_a_pri) / v_pri)
    return x_ext, v_ext


# ---------------------------------------------------------------------------
# Module B: constellation posterior of the frequency-domain symbols
# ---------------------------------------------------------------------------

def module_b_posterior(x_pri, v_pri, h_eff, constellation: Constellation):
    """Posterior symbol mean/variance under the uniform constellation prior.

    The pseudo-observation is x_pri = h_eff * s + CN(0, v_pri); v_pri may
    be a scalar or one variance per component.  A zero h_eff entry yields
    the prior (mean 0, variance 1) automatically since all points then
    score equally.
    """
    x_pri = np.atleast_1d(np.asarray(x_pri, dtype=complex))
    h_eff = np.broadcast_to(np.asarray(h_eff, dtype=complex), x_pri.shape)
    pts = constellation.points
    v = np.maximum(np.asarray(v_pri, dtype=float), V_FLOOR)
    if v.ndim:
        v = v[:, None]
    log_w = -np.abs(x_pri[:, None] - h_eff[:, None] * pts[None, :]) ** 2 / v
    log_w -= log_w.max(axis=1, keepdims=True)
    w = np.exp(log_w)
    w /= w.sum(axis=1, keepdims=True)
    s_post = w @ pts
    second = w @ np.abs(pts) ** 2
    v_s_post = np.maximum(second - np.abs(s_post) ** 2, 0.0)
    return s_post, v_s_post


def module_b_extrinsic(state: DetectorState, s_post, v_s_post, h_eff, clamp: bool = True):
    """Extrinsic time-domain message out of Module B (inverse-DFT side)."""
    h_eff = np.asarray(h_eff, dtype=complex)
    x_post = h_eff * np.asarray(s_post, dtype=complex)
    v_b_post = max(float(np.mean(np.abs(h_eff) ** 2 * np.asarray(v_s_post))), V_FLOOR)
    v_pri = max(float(state.v_b_pri), V_FLOOR)
    prec_diff = 1.0 / v_b_post - 1.0 / v_pri
    if prec_diff <= 0:
        if clamp:
            return idft(x_post), V_MAX
        v_ext = math.inf if prec_diff == 0 else 1.0 / prec_diff
    else:
        v_ext = min(1.0 / prec_diff, V_MAX)
    z_ext = v_ext * (idft(x_post) / v_b_post - idft(state.x_b_pri) / v_pri)
    return z_ext, v_ext


# ---------------------------------------------------------------------------
# full schedule
# ---------------------------------------------------------------------------

def detect(q, h_eff, noise_var: float, spec: QuantizerSpec,
           constellation: Constellation, opts: DetectorOptions | None = None) -> DetectorReport:
    """Run the two-module schedule on one received block.

    Initialization: zero time-domain prior mean with variance equal to the
    average subchannel power; iterates Module A then Module B, stopping when
    the extrinsic variance entering Module B changes by less than tol
    (relative) or after t_max rounds.  Decisions are nearest constellation
    points to the final symbol posterior means.
    """
    opts = opts or DetectorOptions()
    q = np.asarray(q, dtype=complex)
    h_eff = np.asarray(h_eff, dtype=complex)
    n = q.size
    rho = opts.damping

    state = DetectorState(
        z_a_pri=np.zeros(n, dtype=complex),
        v_a_pri=float(np.mean(np.abs(h_eff) ** 2)),
        x_b_pri=np.zeros(n, dtype=complex),
        v_b_pri=V_MAX,
        s_post=np.zeros(n, dtype=complex),
        v_s_post=np.ones(n),
    )

    trace = []
    converged = False
    for t in range(1, opts.t_max + 1):
        z_post, v_post = module_a_posterior(state.z_a_pri, state.v_a_pri, q, spec, noise_var)
        x_b_pri, v_b_pri = module_a_extrinsic(state, z_post, float(np.mean(v_post)),
                                              clamp=opts.clamp)
        if rho < 1.0 and t > 1:
            x_b_pri = rho * x_b_pri + (1 - rho) * state.x_b_pri
            v_b_pri = rho * v_b_pri + (1 - rho) * state.v_b_pri
        prev = state.v_b_pri
        state.x_b_pri, state.v_b_pri = x_b_pri, v_b_pri
        trace.append(float(v_b_pri))
        if t > 1 and abs(v_b_pri - prev) / abs(prev) < opts.tol:
            converged = True

        state.s_post, state.v_s_post = module_b_posterior(
            state.x_b_pri, state.v_b_pri, h_eff, constellation)
        state.iteration = t
        if converged:
            break

        z_a_pri, v_a_pri = module_b_extrinsic(state, state.s_post, state.v_s_post,
                                              h_eff, clamp=opts.clamp)
        if rho < 1.0 and t > 1:
            z_a_pri = rho * z_a_pri + (1 - rho) * state.z_a_pri
            v_a_pri = rho * v_a_pri + (1 - rho) * state.v_a_pri
        state.z_a_pri, state.v_a_pri = z_a_pri, v_a_pri

    return DetectorReport(
        s_hat=constellation.nearest(state.s_post),
        s_post=state.s_post,
        v_b_pri_trace=trace,
        iterations_used=state.iteration,
        converged=converged,
    )
