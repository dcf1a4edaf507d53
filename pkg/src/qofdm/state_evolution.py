"""Scalar density-evolution analysis of the two-module detector.

Tracks the deterministic state (theta, eta, nu) that the detector's
extrinsic variances follow in the large-system limit, predicts symbol
error rates analytically from the equivalent-channel precision eta, and
cross-checks the fixed point against the saddle-point iteration of the
matching free-energy functional.

Conventions: ``nu`` is the prior variance handed to the quantizer-side
module (the v_A_pri analogue), ``theta`` the per-sample information of the
quantized observation about its mean, and ``eta`` the precision of the
equivalent AWGN channel seen by the symbol-side module.
"""

import math
from dataclasses import dataclass

import numpy as np

from .numerics import (
    NonFiniteIntegrand,
    hermite_dz_rule,
    interval_ratios,
    q_function,
    std_normal_pdf,
)
from .signal_model import Constellation, QuantizerSpec

PRECISION_FLOOR = 1e-13


class NoConvergence(RuntimeError):
    """Fixed-point iteration exhausted its iteration budget."""


@dataclass(frozen=True)
class SeState:
    """One iteration of the scalar recursion.

    ``theta`` and ``eta`` belong to this iteration; ``nu`` is the updated
    prior variance that seeds the next one.
    """

    iteration: int
    theta: float
    eta: float
    nu: float


@dataclass(frozen=True)
class SaddlePointState:
    """Fixed point of the free-energy stationarity conditions."""

    q_w_tilde: float
    q_w: float
    q_s_tilde: float
    chi_s: float
    iterations: int


def _tphi(t):
    """t * pdf(t) with the limit value 0 at infinite argument."""
    t = np.asarray(t, float)
    return np.where(np.isinf(t), 0.0, t * std_normal_pdf(np.where(np.isinf(t), 0.0, t)))


def bin_mass(mean, var, spec):
    """Probability of each quantizer bin under N(mean, var), one dimension."""
    sd = math.sqrt(var)
    lo = (spec.thresholds[:-1] - mean) / sd
    hi = (spec.thresholds[1:] - mean) / sd
    from .numerics import interval_mass

    return interval_mass(lo, hi)


def bin_mass_slope(mean, var, spec):
    """Derivative of ``bin_mass`` with respect to the mean."""
    sd = math.sqrt(var)
    lo = (spec.thresholds[:-1] - mean) / sd
    hi = (spec.thresholds[1:] - mean) / sd
    return (std_normal_pdf(lo) - std_normal_pdf(hi)) / sd


def bin_mass_curvature(mean, var, spec):
    """Second derivative of ``bin_mass`` with respect to the mean."""
    sd = math.sqrt(var)
    lo = (spec.thresholds[:-1] - mean) / sd
    hi = (spec.thresholds[1:] - mean) / sd
    return (_tphi(lo) - _tphi(hi)) / var


def se_theta(nu, v_x, noise_var, spec, rule=None):
    """Information content of one quantized sample about its mean.

    Averages the per-bin Fisher-type ratio (mass slope)^2 / mass over the
    Gaussian spread of the conditional mean.  The ratio is evaluated in the
    product form slope * (slope / mass) with the stable difference-ratio
    kernel, which stays finite deep in the tails where both factors
    underflow individually.
    """
    if spec.bypass:
        return 1.0 / (noise_var + nu)
    u2 = (noise_var + nu) / 2.0
    u = math.sqrt(u2)
    spread = math.sqrt(max(v_x - nu, 0.0) / 2.0)
    if rule is None:
        rule = hermite_dz_rule()
    means = spread * rule.nodes[:, None]
    a = (means - spec.thresholds[1:]) / u
    b = (means - spec.thresholds[:-1]) / u
    ratio, _ = interval_ratios(a, b)
    per_bin = (std_normal_pdf(b) - std_normal_pdf(a)) * ratio / u2
    theta = 0.5 * float(rule.weights @ per_bin.sum(axis=1))
    if not np.isfinite(theta) or theta <= 0:
        raise NonFiniteIntegrand(f"theta evaluated to {theta}")
    return theta


def fisher_consistency_check(nu, v_x, noise_var, spec, rule=None):
    """Residual of the regularity condition behind the information integral.

    The bin masses sum to one for every mean, so their second derivatives
    must integrate to zero against the Gaussian spread of the mean.  Returns
    the numerically evaluated integral; anything beyond rounding noise
    indicates an inconsistent bin parametrization.
    """
    u2 = (noise_var + nu) / 2.0
    spread_var = max(v_x - nu, 0.0) / 2.0
    if spread_var == 0.0:
        return float(np.sum(bin_mass_curvature(0.0, u2, spec)))
    if rule is None:
        rule = hermite_dz_rule()
    sd = math.sqrt(u2)
    means = math.sqrt(spread_var) * rule.nodes[:, None]
    lo = (spec.thresholds[:-1] - means) / sd
    hi = (spec.thresholds[1:] - means) / sd
    curv = (_tphi(lo) - _tphi(hi)) / u2
    return float(rule.weights @ curv.sum(axis=1))


def _pam_levels(constellation):
    """Per-dimension amplitude levels of a square constellation."""
    return np.unique(constellation.points.real)


def _mmse_pam(levels, snrs, rule):
    """Per-dimension MMSE of a uniform discrete prior, one value per SNR.

    ``snrs`` are precisions of the complex-valued observation; each real
    dimension sees noise variance 1/(2 snr).
    """
    snrs = np.asarray(snrs, float)
    out = np.empty(snrs.shape)
    k = levels.size
    prior_power = float(np.mean(levels**2))
    for i, snr in np.ndenumerate(snrs):
        if snr <= 0:
            out[i] = prior_power
            continue
        tau = 1.0 / (2.0 * snr)
        sd = math.sqrt(tau)
        y = levels[:, None] + sd * rule.nodes[None, :]
        expo = -((y[:, :, None] - levels[None, None, :]) ** 2) / (2.0 * tau)
        expo -= expo.max(axis=2, keepdims=True)
        w = np.exp(expo)
        w /= w.sum(axis=2, keepdims=True)
        m = w @ levels
        out[i] = prior_power - float(np.mean((m**2) @ rule.weights))
    return np.maximum(out, 0.0)


def _mmse_qpsk(snrs, rule):
    """Closed-form MMSE for the quaternary constellation."""
    snrs = np.asarray(snrs, float)
    pos = np.maximum(snrs, 0.0)
    t = np.tanh(pos[..., None] + np.sqrt(pos)[..., None] * rule.nodes)
    vals = 1.0 - t @ rule.weights
    return np.clip(np.where(snrs <= 0, 1.0, vals), 0.0, 1.0)


def _mmse_many(snrs, constellation, rule=None):
    if rule is None:
        rule = hermite_dz_rule()
    if constellation.order == 4:
        return _mmse_qpsk(snrs, rule)
    per_dim = _mmse_pam(_pam_levels(constellation), snrs, rule)
    return np.clip(2.0 * per_dim, 0.0, 1.0)


def mmse_constellation(snr, constellation, rule=None):
    """MMSE of a unit-energy symbol observed through complex noise 1/snr."""
    if snr <= 0:
        return 1.0
    return float(_mmse_many(np.asarray([snr]), constellation, rule)[0])


def predict_ser(eta, h_eff, constellation):
    """Analytical symbol error rate of the equivalent per-subchannel channels.

    Each subchannel behaves as an AWGN channel with SNR |h_j|^2 eta; the
    average square-constellation error rate follows from the per-dimension
    error probability.
    """
    gains = np.abs(np.asarray(h_eff)) ** 2
    arg = np.sqrt(constellation.gain_factor * gains * eta)
    qv = q_function(arg)
    c = 1.0 - 1.0 / math.sqrt(constellation.order)
    ser = np.mean(4.0 * c * qv * (1.0 - c * qv))
    return float(np.clip(ser, 0.0, 1.0))


def se_start(h_eff):
    """Initial state: prior variance equals the time-domain signal power."""
    v_x = float(np.mean(np.abs(np.asarray(h_eff)) ** 2))
    return SeState(iteration=0, theta=math.inf, eta=0.0, nu=v_x)


def se_step(state, h_eff, noise_var, spec, constellation, rule=None):
    """Advance the scalar recursion by one detector iteration."""
    gains = np.abs(np.asarray(h_eff)) ** 2
    v_x = float(np.mean(gains))
    theta = se_theta(state.nu, v_x, noise_var, spec, rule)
    eta = 1.0 / max(1.0 / theta - state.nu, PRECISION_FLOOR)
    mm = _mmse_many(gains * eta, constellation, rule)
    avg = float(np.mean(gains * mm))
    nu_next = 1.0 / max(1.0 / avg - eta, PRECISION_FLOOR)
    return SeState(state.iteration + 1, theta, eta, nu_next)


def se_trace(h_eff, noise_var, spec, constellation, t_max=1000, tol=1e-10,
             rule=None):
    """Run the recursion until eta stabilizes; returns all visited states."""
    state = se_start(h_eff)
    states = []
    for _ in range(t_max):
        prev_eta = state.eta
        state = se_step(state, h_eff, noise_var, spec, constellation, rule)
        states.append(state)
        if state.iteration > 1 and abs(state.eta - prev_eta) <= tol * prev_eta:
            break
    return states

def se_fixed_point(h_eff, noise_var, spec, constellation, t_max=1000,
                   tol=1e-10, rule=None):
    """Converged state of the recursion; raises if the budget runs out."""
    states = se_trace(h_eff, noise_var, spec, constellation, t_max, tol, rule)
    if len(states) >= t_max:
        last, prev = states[-1].eta, states[-2].eta
        if abs(last - prev) > tol * prev:
            raise NoConvergence(f"eta still moving after {t_max} iterations")
    return states[-1]


def replica_fixed_point(h_eff, noise_var, spec, constellation, t_max=1000,
                        tol=1e-10, rule=None):
    """Fixed point of the free-energy stationarity conditions.

    Iterates the four coupled equations from the overlap parametrization;
    at the fixed point 1/chi_s coincides with the recursion's nu* and
    q_s_tilde with eta*.
    """
    gains = np.abs(np.asarray(h_eff)) ** 2
    v_x = float(np.mean(gains))
    chi_s = 1.0 / v_x
    qs_prev = None
    for it in range(1, t_max + 1):
        qw_tilde = v_x - 1.0 / chi_s
        q_w = se_theta(v_x - qw_tilde, v_x, noise_var, spec, rule)
        qs_tilde = 1.0 / max(1.0 / q_w - 1.0 / chi_s, PRECISION_FLOOR)
        mm = _mmse_many(gains * qs_tilde, constellation, rule)
        avg = float(np.mean(gains * mm))
        chi_s = max(1.0 / avg - qs_tilde, PRECISION_FLOOR)
        if qs_prev is not None and abs(qs_tilde - qs_prev) <= tol * qs_prev:
            return SaddlePointState(qw_tilde, q_w, qs_tilde, chi_s, it)
        qs_prev = qs_tilde
    raise NoConvergence(f"saddle point still moving after {t_max} iterations")
