"""Minimum-SER power allocation driven by the scalar recursion.

The inner loop solves the KKT system of the exponential-bound SER
objective sum_j exp(-gamma p_j |h_j|^2) under a total-power budget,
removing subchannels whose closed-form power would go negative.  The
outer loop embeds that allocation into the density-evolution updates so
the equivalent-channel precision and the profile are solved jointly.
Reported error rates always come from the exact per-subchannel formula,
never from the exponential bound used to shape the objective.
"""

import math
from dataclasses import dataclass

import numpy as np

from .signal_model import PowerProfile
from .state_evolution import (
    PRECISION_FLOOR,
    SeState,
    _mmse_many,
    se_theta,
)

GAIN_FLOOR = 1e-30


class EmptyActiveSet(RuntimeError):
    """Every subchannel was removed; the channel cannot carry power."""


@dataclass(frozen=True)
class PaState:
    """Result of one allocation: profile, surviving set and multipliers."""

    p: PowerProfile
    active_set: np.ndarray
    lam: float
    gamma: float
    outer_iteration: int


def espa(n):
    """Equal-power reference profile."""
    return PowerProfile(np.ones(n))


def amser_inner(h, gamma, outer_iteration=0):
    """Closed-form minimum of the exponential SER bound at fixed gamma.

    Powers follow p_j = (ln|h_j|^2 + lam)^+ / (gamma |h_j|^2) with lam set
    by the budget sum(p) = N over the active set; subchannels whose log
    gain falls below -lam are dropped one at a time, worst first.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    gains = np.abs(np.asarray(h)) ** 2
    n = gains.size
    keep = gains >= GAIN_FLOOR
    if not keep.any():
        raise EmptyActiveSet("no subchannel gain above the floor")
    while True:
        g_a = gains[keep]
        log_g = np.log(g_a)
        s_inv = float(np.sum(1.0 / g_a))
        s_log = float(np.sum(log_g / g_a))
        lam = (gamma * n - s_log) / s_inv
        worst = int(np.argmin(log_g))
        if log_g[worst] >= -lam:
            break
        keep[np.flatnonzero(keep)[worst]] = False
    powers = np.zeros(n)
    powers[keep] = np.maximum(log_g + lam, 0.0) / (gamma * g_a)
    return PaState(PowerProfile(powers), np.flatnonzero(keep), lam, gamma,
                   outer_iteration)


def amser_allocate(h, noise_var, spec, constellation, t_max=20, tol=1e-8):
    """Jointly solve the power profile and the scalar recursion state.

    Alternates the (v_x, theta, eta) updates with the inner allocation and
    the nu update until the profile stops moving in max-norm.  The
    quantizer design is taken as given; it is not re-fit to the evolving
    profile.
    """
    gains = np.abs(np.asarray(h)) ** 2
    n = gains.size
    powers = np.ones(n)
    nu = 1.0
    theta = eta = math.inf
    t = 0
    for t in range(1, t_max + 1):
        v_x = float(np.mean(powers * gains))
        theta = se_theta(nu, v_x, noise_var, spec)
        eta = 1.0 / max(1.0 / theta - nu, PRECISION_FLOOR)
        gamma = constellation.gain_factor * eta / 2.0
        pa = amser_inner(h, gamma, outer_iteration=t)
        new_powers = pa.p.powers
        effective = new_powers * gains
        mm = _mmse_many(effective * eta, constellation)
        avg = float(np.mean(effective * mm))
        nu = 1.0 / max(1.0 / avg - eta, PRECISION_FLOOR)
        delta = float(np.max(np.abs(new_powers - powers)))
        powers = new_powers
        if delta < tol:
            break
    return PowerProfile(powers), SeState(t, theta, eta, nu)
