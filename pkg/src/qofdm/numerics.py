"""Numerical kernels shared by every layer of the lab.

Stable standard-normal special functions, interval-mass and interval-moment
ratios that survive far-tail arguments, the Hermite quadrature rule used for
all standard-normal averages, unitary FFT wrappers, and reproducible
counter-based per-trial random streams.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

SQRT_2PI = math.sqrt(2.0 * math.pi)

# Same-sign arguments beyond this magnitude switch the Phi-difference ratios
# to the scaled-erfcx evaluation (sign quantizers at high SNR push the
# arguments to +-30, far past where plain cdf differences cancel).
_TAIL_SWITCH = 6.0


class LengthMismatch(ValueError):
    """Block length is not the required power of two."""


class NonFiniteIntegrand(ValueError):
    """Quadrature integrand produced NaN or infinity on a node."""


@dataclass
class ComplexBlock:
    """A length-N vector of complex samples with an optional role tag.

    Thin wrapper: numpy consumes it transparently via __array__, so every
    routine in the lab accepts either a ComplexBlock or a plain ndarray.
    """

    values: np.ndarray
    role: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.ndim != 1:
            raise ValueError("ComplexBlock holds a one-dimensional vector")

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __len__(self):
        return self.values.size


# ---------------------------------------------------------------------------
# scalar special functions
# ---------------------------------------------------------------------------

def std_normal_pdf(z):
    """Standard normal density, vectorized; pdf(+-inf) = 0."""
    z = np.asarray(z, dtype=float)
    return np.exp(-0.5 * np.square(z)) / SQRT_2PI


def std_normal_cdf(z):
    """Standard normal cdf via the complementary-error-function path.

    Accurate for small tail probabilities down to |z| ~ 38.
    """
    return special.ndtr(np.asarray(z, dtype=float))


def q_function(z):
    """Upper-tail probability Q(z) = P(Z > z), computed directly as the
    complementary tail (never as 1 - cdf)."""
    return special.ndtr(-np.asarray(z, dtype=float))


def interval_mass(lo, hi):
    """P(lo < Z <= hi) for standard normal Z, stable in both tails.

    The difference is always taken between two *small* cdf values: on the
    left half-line directly, on the right half-line through the mirrored
    upper tails.  Accepts +-inf bounds.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    left = special.ndtr(hi) - special.ndtr(lo)
    right = special.ndtr(-lo) - special.ndtr(-hi)
    # lo + hi <= 0 picks the left form; NaN (inf - inf) falls through to the
    # right form, which evaluates the full-line mass exactly.
    with np.errstate(invalid="ignore"):
        use_left = (lo + hi) <= 0.0
    return np.where(use_left, left, right)


def _x_times_pdf(x):
    """x * pdf(x) with the correct zero limit at x = +-inf."""
    with np.errstate(invalid="ignore"):
        out = x * std_normal_pdf(x)
    return np.where(np.isinf(x), 0.0, out)


def interval_ratios(a, b):
    """Stable interval-moment ratios for standard-normal masses.

    Returns the pair

        R = (pdf(a) - pdf(b)) / (cdf(a) - cdf(b))
        T = (a*pdf(a) - b*pdf(b)) / (cdf(a) - cdf(b))

    which drive both the interval posterior moments and the state-evolution
    integrands.  Direct evaluation cancels catastrophically when a and b sit
    in the same far tail; there the computation switches to a scaled-erfcx
    form.  Either argument may be +-inf (unbounded end bins).  R is odd and
    T even under joint negation of (a, b); both are symmetric under swap.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)

    with np.errstate(invalid="ignore"):
        ssum = a + b
    flip = np.where(np.isnan(ssum), False, ssum > 0.0)
    x = np.where(flip, -a, a)
    y = np.where(flip, -b, b)
    lo = np.minimum(x, y)
    hi = np.maximum(x, y)

    tail = hi <= -_TAIL_SWITCH

    # generic branch: cdf values on the reduced side are small-to-moderate
    # numbers carrying full relative precision
    with np.errstate(invalid="ignore", divide="ignore"):
        den = special.ndtr(hi) - special.ndtr(lo)
        r_gen = (std_normal_pdf(hi) - std_normal_pdf(lo)) / den
        t_gen = (_x_times_pdf(hi) - _x_times_pdf(lo)) / den

    # deep lower tail: factor out exp(-hi^2/2) and use erfcx
    hi_t = np.where(tail, hi, -_TAIL_SWITCH)  # keep dead lanes finite
    lo_t = np.where(tail, lo, 2.0 * -_TAIL_SWITCH)
    with np.errstate(over="ignore"):
        d = np.exp(0.5 * (np.square(hi_t) - np.square(lo_t)))
    d = np.where(np.isinf(lo_t), 0.0, d)
    e_hi = special.erfcx(-hi_t / math.sqrt(2.0))
    e_lo = np.where(np.isinf(lo_t), 0.0, special.erfcx(-lo_t / math.sqrt(2.0)))
    den_s = e_hi - d * e_lo
    coef = 2.0 / SQRT_2PI
    with np.errstate(invalid="ignore", divide="ignore"):
        r_tail = coef * (1.0 - d) / den_s
        dlo = np.where(np.isinf(lo_t), 0.0, d * lo_t)
        t_tail = coef * (hi_t - dlo) / den_s

    ratio_r = np.where(tail, r_tail, r_gen)
    ratio_t = np.where(tail, t_tail, t_gen)
    ratio_r = np.where(flip, -ratio_r, ratio_r)

    # both arguments infinite with opposite signs: full-line interval, both
    # pdf terms vanish against unit mass
    both_inf = np.isinf(a) & np.isinf(b) & (np.sign(a) != np.sign(b))
    ratio_r = np.where(both_inf, 0.0, ratio_r)
    ratio_t = np.where(both_inf, 0.0, ratio_t)
    return ratio_r, ratio_t


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GaussQuadRule:
    """Nodes/weights for averaging against the standard normal density.

    Weights are normalized so that integrating f = 1 returns exactly 1.
    """

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        if self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights must have matching shapes")
        if np.any(self.weights <= 0):
            raise ValueError("weights must be positive")


@functools.lru_cache(maxsize=None)
def hermite_dz_rule(n: int = 61) -> GaussQuadRule:
    """Probabilists' Gauss-Hermite rule, renormalized to unit total mass."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(n)
    return GaussQuadRule(nodes=nodes, weights=weights / weights.sum())


def gauss_hermite_dz(f, rule: GaussQuadRule | None = None) -> float:
    """Approximate the standard-normal average of f by the quadrature rule.

    f should accept an ndarray of nodes; a scalar-only callable is handled
    by falling back to pointwise evaluation.
    """
    if rule is None:
        rule = hermite_dz_rule()
    try:
        vals = np.asarray(f(rule.nodes), dtype=float)
        if vals.shape != rule.nodes.shape:
            raise TypeError
    except (TypeError, ValueError):
        vals = np.array([float(f(z)) for z in rule.nodes])
    if not np.all(np.isfinite(vals)):
        raise NonFiniteIntegrand("integrand is not finite on all quadrature nodes")
    return float(rule.weights @ vals)


# ---------------------------------------------------------------------------
# unitary transforms
# ---------------------------------------------------------------------------

def _require_power_of_two(n: int):
    if n < 1 or (n & (n - 1)) != 0:
        raise LengthMismatch(f"block length {n} is not a power of two")


def dft(x):
    """Unitary DFT (norm-preserving) of a length-2^k block."""
    arr = np.asarray(x)
    _require_power_of_two(arr.shape[-1])
    return np.fft.fft(arr, norm="ortho")


def idft(x):
    """Unitary inverse DFT of a length-2^k block."""
    arr = np.asarray(x)
    _require_power_of_two(arr.shape[-1])
    return np.fft.ifft(arr, norm="ortho")


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------

def seeded_rng(base_seed: int, trial: int = 0) -> np.random.Generator:
    """Independent, reproducible stream for one trial.

    Counter-based generator keyed on (base_seed, trial): streams for
    different trials are statistically independent and identical calls
    reproduce bit-identical draws, regardless of execution order across
    workers.
    """
    seq = np.random.SeedSequence([int(base_seed), int(trial)])
    return np.random.Generator(np.random.Philox(seq))


def complex_normal(rng: np.random.Generator, n: int, var: float = 1.0) -> np.ndarray:
    """n i.i.d. circularly-symmetric complex Gaussian draws of total variance var."""
    scale = math.sqrt(var / 2.0)
    return scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
