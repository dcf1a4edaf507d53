"""Constellations, few-bit quantizers, multipath channels, and the forward model.

The receive chain being simulated: frequency-domain symbols are scaled by the
per-subchannel amplitude response, brought to the time domain by the unitary
inverse DFT, hit by white complex Gaussian noise, and then each of the two
real dimensions passes through a B-bit uniform-threshold quantizer whose
output levels are Gaussian conditional means.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize

from .numerics import (
    LengthMismatch,
    complex_normal,
    dft,
    idft,
    interval_mass,
    interval_ratios,
    seeded_rng,
)

_LEVEL_MATCH_TOL = 1e-9
_RHO_SAMPLES = 10**6
_RHO_SEED = 0x51C7


class InvalidBits(ValueError):
    """Requested quantizer resolution outside the supported 1..12 range."""


class UnknownLevel(ValueError):
    """A value claimed to be a quantizer output matches no designed level."""


# ---------------------------------------------------------------------------
# constellations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constellation:
    """Unit-energy square QAM alphabet.

    gain_factor is the SER scale 3/(M-1) entering Q(sqrt(gain * snr)) in the
    analytical symbol-error expression; labels carry the per-point Gray
    bit labeling (row Gray code concatenated with column Gray code).
    """

    points: np.ndarray
    order: int
    gain_factor: float
    labels: np.ndarray

    def nearest(self, values) -> np.ndarray:
        """Hard decisions: the constellation point closest to each value."""
        return self.points[self.nearest_index(values)]

    def nearest_index(self, values) -> np.ndarray:
        vals = np.atleast_1d(np.asarray(values, dtype=complex))
        idx = np.argmin(np.abs(vals[:, None] - self.points[None, :]), axis=1)
        return idx


def _gray(i: int) -> int:
    return i ^ (i >> 1)


@functools.lru_cache(maxsize=None)
def make_qam(order: int) -> Constellation:
    """Square QAM constellation of the given order (4, 16 or 64)."""
    if order not in (4, 16, 64):
        raise ValueError(f"unsupported constellation order {order}")
    side = int(round(math.sqrt(order)))
    pam = np.arange(-(side - 1), side, 2, dtype=float)  # -(side-1), ..., side-1
    scale = 1.0 / math.sqrt(2.0 * (side * side - 1) / 3.0)
    points = np.empty(order, dtype=complex)
    labels = np.empty(order, dtype=np.int64)
    bits_per_dim = side.bit_length() - 1
    k = 0
    for i, re in enumerate(pam):
        for j, im in enumerate(pam):
            points[k] = scale * (re + 1j * im)
            labels[k] = (_gray(i) << bits_per_dim) | _gray(j)
            k += 1
    return Constellation(
        points=points,
        order=order,
        gain_factor=3.0 / (order - 1),
        labels=labels,
    )


def draw_symbols(rng: np.random.Generator, n: int, constellation: Constellation) -> np.ndarray:
    """n i.i.d. equiprobable symbols from the constellation."""
    return constellation.points[rng.integers(0, constellation.order, size=n)]


# ---------------------------------------------------------------------------
# quantizer design
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantizerSpec:
    """Per-dimension scalar quantizer: strictly increasing thresholds with
    -inf/+inf end bounds, one output level per bin, and the per-dimension RMS
    the design assumed.

    rho is the normalized Gaussian-input distortion E(y-Q(y))^2 / E y^2,
    measured empirically at design time (used by the additive-noise-model
    detector).  bypass marks the infinite-resolution path: quantize() is the
    identity and downstream posteriors switch to Gaussian conjugacy.
    """

    bits: int
    thresholds: np.ndarray
    levels: np.ndarray
    input_std: float
    rho: float = 0.0
    bypass: bool = False

    def __post_init__(self):
        object.__setattr__(self, "thresholds", np.asarray(self.thresholds, dtype=float))
        object.__setattr__(self, "levels", np.asarray(self.levels, dtype=float))
        if not self.bypass:
            if np.any(np.diff(self.thresholds) <= 0):
                raise ValueError("thresholds must be strictly increasing")
            if self.levels.size != self.thresholds.size - 1:
                raise ValueError("need exactly one level per bin")


def bypass_quantizer() -> QuantizerSpec:
    """Infinite-resolution stand-in: no thresholds, identity mapping."""
    return QuantizerSpec(
        bits=0,
        thresholds=np.array([]),
        levels=np.array([]),
        input_std=1.0,
        rho=0.0,
        bypass=True,
    )


def _unit_design(bits: int, step: float):
    """Thresholds/centroid levels for a unit-variance Gaussian input."""
    n_bins = 1 << bits
    interior = (np.arange(1, n_bins) - n_bins / 2.0) * step
    edges = np.concatenate(([-np.inf], interior, [np.inf]))
    lo, hi = edges[:-1], edges[1:]
    # E[Z | lo < Z <= hi] = (pdf(lo) - pdf(hi)) / (cdf(hi) - cdf(lo))
    ratio, _ = interval_ratios(lo, hi)
    levels = -ratio
    return edges, levels


def _unit_distortion(bits: int, step: float) -> float:
    """E (Z - Q(Z))^2 for unit Gaussian Z under the centroid-level design."""
    edges, levels = _unit_design(bits, step)
    mass = interval_mass(edges[:-1], edges[1:])
    return float(1.0 - np.sum(mass * levels**2))


@functools.lru_cache(maxsize=None)
def _optimal_unit_step(bits: int) -> float:
    """MSE-optimal uniform threshold step for a unit Gaussian input."""
    if bits == 1:
        return 0.0  # single interior threshold at 0; no step to choose
    res = optimize.minimize_scalar(
        lambda d: _unit_distortion(bits, d),
        bounds=(1e-4, 4.0),
        method="bounded",
        options={"xatol": 1e-10},
    )
    return float(res.x)


@functools.lru_cache(maxsize=None)
def _unit_rho(bits: int) -> float:
    """Empirical normalized distortion of the unit-std design (Monte-Carlo)."""
    edges, levels = _unit_design(bits, _optimal_unit_step(bits))
    rng = seeded_rng(_RHO_SEED, bits)
    x = rng.standard_normal(_RHO_SAMPLES)
    q = levels[np.searchsorted(edges[1:-1], x, side="left")]
    return float(np.mean((x - q) ** 2))


def design_quantizer(bits: int, input_std: float) -> QuantizerSpec:
    """B-bit uniform-threshold quantizer matched to a Gaussian input.

    Thresholds use the MSE-optimal uniform step for the given resolution;
    levels are the Gaussian conditional means of each bin, which keeps the
    unbounded end bins well-defined.  Everything scales linearly with
    input_std.
    """
    if not (1 <= bits <= 12):
        raise InvalidBits(f"bits must be in 1..12, got {bits}")
    if not input_std > 0:
        raise ValueError("input_std must be positive")
    edges, levels = _unit_design(bits, _optimal_unit_step(bits))
    return QuantizerSpec(
        bits=bits,
        thresholds=edges * input_std,
        levels=levels * input_std,
        input_std=float(input_std),
        rho=_unit_rho(bits),
        bypass=False,
    )


def quantizer_distortion(spec: QuantizerSpec) -> float:
    """Closed-form E (y - Q(y))^2 per dimension for matched Gaussian input."""
    if spec.bypass:
        return 0.0
    edges = spec.thresholds / spec.input_std
    levels = spec.levels / spec.input_std
    mass = interval_mass(edges[:-1], edges[1:])
    return float(spec.input_std**2 * (1.0 - np.sum(mass * levels**2)))


def _bin_index(parts: np.ndarray, spec: QuantizerSpec) -> np.ndarray:
    """Bin of each real value under the (r_{b-1}, r_b] convention."""
    return np.searchsorted(spec.thresholds[1:-1], parts, side="left")


def quantize(y, spec: QuantizerSpec) -> np.ndarray:
    """Apply the two-dimensional quantizer; identity when bypassed."""
    arr = np.asarray(y, dtype=complex)
    if spec.bypass:
        return arr.copy()
    re = spec.levels[_bin_index(arr.real, spec)]
    im = spec.levels[_bin_index(arr.imag, spec)]
    return re + 1j * im


def level_index(parts, spec: QuantizerSpec) -> np.ndarray:
    """Index of the level equal to each value; UnknownLevel when none matches."""
    parts = np.atleast_1d(np.asarray(parts, dtype=float))
    pos = np.clip(np.searchsorted(spec.levels, parts), 0, spec.levels.size - 1)
    below = np.clip(pos - 1, 0, spec.levels.size - 1)
    pick = np.where(
        np.abs(spec.levels[pos] - parts) <= np.abs(spec.levels[below] - parts),
        pos,
        below,
    )
    tol = _LEVEL_MATCH_TOL * np.maximum(1.0, np.abs(spec.levels[pick]))
    if np.any(np.abs(spec.levels[pick] - parts) > tol):
        bad = parts[np.abs(spec.levels[pick] - parts) > tol][0]
        raise UnknownLevel(f"{bad} is not an output level of the {spec.bits}-bit quantizer")
    return pick


def level_bounds(parts, spec: QuantizerSpec):
    """Lower/upper bin edges for quantizer output values."""
    idx = level_index(parts, spec)
    return spec.thresholds[idx], spec.thresholds[idx + 1]


def likelihood_bin(q_part: float, z_part: float, spec: QuantizerSpec, noise_var: float) -> float:
    """P(quantizer emits q_part | noiseless real part z_part).

    The per-dimension noise has variance noise_var/2, so this is the Gaussian
    mass of the bin of q_part around z_part.
    """
    lo, hi = level_bounds(q_part, spec)
    scale = math.sqrt(noise_var / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        mass = interval_mass((lo - z_part) / scale, (hi - z_part) / scale)
    return float(mass[0]) if np.ndim(q_part) == 0 else mass


# ---------------------------------------------------------------------------
# channel and power profile
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ChannelRealization:
    """Multipath channel: time-domain taps (support <= n_taps) and the
    unitary-DFT frequency response."""

    taps: np.ndarray
    freq_response: np.ndarray
    n_taps: int
    size: int


def draw_channel(n: int, n_taps: int, rng: np.random.Generator) -> ChannelRealization:
    """i.i.d. CN(0, N/L) taps on the first L delays; unit average subchannel gain."""
    if n_taps > n:
        raise ValueError("more taps than subchannels")
    taps = np.zeros(n, dtype=complex)
    taps[:n_taps] = complex_normal(rng, n_taps, var=n / n_taps)
    return ChannelRealization(
        taps=taps,
        freq_response=dft(taps),
        n_taps=n_taps,
        size=n,
    )


@dataclass(frozen=True)
class PowerProfile:
    """Per-subchannel transmit powers; the budget is sum p_j = N."""

    powers: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "powers", np.asarray(self.powers, dtype=float))
        if np.any(self.powers < 0):
            raise ValueError("powers must be nonnegative")

    def effective_response(self, ch: ChannelRealization) -> np.ndarray:
        """Amplitude-weighted response sqrt(p_j) * h_j."""
        return np.sqrt(self.powers) * np.asarray(ch.freq_response)


# ---------------------------------------------------------------------------
# forward model
# ---------------------------------------------------------------------------

def forward(s, ch: ChannelRealization, pw: PowerProfile, noise_var: float,
            spec: QuantizerSpec, rng: np.random.Generator):
    """Run the transmit/receive chain; returns (quantized, unquantized) blocks."""
    s = np.asarray(s, dtype=complex)
    h_eff = pw.effective_response(ch)
    if not (s.size == h_eff.size == ch.size):
        raise LengthMismatch("symbol block, power profile and channel sizes disagree")
    y = idft(h_eff * s) + complex_normal(rng, ch.size, var=noise_var)
    return quantize(y, spec), y


# ---------------------------------------------------------------------------
# golden-file serialization
# ---------------------------------------------------------------------------

def _complex_pairs(values) -> list:
    arr = np.asarray(values, dtype=complex)
    return [[float(v.real), float(v.imag)] for v in arr]


def serialize_channel(ch: ChannelRealization) -> str:
    return json.dumps({
        "taps": _complex_pairs(ch.taps),
        "freq_response": _complex_pairs(ch.freq_response),
        "n_taps": ch.n_taps,
        "size": ch.size,
    })


def deserialize_channel(text: str) -> ChannelRealization:
    d = json.loads(text)
    taps = np.array([complex(re, im) for re, im in d["taps"]])
    freq = np.array([complex(re, im) for re, im in d["freq_response"]])
    return ChannelRealization(taps=taps, freq_response=freq,
                              n_taps=int(d["n_taps"]), size=int(d["size"]))


def serialize_quantizer(spec: QuantizerSpec) -> str:
    return json.dumps({
        "bits": spec.bits,
        "thresholds": list(map(float, spec.thresholds)),
        "levels": list(map(float, spec.levels)),
        "input_std": spec.input_std,
        "rho": spec.rho,
        "bypass": spec.bypass,
    })


def deserialize_quantizer(text: str) -> QuantizerSpec:
    d = json.loads(text)
    return QuantizerSpec(
        bits=int(d["bits"]),
        thresholds=np.asarray(d["thresholds"], dtype=float),
        levels=np.asarray(d["levels"], dtype=float),
        input_std=float(d["input_std"]),
        rho=float(d["rho"]),
        bypass=bool(d["bypass"]),
    )
