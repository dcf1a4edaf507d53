"""Simulation laboratory for OFDM receivers behind few-bit ADCs.

Layers, bottom up: numerics (stable special functions, quadrature, unitary
FFT, seeded rngs), signal_model (constellations, quantizers, channels, the
forward model), gturbo (iterative two-module detector), state_evolution
(deterministic performance recursion + analytical SER + saddle-point
cross-check), power_allocation (approximate min-SER water-filling),
channel_estimation (comb-pilot joint estimation/detection), baselines
(one-tap, message-passing, and additive-noise-model detectors), harness
(Monte-Carlo experiment runner) and cli.
"""

__version__ = "0.1.0"
