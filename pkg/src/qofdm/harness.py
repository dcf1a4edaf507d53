"""Experiment orchestration: configs, Monte-Carlo sweeps, CSV persistence.

One trial is one channel realization.  Every detector configured for a
trial sees the identical (channel, symbols, noise, quantizer) tuple, so
detector comparisons are paired.  A run writes two files:

* ``trials_<tag>.csv`` -- one row per (trial, detector) with the raw
  symbol error rate, iteration count, channel-estimation MSE (when
  applicable) and wall time;
* ``agg_<tag>.csv`` -- one row per (SNR, detector) with the mean SER, a
  95% binomial (Wilson) confidence interval, and the scalar-recursion
  prediction for the turbo detector.

Interrupted runs can be resumed: trials already present in the per-trial
file are skipped and the aggregate is rebuilt from the full file.
"""

import csv
import hashlib
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import baselines as bl
from . import channel_estimation as ce
from . import gturbo as gt
from . import numerics as nm
from . import power_allocation as pw
from . import signal_model as sm
from . import state_evolution as se

TRIALS_SCHEMA = "qofdm.trials.v1"
AGG_SCHEMA = "qofdm.agg.v1"
TRIALS_COLUMNS = ("trial", "seed", "snr_db", "detector", "ser", "iters",
                  "chan_mse", "wall_ms")
AGG_COLUMNS = ("snr_db", "detector", "mean_ser", "ci_lo", "ci_hi",
               "se_pred_ser")

DETECTOR_CHOICES = ("gturbo", "gamp", "conventional", "aqnm")
PA_CHOICES = ("espa", "amser")
CSI_CHOICES = ("perfect", "estimated")
CONSTELLATION_NAMES = {"4": 4, "16": 16, "qpsk": 4, "16qam": 16}

# label used for the matched true-channel reference rows in estimated-CSI runs
CSI_REFERENCE = "gturbo-csi"

Z_95 = 1.959963984540054


class ConfigError(ValueError):
    """A configuration field is missing, malformed, or out of range."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Plain-value description of one Monte-Carlo run (picklable, diffable)."""

    n: int = 512
    taps: int = 4
    bits: object = 3          # 1..12, or None for the unquantized front end
    snr_db: tuple = (15.0,)
    constellation: int = 4
    detectors: tuple = ("gturbo",)
    pa_scheme: str = "espa"
    csi_mode: str = "perfect"
    pilot_spacing: int = 16
    pilot_time: int = 1
    trials: int = 200
    base_seed: int = 1
    t_max: int = 10
    tol: float = 1e-6
    damping: float = 1.0
    workers: int = 0          # 0 = QOFDM_WORKERS env var, else 1
    out_dir: str = "."
    tag: str = "run"

    def validate(self):
        def bad(name, msg):
            raise ConfigError(f"{name}: {msg}")

        if self.n < 2 or self.n & (self.n - 1):
            bad("n", f"must be a power of two >= 2 (got {self.n})")
        if not 1 <= self.taps <= self.n:
            bad("taps", f"must be in [1, n] (got {self.taps})")
        if self.bits is not None and not 1 <= int(self.bits) <= 12:
            bad("bits", f"must be 1..12 or bypass (got {self.bits})")
        if len(self.snr_db) == 0:
            bad("snr_db", "grid must be nonempty")
        if not all(math.isfinite(v) for v in self.snr_db):
            bad("snr_db", "grid values must be finite")
        if self.constellation not in (4, 16):
            bad("constellation", f"must be 4 or 16 (got {self.constellation})")
        if len(self.detectors) == 0:
            bad("detectors", "need at least one detector")
        for d in self.detectors:
            if d not in DETECTOR_CHOICES:
                bad("detectors", f"unknown detector {d!r}")
        if len(set(self.detectors)) != len(self.detectors):
            bad("detectors", "duplicate entries")
        if self.pa_scheme not in PA_CHOICES:
            bad("pa_scheme", f"must be one of {PA_CHOICES} (got {self.pa_scheme!r})")
        if self.csi_mode not in CSI_CHOICES:
            bad("csi_mode", f"must be one of {CSI_CHOICES} (got {self.csi_mode!r})")
        if self.csi_mode == "estimated":
            if self.detectors != ("gturbo",):
                bad("detectors", "estimated CSI supports the turbo detector only")
            if self.pa_scheme != "espa":
                bad("pa_scheme", "estimated CSI needs a flat profile (the "
                                 "refinement step assumes a short impulse response)")
            if self.pilot_spacing < 1 or self.n % self.pilot_spacing:
                bad("pilot_spacing", f"must divide n (got {self.pilot_spacing})")
            if self.pilot_time < 1:
                bad("pilot_time", f"must be >= 1 (got {self.pilot_time})")
        if self.trials < 1:
            bad("trials", f"must be >= 1 (got {self.trials})")
        if self.base_seed < 0:
            bad("base_seed", f"must be >= 0 (got {self.base_seed})")
        if self.t_max < 1:
            bad("t_max", f"must be >= 1 (got {self.t_max})")
        if not 0 < self.tol:
            bad("tol", f"must be positive (got {self.tol})")
        if not 0 < self.damping <= 1:
            bad("damping", f"must be in (0, 1] (got {self.damping})")
        if self.workers < 0:
            bad("workers", f"must be >= 0 (got {self.workers})")
        if not self.tag or os.sep in self.tag:
            bad("tag", f"must be a bare file-name fragment (got {self.tag!r})")
        return self


def parse_config_text(text):
    """Flat ``key = value`` lines; ``#`` comments; ``[section]`` markers
    are allowed for readability but do not namespace the keys."""
    mapping = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in mapping:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        mapping[key] = value
    return mapping


def _parse_bits(value):
    if value.strip().lower() in ("bypass", "none", "inf"):
        return None
    return int(value)


def _parse_floats(value):
    return tuple(float(v) for v in value.replace(",", " ").split())


def _parse_names(value):
    return tuple(v.strip() for v in value.split(",") if v.strip())


def _parse_constellation(value):
    key = value.strip().lower()
    if key not in CONSTELLATION_NAMES:
        raise ConfigError(f"constellation: unknown name {value!r}")
    return CONSTELLATION_NAMES[key]


_FIELD_PARSERS = {
    "n": int,
    "taps": int,
    "bits": _parse_bits,
    "snr_db": _parse_floats,
    "constellation": _parse_constellation,
    "detectors": _parse_names,
    "pa_scheme": str,
    "csi_mode": str,
    "pilot_spacing": int,
    "pilot_time": int,
    "trials": int,
    "base_seed": int,
    "t_max": int,
    "tol": float,
    "damping": float,
    "workers": int,
    "out_dir": str,
    "tag": str,
}


def config_from_mapping(mapping):
    """Build and validate an ExperimentConfig from string key/values."""
    values = {}
    for key, raw in mapping.items():
        if key not in _FIELD_PARSERS:
            raise ConfigError(f"unknown key {key!r}")
        try:
            values[key] = _FIELD_PARSERS[key](str(raw))
        except ConfigError:
            raise
        except (TypeError, ValueError):
            raise ConfigError(f"{key}: cannot parse {raw!r}") from None
    return ExperimentConfig(**values).validate()


def load_config(path, overrides=None):
    """Read a config file, apply string-valued overrides, validate."""
    try:
        with open(path, encoding="utf-8") as fh:
            mapping = parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"config file {path}: {exc.strerror or exc}") from None
    if overrides:
        mapping.update(overrides)
    return config_from_mapping(mapping)


# ---------------------------------------------------------------------------
# one trial
# ---------------------------------------------------------------------------

@dataclass
class TrialRecord:
    """Everything measured on one channel realization."""

    trial: int
    seed: int
    snr_db: float
    digest: str
    ser: dict = field(default_factory=dict)         # detector -> SER
    iterations: dict = field(default_factory=dict)  # detector -> count
    wall_ms: dict = field(default_factory=dict)     # detector -> wall time
    chan_mse: float = math.nan
    se_pred_ser: float = math.nan

    def rows(self):
        """Flatten to trials-CSV rows, one per detector."""
        for det in self.ser:
            mse = self.chan_mse if det == "gturbo" else math.nan
            yield (self.trial, self.seed, _fmt_snr(self.snr_db), det,
                   _fmt(self.ser[det]), self.iterations[det],
                   _fmt(mse), _fmt(self.wall_ms[det]))


def trial_substream(cfg, snr_index, trial):
    """Independent RNG substream index for one (SNR point, trial) cell."""
    return snr_index * cfg.trials + trial


def _noise_var(snr_db):
    # SNR is 1/noise_var at unit average symbol energy
    return 10.0 ** (-snr_db / 10.0)


def _realization_digest(ch, s, y):
    m = hashlib.sha256()
    for a in (ch.taps, s, y):
        m.update(np.ascontiguousarray(a).tobytes())
    return m.hexdigest()[:16]


def _trial_setup(cfg, snr_index, trial):
    """Deterministic per-trial context: rng, channel, profile, quantizer."""
    noise_var = _noise_var(cfg.snr_db[snr_index])
    rng = nm.seeded_rng(cfg.base_seed, trial_substream(cfg, snr_index, trial))
    const = sm.make_qam(cfg.constellation)
    ch = sm.draw_channel(cfg.n, cfg.taps, rng)
    gains = np.abs(ch.freq_response) ** 2
    # the quantizer is designed once, from the flat-profile receive
    # statistic, and stays fixed while the allocator reshapes the spectrum
    rx_std = math.sqrt((float(np.mean(gains)) + noise_var) / 2.0)
    spec = (sm.bypass_quantizer() if cfg.bits is None
            else sm.design_quantizer(int(cfg.bits), rx_std))
    if cfg.pa_scheme == "amser":
        profile, pa_state = pw.amser_allocate(ch.freq_response, noise_var,
                                              spec, const)
    else:
        profile, pa_state = pw.espa(cfg.n), None
    return rng, const, ch, profile, pa_state, spec, noise_var


def se_prediction(cfg, snr_index, trial):
    """Scalar-recursion SER prediction for one trial's realization.

    Re-derives the channel from the trial's seed, so it can be evaluated
    without re-running (or having stored) the detector itself.
    """
    _, const, ch, profile, pa_state, spec, noise_var = \
        _trial_setup(cfg, snr_index, trial)
    h_eff = profile.effective_response(ch)
    if pa_state is not None:
        eta = pa_state.eta
    else:
        eta = se.se_fixed_point(h_eff, noise_var, spec, const).eta
    return se.predict_ser(eta, h_eff, const)


def run_trial(cfg, snr_index, trial):
    """Draw one realization and run every configured detector on it."""
    rng, const, ch, profile, pa_state, spec, noise_var = \
        _trial_setup(cfg, snr_index, trial)
    h_eff = profile.effective_response(ch)
    opts = gt.DetectorOptions(t_max=cfg.t_max, tol=cfg.tol, damping=cfg.damping)

    if cfg.csi_mode == "estimated":
        return _run_estimated_trial(cfg, snr_index, trial, rng, const, ch,
                                    profile, spec, noise_var, opts)

    s = sm.draw_symbols(rng, cfg.n, const)
    q, y = sm.forward(s, ch, profile, noise_var, spec, rng)
    rec = TrialRecord(trial=trial,
                      seed=trial_substream(cfg, snr_index, trial),
                      snr_db=cfg.snr_db[snr_index],
                      digest=_realization_digest(ch, s, y))
    for det in cfg.detectors:
        start = time.perf_counter()
        if det == "gturbo":
            rep = gt.detect(q, h_eff, noise_var, spec, const, opts)
            s_hat, iters = rep.s_hat, rep.iterations_used
        elif det == "gamp":
            rep = bl.gamp_detect(q, h_eff, noise_var, spec, const, opts)
            s_hat, iters = rep.s_hat, rep.iterations_used
        elif det == "conventional":
            s_hat, iters = bl.conventional_detect(q, h_eff, const), 1
        else:
            s_hat, iters = bl.aqnm_detect(q, h_eff, noise_var, spec, const), 1
        rec.wall_ms[det] = (time.perf_counter() - start) * 1e3
        rec.ser[det] = float(np.mean(s_hat != s))
        rec.iterations[det] = iters
    if "gturbo" in cfg.detectors:
        if pa_state is not None:
            eta = pa_state.eta
        else:
            eta = se.se_fixed_point(h_eff, noise_var, spec, const).eta
        rec.se_pred_ser = se.predict_ser(eta, h_eff, const)
    return rec


def _run_estimated_trial(cfg, snr_index, trial, rng, const, ch, profile,
                         spec, noise_var, opts):
    """Joint estimation/detection plus a matched true-channel reference.

    SER is counted on the data subchannels only; the reference rows
    (label ``gturbo-csi``) run the same detector with the true response
    on the identical received block.
    """
    pattern = ce.comb_pattern(cfg.n, cfg.pilot_spacing, cfg.pilot_time)
    data = sm.draw_symbols(rng, pattern.data_indices.size, const)
    s = ce.place_symbols(pattern, data)
    q, y = sm.forward(s, ch, profile, noise_var, spec, rng)
    d = pattern.data_indices
    rec = TrialRecord(trial=trial,
                      seed=trial_substream(cfg, snr_index, trial),
                      snr_db=cfg.snr_db[snr_index],
                      digest=_realization_digest(ch, s, y))

    start = time.perf_counter()
    est = ce.estimate_and_detect(q, pattern, noise_var, spec, const,
                                 cfg.taps, opts, true_channel=ch.freq_response)
    rec.wall_ms["gturbo"] = (time.perf_counter() - start) * 1e3
    rec.ser["gturbo"] = float(np.mean(est.s_hat[d] != s[d]))
    rec.iterations["gturbo"] = est.iterations_used
    rec.chan_mse = float(est.mse_trace[-1])

    start = time.perf_counter()
    ref = gt.detect(q, profile.effective_response(ch), noise_var, spec,
                    const, opts)
    rec.wall_ms[CSI_REFERENCE] = (time.perf_counter() - start) * 1e3
    rec.ser[CSI_REFERENCE] = float(np.mean(ref.s_hat[d] != s[d]))
    rec.iterations[CSI_REFERENCE] = ref.iterations_used
    return rec


# ---------------------------------------------------------------------------
# CSV plumbing
# ---------------------------------------------------------------------------

def _fmt(x):
    x = float(x)
    return "" if math.isnan(x) else format(x, ".12g")


def _fmt_snr(snr_db):
    return format(float(snr_db), "g")


def trials_path(cfg):
    return os.path.join(cfg.out_dir, f"trials_{cfg.tag}.csv")


def agg_path(cfg):
    return os.path.join(cfg.out_dir, f"agg_{cfg.tag}.csv")


def read_csv(path, schema):
    """Rows of a schema-tagged CSV; raises ConfigError on a tag mismatch."""
    with open(path, newline="", encoding="utf-8") as fh:
        first = fh.readline().strip()
        if first != f"# schema={schema}":
            raise ConfigError(f"{path}: expected '# schema={schema}', found {first!r}")
        return list(csv.DictReader(fh))


def detector_labels(cfg):
    if cfg.csi_mode == "estimated":
        return ("gturbo", CSI_REFERENCE)
    return tuple(cfg.detectors)


def symbols_per_trial(cfg):
    """Number of symbol decisions that count toward the SER denominator."""
    if cfg.csi_mode == "estimated":
        return cfg.n - cfg.n // cfg.pilot_spacing
    return cfg.n


# ---------------------------------------------------------------------------
# aggregation
# ---------------------------------------------------------------------------

def wilson_interval(errors, observations, z=Z_95):
    """95% score interval for a binomial proportion."""
    if observations <= 0:
        return math.nan, math.nan
    p = errors / observations
    denom = 1.0 + z * z / observations
    center = (p + z * z / (2 * observations)) / denom
    half = z * math.sqrt(p * (1 - p) / observations
                         + z * z / (4 * observations ** 2)) / denom
    # the score interval hits the boundary exactly for boundary counts
    lo = 0.0 if errors == 0 else max(0.0, center - half)
    hi = 1.0 if errors == observations else min(1.0, center + half)
    return lo, hi


def aggregate(cfg, rows):
    """Fold trial rows into one row per (SNR, detector).

    The mean SER is the plain average of the per-trial SERs; the
    confidence interval treats the pooled symbol decisions as one
    binomial sample.  The recursion prediction is recomputed from each
    trial's seed and averaged, so resumed runs aggregate correctly.
    """
    n_sym = symbols_per_trial(cfg)
    out = []
    for snr_index, snr_db in enumerate(cfg.snr_db):
        key = _fmt_snr(snr_db)
        at_snr = [r for r in rows if r["snr_db"] == key]
        pred = math.nan
        if "gturbo" in detector_labels(cfg):
            done = sorted({int(r["trial"]) for r in at_snr})
            if done:
                pred = float(np.mean([se_prediction(cfg, snr_index, t)
                                      for t in done]))
        for det in detector_labels(cfg):
            sers = [float(r["ser"]) for r in at_snr if r["detector"] == det]
            if not sers:
                continue
            errors = int(round(sum(sers) * n_sym))
            lo, hi = wilson_interval(errors, n_sym * len(sers))
            out.append({
                "snr_db": snr_db,
                "detector": det,
                "mean_ser": float(np.mean(sers)),
                "ci_lo": lo,
                "ci_hi": hi,
                "se_pred_ser": pred if det == "gturbo" else math.nan,
            })
    return out


def _write_aggregate(cfg, agg_rows):
    with open(agg_path(cfg), "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# schema={AGG_SCHEMA}\n")
        writer = csv.writer(fh)
        writer.writerow(AGG_COLUMNS)
        for row in agg_rows:
            writer.writerow((_fmt_snr(row["snr_db"]), row["detector"],
                             _fmt(row["mean_ser"]), _fmt(row["ci_lo"]),
                             _fmt(row["ci_hi"]), _fmt(row["se_pred_ser"])))


# ---------------------------------------------------------------------------
# the sweep
# ---------------------------------------------------------------------------

def _worker_count(cfg):
    if cfg.workers:
        return cfg.workers
    return int(os.environ.get("QOFDM_WORKERS", "1"))


def run_experiment(cfg):
    """Run (or resume) the configured sweep; returns the aggregate rows.

    Trials already recorded in ``trials_<tag>.csv`` are skipped.  Each
    finished trial is flushed before the next starts, so an interrupted
    run loses at most the trial in flight.
    """
    cfg.validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = trials_path(cfg)
    completed = set()
    if os.path.exists(path):
        for row in read_csv(path, TRIALS_SCHEMA):
            completed.add((row["snr_db"], int(row["trial"])))
    pending = [(si, t)
               for si in range(len(cfg.snr_db))
               for t in range(cfg.trials)
               if (_fmt_snr(cfg.snr_db[si]), t) not in completed]

    fresh = not os.path.exists(path)
    workers = _worker_count(cfg)
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if fresh:
            fh.write(f"# schema={TRIALS_SCHEMA}\n")
            writer.writerow(TRIALS_COLUMNS)
            fh.flush()

        def emit(record):
            writer.writerows(record.rows())
            fh.flush()

        if workers > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(run_trial, cfg, si, t)
                           for si, t in pending]
                for fut in futures:   # submission order keeps the file stable
                    emit(fut.result())
        else:
            for si, t in pending:
                emit(run_trial(cfg, si, t))

    agg_rows = aggregate(cfg, read_csv(path, TRIALS_SCHEMA))
    _write_aggregate(cfg, agg_rows)
    return agg_rows
