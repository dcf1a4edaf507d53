"""Command-line front end.

Subcommands::

    simulate        Monte-Carlo detector sweep driven by a config file / flags
    compare         paired sweep of all four detectors (SER-vs-SNR shape)
    chanest         pilot-based estimation experiment (estimated-CSI mode)
    se              scalar-recursion trace for one channel realization
    pa              min-SER power profile for one realization
    quantizer-info  designed thresholds, levels, and distortion factor

Exit codes: 0 on success, 2 on configuration problems, 3 when an
iteration fails to converge or an integrand degenerates.
"""

import argparse
import sys

import numpy as np

from . import gturbo as gt
from . import numerics as nm
from . import power_allocation as pw
from . import signal_model as sm
from . import state_evolution as se
from .harness import ConfigError, config_from_mapping, load_config, run_experiment

SE_SCHEMA = "qofdm.se.v1"
PA_SCHEMA = "qofdm.pa.v1"

_NUMERICAL_ERRORS = (se.NoConvergence, nm.NonFiniteIntegrand,
                     gt.DegenerateBin, pw.EmptyActiveSet, FloatingPointError)


def _add_experiment_flags(sp):
    sp.add_argument("--config", help="key = value config file")
    for flag in ("n", "taps", "bits", "snr-db", "constellation", "detectors",
                 "pa-scheme", "csi-mode", "pilot-spacing", "pilot-time",
                 "trials", "base-seed", "t-max", "tol", "damping", "workers",
                 "out-dir", "tag"):
        sp.add_argument(f"--{flag}", dest=flag.replace("-", "_"),
                        help=f"override the {flag.replace('-', '_')} field")


def _experiment_config(args, presets=None):
    overrides = {key: getattr(args, key)
                 for key in (f.replace("-", "_") for f in
                             ("n", "taps", "bits", "snr_db", "constellation",
                              "detectors", "pa_scheme", "csi_mode",
                              "pilot_spacing", "pilot_time", "trials",
                              "base_seed", "t_max", "tol", "damping",
                              "workers", "out_dir", "tag"))
                 if getattr(args, key) is not None}
    if args.config:
        return load_config(args.config, overrides)
    mapping = dict(presets or {})
    mapping.update(overrides)
    return config_from_mapping(mapping)


def _print_aggregate(agg_rows, out=None):
    out = out if out is not None else sys.stdout
    for row in agg_rows:
        pred = row["se_pred_ser"]
        tail = "" if np.isnan(pred) else f"  pred={pred:.4g}"
        print(f"snr={row['snr_db']:g} dB  {row['detector']:<12} "
              f"ser={row['mean_ser']:.4g} "
              f"[{row['ci_lo']:.4g}, {row['ci_hi']:.4g}]{tail}", file=out)


def _cmd_simulate(args):
    _print_aggregate(run_experiment(_experiment_config(args)))
    return 0


def _cmd_compare(args):
    presets = {"detectors": "gturbo,gamp,conventional,aqnm"}
    _print_aggregate(run_experiment(_experiment_config(args, presets)))
    return 0


def _cmd_chanest(args):
    presets = {"csi_mode": "estimated", "detectors": "gturbo"}
    _print_aggregate(run_experiment(_experiment_config(args, presets)))
    return 0


def _realization(args):
    rng = nm.seeded_rng(args.seed, 0)
    ch = sm.draw_channel(args.n, args.taps, rng)
    noise_var = 10.0 ** (-args.snr_db / 10.0)
    v_x = float(np.mean(np.abs(ch.freq_response) ** 2))
    spec = (sm.bypass_quantizer() if args.bits is None
            else sm.design_quantizer(args.bits, np.sqrt((v_x + noise_var) / 2)))
    return ch, noise_var, spec, sm.make_qam(args.constellation)


def _open_out(path):
    return open(path, "w", newline="", encoding="utf-8") if path else sys.stdout


def _cmd_se(args):
    ch, noise_var, spec, const = _realization(args)
    states = se.se_trace(ch.freq_response, noise_var, spec, const,
                         t_max=args.t_max, tol=args.tol)
    out = _open_out(args.out)
    try:
        out.write(f"# schema={SE_SCHEMA}\n")
        out.write("t,theta,eta,nu,ser_pred\n")
        for st in states:
            ser = se.predict_ser(st.eta, ch.freq_response, const)
            out.write(f"{st.iteration},{st.theta:.12g},{st.eta:.12g},"
                      f"{st.nu:.12g},{ser:.12g}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    if len(states) >= args.t_max:
        last, prev = states[-1].eta, states[-2].eta
        if abs(last - prev) > args.tol * prev:
            raise se.NoConvergence(
                f"recursion still moving after {args.t_max} iterations")
    return 0


def _cmd_pa(args):
    ch, noise_var, spec, const = _realization(args)
    profile, state = pw.amser_allocate(ch.freq_response, noise_var, spec,
                                       const, t_max=args.t_max)
    gains = np.abs(ch.freq_response) ** 2
    out = _open_out(args.out)
    try:
        out.write(f"# schema={PA_SCHEMA}\n")
        out.write("j,h2,p\n")
        for j in range(args.n):
            out.write(f"{j},{gains[j]:.12g},{profile.powers[j]:.12g}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    ser = se.predict_ser(state.eta, profile.effective_response(ch), const)
    print(f"eta={state.eta:.6g}  predicted_ser={ser:.4g}  "
          f"active={int(np.count_nonzero(profile.powers))}/{args.n}")
    return 0


def _cmd_quantizer_info(args):
    def fmt(xs):
        return " ".join(f"{x:.6g}" for x in xs)

    spec = sm.design_quantizer(args.bits, args.input_std)
    print(f"bits: {args.bits}")
    print(f"input_std: {args.input_std:g}")
    print(f"thresholds: {fmt(spec.thresholds[1:-1])}")
    print(f"levels: {fmt(spec.levels)}")
    print(f"rho: {spec.rho:.6g}")
    return 0


def _bits_or_bypass(value):
    if value.strip().lower() in ("bypass", "none", "inf"):
        return None
    return int(value)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qofdm",
        description="Simulation laboratory for OFDM receivers with few-bit ADCs.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, handler in (("simulate", _cmd_simulate),
                          ("compare", _cmd_compare),
                          ("chanest", _cmd_chanest)):
        sp = sub.add_parser(name)
        _add_experiment_flags(sp)
        sp.set_defaults(func=handler)

    for name, handler in (("se", _cmd_se), ("pa", _cmd_pa)):
        sp = sub.add_parser(name)
        sp.add_argument("--n", type=int, default=512)
        sp.add_argument("--taps", type=int, default=4)
        sp.add_argument("--bits", type=_bits_or_bypass, default=3)
        sp.add_argument("--snr-db", type=float, default=15.0)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--constellation", type=int, choices=(4, 16), default=4)
        sp.add_argument("--t-max", type=int, default=50 if name == "se" else 20)
        if name == "se":
            sp.add_argument("--tol", type=float, default=1e-10)
        sp.add_argument("--out", help="CSV path (default: stdout)")
        sp.set_defaults(func=handler)

    sp = sub.add_parser("quantizer-info")
    sp.add_argument("--bits", type=int, required=True)
    sp.add_argument("--input-std", type=float, default=1.0)
    sp.set_defaults(func=_cmd_quantizer_info)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, sm.InvalidBits) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
