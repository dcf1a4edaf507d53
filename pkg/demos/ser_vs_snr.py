"""Small SER-vs-SNR sweep through the experiment harness.

Runs a reduced sweep (few trials, short blocks) comparing the iterative
detector against the baselines, writes the trials/aggregate CSVs under
demos/out/, and prints the aggregate table.  With matplotlib installed
it also saves a log-scale SER plot.
"""

import os

from qofdm import harness as hz

OUT_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "out")


def main():
    # 16QAM at 3 bits: coarse enough to quantize hard, fine enough that
    # the four detectors separate visibly.
    cfg = hz.ExperimentConfig(
        n=256,
        taps=4,
        bits=3,
        snr_db=(10.0, 15.0, 20.0, 25.0),
        constellation=16,
        detectors=("gturbo", "gamp", "conventional", "aqnm"),
        trials=20,
        base_seed=11,
        out_dir=OUT_DIR,
        tag="demo_sweep",
    )
    cfg.validate()
    agg = hz.run_experiment(cfg)

    print(f"trials file:    {hz.trials_path(cfg)}")
    print(f"aggregate file: {hz.agg_path(cfg)}")
    print()
    print(f"{'snr_db':>7} {'detector':>13} {'mean_ser':>11} "
          f"{'ci_lo':>11} {'ci_hi':>11} {'predicted':>11}")
    for row in agg:
        pred = row["se_pred_ser"]
        pred_s = f"{pred:.3e}" if pred == pred else "-"
        print(f"{row['snr_db']:>7g} {row['detector']:>13} "
              f"{row['mean_ser']:>11.3e} {row['ci_lo']:>11.3e} "
              f"{row['ci_hi']:>11.3e} {pred_s:>11}")

    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("\nmatplotlib not installed; skipping the plot")
        return

    fig, ax = plt.subplots(figsize=(6, 4))
    floor = 1.0 / (cfg.trials * cfg.n)
    for det in cfg.detectors:
        rows = [r for r in agg if r["detector"] == det]
        snr = [r["snr_db"] for r in rows]
        ser = [max(r["mean_ser"], floor) for r in rows]
        ax.semilogy(snr, ser, marker="o", label=det)
    ax.set_xlabel("SNR [dB]")
    ax.set_ylabel("symbol error rate")
    ax.set_title(f"{cfg.bits}-bit ADC, N={cfg.n}, {cfg.trials} trials")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    out_png = os.path.join(OUT_DIR, "ser_vs_snr.png")
    fig.savefig(out_png, dpi=150)
    print(f"\nplot saved to {out_png}")


if __name__ == "__main__":
    main()
