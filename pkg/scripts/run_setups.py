"""Run the three perturbation setups, write logs and summaries, and plot state norms.

    python scripts/run_setups.py --out results --trials 100

Plots need the ``plots`` extra (matplotlib); pass ``--no-plots`` to skip them.
"""
import argparse
import time
from pathlib import Path

import numpy as np

from cartdmp.cli import format_summary
from cartdmp.io import write_log
from cartdmp.presets import RunConfig, build
from cartdmp.sim import NORM_NAMES, run_batch, summarize


def plot_norms(log, path, title):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    norms = log.norms
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    for name in NORM_NAMES:
        top.semilogy(log.t, np.maximum(norms[name], 1e-16), label=name, lw=1)
    top.semilogy(log.t, log.x, "k--", label="x", lw=1)
    top.set_ylabel("state norm")
    top.legend(ncol=5, fontsize=7)
    bottom.plot(log.t, log.tau_a / log.tau)
    bottom.set_ylabel("tau_a / tau")
    bottom.set_xlabel("t [s]")
    for p in log.perturbations:
        for ax in (top, bottom):
            ax.axvspan(p.t_start, p.end + 1e-3, color="0.85")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--trials", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--no-plots", action="store_true")
    args = ap.parse_args()

    for preset in ("setup1", "setup2", "setup3"):
        cfg = RunConfig(preset=preset, trials=args.trials, seed=args.seed)
        model, gains, sets, c0 = build(cfg)
        start = time.perf_counter()
        logs = run_batch(model, gains, sets, cfg.T, cfg.dt, c0)
        elapsed = time.perf_counter() - start
        out = Path(args.out) / preset
        out.mkdir(parents=True, exist_ok=True)
        for i, log in enumerate(logs):
            write_log(out / f"trial_{i:03d}.csv", log)
        text = format_summary(cfg, [summarize(log) for log in logs])
        (out / "summary.txt").write_text(text + "\n")
        print(text.splitlines()[-1] + f" ({preset}, {elapsed:.2f} s simulated batch)")
        if not args.no_plots:
            plot_norms(logs[0], out / "trial_000.png", f"{preset}, trial 0")


if __name__ == "__main__":
    main()
