"""Command-line front end: ``demo-gen``, ``train``, ``run``, ``report``.

Exit codes: 0 success, 2 usage error, 3 training failure, 4 runtime failure
(an episode entered the excluded orientation region).
"""
import argparse
import csv
import os
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import quaternion as quat
from .dmp import forcing_term, rollout, stack_states
from .io import read_demo, read_log, write_demo, write_log, write_model
from .learning import InvalidAngle, synth_demo, train
from .presets import PRESETS, RunConfig, build, load_config
from .sim import NORM_NAMES, run_batch, summarize

OUT_ENV = "CARTDMP_OUT_DIR"
EXIT_OK, EXIT_USAGE, EXIT_TRAIN, EXIT_RUNTIME = 0, 2, 3, 4


def _out_dir(args, default="."):
    path = Path(args.out or os.environ.get(OUT_ENV) or default)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_demo_gen(args):
    try:
        demo = synth_demo(args.kind, args.duration, y0=args.y0, g=args.goal, q0=args.q0,
                          q_g=args.qg, axis=args.axis, angle=args.angle, rate=args.rate)
    except (InvalidAngle, ValueError) as err:
        print(f"demo-gen: {err}", file=sys.stderr)
        return EXIT_USAGE
    path = Path(args.file) if args.file else _out_dir(args) / f"demo_{args.kind}.csv"
    write_demo(path, demo)
    angle = np.linalg.norm(quat.quat_diff(demo.q[-1], demo.q[0]))
    print(f"wrote {path}: {len(demo)} samples over {demo.duration:g} s, "
          f"rotation {angle:.6f} rad")
    return EXIT_OK


def fit_report(model, targets, demo):
    """RMS forcing residual per dimension and rollout RMS pose errors."""
    reproduced = forcing_term(model, targets.x)
    residual = np.sqrt(np.mean((targets.f_target - reproduced) ** 2, axis=0))
    dt = demo.t[1] - demo.t[0]
    _, states = rollout(model, demo.duration, dt)
    s = stack_states(states)
    n = min(len(demo), len(s.x))
    pos = np.sqrt(np.mean(np.sum((s.y_c[:n] - demo.y[:n]) ** 2, axis=1)))
    rot = np.sqrt(np.mean(np.sum(quat.quat_diff(s.q_c[:n], demo.q[:n]) ** 2, axis=1)))
    return residual, pos, rot


def cmd_train(args):
    try:
        demo = read_demo(args.demo)
    except (OSError, ValueError) as err:
        print(f"train: invalid demonstration: {err}", file=sys.stderr)
        return EXIT_TRAIN
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            model, targets = train(demo, n_basis=args.n_basis, alpha_z=args.alpha_z,
                                   alpha_x=args.alpha_x, cutoff=args.cutoff)
        except (quat.DomainError, ValueError) as err:
            print(f"train: {err}", file=sys.stderr)
            return EXIT_TRAIN
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    path = Path(args.file) if args.file else _out_dir(args) / "model.txt"
    write_model(path, model)

    residual, pos, rot = fit_report(model, targets, demo)
    print(f"wrote {path} (n_basis={model.n_basis}, tau={model.tau:g} s)")
    print("forcing residual RMS per dim: " + " ".join(f"{r:.6g}" for r in residual))
    print(f"rollout RMS position error: {pos:.6g} m")
    print(f"rollout RMS orientation error: {rot:.6g} rad")
    skipped = np.flatnonzero(model.degenerate).tolist()
    if skipped:
        print(f"skipped degenerate dimensions: {skipped}")
    if len(skipped) == model.degenerate.size:
        print("warning: demonstration does not move; all weights are zero", file=sys.stderr)
    return EXIT_OK


def _run_chunk(model, gains, sets, T, dt, coupled0, first, out_dir):
    logs = run_batch(model, gains, sets, T, dt, coupled0)
    summaries = []
    for i, ep in enumerate(logs, first):
        write_log(out_dir / f"trial_{i:03d}.csv", ep)
        summaries.append(summarize(ep))
    return summaries


def format_summary(cfg, summaries):
    lines = [f"preset={cfg.preset} trials={len(summaries)} T={cfg.T:g} dt={cfg.dt:g} "
             f"seed={cfg.seed} perturb={cfg.perturb}"]
    for i, s in enumerate(summaries):
        worst = max(s["final"].items(), key=lambda kv: kv[1])
        lines.append(
            f"trial {i:03d}: converged={s['converged']} goal_reached={s['goal_reached']} "
            f"failed_t={s['failed_t']} max_final={worst[0]}:{worst[1]:.3e} "
            f"decay_rate={s['decay_rate']:.4f}/s r2={s['decay_r2']:.4f} "
            f"max_tau_ratio={s['max_tau_ratio']:.4f} initial_dcg={s['initial_dcg']:.6f} "
            f"equator_crossed={s['equator_crossed']} "
            f"min_dot={s['min_successive_dot']:.8f}")
    n_conv = sum(s["converged"] for s in summaries)
    lines.append(f"converged {n_conv}/{len(summaries)}; "
                 f"max tau_a/tau {max(s['max_tau_ratio'] for s in summaries):.4f}")
    return "\n".join(lines)


def cmd_run(args):
    overrides = dict(preset=args.preset, model=args.model, demo=args.demo, trials=args.trials,
                     seed=args.seed, T=args.T, dt=args.dt, k_v=args.k_v, k_c=args.k_c,
                     alpha_e=args.alpha_e, out=args.out)
    if args.no_perturb:
        overrides["perturb"] = False
    try:
        if args.config:
            cfg = load_config(args.config, **overrides)
        else:
            cfg = RunConfig(**{k: v for k, v in overrides.items() if v is not None})
        for path in (cfg.model, cfg.demo):
            if path is not None and not Path(path).exists():
                raise ValueError(f"file not found: {path}")
        model, gains, sets, coupled0 = build(cfg)
    except (OSError, ValueError) as err:
        print(f"run: {err}", file=sys.stderr)
        return EXIT_USAGE

    out_dir = Path(cfg.out or os.environ.get(OUT_ENV) or f"runs/{cfg.preset}")
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = max(1, min(args.jobs, len(sets)))
    bounds = np.linspace(0, len(sets), jobs + 1).astype(int)
    chunks = [(a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    if jobs == 1:
        summaries = _run_chunk(model, gains, sets, cfg.T, cfg.dt, coupled0, 0, out_dir)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_chunk, model, gains, sets[a:b], cfg.T, cfg.dt,
                                   coupled0, a, out_dir) for a, b in chunks]
            summaries = [s for f in futures for s in f.result()]

    text = format_summary(cfg, summaries)
    (out_dir / "summary.txt").write_text(text + "\n")
    print(text)
    if any(s["failed_t"] is not None for s in summaries):
        print("run: an episode entered the excluded orientation region", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _collect_logs(paths):
    found = []
    for p in map(Path, paths):
        if p.is_dir():
            found += sorted(p.glob("trial_*.csv"))
        elif p.exists():
            found.append(p)
    return found


def cmd_report(args):
    files = _collect_logs(args.logs)
    if not files:
        print("report: no episode logs found", file=sys.stderr)
        return EXIT_USAGE
    out_dir = _out_dir(args)
    rows = []
    long_path = out_dir / "norms_long.csv"
    with open(long_path, "w", newline="") as fh:
        long_writer = csv.writer(fh)
        long_writer.writerow(["trial", "t", "state", "norm"])
        for path in files:
            ep = read_log(path)
            s = summarize(ep, tol=args.tol)
            row = {"trial": path.stem, "converged": s["converged"],
                   "goal_reached": s["goal_reached"], "failed": s["failed_t"] is not None,
                   "decay_rate": s["decay_rate"], "decay_r2": s["decay_r2"],
                   "max_tau_ratio": s["max_tau_ratio"], "initial_dcg": s["initial_dcg"],
                   "equator_crossed": s["equator_crossed"]}
            row.update({f"final_{k}": v for k, v in s["final"].items()})
            rows.append(row)
            norms = ep.norms
            for k in range(0, len(ep), args.stride):
                for name in ("x",) + NORM_NAMES:
                    long_writer.writerow([path.stem, repr(float(ep.t[k])), name,
                                          repr(float(norms[name][k]))])

    table_path = out_dir / "report_table.csv"
    with open(table_path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)

    n_conv = sum(r["converged"] for r in rows)
    n_fail = sum(r["failed"] for r in rows)
    numeric = ["decay_rate", "decay_r2", "max_tau_ratio", "initial_dcg"]
    agg = {"n_trials": len(rows), "n_converged": n_conv,
           "n_not_converged": len(rows) - n_conv, "n_failed": n_fail}
    agg.update({f"mean_{k}": float(np.nanmean([r[k] for r in rows])) for k in numeric})
    agg_path = out_dir / "report_aggregate.csv"
    with open(agg_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(agg))
        writer.writerow(list(agg.values()))
    print(f"{len(rows)} logs: {n_conv} converged, {len(rows) - n_conv} not converged, "
          f"{n_fail} failed")
    for k in numeric:
        print(f"mean {k}: {agg[f'mean_{k}']:.6g}")
    print(f"wrote {table_path}, {agg_path}, {long_path}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="cartdmp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("demo-gen", help="write a synthetic demonstration CSV")
    p.add_argument("--kind", required=True, choices=["reach", "handover_gt_pi"])
    p.add_argument("--duration", type=float, default=4.0)
    p.add_argument("--rate", type=float, default=250.0)
    p.add_argument("--angle", type=float, default=None, help="rotation angle in rad")
    p.add_argument("--axis", type=float, nargs=3, default=(0.0, 0.0, 1.0))
    p.add_argument("--y0", type=float, nargs=3, default=(0.0, 0.0, 0.0))
    p.add_argument("--goal", type=float, nargs=3, default=(0.3, 0.2, 0.1))
    p.add_argument("--q0", type=float, nargs=4, default=(1.0, 0.0, 0.0, 0.0))
    p.add_argument("--qg", type=float, nargs=4, default=None)
    p.add_argument("-o", "--file", help="output file (default <out>/demo_<kind>.csv)")
    p.add_argument("--out", help=f"output directory (env {OUT_ENV})")
    p.set_defaults(func=cmd_demo_gen)

    p = sub.add_parser("train", help="fit a DMP model to a demonstration")
    p.add_argument("demo")
    p.add_argument("--n-basis", type=int, default=25)
    p.add_argument("--alpha-z", type=float, default=25.0)
    p.add_argument("--alpha-x", type=float, default=1.0)
    p.add_argument("--cutoff", type=float, default=None,
                   help="low-pass cutoff in Hz for derivatives of noisy demos")
    p.add_argument("-o", "--file", help="model file (default <out>/model.txt)")
    p.add_argument("--out", help=f"output directory (env {OUT_ENV})")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("run", help="run closed-loop episodes of a preset")
    p.add_argument("--preset", choices=PRESETS, default=None)
    p.add_argument("--config", help="key-value config file")
    p.add_argument("--model")
    p.add_argument("--demo")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--T", type=float, help="horizon in s")
    p.add_argument("--dt", type=float)
    p.add_argument("--k-v", type=float)
    p.add_argument("--k-c", type=float)
    p.add_argument("--alpha-e", type=float)
    p.add_argument("--no-perturb", action="store_true")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", help=f"output directory (env {OUT_ENV}, default runs/<preset>)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="aggregate episode logs")
    p.add_argument("logs", nargs="*", help="log files or run directories")
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--stride", type=int, default=1, help="row stride of the long-format CSV")
    p.add_argument("--out", help=f"output directory (env {OUT_ENV})")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
