"""File formats: demonstration CSV, model and config key-value files, episode logs.

Key-value files hold one ``key = value`` per line; ``#`` starts a comment,
arrays are whitespace separated, and repeated keys accumulate into a list.
Floats are written with ``repr`` so a write/read cycle is exact.
"""
import csv
import json
from pathlib import Path

import numpy as np

from .dmp import DmpModel
from .learning import Demonstration
from .sim import XI_BLOCKS, XI_SLICES, EpisodeLog, Perturbation

DEMO_HEADER = ["t", "y1", "y2", "y3", "qw", "qx", "qy", "qz"]
MODEL_FORMAT = "cartdmp-model 1"


def _fmt(values):
    return " ".join(repr(float(v)) for v in np.ravel(values))


def read_keyvalue(path):
    """Parse a key-value file into ``{key: [raw string, ...]}``."""
    entries = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        entries.setdefault(key, []).append(value)
    return entries


def write_demo(path, demo):
    data = np.column_stack([demo.t, demo.y, demo.q])
    np.savetxt(path, data, delimiter=",", header=",".join(DEMO_HEADER),
               comments="", fmt="%.17g")


def read_demo(path):
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    if [h.strip() for h in header] != DEMO_HEADER:
        raise ValueError(f"{path}: demonstration header must be {','.join(DEMO_HEADER)}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Demonstration(t=data[:, 0], y=data[:, 1:4], q=data[:, 4:8])


def write_model(path, model):
    lines = [
        "# temporally coupled Cartesian DMP",
        "# centers, widths, weights: 6 x n_basis, row-major; rows 1-3 position, 4-6 orientation",
        f"format = {MODEL_FORMAT}",
        f"tau = {float(model.tau)!r}",
        f"alpha_z = {float(model.alpha_z)!r}",
        f"beta_z = {float(model.beta_z)!r}",
        f"alpha_x = {float(model.alpha_x)!r}",
        f"eps_pole = {float(model.eps_pole)!r}",
        f"n_basis = {model.n_basis}",
    ]
    for key in ("y0", "g", "q0", "q_g", "centers", "widths", "weights"):
        lines.append(f"{key} = {_fmt(getattr(model, key))}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_model(path):
    kv = {k: v[-1] for k, v in read_keyvalue(path).items()}
    if kv.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: not a {MODEL_FORMAT!r} file")
    arr = lambda key: np.array(kv[key].split(), dtype=float)  # noqa: E731
    n_basis = int(kv["n_basis"])
    shape = (6, n_basis)
    return DmpModel(
        tau=float(kv["tau"]), y0=arr("y0"), g=arr("g"), q0=arr("q0"), q_g=arr("q_g"),
        centers=arr("centers").reshape(shape), widths=arr("widths").reshape(shape),
        weights=arr("weights").reshape(shape), alpha_z=float(kv["alpha_z"]),
        beta_z=float(kv["beta_z"]), alpha_x=float(kv["alpha_x"]),
        eps_pole=float(kv["eps_pole"]))


def log_columns():
    head = ["t", "x", "tau_a"] + [f"n_{name}" for name, _ in XI_BLOCKS if name != "x"]
    raw = []
    for name, size in XI_BLOCKS:
        if name == "x":
            continue
        raw += [f"{name}_{i + 1}" for i in range(size)]
    quats = [f"{p}_{c}" for p in ("qc", "qa") for c in "wxyz"]
    return head, raw, quats


def _perturbation_to_dict(p):
    return {"kind": p.kind, "t_start": p.t_start, "t_end": p.t_end,
            "delta_y": p.delta_y.tolist(), "delta_rot": p.delta_rot.tolist(),
            "accel": p.accel.tolist()}


def write_log(path, log):
    """Write the episode CSV plus a ``.json`` sidecar with tau, perturbations, failure."""
    path = Path(path)
    head, raw, quats = log_columns()
    norms = log.norms
    cols = [log.t, log.x, log.tau_a] + [norms[name] for name, _ in XI_BLOCKS if name != "x"]
    raw_xi = np.delete(log.xi, XI_SLICES["x"].start, axis=1)
    if len(log):
        data = np.column_stack(cols + [raw_xi, log.q_c, log.q_a])
    else:
        data = np.empty((0, len(head + raw + quats)))
    np.savetxt(path, data, delimiter=",", header=",".join(head + raw + quats),
               comments="", fmt="%.17g")
    meta = {"tau": log.tau, "failed_t": log.failed_t,
            "perturbations": [_perturbation_to_dict(p) for p in log.perturbations]}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=1) + "\n")


def read_log(path):
    path = Path(path)
    head, raw, quats = log_columns()
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    if header[:len(head)] != head:
        raise ValueError(f"{path}: not an episode log")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    col = {name: i for i, name in enumerate(header)}
    x = data[:, col["x"]]
    blocks = []
    for name, size in XI_BLOCKS:
        if name == "x":
            blocks.append(x[:, None])
        else:
            blocks.append(data[:, [col[f"{name}_{i + 1}"] for i in range(size)]])
    meta_path = path.with_suffix(".json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    tau_a = data[:, col["tau_a"]]
    return EpisodeLog(
        t=data[:, col["t"]], x=x, tau_a=tau_a, xi=np.hstack(blocks),
        q_c=data[:, [col[f"qc_{c}"] for c in "wxyz"]],
        q_a=data[:, [col[f"qa_{c}"] for c in "wxyz"]],
        tau=meta.get("tau", float(tau_a.min()) if len(tau_a) else 1.0),
        perturbations=[Perturbation(**p) for p in meta.get("perturbations", [])],
        failed_t=meta.get("failed_t"))
