"""Run configuration and the three perturbation setups.

setup1
    Converged DMP at its goal; the robot is displaced by ``displace_pos`` (m)
    and ``displace_rot`` (rad) in random directions and released at t=0.
setup2
    Reach demonstration; two acceleration pulses during the motion.
setup3
    Handover demonstration rotating by more than pi; two acceleration pulses.
custom
    User model and perturbation schedule from the config file.
"""
import dataclasses
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import quaternion as quat
from .controller import Gains
from .dmp import CoupledState
from .io import read_demo, read_keyvalue, read_model
from .learning import synth_demo, train
from .sim import DT, Perturbation

PRESETS = ("setup1", "setup2", "setup3", "custom")
DEFAULT_HORIZON = {"setup1": 3.0, "setup2": 30.0, "setup3": 30.0, "custom": 30.0}


@dataclass
class RunConfig:
    preset: str = "setup1"
    model: str = None
    demo: str = None
    k_v: float = 10.0
    k_v_rot: float = None
    alpha_e: float = 10.0
    k_c: float = 1000.0
    dt: float = DT
    T: float = None
    trials: int = 1
    seed: int = 0
    out: str = None
    perturb: bool = True
    n_basis: int = 25
    demo_duration: float = 4.0
    handover_angle: float = 1.5 * np.pi
    displace_pos: float = 0.1
    displace_rot: float = 0.5
    goal_phase: float = 1e-8
    pulse_accel: float = 5.0
    pulse_rot_accel: float = 5.0
    pulse_duration: float = 0.3
    pulse_starts: tuple = (1.0, 4.0)
    perturbations: list = field(default_factory=list)

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"preset must be one of {PRESETS}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.T is None:
            self.T = DEFAULT_HORIZON[self.preset]
        if self.preset == "custom" and self.model is None:
            raise ValueError("the custom preset needs a model file")


def parse_perturbation(text):
    """``accel_pulse t0 t1 a1..a6`` or ``displace_release t0 dy1 dy2 dy3 r1 r2 r3``."""
    kind, *nums = text.split()
    v = [float(n) for n in nums]
    if kind == "accel_pulse" and len(v) == 8:
        return Perturbation(kind, v[0], v[1], accel=v[2:])
    if kind == "displace_release" and len(v) == 7:
        return Perturbation(kind, v[0], delta_y=v[1:4], delta_rot=v[4:7])
    raise ValueError(f"cannot parse perturbation {text!r}")


def load_config(path, **overrides):
    """Read a key-value config file; keyword overrides win over file entries."""
    types = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    values = {}
    for key, raw in read_keyvalue(path).items():
        if key in ("perturbation", "perturbations"):
            values["perturbations"] = [parse_perturbation(r) for r in raw]
            continue
        if key not in types:
            raise ValueError(f"{path}: unknown config key {key!r}")
        text = raw[-1]
        kind = types[key]
        if kind is bool:
            values[key] = text.lower() in ("1", "true", "yes", "on")
        elif kind is tuple:
            values[key] = tuple(float(v) for v in text.split())
        elif kind is int:
            values[key] = int(text)
        elif kind is float:
            values[key] = float(text)
        else:
            values[key] = text
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def _unit(rng, n=3):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def build_model(cfg):
    if cfg.model is not None:
        return read_model(cfg.model)
    if cfg.demo is not None:
        demo = read_demo(cfg.demo)
    elif cfg.preset == "setup3":
        demo = synth_demo("handover_gt_pi", cfg.demo_duration, angle=cfg.handover_angle)
    else:
        demo = synth_demo("reach", cfg.demo_duration, g=(0.3, 0.2, 0.1),
                          q_g=quat.from_axis_angle([1.0, 1.0, 0.0], 1.0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        model, _ = train(demo, n_basis=cfg.n_basis)
    return model


def build_gains(cfg, model):
    return Gains(tau=model.tau, k_v=cfg.k_v, alpha_e=cfg.alpha_e, k_c=cfg.k_c,
                 k_v_rot=cfg.k_v_rot)


def build_perturbations(cfg):
    """One perturbation list per trial, drawn from ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    sets = []
    for _ in range(cfg.trials):
        if cfg.preset == "setup1":
            perts = [Perturbation("displace_release", 0.0,
                                  delta_y=cfg.displace_pos * _unit(rng),
                                  delta_rot=cfg.displace_rot * _unit(rng))]
        elif cfg.preset in ("setup2", "setup3"):
            perts = [Perturbation("accel_pulse", t0, t0 + cfg.pulse_duration,
                                  accel=np.concatenate([cfg.pulse_accel * _unit(rng),
                                                        cfg.pulse_rot_accel * _unit(rng)]))
                     for t0 in cfg.pulse_starts]
        else:
            perts = list(cfg.perturbations)
        sets.append(perts if cfg.perturb else [])
    return sets


def build(cfg):
    """Resolve a config into ``(model, gains, perturbation_sets, coupled0)``."""
    model = build_model(cfg)
    gains = build_gains(cfg, model)
    coupled0 = CoupledState.at_goal(model, cfg.goal_phase) if cfg.preset == "setup1" else None
    return model, gains, build_perturbations(cfg), coupled0
