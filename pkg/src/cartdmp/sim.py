"""Closed-loop episodes: DMP -> PD + feedforward -> double-integrator robot.

Trials that share a model and gains are simulated together, stacked along a
leading batch axis. A trial whose orientation error enters the guarded region
around (-1, 0, 0, 0) is dropped from the batch and its log ends there.
"""
from dataclasses import dataclass, field

import numpy as np

from . import quaternion as quat
from .controller import (ErrorFilterState, adaptive_tau, adaptive_tau_rate,
                         error_filter_rate, error_filter_step, pd_feedforward)
from .dmp import CoupledState, coupled_feedforward, dmp_derivatives, step_coupled

DT = 1.0 / 250.0

XI_BLOCKS = (("ypos", 3), ("yvel", 3), ("dac", 3), ("womega", 3), ("e", 6),
             ("x", 1), ("ycg", 3), ("z", 3), ("dcg", 3), ("wz", 3))
XI_SLICES = {}
_start = 0
for _name, _size in XI_BLOCKS:
    XI_SLICES[_name] = slice(_start, _start + _size)
    _start += _size
XI_SIZE = _start
NORM_NAMES = tuple(name for name, _ in XI_BLOCKS if name != "x")


@dataclass(frozen=True)
class RobotState:
    y: np.ndarray
    yd: np.ndarray
    q: np.ndarray
    omega: np.ndarray


@dataclass(frozen=True)
class Perturbation:
    """Scripted disturbance.

    ``displace_release`` offsets the actual pose by ``delta_y`` and the rotation
    vector ``delta_rot`` at ``t_start`` and releases it at rest.
    ``accel_pulse`` adds the 6-vector ``accel`` to the reference acceleration
    for ``t_start <= t < t_end``.
    """
    kind: str
    t_start: float
    t_end: float = None
    delta_y: np.ndarray = field(default_factory=lambda: np.zeros(3))
    delta_rot: np.ndarray = field(default_factory=lambda: np.zeros(3))
    accel: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        if self.kind not in ("displace_release", "accel_pulse"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        pulse = self.kind == "accel_pulse"
        if pulse and not (self.t_end is not None and self.t_start < self.t_end):
            raise ValueError("an acceleration pulse needs t_start < t_end")
        for name, size in (("delta_y", 3), ("delta_rot", 3), ("accel", 6)):
            object.__setattr__(self, name,
                               np.asarray(getattr(self, name), dtype=float).reshape(size))

    @property
    def end(self):
        return self.t_start if self.kind == "displace_release" else self.t_end


@dataclass
class EpisodeLog:
    """Per-step record of the stacked state vector and its block norms."""
    t: np.ndarray
    x: np.ndarray
    tau_a: np.ndarray
    xi: np.ndarray
    q_c: np.ndarray
    q_a: np.ndarray
    tau: float
    perturbations: list = field(default_factory=list)
    failed_t: float = None

    def block(self, name):
        return self.xi[:, XI_SLICES[name]]

    @property
    def norms(self):
        return {name: np.linalg.norm(self.block(name), axis=-1) for name, _ in XI_BLOCKS}

    @property
    def xi_norm(self):
        return np.linalg.norm(self.xi, axis=-1)

    def __len__(self):
        return len(self.t)


def robot_step(r, ydd_r, omegad_r, disturbance=None, dt=DT):
    """Double integrator, semi-implicit Euler; ``disturbance`` is a 6-vector acceleration."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if disturbance is not None:
        disturbance = np.asarray(disturbance, dtype=float)
        ydd_r = ydd_r + disturbance[..., :3]
        omegad_r = omegad_r + disturbance[..., 3:]
    yd = r.yd + dt * ydd_r
    omega = r.omega + dt * omegad_r
    return RobotState(r.y + dt * yd, yd, quat.integrate_orientation(r.q, omega, dt), omega)


def _stack_xi(coupled, robot, filt, model, tau_a, d_ac, d_cg):
    ta = np.asarray(tau_a, dtype=float)[..., None]
    x = np.asarray(coupled.x, dtype=float)[..., None]
    return np.concatenate([
        robot.y - coupled.y_c,
        robot.yd - coupled.z / ta,
        d_ac,
        robot.omega - coupled.omega_z / ta,
        filt.e,
        x,
        coupled.y_c - model.g,
        coupled.z,
        d_cg,
        coupled.omega_z,
    ], axis=-1)


def xi_vector(coupled, robot, filt, model, tau_a):
    """Stacked state ``(y-y_c, ẏ-ẏ_c, d_ac, ω_a-ω_c, e, x, y_c-g, z, d_cg, ω_z)``.

    Returns ``(xi, norms)`` with ``xi`` of shape ``(..., 31)`` and a dict of
    2-norms per block.
    """
    d_ac = quat.quat_diff(robot.q, coupled.q_c, model.eps_pole)
    d_cg = quat.quat_diff(coupled.q_c, model.q_g, model.eps_pole)
    xi = _stack_xi(coupled, robot, filt, model, tau_a, d_ac, d_cg)
    norms = {name: np.linalg.norm(xi[..., XI_SLICES[name]], axis=-1) for name, _ in XI_BLOCKS}
    return xi, norms


def _broadcast_state(s, batch):
    def bc(a, n):
        return np.array(np.broadcast_to(a, (batch, n)) if n else np.broadcast_to(a, (batch,)))
    return CoupledState(bc(s.y_c, 3), bc(s.z, 3), bc(s.q_c, 4), bc(s.omega_z, 3), bc(s.x, 0))


def run_batch(model, gains, perturbation_sets, T, dt=DT, coupled0=None, method="euler"):
    """Simulate one episode per entry of ``perturbation_sets``.

    Parameters
    ----------
    model : DmpModel
    gains : Gains
    perturbation_sets : list of list of Perturbation
    T : float
        Horizon in seconds; ``round(T / dt) + 1`` records per completed trial.
    coupled0 : CoupledState, optional
        Initial DMP state shared by every trial, default the model start pose
        at rest with ``x = 1``. The robot starts on the coupled pose and velocity.

    Returns
    -------
    list of EpisodeLog
    """
    batch = len(perturbation_sets)
    n = int(round(T / dt))
    s0 = CoupledState.initial(model) if coupled0 is None else coupled0
    s = _broadcast_state(s0, batch)
    ta0 = np.full(batch, model.tau)
    robot = RobotState(s.y_c.copy(), s.z / ta0[:, None], s.q_c.copy(), s.omega_z / ta0[:, None])
    filt = ErrorFilterState.zero((batch,))

    # disturbance schedule and displacement events, indexed by step
    accel = np.zeros((n + 1, batch, 6))
    displacements = {}
    steps = np.arange(n + 1) * dt
    for b, perts in enumerate(perturbation_sets):
        for p in perts:
            if p.kind == "accel_pulse":
                on = (steps >= p.t_start - 1e-12) & (steps < p.t_end - 1e-12)
                accel[on, b] += p.accel
            else:
                k = int(np.ceil(p.t_start / dt - 1e-9))
                displacements.setdefault(k, []).append((b, p))

    rec_t = steps
    rec_x = np.full((n + 1, batch), np.nan)
    rec_tau = np.full((n + 1, batch), np.nan)
    rec_xi = np.full((n + 1, batch, XI_SIZE), np.nan)
    rec_qc = np.full((n + 1, batch, 4), np.nan)
    rec_qa = np.full((n + 1, batch, 4), np.nan)
    n_rec = np.full(batch, n + 1)
    failed_t = [None] * batch
    active = np.arange(batch)

    for k in range(n + 1):
        if k in displacements:
            y, yd, q, om = (robot.y.copy(), robot.yd.copy(), robot.q.copy(), robot.omega.copy())
            pos = {b: i for i, b in enumerate(active)}
            for b, p in displacements[k]:
                if b not in pos:
                    continue
                i = pos[b]
                y[i] += p.delta_y
                q[i] = quat.multiply(quat.exp_map(0.5 * p.delta_rot), q[i])
                yd[i] = 0.0
                om[i] = 0.0
            robot = RobotState(y, yd, q, om)

        r_ac = quat.multiply(robot.q, quat.conjugate(s.q_c))
        r_cg = quat.multiply(s.q_c, quat.conjugate(model.q_g))
        bad = (quat.near_removed_point(r_ac, model.eps_pole)
               | quat.near_removed_point(r_cg, model.eps_pole))
        if bad.any():
            for b in active[bad]:
                n_rec[b] = k
                failed_t[b] = k * dt
            keep = ~bad
            active = active[keep]
            s = CoupledState(*(getattr(s, a)[keep] for a in ("y_c", "z", "q_c", "omega_z", "x")))
            robot = RobotState(robot.y[keep], robot.yd[keep], robot.q[keep], robot.omega[keep])
            filt = ErrorFilterState(filt.e_p[keep], filt.e_o[keep])
            r_ac, r_cg = r_ac[keep], r_cg[keep]
            if not len(active):
                break
        d_ac = 2.0 * quat.log_map(r_ac, model.eps_pole)
        d_cg = 2.0 * quat.log_map(r_cg, model.eps_pole)

        e = filt.e
        tau_a = adaptive_tau(gains, e)
        xi = _stack_xi(s, robot, filt, model, tau_a, d_ac, d_cg)
        rec_x[k, active] = s.x
        rec_tau[k, active] = tau_a
        rec_xi[k, active] = xi
        rec_qc[k, active] = s.q_c
        rec_qa[k, active] = robot.q
        if k == n:
            break

        deriv = dmp_derivatives(model, s, tau_a, d_cg)
        e_dot = error_filter_rate(filt, robot.y, s.y_c, d_ac, gains.alpha_e)
        tau_a_dot = adaptive_tau_rate(gains, e, e_dot)
        ydd_c, omegad_c = coupled_feedforward(model, s, tau_a, tau_a_dot, deriv)
        ydd_r, omegad_r = pd_feedforward(
            gains, robot.y, robot.yd, s.y_c, deriv.yd_c, ydd_c,
            d_ac, robot.omega, deriv.omega_c, omegad_c)

        new_robot = robot_step(robot, ydd_r, omegad_r, accel[k, active], dt)
        filt = error_filter_step(filt, robot.y, s.y_c, d_ac, gains.alpha_e, dt)
        s = step_coupled(model, s, tau_a, dt, method=method, deriv=deriv)
        robot = new_robot

    logs = []
    for b in range(batch):
        m = n_rec[b]
        logs.append(EpisodeLog(
            t=rec_t[:m].copy(), x=rec_x[:m, b].copy(), tau_a=rec_tau[:m, b].copy(),
            xi=rec_xi[:m, b].copy(), q_c=rec_qc[:m, b].copy(), q_a=rec_qa[:m, b].copy(),
            tau=gains.tau, perturbations=list(perturbation_sets[b]), failed_t=failed_t[b]))
    return logs


def run_episode(model, gains, perturbations, T, dt=DT, coupled0=None, method="euler"):
    """Single closed-loop episode; see :func:`run_batch`."""
    return run_batch(model, gains, [list(perturbations)], T, dt, coupled0, method)[0]


# Episode analysis

def decay_fit(log, rel_floor=1e-6):
    """Least-squares slope and R^2 of ``log ||xi||`` after the last perturbation.

    The window runs from the end of the last perturbation (or t=0) until the
    norm first drops below ``rel_floor`` times its value at the window start.
    """
    t0 = max((p.end for p in log.perturbations), default=0.0)
    norm = log.xi_norm
    i0 = int(np.searchsorted(log.t, t0 - 1e-9))
    if i0 >= len(log) - 2:
        return np.nan, np.nan
    below = np.flatnonzero(norm[i0:] < rel_floor * norm[i0])
    i1 = i0 + (below[0] if len(below) else len(log) - i0)
    t = log.t[i0:i1]
    y = np.log(norm[i0:i1])
    slope, intercept = np.polyfit(t, y, 1)
    resid = y - (slope * t + intercept)
    r2 = 1.0 - np.sum(resid**2) / np.sum((y - y.mean()) ** 2)
    return slope, r2


def summarize(log, tol=1e-3, dcg_tol=1e-2):
    """Convergence booleans, final norms, decay estimate and coupling statistics."""
    norms = log.norms
    final = {name: float(v[-1]) for name, v in norms.items()}
    failed = log.failed_t is not None
    slope, r2 = decay_fit(log)
    w = log.q_c[:, 0]
    dots = np.sum(log.q_c[1:] * log.q_c[:-1], axis=-1)
    return {
        "converged": bool(not failed and all(v < tol for v in final.values())),
        "goal_reached": bool(not failed and final["ycg"] < tol and final["dcg"] < dcg_tol),
        "failed_t": log.failed_t,
        "final": final,
        "decay_rate": float(slope),
        "decay_r2": float(r2),
        "max_tau_ratio": float(np.max(log.tau_a) / log.tau),
        "initial_dcg": float(norms["dcg"][0]),
        "equator_crossed": bool(w.max() > 0 and w.min() < 0),
        "min_successive_dot": float(dots.min()) if len(dots) else 1.0,
    }
