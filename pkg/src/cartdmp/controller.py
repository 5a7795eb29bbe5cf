"""Temporal coupling (filtered pose error, adaptive time) and the PD + feedforward law."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Gains:
    """Controller gains. ``k_p`` is derived as ``k_v**2 / 4`` and may not be set otherwise.

    ``k_v_rot`` optionally gives the orientation loop its own damping gain;
    by default both loops share ``k_v``.
    """
    tau: float
    k_v: float = 10.0
    alpha_e: float = 10.0
    k_c: float = 1000.0
    k_p: float = None
    k_v_rot: float = None

    def __post_init__(self):
        if self.k_p is None:
            object.__setattr__(self, "k_p", self.k_v**2 / 4.0)
        elif self.k_p != self.k_v**2 / 4.0:
            raise ValueError("k_p must equal k_v**2 / 4 (critical damping)")
        if self.k_v_rot is None:
            object.__setattr__(self, "k_v_rot", self.k_v)
        for name in ("tau", "k_v", "alpha_e", "k_c", "k_v_rot"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    @property
    def k_p_rot(self):
        return self.k_v_rot**2 / 4.0


@dataclass(frozen=True)
class ErrorFilterState:
    e_p: np.ndarray
    e_o: np.ndarray

    @classmethod
    def zero(cls, batch=()):
        return cls(np.zeros((*batch, 3)), np.zeros((*batch, 3)))

    @property
    def e(self):
        return np.concatenate([self.e_p, self.e_o], axis=-1)


def error_filter_step(state, y_a, y_c, d_ac, alpha_e, dt):
    """First-order low-pass of the pose error, discretized exactly for held inputs."""
    decay = np.exp(-alpha_e * dt)
    u_p = np.asarray(y_a) - np.asarray(y_c)
    u_o = np.asarray(d_ac)
    return ErrorFilterState(u_p + (state.e_p - u_p) * decay,
                            u_o + (state.e_o - u_o) * decay)


def error_filter_rate(state, y_a, y_c, d_ac, alpha_e):
    """Continuous-time filter derivative ``ė``, shape ``(..., 6)``."""
    u = np.concatenate([np.asarray(y_a) - np.asarray(y_c), np.asarray(d_ac)], axis=-1)
    return alpha_e * (u - state.e)


def adaptive_tau(gains, e):
    """``tau_a = tau (1 + k_c e.e)``."""
    e = np.asarray(e, dtype=float)
    return gains.tau * (1.0 + gains.k_c * np.sum(e * e, axis=-1))


def adaptive_tau_rate(gains, e, e_dot):
    return 2.0 * gains.tau * gains.k_c * np.sum(np.asarray(e) * np.asarray(e_dot), axis=-1)


def pd_feedforward(gains, y_a, yd_a, y_c, yd_c, ydd_c, d_ac, omega_a, omega_c, omegad_c):
    """Reference accelerations ``(ÿ_r, ω̇_r)`` of the critically damped pose loop."""
    ydd_r = gains.k_p * (y_c - y_a) + gains.k_v * (yd_c - yd_a) + ydd_c
    omegad_r = -gains.k_p_rot * d_ac - gains.k_v_rot * (omega_a - omega_c) + omegad_c
    return ydd_r, omegad_r


def scalar_release(gains, amplitude, T, dt, method="rk4"):
    """Release a scalar double integrator at rest from ``amplitude`` toward a static target.

    Only the position loop is exercised. Returns ``(t, err)`` with the tracking
    error at each of the ``round(T / dt) + 1`` steps. ``method="euler"`` uses the
    same semi-implicit update as the simulated robot.
    """
    n = int(round(T / dt))
    zero = np.zeros(1)

    def accel(y, yd):
        return pd_feedforward(gains, y, yd, zero, zero, zero, zero, zero, zero, zero)[0]

    y, yd = np.array([float(amplitude)]), np.zeros(1)
    out = np.empty(n + 1)
    out[0] = y[0]
    for k in range(n):
        if method == "euler":
            yd = yd + dt * accel(y, yd)
            y = y + dt * yd
        elif method == "rk4":
            k1 = (yd, accel(y, yd))
            k2 = (yd + 0.5 * dt * k1[1], accel(y + 0.5 * dt * k1[0], yd + 0.5 * dt * k1[1]))
            k3 = (yd + 0.5 * dt * k2[1], accel(y + 0.5 * dt * k2[0], yd + 0.5 * dt * k2[1]))
            k4 = (yd + dt * k3[1], accel(y + dt * k3[0], yd + dt * k3[1]))
            y = y + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            yd = yd + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        else:
            raise ValueError(f"unknown method {method!r}")
        out[k + 1] = y[0]
    return np.arange(n + 1) * dt, out
