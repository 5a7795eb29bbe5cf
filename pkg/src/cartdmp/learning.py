"""Fitting DMP weights from demonstrations, and synthetic demonstrations."""
import warnings
from dataclasses import dataclass

import numpy as np

from . import quaternion as quat
from .dmp import DEGENERATE_SCALE, N_DIMS, DmpModel, basis_activations


class NonUniformSampling(UserWarning):
    pass


class IllConditioned(UserWarning):
    pass


class DegenerateScaling(UserWarning):
    pass


class InvalidAngle(ValueError):
    pass


@dataclass(frozen=True)
class Demonstration:
    """Demonstrated pose trajectory: ``t`` (n,), ``y`` (n, 3), ``q`` (n, 4)."""
    t: np.ndarray
    y: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        y = np.asarray(self.y, dtype=float).reshape(-1, 3)
        q = quat.normalize(np.asarray(self.q, dtype=float).reshape(-1, 4))
        if t.ndim != 1 or len(t) < 3:
            raise ValueError("a demonstration needs at least 3 samples")
        if len(y) != len(t) or len(q) != len(t):
            raise ValueError("t, y and q must have the same length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("sample times must be strictly increasing")
        # recorded quaternions may flip hemisphere between samples
        q = q.copy()
        for k in range(1, len(q)):
            if np.dot(q[k], q[k - 1]) < 0:
                q[k] = -q[k]
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "q", q)

    @property
    def duration(self):
        return self.t[-1] - self.t[0]

    def __len__(self):
        return len(self.t)


@dataclass(frozen=True)
class DemoDerivatives:
    yd: np.ndarray
    ydd: np.ndarray
    omega: np.ndarray
    omegad: np.ndarray


@dataclass(frozen=True)
class RegressionTargets:
    x: np.ndarray
    f_target: np.ndarray
    scale: np.ndarray

    def __len__(self):
        return len(self.x)


def lowpass(signal, t, cutoff):
    """Single forward pass of a first-order low-pass with ``cutoff`` in Hz."""
    out = np.array(signal, dtype=float)
    gain = 1.0 - np.exp(-2.0 * np.pi * cutoff * np.diff(t))
    for k in range(1, len(out)):
        out[k] = out[k - 1] + gain[k - 1] * (out[k] - out[k - 1])
    return out


def differentiate_demo(demo, eps_pole=quat.EPS_POLE, cutoff=None):
    """Velocities and accelerations of a demonstration by finite differences.

    Second-order central differences inside, second-order one-sided at the
    ends. Angular velocity comes from the world-frame quaternion difference
    of the neighbouring samples. With ``cutoff`` (Hz) every difference is
    passed once through :func:`lowpass`, for noisy recorded data.
    """
    t, y, q = demo.t, demo.y, demo.q
    dt = np.diff(t)
    if dt.max() > 1.1 * dt.min():
        warnings.warn("sample spacing varies by more than 10%", NonUniformSampling)
    if np.any(np.sum(q[1:] * q[:-1], axis=-1) < -1 + 1e-12):
        raise quat.DomainError("successive demonstration quaternions are antipodal")

    def smooth(a):
        return a if cutoff is None else lowpass(a, t, cutoff)

    yd = smooth(np.gradient(y, t, axis=0, edge_order=2))
    ydd = smooth(np.gradient(yd, t, axis=0, edge_order=2))

    omega = np.empty_like(y)
    omega[1:-1] = (quat.quat_diff(q[2:], q[:-2], eps_pole)
                   / (t[2:] - t[:-2])[:, None])
    omega[0] = quat.quat_diff(q[1], q[0], eps_pole) / dt[0]
    omega[-1] = quat.quat_diff(q[-1], q[-2], eps_pole) / dt[-1]
    omega = smooth(omega)
    omegad = smooth(np.gradient(omega, t, axis=0, edge_order=2))
    return DemoDerivatives(yd, ydd, omega, omegad)


def compute_targets(demo, derivatives=None, alpha_z=25.0, alpha_x=1.0, tau=None,
                    eps_pole=quat.EPS_POLE):
    """Invert the transformation systems along the demonstration (``tau_a = tau``)."""
    if derivatives is None:
        derivatives = differentiate_demo(demo, eps_pole)
    tau = demo.duration if tau is None else tau
    beta_z = alpha_z / 4.0
    d = derivatives
    g, q_g = demo.y[-1], demo.q[-1]
    x = np.exp(-alpha_x * (demo.t - demo.t[0]) / tau)
    f_p = tau**2 * d.ydd - alpha_z * (beta_z * (g - demo.y) - tau * d.yd)
    d_g = quat.quat_diff(demo.q, q_g, eps_pole)
    f_o = tau**2 * d.omegad - alpha_z * (beta_z * -d_g - tau * d.omega)
    scale = np.concatenate([g - demo.y[0], quat.quat_diff(q_g, demo.q[0], eps_pole)])
    return RegressionTargets(x=x, f_target=np.hstack([f_p, f_o]), scale=scale)


def fit_weights(targets, skeleton):
    """Locally weighted regression of the forcing weights, one scalar per basis.

    ``w_ij = sum_k Psi_ij s_k f_ik / sum_k Psi_ij s_k^2`` with ``s_k = x_k scale_i``.
    Degenerate dimensions are skipped and keep zero weights.
    """
    weights = np.zeros((N_DIMS, skeleton.n_basis))
    degenerate = np.abs(targets.scale) < DEGENERATE_SCALE
    if degenerate.any():
        warnings.warn(f"degenerate scaling in dimensions {np.flatnonzero(degenerate).tolist()}; "
                      "their forcing is fixed to zero", DegenerateScaling)
    for i in range(N_DIMS):
        if degenerate[i]:
            continue
        psi = basis_activations(skeleton, targets.x, i)  # (n, n_basis)
        s = targets.x * targets.scale[i]
        num = psi.T @ (s * targets.f_target[:, i])
        den = psi.T @ (s * s)
        bad = den < 1e-12
        if bad.any():
            warnings.warn(f"dimension {i}: {bad.sum()} basis functions have no support",
                          IllConditioned)
        weights[i] = np.where(bad, 0.0, num / np.where(bad, 1.0, den))
    return skeleton.with_weights(weights)


def train(demo, n_basis=25, alpha_z=25.0, alpha_x=1.0, eps_pole=quat.EPS_POLE, cutoff=None):
    """Fit a :class:`DmpModel` to ``demo`` with ``tau`` equal to its duration.

    ``cutoff`` (Hz) enables derivative smoothing, see :func:`differentiate_demo`.
    """
    tau = demo.duration
    skeleton = DmpModel.create(tau=tau, y0=demo.y[0], g=demo.y[-1], q0=demo.q[0],
                               q_g=demo.q[-1], n_basis=n_basis, alpha_z=alpha_z,
                               alpha_x=alpha_x, t_nominal=tau, eps_pole=eps_pole)
    targets = compute_targets(demo, differentiate_demo(demo, eps_pole, cutoff),
                              alpha_z=alpha_z, alpha_x=alpha_x, tau=tau, eps_pole=eps_pole)
    return fit_weights(targets, skeleton), targets


def min_jerk(u):
    """Minimum-jerk profile and its first two derivatives on ``u`` in [0, 1]."""
    u = np.clip(u, 0.0, 1.0)
    s = 10 * u**3 - 15 * u**4 + 6 * u**5
    sd = 30 * u**2 - 60 * u**3 + 30 * u**4
    sdd = 60 * u - 180 * u**2 + 120 * u**3
    return s, sd, sdd


def synth_demo(kind, duration, y0=(0.0, 0.0, 0.0), g=(0.3, 0.2, 0.1),
               q0=quat.IDENTITY, q_g=None, axis=(0.0, 0.0, 1.0), angle=None,
               rate=250.0):
    """Synthetic demonstration with minimum-jerk position and angle profiles.

    ``kind="reach"`` rotates along the geodesic from ``q0`` to ``q_g`` (or by
    ``angle`` about ``axis`` when ``q_g`` is omitted). ``kind="handover_gt_pi"``
    rotates by ``angle`` (default 1.5 pi, must lie in (pi, 2 pi)) about ``axis``,
    so the quaternion path leaves the upper half-sphere.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    y0 = np.asarray(y0, dtype=float)
    g = np.asarray(g, dtype=float)
    q0 = quat.normalize(q0)
    axis = np.asarray(axis, dtype=float)
    if kind == "handover_gt_pi":
        angle = 1.5 * np.pi if angle is None else float(angle)
        if not np.pi < angle < 2 * np.pi:
            raise InvalidAngle(f"handover angle {angle} not in (pi, 2 pi)")
        rotvec = angle * axis / np.linalg.norm(axis)
    elif kind == "reach":
        if q_g is not None:
            rotvec = quat.quat_diff(q_g, q0)
        else:
            angle = 0.5 if angle is None else float(angle)
            if not 0 < angle < 2 * np.pi:
                raise InvalidAngle(f"angle {angle} not in (0, 2 pi)")
            rotvec = angle * axis / np.linalg.norm(axis)
    else:
        raise ValueError(f"unknown demonstration kind {kind!r}")

    # exact sample rate; the profile ends on the last sample
    n = int(round(duration * rate))
    if n < 3:
        raise ValueError("duration * rate must give at least 3 samples")
    t = np.arange(n) / rate
    s, _, _ = min_jerk(t / t[-1])
    y = y0 + s[:, None] * (g - y0)
    q = quat.multiply(quat.exp_map(0.5 * s[:, None] * rotvec), q0)
    return Demonstration(t=t, y=y, q=q)
