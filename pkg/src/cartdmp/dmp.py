"""Temporally coupled Cartesian DMP: transformation systems, phase, forcing.

State arrays may carry leading batch dimensions; the model is shared.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from . import quaternion as quat

DEGENERATE_SCALE = 1e-12
N_DIMS = 6


def _frozen(a, shape=None):
    a = np.array(a, dtype=float)
    if shape is not None:
        a = a.reshape(shape)
    a.setflags(write=False)
    return a


def basis_placement(n_basis, alpha_x=1.0, t_nominal=1.0, tau=1.0):
    """Centers equally spaced in nominal time and widths of half the spacing.

    Returns ``(centers, widths)`` each of shape ``(n_basis,)``; centers are
    strictly decreasing from 1.
    """
    if n_basis < 1:
        raise ValueError("n_basis must be positive")
    if n_basis == 1:
        return np.ones(1), np.ones(1)
    frac = np.arange(n_basis) / (n_basis - 1)
    centers = np.exp(-alpha_x * frac * t_nominal / tau)
    widths = np.empty(n_basis)
    widths[:-1] = 0.5 * np.abs(np.diff(centers))
    widths[-1] = widths[-2]
    return centers, widths


@dataclass(frozen=True, eq=False)
class DmpModel:
    """All DMP parameters.

    ``centers``, ``widths`` and ``weights`` have shape ``(6, n_basis)``;
    rows 0-2 are position, rows 3-5 orientation. ``beta_z`` defaults to
    ``alpha_z / 4`` and any other value is rejected.
    """
    tau: float
    y0: np.ndarray
    g: np.ndarray
    q0: np.ndarray
    q_g: np.ndarray
    centers: np.ndarray
    widths: np.ndarray
    weights: np.ndarray
    alpha_z: float = 25.0
    beta_z: float = None
    alpha_x: float = 1.0
    eps_pole: float = quat.EPS_POLE
    _scale: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        for name in ("tau", "alpha_z", "alpha_x", "eps_pole"):
            set_(name, float(getattr(self, name)))
        if self.beta_z is None:
            set_("beta_z", self.alpha_z / 4.0)
        elif self.beta_z != self.alpha_z / 4.0:
            raise ValueError("beta_z must equal alpha_z / 4 (critical damping)")
        if not (self.tau > 0 and self.alpha_x > 0 and self.alpha_z > 0):
            raise ValueError("tau, alpha_x and alpha_z must be positive")
        centers = np.atleast_2d(np.asarray(self.centers, dtype=float))
        widths = np.atleast_2d(np.asarray(self.widths, dtype=float))
        if centers.shape[0] == 1:
            centers = np.repeat(centers, N_DIMS, axis=0)
        if widths.shape[0] == 1:
            widths = np.repeat(widths, N_DIMS, axis=0)
        n_basis = centers.shape[1]
        if centers.shape != (N_DIMS, n_basis) or widths.shape != centers.shape:
            raise ValueError("centers/widths must have shape (6, n_basis)")
        if np.any(widths <= 0):
            raise ValueError("basis widths must be positive")
        if n_basis > 1 and np.any(np.diff(centers, axis=1) >= 0):
            raise ValueError("basis centers must be strictly decreasing")
        set_("centers", _frozen(centers))
        set_("widths", _frozen(widths))
        set_("weights", _frozen(self.weights, (N_DIMS, n_basis)))
        set_("y0", _frozen(self.y0, 3))
        set_("g", _frozen(self.g, 3))
        set_("q0", _frozen(quat.normalize(self.q0)))
        set_("q_g", _frozen(quat.normalize(self.q_g)))
        scale = np.concatenate([
            self.g - self.y0,
            quat.quat_diff(self.q_g, self.q0, self.eps_pole),
        ])
        set_("_scale", _frozen(scale))

    @classmethod
    def create(cls, tau, y0, g, q0, q_g, n_basis=25, alpha_z=25.0, alpha_x=1.0,
               t_nominal=None, weights=None, **kwargs):
        centers, widths = basis_placement(
            n_basis, alpha_x, tau if t_nominal is None else t_nominal, tau)
        if weights is None:
            weights = np.zeros((N_DIMS, n_basis))
        return cls(tau=tau, y0=y0, g=g, q0=q0, q_g=q_g, centers=centers,
                   widths=widths, weights=weights, alpha_z=alpha_z,
                   alpha_x=alpha_x, **kwargs)

    @property
    def n_basis(self):
        return self.centers.shape[1]

    @property
    def scale(self):
        """Forcing scaling ``(g - y0, d(q_g q0̄))``."""
        return self._scale

    @property
    def degenerate(self):
        """Dimensions whose scaling vanishes, so their forcing is identically 0."""
        return np.abs(self._scale) < DEGENERATE_SCALE

    def with_weights(self, weights):
        return replace(self, weights=weights)

    def __eq__(self, other):
        if not isinstance(other, DmpModel):
            return NotImplemented
        scalars = ("tau", "alpha_z", "beta_z", "alpha_x", "eps_pole")
        arrays = ("y0", "g", "q0", "q_g", "centers", "widths", "weights")
        return (all(getattr(self, k) == getattr(other, k) for k in scalars)
                and all(np.array_equal(getattr(self, k), getattr(other, k))
                        for k in arrays))


@dataclass(frozen=True)
class CoupledState:
    y_c: np.ndarray
    z: np.ndarray
    q_c: np.ndarray
    omega_z: np.ndarray
    x: np.ndarray

    @classmethod
    def initial(cls, model, tau_a=None, yd0=None, omega0=None, x0=1.0):
        """Start pose of ``model`` with ``z = tau_a * yd0`` and ``omega_z = tau_a * omega0``."""
        tau_a = model.tau if tau_a is None else tau_a
        yd0 = np.zeros(3) if yd0 is None else np.asarray(yd0, dtype=float)
        omega0 = np.zeros(3) if omega0 is None else np.asarray(omega0, dtype=float)
        return cls(np.array(model.y0), tau_a * yd0, np.array(model.q0),
                   tau_a * omega0, np.asarray(x0, dtype=float))

    @classmethod
    def at_goal(cls, model, x0=1e-9):
        return cls(np.array(model.g), np.zeros(3), np.array(model.q_g),
                   np.zeros(3), np.asarray(x0, dtype=float))


@dataclass(frozen=True)
class Derivatives:
    yd_c: np.ndarray
    zd: np.ndarray
    omega_c: np.ndarray
    omega_zd: np.ndarray
    xd: np.ndarray


def basis_activations(model, x, i):
    """Gaussian activations ``Psi_{i,j}(x)`` for dimension ``i``, shape ``(..., n_basis)``."""
    x = np.asarray(x, dtype=float)[..., None]
    c = model.centers[i]
    s = model.widths[i]
    return np.exp(-((x - c) ** 2) / (2.0 * s**2))


def basis_mixture(model, x):
    """Normalized basis mixture ``sum Psi w / sum Psi`` per dimension, shape ``(..., 6)``.

    Evaluated as a softmax over the log-activations, so it stays defined when
    every raw activation underflows (small phases far past the last center).
    """
    x = np.asarray(x, dtype=float)[..., None, None]
    logits = -((x - model.centers) ** 2) / (2.0 * model.widths**2)
    logits = logits - logits.max(axis=-1, keepdims=True)
    act = np.exp(logits)
    return np.sum(act * model.weights, axis=-1) / np.sum(act, axis=-1)


def forcing_term(model, x):
    """Six-dimensional forcing ``mixture(x) * x * scale``; shape ``(..., 6)``."""
    x = np.asarray(x, dtype=float)
    f = basis_mixture(model, x) * x[..., None] * model.scale
    return np.where(model.degenerate, 0.0, f)


def dmp_derivatives(model, s, tau_a, d_cg=None):
    """Time derivatives of the coupled DMP state at adaptive time parameter ``tau_a``.

    ``omega_c`` is the angular velocity of ``q_c``; the quaternion itself is
    advanced by :func:`cartdmp.quaternion.integrate_orientation`.
    """
    tau_a = np.asarray(tau_a, dtype=float)
    ta = tau_a[..., None]
    f = forcing_term(model, s.x)
    if d_cg is None:
        d_cg = quat.quat_diff(s.q_c, model.q_g, model.eps_pole)
    a, b = model.alpha_z, model.beta_z
    zd = (a * (b * (model.g - s.y_c) - s.z) + f[..., :3]) / ta
    omega_zd = (a * (b * -d_cg - s.omega_z) + f[..., 3:]) / ta
    return Derivatives(
        yd_c=s.z / ta,
        zd=zd,
        omega_c=s.omega_z / ta,
        omega_zd=omega_zd,
        xd=(-model.alpha_x * s.x) / tau_a,
    )


def coupled_feedforward(model, s, tau_a, tau_a_dot, deriv=None):
    """Analytic accelerations of the coupled pose, ``(ÿ_c, ω̇_c)``.

    Quotient rule on ``ẏ_c = z / tau_a`` and ``ω_c = ω_z / tau_a``.
    """
    if deriv is None:
        deriv = dmp_derivatives(model, s, tau_a)
    ta = np.asarray(tau_a, dtype=float)[..., None]
    tad = np.asarray(tau_a_dot, dtype=float)[..., None]
    ydd_c = deriv.zd / ta - s.z * tad / ta**2
    omegad_c = deriv.omega_zd / ta - s.omega_z * tad / ta**2
    return ydd_c, omegad_c


def step_coupled(model, s, tau_a, dt, method="euler", deriv=None):
    """Advance the coupled DMP by one fixed step with ``tau_a`` held constant.

    ``method="euler"`` is semi-implicit Euler (velocities first, then poses
    with the new velocities; phase decays by its exact exponential factor).
    ``method="rk4"`` is classical Runge-Kutta on the quaternion components
    followed by renormalization.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if method == "rk4":
        return _step_rk4(model, s, tau_a, dt)
    if method != "euler":
        raise ValueError(f"unknown integration method {method!r}")
    if deriv is None:
        deriv = dmp_derivatives(model, s, tau_a)
    ta = np.asarray(tau_a, dtype=float)
    z = s.z + dt * deriv.zd
    omega_z = s.omega_z + dt * deriv.omega_zd
    return CoupledState(
        y_c=s.y_c + dt * (z / ta[..., None]),
        z=z,
        q_c=quat.integrate_orientation(s.q_c, omega_z / ta[..., None], dt),
        omega_z=omega_z,
        x=s.x * np.exp(-model.alpha_x * dt / ta),
    )


def _quat_rate(q, omega):
    w = np.concatenate([np.zeros(omega.shape[:-1] + (1,)), omega], axis=-1)
    # unnormalized product: the rate is not a unit quaternion
    w0, w1, w2, w3 = w[..., 0], w[..., 1], w[..., 2], w[..., 3]
    q0, q1, q2, q3 = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return 0.5 * np.stack([
        w0 * q0 - w1 * q1 - w2 * q2 - w3 * q3,
        w0 * q1 + w1 * q0 + w2 * q3 - w3 * q2,
        w0 * q2 - w1 * q3 + w2 * q0 + w3 * q1,
        w0 * q3 + w1 * q2 - w2 * q1 + w3 * q0,
    ], axis=-1)


def _step_rk4(model, s, tau_a, dt):
    def rates(state):
        # stage quaternions are renormalized only for the log map
        unit = CoupledState(state.y_c, state.z, quat.normalize(state.q_c),
                            state.omega_z, state.x)
        d = dmp_derivatives(model, unit, tau_a)
        return (d.yd_c, d.zd, _quat_rate(state.q_c, d.omega_c), d.omega_zd, d.xd)

    def shifted(k, h):
        return CoupledState(*(a + h * b for a, b in zip(
            (s.y_c, s.z, s.q_c, s.omega_z, s.x), k)))

    k1 = rates(s)
    k2 = rates(shifted(k1, dt / 2))
    k3 = rates(shifted(k2, dt / 2))
    k4 = rates(shifted(k3, dt))
    base = (s.y_c, s.z, s.q_c, s.omega_z, s.x)
    new = [b + dt / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
           for b, a1, a2, a3, a4 in zip(base, k1, k2, k3, k4)]
    new[2] = quat.normalize(new[2])
    return CoupledState(*new)


def rollout(model, T, dt, tau_a=None, state=None, method="euler"):
    """Uncoupled rollout at constant ``tau_a`` (default ``model.tau``).

    Returns ``(t, states)`` where ``states`` is a list of :class:`CoupledState`
    with ``len(t) == round(T / dt) + 1``.
    """
    tau_a = model.tau if tau_a is None else tau_a
    s = CoupledState.initial(model, tau_a) if state is None else state
    n = int(round(T / dt))
    states = [s]
    for _ in range(n):
        s = step_coupled(model, s, tau_a, dt, method=method)
        states.append(s)
    return np.arange(n + 1) * dt, states


def stack_states(states):
    """Stack a list of states into arrays ``y_c, z, q_c, omega_z, x`` along axis 0."""
    return CoupledState(*(np.stack([getattr(s, k) for s in states])
                          for k in ("y_c", "z", "q_c", "omega_z", "x")))
