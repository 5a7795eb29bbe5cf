"""Unit-quaternion algebra on S^3 with the point (-1, 0, 0, 0) removed.

Quaternions are stored as arrays ``[w, x, y, z]`` (scalar first). Every
function accepts leading batch dimensions, ``(..., 4)`` for quaternions and
``(..., 3)`` for vectors.

Quaternions are never sign-canonicalized: ``q`` and ``-q`` are distinct
states here, which is what lets a path move continuously through both
half-spheres.
"""
import numpy as np

EPS_POLE = 1e-7
SMALL_ANGLE = 1e-8

IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])
REMOVED_POINT = np.array([-1.0, 0.0, 0.0, 0.0])


class DomainError(ValueError):
    """Raised when a quaternion is within ``eps_pole`` of an excluded point."""


def _norm(v):
    # cheaper than np.linalg.norm for many tiny vectors
    return np.sqrt(np.sum(v * v, axis=-1))


def normalize(q):
    q = np.asarray(q, dtype=float)
    return q / _norm(q)[..., None]


def multiply(q1, q2):
    """Hamilton product ``q1 ⊗ q2``, renormalized."""
    q1 = np.asarray(q1, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    w1, x1, y1, z1 = q1[..., 0], q1[..., 1], q1[..., 2], q1[..., 3]
    w2, x2, y2, z2 = q2[..., 0], q2[..., 1], q2[..., 2], q2[..., 3]
    out = np.stack([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ], axis=-1)
    return normalize(out)


def conjugate(q):
    q = np.asarray(q, dtype=float)
    return np.concatenate([q[..., :1], -q[..., 1:]], axis=-1)


def near_removed_point(q, eps_pole=EPS_POLE):
    """Boolean mask of quaternions inside the guarded region around (-1,0,0,0)."""
    q = np.asarray(q, dtype=float)
    return _norm(q - REMOVED_POINT) < eps_pole


def log_map(q, eps_pole=EPS_POLE):
    """Imaginary part of the quaternion logarithm, ``(theta/2) * n``.

    The branch is ``atan2(|v|, w)`` which equals ``arccos(w)`` for unit
    quaternions but keeps full precision near ``w = ±1``. The result norm
    lies in ``[0, pi)``; there is no re-wrapping to the shorter rotation.

    Raises
    ------
    DomainError
        If any ``q`` lies within ``eps_pole`` of (-1, 0, 0, 0).
    """
    q = np.asarray(q, dtype=float)
    if np.any(near_removed_point(q, eps_pole)):
        raise DomainError("quaternion is within eps_pole of (-1, 0, 0, 0)")
    w = q[..., 0]
    v = q[..., 1:]
    vnorm = _norm(v)
    half_angle = np.arctan2(vnorm, w)
    small = (vnorm < SMALL_ANGLE) & (w > 0)
    scale = np.where(small, 1.0, half_angle / np.where(small, 1.0, vnorm))
    return scale[..., None] * v


def exp_map(r):
    """Unit quaternion ``(cos|r|, sin|r| r/|r|)``; inverse of :func:`log_map`."""
    r = np.asarray(r, dtype=float)
    angle = _norm(r)
    small = angle < SMALL_ANGLE
    safe = np.where(small, 1.0, angle)
    scale = np.where(small, 1.0, np.sin(angle) / safe)
    w = np.where(small, 1.0 - 0.5 * angle**2, np.cos(angle))
    return normalize(np.concatenate([w[..., None], scale[..., None] * r], axis=-1))


def quat_diff(q1, q2, eps_pole=EPS_POLE):
    """Orientation difference ``d(q1 q2̄) = 2 Im log(q1 q2̄)`` as a rotation vector.

    Its norm is the rotation angle of ``q1 q2̄`` in ``[0, 2pi)``.
    """
    return 2.0 * log_map(multiply(q1, conjugate(q2)), eps_pole)


def from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    return exp_map(0.5 * np.asarray(angle, dtype=float)[..., None] * axis)


def integrate_orientation(q, omega, dt):
    """Advance ``q`` by a world-frame angular velocity held constant over ``dt``."""
    step = exp_map(0.5 * dt * np.asarray(omega, dtype=float))
    return multiply(step, q)


def random_unit(rng, size=None):
    """Uniform samples on S^3 (or on S^(n-1) for other trailing sizes)."""
    shape = (4,) if size is None else (*np.atleast_1d(size), 4)
    return normalize(rng.standard_normal(shape))


# Stereographic projection S^3 minus a pole -> R^3

def hyperplane_basis(pole):
    """Orthonormal basis (4x3) of the hyperplane orthogonal to ``pole``.

    Built from the Householder reflection that sends ``pole`` to ``±e0``.
    """
    pole = normalize(pole)
    sign = 1.0 if pole[0] >= 0 else -1.0
    u = pole.copy()
    u[0] += sign
    u /= np.linalg.norm(u)
    householder = np.eye(4) - 2.0 * np.outer(u, u)
    return householder[:, 1:]


def stereographic_project(p, pole, eps_pole=EPS_POLE):
    """Project ``p`` on S^3 from ``pole`` onto R^3.

    The image of ``x`` is ``(x - (x.pole) pole) / (1 - x.pole)`` written in the
    coordinates of :func:`hyperplane_basis`. ``1 - x.pole`` is evaluated as
    ``|x - pole|^2 / 2`` to keep precision close to the pole.
    """
    p = np.asarray(p, dtype=float)
    pole = normalize(pole)
    gap = np.linalg.norm(p - pole, axis=-1)
    if np.any(gap < eps_pole):
        raise DomainError("cannot project the projection pole itself")
    basis = hyperplane_basis(pole)
    denom = 0.5 * gap**2
    return (p @ basis) / denom[..., None]


def stereographic_unproject(u, pole):
    """Inverse of :func:`stereographic_project`."""
    u = np.asarray(u, dtype=float)
    pole = normalize(pole)
    basis = hyperplane_basis(pole)
    s = np.sum(u * u, axis=-1)[..., None]
    return (2.0 * (u @ basis.T) + (s - 1.0) * pole) / (s + 1.0)
