"""Pose, quaternion and screw algebra.

Conventions used across the package:

* quaternions are scalar-first ``(w, x, y, z)``, Hamilton product;
* 6-vectors are ordered ``[linear; angular]`` for twists and
  ``[force; moment]`` for wrenches;
* wrenches are taken about the gripper origin, with components in
  world-aligned axes. Pose perturbations are a world-frame translation
  plus a rotation vector about the gripper origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

UNIT_TOL = 1e-6
# below this fraction of |e| the force part of a screw counts as zero
FORCE_EPS = 1e-6

DELTA = np.block([[np.zeros((3, 3)), np.eye(3)], [np.eye(3), np.zeros((3, 3))]])
DELTA.setflags(write=False)


class InvalidInputError(ValueError):
    """Raised when an argument violates an operation's precondition."""


# ---------------------------------------------------------------------------
# quaternions

def quat_mul(p, q):
    pw, px, py, pz = p
    qw, qx, qy, qz = q
    return np.array([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ])


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_from_rotvec(v):
    v = np.asarray(v, dtype=float)
    angle = float(np.linalg.norm(v))
    if angle < 1e-12:
        q = np.array([1.0, 0.5 * v[0], 0.5 * v[1], 0.5 * v[2]])
        return q / np.linalg.norm(q)
    axis = v / angle
    return np.concatenate([[math.cos(angle / 2)], math.sin(angle / 2) * axis])


def quat_to_rotvec(q):
    q = np.asarray(q, dtype=float)
    if q[0] < 0:
        q = -q
    s = float(np.linalg.norm(q[1:]))
    if s < 1e-12:
        return 2.0 * q[1:]
    angle = 2.0 * math.atan2(s, q[0])
    return angle * q[1:] / s


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_about(axis, angle):
    axis = np.asarray(axis, dtype=float)
    return quat_from_rotvec(axis / np.linalg.norm(axis) * angle)


def _check_unit(q, name="q"):
    q = np.asarray(q, dtype=float)
    if q.shape != (4,) or not np.all(np.isfinite(q)):
        raise InvalidInputError(f"{name} must be a finite 4-vector")
    if abs(np.linalg.norm(q) - 1.0) > UNIT_TOL:
        raise InvalidInputError(f"{name} is not a unit quaternion (|q|={np.linalg.norm(q):.3g})")
    return q


def quat_error(q, q_goal):
    """Relative rotation ``q^-1 * q_goal``, on the hemisphere with w >= 0."""
    q = _check_unit(q, "q")
    q_goal = _check_unit(q_goal, "q_goal")
    dq = quat_mul(quat_conj(q), q_goal)
    if dq[0] < 0:
        dq = -dq
    return dq / np.linalg.norm(dq)


# ---------------------------------------------------------------------------
# poses, twists, wrenches

@dataclass(frozen=True, eq=False)
class Pose:
    r: np.ndarray
    q: np.ndarray

    def __eq__(self, other):
        return isinstance(other, Pose) and np.array_equal(self.r, other.r) and np.array_equal(self.q, other.q)

    def __hash__(self):
        return hash(tuple(self.as_list()))

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float).reshape(3)
        q = np.asarray(self.q, dtype=float).reshape(4)
        if not np.all(np.isfinite(r)):
            raise InvalidInputError("pose position must be finite")
        n = np.linalg.norm(q)
        if not np.all(np.isfinite(q)) or abs(n - 1.0) > 1e-3:
            raise InvalidInputError("pose orientation must be a unit quaternion")
        q = q / n
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "q", q)

    @classmethod
    def identity(cls):
        return cls(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    @classmethod
    def planar(cls, x, y, theta, z=0.0):
        return cls(np.array([x, y, z]), quat_about([0, 0, 1], theta))

    @property
    def R(self):
        return quat_to_matrix(self.q)

    def displaced(self, delta):
        """Pose moved by ``delta = [dr; rotvec]`` (rotation about the gripper origin)."""
        delta = np.asarray(delta, dtype=float)
        q = quat_mul(quat_from_rotvec(delta[3:]), self.q)
        return Pose(self.r + delta[:3], q / np.linalg.norm(q))

    def delta_to(self, other: "Pose"):
        """Inverse of :meth:`displaced`: the 6-vector taking ``self`` to ``other``."""
        dq = quat_mul(other.q, quat_conj(self.q))
        return np.concatenate([other.r - self.r, quat_to_rotvec(dq)])

    def as_list(self):
        return [*map(float, self.r), *map(float, self.q)]

    @classmethod
    def from_list(cls, values):
        values = list(map(float, values))
        if len(values) == 3:
            return cls.planar(*values)
        if len(values) != 7:
            raise InvalidInputError("pose needs 7 values (x y z qw qx qy qz) or 3 planar (x y theta)")
        return cls(np.array(values[:3]), np.array(values[3:]))


@dataclass(frozen=True)
class Twist:
    v: np.ndarray
    w: np.ndarray

    @classmethod
    def from_array(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x[:3].copy(), x[3:].copy())

    def as_array(self):
        return np.concatenate([self.v, self.w])


@dataclass(frozen=True)
class Wrench:
    f: np.ndarray
    m: np.ndarray

    @classmethod
    def zero(cls):
        return cls(np.zeros(3), np.zeros(3))

    @classmethod
    def from_array(cls, x):
        x = np.asarray(x, dtype=float)
        return cls(x[:3].copy(), x[3:].copy())

    def as_array(self):
        return np.concatenate([self.f, self.m])


def pose_error(z: Pose, z_goal: Pose):
    """7-vector ``[r_g - r, q^-1 * q_g]``."""
    return np.concatenate([z_goal.r - z.r, quat_error(z.q, z_goal.q)])


# ---------------------------------------------------------------------------
# screws

def canonical_sign(e):
    """Flip ``e`` so the first nonzero entry of its larger 3-subvector is positive."""
    e = np.asarray(e, dtype=float)
    a, b = e[:3], e[3:]
    dom = a if np.linalg.norm(a) >= np.linalg.norm(b) else b
    scale = max(np.abs(dom).max(), 1e-300)
    for c in dom:
        if abs(c) > 1e-9 * scale:
            return e if c > 0 else -e
    return e


@dataclass(frozen=True)
class ScrewVector:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(3)
        b = np.asarray(self.b, dtype=float).reshape(3)
        if not (np.any(a) or np.any(b)):
            raise InvalidInputError("screw vector must be nonzero")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_array(cls, x, canonical=True):
        x = np.asarray(x, dtype=float).reshape(6)
        if canonical:
            x = canonical_sign(x)
        return cls(x[:3], x[3:])

    def as_array(self):
        return np.concatenate([self.a, self.b])

    def unit(self):
        x = self.as_array()
        return x / np.linalg.norm(x)


def _screw_array(e):
    x = e.as_array() if isinstance(e, ScrewVector) else np.asarray(e, dtype=float).reshape(6)
    n = np.linalg.norm(x)
    if not np.isfinite(n) or n == 0:
        raise InvalidInputError("screw vector must be finite and nonzero")
    return x


def raw_pitch(e):
    """``|1/2 e^T Delta e|`` of the unit-normalised screw, i.e. ``|a.b|``."""
    x = _screw_array(e)
    x = x / np.linalg.norm(x)
    return abs(0.5 * x @ DELTA @ x)


def wrench_pitch(e):
    """Pitch ``f.m / f.f`` reading ``e`` as a wrench; ``inf`` for a pure couple."""
    x = _screw_array(e)
    f, m = x[:3], x[3:]
    if np.linalg.norm(f) <= FORCE_EPS * np.linalg.norm(x):
        return math.inf
    return float(f @ m / (f @ f))


def screw_axis_line(e):
    """Direction and closest-to-origin point of the screw's axis.

    The direction is the larger 3-subvector; the point is
    ``(dominant x other) / |dominant|^2``.
    """
    x = _screw_array(e)
    a, b = x[:3], x[3:]
    if np.linalg.norm(a) >= np.linalg.norm(b):
        dom, other = a, b
    else:
        dom, other = b, a
    n2 = dom @ dom
    if n2 <= (1e-12 * np.linalg.norm(x)) ** 2:
        raise InvalidInputError("degenerate screw axis")
    return dom / math.sqrt(n2), np.cross(dom, other) / n2


def angle_between_lines(u, v):
    """Unsigned angle in degrees between two line directions (0..90)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    c = abs(u @ v) / (np.linalg.norm(u) * np.linalg.norm(v))
    return math.degrees(math.acos(min(1.0, c)))
