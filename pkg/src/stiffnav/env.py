"""Quasi-static spring-network environment.

A rigid object held by the gripper is suspended by linear springs and
torsion elements. For any gripper pose the scene yields the reaction wrench
on the gripper, the stored elastic energy and (by central differences) the
ground-truth stiffness matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .screw import InvalidInputError, Pose, Wrench


class SingularGeometryError(ValueError):
    """A spring collapsed to zero length."""


@dataclass(frozen=True)
class SpringElement:
    anchor: np.ndarray        # world point [m]
    attach: np.ndarray        # body point [m]
    k: float                  # [N/m]
    rest_len: float           # [m]
    tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "anchor", np.asarray(self.anchor, dtype=float).reshape(3))
        object.__setattr__(self, "attach", np.asarray(self.attach, dtype=float).reshape(3))
        if not self.k > 0:
            raise InvalidInputError("spring stiffness must be positive")
        if self.rest_len < 0:
            raise InvalidInputError("spring rest length must be non-negative")


@dataclass(frozen=True)
class TorsionElement:
    """Torsional spring resisting body rotation about ``direction``.

    The angle is the twist component of the body orientation about the axis,
    so the element produces a pure couple. ``point`` only locates the line.
    """

    direction: np.ndarray
    point: np.ndarray
    k_t: float                # [N m/rad]
    rest_angle: float = 0.0
    tag: str = ""

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float).reshape(3)
        n = np.linalg.norm(d)
        if n == 0:
            raise InvalidInputError("torsion axis direction must be nonzero")
        object.__setattr__(self, "direction", d / n)
        object.__setattr__(self, "point", np.asarray(self.point, dtype=float).reshape(3))
        if not self.k_t > 0:
            raise InvalidInputError("torsion stiffness must be positive")


@dataclass(frozen=True)
class Scene:
    springs: tuple
    torsions: tuple = ()
    equilibrium_pose: Pose = field(default_factory=Pose.identity)
    # {"rule": "always"} or {"rule": "release_above", "height": h}
    contact: dict | None = None
    name: str = "custom"

    def active(self, z: Pose) -> bool:
        return contact_active(self.contact, z)


def contact_active(contact, z: Pose) -> bool:
    if not contact or contact.get("rule", "always") == "always":
        return True
    rule = contact["rule"]
    if rule == "release_above":
        return bool(z.r[2] <= contact["height"])
    if rule == "release_below":
        return bool(z.r[2] >= contact["height"])
    raise InvalidInputError(f"unknown contact rule {rule!r}")


# ---------------------------------------------------------------------------
# element evaluation

def _spring_terms(s: SpringElement, z: Pose, R):
    arm = R @ s.attach
    d = s.anchor - (z.r + arm)
    length = float(np.linalg.norm(d))
    if length < 1e-12:
        raise SingularGeometryError("spring anchor coincides with its attachment point")
    tension = s.k * (length - s.rest_len)
    f = tension * d / length
    return f, np.cross(arm, f), 0.5 * s.k * (length - s.rest_len) ** 2, tension


def twist_angle(q, u):
    """Signed twist angle of rotation ``q`` about unit axis ``u`` and its gradient.

    The gradient is with respect to a small world-frame rotation vector
    applied on the left of ``q``.
    """
    q = q if q[0] >= 0 else -q
    w, v = q[0], q[1:]
    s = float(u @ v)
    theta = 2.0 * math.atan2(s, w)
    den = w * w + s * s
    if den < 1e-15:
        return theta, u.copy()
    grad = (w * (w * u + np.cross(v, u)) + s * v) / den
    return theta, grad


def _torsion_terms(t: TorsionElement, z: Pose):
    theta, grad = twist_angle(z.q, t.direction)
    dtheta = theta - t.rest_angle
    return -t.k_t * dtheta * grad, 0.5 * t.k_t * dtheta ** 2


def reaction_wrench(scene: Scene, z: Pose) -> Wrench:
    """Wrench exerted by the environment on the gripper (restoring sign)."""
    f = np.zeros(3)
    m = np.zeros(3)
    if not scene.active(z):
        return Wrench(f, m)
    R = z.R
    for s in scene.springs:
        fs, ms, _, _ = _spring_terms(s, z, R)
        f += fs
        m += ms
    for t in scene.torsions:
        m += _torsion_terms(t, z)[0]
    return Wrench(f, m)


def _raw_energy(scene: Scene, z: Pose) -> float:
    if not scene.active(z):
        return 0.0
    R = z.R
    e = sum(_spring_terms(s, z, R)[2] for s in scene.springs)
    e += sum(_torsion_terms(t, z)[1] for t in scene.torsions)
    return float(e)


def elastic_energy(scene: Scene, z: Pose) -> float:
    """Stored energy relative to the scene's equilibrium pose [J]."""
    return _raw_energy(scene, z) - _raw_energy(scene, scene.equilibrium_pose)


def spring_tensions(scene: Scene, z: Pose, include_virtual=False):
    """Scalar force k(|l| - rest_len) in each active spring [N]."""
    if not scene.active(z):
        return np.zeros(0)
    R = z.R
    return np.array([
        _spring_terms(s, z, R)[3]
        for s in scene.springs
        if include_virtual or s.tag != "virtual"
    ])


def finite_difference_stiffness(scene: Scene, z: Pose, step: float = 1e-6, symmetrize=True):
    """Central-difference stiffness ``K = -dw/d(delta)`` at pose ``z``."""
    if not step > 0:
        raise InvalidInputError("step must be positive")
    K = np.zeros((6, 6))
    for j in range(6):
        d = np.zeros(6)
        d[j] = step
        wp = reaction_wrench(scene, z.displaced(d)).as_array()
        wm = reaction_wrench(scene, z.displaced(-d)).as_array()
        if not (np.all(np.isfinite(wp)) and np.all(np.isfinite(wm))):
            raise FloatingPointError("non-finite wrench while probing stiffness")
        K[:, j] = -(wp - wm) / (2 * step)
    if symmetrize:
        K = 0.5 * (K + K.T)
    return K


# ---------------------------------------------------------------------------
# scenarios

SCENARIOS = ("planar_triangle", "line_spring", "flexible_hinge", "membrane")

_DEFAULTS = {
    "planar_triangle": dict(
        tri_radius=0.05, spring_len=0.10, k=350.0, pretension=0.01,
        virtual_k=1.0e4, virtual_len=20.0, tilt_k=100.0,
    ),
    "line_spring": dict(
        direction=(0.15, 0.10, 0.071), k=1600.0, half_len=0.15, pretension=0.02,
        rot_k=(1.0, 0.9, 1.1),
    ),
    "flexible_hinge": dict(
        hinge_axis=(1.0, 0.0, 0.0), hinge_k=2.0, arm=0.1, stiff_k=1500.0,
        stiff_rot_k=15.0, spring_len=0.2, pretension=0.0005,
    ),
    "membrane": dict(
        n_springs=12, radius=0.15, k_x=600.0, k_y=450.0, pretension=0.02,
        rot_k=(1.2, 1.6, 1.4), release_height=0.02,
    ),
}


def scenario_defaults(name):
    if name not in _DEFAULTS:
        raise InvalidInputError(f"unknown scenario {name!r}; expected one of {SCENARIOS}")
    return dict(_DEFAULTS[name])


def _axis_torsions(ks, tag=""):
    return tuple(
        TorsionElement(np.eye(3)[i], np.zeros(3), float(k), 0.0, tag)
        for i, k in enumerate(ks)
    )


def _spring_pair(direction, k_total, length, pretension, attach=(0, 0, 0), tag=""):
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    attach = np.asarray(attach, dtype=float)
    return tuple(
        SpringElement(attach + sgn * length * u, attach, k_total / 2.0, length - pretension, tag)
        for sgn in (1.0, -1.0)
    )


def make_scenario(name, **params) -> Scene:
    """Build one of the four reference scenes. Unknown keyword params raise."""
    p = scenario_defaults(name)
    unknown = set(params) - set(p)
    if unknown:
        raise InvalidInputError(f"unknown parameters for {name}: {sorted(unknown)}")
    p.update(params)
    builder = {
        "planar_triangle": _planar_triangle,
        "line_spring": _line_spring,
        "flexible_hinge": _flexible_hinge,
        "membrane": _membrane,
    }[name]
    scene = builder(**p)
    return replace(scene, name=name)


def _planar_triangle(tri_radius, spring_len, k, pretension, virtual_k, virtual_len, tilt_k):
    if not (tri_radius > 0 and spring_len > pretension >= 0):
        raise InvalidInputError("invalid triangle geometry")
    springs = []
    for ang in np.radians([90.0, 210.0, 330.0]):
        u = np.array([math.cos(ang), math.sin(ang), 0.0])
        springs.append(SpringElement(
            (tri_radius + spring_len) * u, tri_radius * u, k, spring_len - pretension))
    # stiff out-of-plane rig: z spring pair (no pretension) and tilt torsions
    springs += _spring_pair((0, 0, 1), 2 * virtual_k, virtual_len, 0.0, tag="virtual")
    torsions = _axis_torsions((tilt_k, tilt_k), tag="virtual")
    return Scene(tuple(springs), torsions)


def _line_spring(direction, k, half_len, pretension, rot_k):
    if not half_len > pretension >= 0:
        raise InvalidInputError("invalid line spring geometry")
    # two springs in series-opposition; each of stiffness k/2 gives k along the line
    springs = _spring_pair(direction, k, half_len, pretension)
    return Scene(springs, _axis_torsions(rot_k))


def _flexible_hinge(hinge_axis, hinge_k, arm, stiff_k, stiff_rot_k, spring_len, pretension):
    if not arm > 0:
        raise InvalidInputError("hinge arm must be positive")
    u = np.asarray(hinge_axis, dtype=float)
    u = u / np.linalg.norm(u)
    # compliant translation perpendicular to the hinge axis and to the arm
    arm_dir = np.cross(u, [0.0, 1.0, 0.0])
    if np.linalg.norm(arm_dir) < 1e-6:
        arm_dir = np.cross(u, [1.0, 0.0, 0.0])
    arm_dir /= np.linalg.norm(arm_dir)
    soft_dir = np.cross(arm_dir, u)
    soft_k = hinge_k / arm ** 2
    springs = (
        _spring_pair(u, stiff_k, spring_len, pretension)
        + _spring_pair(arm_dir, stiff_k, spring_len, pretension)
        + _spring_pair(soft_dir, soft_k, spring_len, pretension)
    )
    # hinge line sits one arm length away from the gripper
    torsions = [TorsionElement(u, -arm * arm_dir, hinge_k)]
    for d in (arm_dir, soft_dir):
        torsions.append(TorsionElement(d, np.zeros(3), stiff_rot_k))
    return Scene(springs, tuple(torsions))


def _membrane(n_springs, radius, k_x, k_y, pretension, rot_k, release_height):
    if n_springs < 8:
        raise InvalidInputError("membrane needs at least 8 radial springs")
    if not radius > pretension >= 0:
        raise InvalidInputError("invalid membrane geometry")
    springs = []
    for ang in np.linspace(0.0, 2 * math.pi, n_springs, endpoint=False):
        u = np.array([math.cos(ang), math.sin(ang), 0.0])
        # anisotropic sheet: radial stiffness interpolates between the x and y moduli
        k = (k_x * u[0] ** 2 + k_y * u[1] ** 2) * 2.0 / n_springs
        springs.append(SpringElement(radius * u, np.zeros(3), k, radius - pretension))
    return Scene(
        tuple(springs), _axis_torsions(rot_k),
        contact={"rule": "release_above", "height": float(release_height)},
    )


# ---------------------------------------------------------------------------
# JSON (de)serialisation

def scene_to_dict(scene: Scene) -> dict:
    return {
        "name": scene.name,
        "springs": [
            {"anchor": s.anchor.tolist(), "attach": s.attach.tolist(), "k": s.k,
             "rest_len": s.rest_len, **({"tag": s.tag} if s.tag else {})}
            for s in scene.springs
        ],
        "torsions": [
            {"direction": t.direction.tolist(), "point": t.point.tolist(), "k_t": t.k_t,
             "rest_angle": t.rest_angle, **({"tag": t.tag} if t.tag else {})}
            for t in scene.torsions
        ],
        "equilibrium_pose": scene.equilibrium_pose.as_list(),
        "contact": scene.contact,
    }


def scene_from_dict(d: dict) -> Scene:
    """Load a scene from its JSON form.

    Either ``{"scenario": name, "params": {...}}`` for a built-in scene or an
    explicit element list as produced by :func:`scene_to_dict`.
    """
    if "scenario" in d:
        return make_scenario(d["scenario"], **d.get("params", {}))
    try:
        springs = tuple(
            SpringElement(s["anchor"], s["attach"], float(s["k"]), float(s["rest_len"]), s.get("tag", ""))
            for s in d.get("springs", [])
        )
        torsions = tuple(
            TorsionElement(t["direction"], t.get("point", [0, 0, 0]), float(t["k_t"]),
                           float(t.get("rest_angle", 0.0)), t.get("tag", ""))
            for t in d.get("torsions", [])
        )
        pose = Pose.from_list(d["equilibrium_pose"]) if "equilibrium_pose" in d else Pose.identity()
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"malformed scene definition: {exc}") from exc
    contact = d.get("contact")
    contact_active(contact, pose)  # validates the rule name
    return Scene(springs, torsions, pose, contact, d.get("name", "custom"))


def check_equilibrium(scene: Scene, tol=1e-9) -> float:
    """Net wrench magnitude at the equilibrium pose; raises if above ``tol``."""
    w = reaction_wrench(scene, scene.equilibrium_pose).as_array()
    n = float(np.linalg.norm(w))
    if n >= tol:
        raise InvalidInputError(f"scene is not at equilibrium (|w| = {n:.3g})")
    return n


__all__ = [
    "SpringElement", "TorsionElement", "Scene", "SingularGeometryError",
    "reaction_wrench", "elastic_energy", "spring_tensions", "finite_difference_stiffness",
    "make_scenario", "scenario_defaults", "SCENARIOS", "scene_to_dict", "scene_from_dict",
    "check_equilibrium", "contact_active", "twist_angle",
]
