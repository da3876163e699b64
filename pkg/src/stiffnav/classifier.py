"""Heuristic axis classification and library-based constraint identification."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from importlib import resources

import numpy as np

from .screw import InvalidInputError, angle_between_lines, screw_axis_line
from .stiffness import Constraint, Eigenscrew


class Motion(str, Enum):
    ROTATIONAL = "Rotational"
    SCREW = "Screw"
    TRANSLATIONAL = "Translational"


class Stiffness(str, Enum):
    FREE = "Free"
    COMPLIANT = "Compliant"
    RIGID = "Rigid"


_CELL_NAMES = {
    (Motion.ROTATIONAL, Stiffness.FREE): "Free Rotation",
    (Motion.SCREW, Stiffness.FREE): "Free Screw",
    (Motion.TRANSLATIONAL, Stiffness.FREE): "Free Translation",
    (Motion.ROTATIONAL, Stiffness.COMPLIANT): "Torsion Spring",
    (Motion.SCREW, Stiffness.COMPLIANT): "Screw Spring",
    (Motion.TRANSLATIONAL, Stiffness.COMPLIANT): "Linear Spring",
    (Motion.ROTATIONAL, Stiffness.RIGID): "Rigid, Rotational",
    (Motion.SCREW, Stiffness.RIGID): "Rigid, Screw",
    (Motion.TRANSLATIONAL, Stiffness.RIGID): "Rigid, Translational",
}


@dataclass(frozen=True)
class AxisClass:
    motion: Motion
    stiffness: Stiffness

    @property
    def cell(self) -> str:
        return _CELL_NAMES[(self.motion, self.stiffness)]


@dataclass(frozen=True)
class ClassifierThresholds:
    gamma_theta: float = 0.1      # |pitch| below: translational [m]
    gamma_x: float = 0.5          # |pitch| above: rotational [m]
    gamma_c_trans: float = 10.0   # [N/m]
    gamma_r_trans: float = 5000.0
    gamma_c_rot: float = 0.05     # [N m/rad]
    gamma_r_rot: float = 50.0
    dominance_ratio: float = 1.5
    similarity_band: float = 0.35
    perp_tol_deg: float = 15.0
    r_min: float = 0.01
    r_max: float = 0.5

    def __post_init__(self):
        if not self.gamma_theta < self.gamma_x:
            raise InvalidInputError("gamma_theta must be below gamma_x")
        if not (self.gamma_c_trans < self.gamma_r_trans and self.gamma_c_rot < self.gamma_r_rot):
            raise InvalidInputError("compliant bounds must be below rigid bounds")
        if not self.dominance_ratio > 1:
            raise InvalidInputError("dominance_ratio must exceed 1")

    @classmethod
    def from_dict(cls, d):
        known = {k: float(v) for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self):
        return asdict(self)


def default_thresholds() -> ClassifierThresholds:
    text = resources.files("stiffnav").joinpath("data/thresholds.json").read_text()
    return ClassifierThresholds.from_dict(json.loads(text))


@dataclass
class ConstraintLabel:
    kind: str                     # FlexibleHinge | LinearSpringConstraint | Membrane | Unknown
    params: dict = field(default_factory=dict)
    diagnostic: str = ""

    def to_dict(self):
        return {"label": self.kind, "params": _jsonable(self.params), "diagnostic": self.diagnostic}


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x)
    return x


def classify_axis(s: Eigenscrew, th: ClassifierThresholds) -> AxisClass:
    h = abs(s.pitch_w)
    if h < th.gamma_theta:
        motion = Motion.TRANSLATIONAL
    elif h > th.gamma_x:
        motion = Motion.ROTATIONAL
    else:
        motion = Motion.SCREW
    if motion is Motion.ROTATIONAL:
        lo, hi = th.gamma_c_rot, th.gamma_r_rot
    else:
        lo, hi = th.gamma_c_trans, th.gamma_r_trans
    lam = abs(s.lam)
    if lam < lo:
        stiff = Stiffness.FREE
    elif lam > hi:
        stiff = Stiffness.RIGID
    else:
        stiff = Stiffness.COMPLIANT
    return AxisClass(motion, stiff)


def lever_arm(rot_min: Eigenscrew, trans_min: Eigenscrew) -> float:
    """Arm at which the rotational stiffness reflects as the translational one."""
    if trans_min.lam == 0:
        raise InvalidInputError("translational eigenvalue is zero")
    return math.sqrt(abs(rot_min.lam) / abs(trans_min.lam))


def _much_less(small, ref, ratio):
    return small == 0 and ref > 0 or small > 0 and ref / small >= ratio


def _approx(a, b, band):
    return abs(a - b) <= band * max(a, b)


def _line(s: Eigenscrew):
    d, p = screw_axis_line(s.e)
    return {"direction": d, "point": p}


def identify_constraint(C, th: ClassifierThresholds | None = None) -> ConstraintLabel:
    """Match a set of stiffness axes against the hinge, line-spring and membrane rules.

    Rules are tried in that order and the first that fires wins.
    """
    th = th or default_thresholds()
    screws = C.screws if isinstance(C, Constraint) else list(C)
    usable = [s for s in screws if math.isfinite(s.lam)]
    if len(usable) < 3:
        return ConstraintLabel("Unknown", diagnostic=f"only {len(usable)} usable screws")
    if all(s.lam == 0 for s in usable):
        return ConstraintLabel("Unknown", diagnostic="no stiffness: unconstrained")
    classes = [classify_axis(s, th) for s in usable]
    R = sorted((s for s, c in zip(usable, classes) if c.motion is Motion.ROTATIONAL), key=lambda s: abs(s.lam))
    T = sorted((s for s, c in zip(usable, classes) if c.motion is Motion.TRANSLATIONAL), key=lambda s: abs(s.lam))
    mags_r = [abs(s.lam) for s in R]
    mags_t = [abs(s.lam) for s in T]
    ratio, band = th.dominance_ratio, th.similarity_band
    notes = [f"{len(R)} rotational, {len(T)} translational axes"]

    if len(R) >= 2 and len(T) >= 2:
        if _much_less(mags_r[0], np.mean(mags_r), ratio) and _much_less(mags_t[0], np.mean(mags_t), ratio):
            rot_axis, trans_axis = _line(R[0]), _line(T[0])
            off = abs(90.0 - angle_between_lines(rot_axis["direction"], trans_axis["direction"]))
            if off <= th.perp_tol_deg and mags_t[0] > 0:
                r_l = lever_arm(R[0], T[0])
                if th.r_min < r_l < th.r_max:
                    return ConstraintLabel("FlexibleHinge", {
                        "hinge_axis": rot_axis, "compliant_translation": trans_axis["direction"],
                        "lever_arm": r_l,
                    }, "; ".join(notes))
                notes.append(f"hinge lever arm {r_l:.4g} m outside range")
            else:
                notes.append(f"hinge axes {off:.1f} deg from perpendicular")

    if len(T) >= 3:
        t_max, others = mags_t[-1], mags_t[-3:-1]
        if (t_max > 0 and t_max >= ratio * np.mean(mags_t) and _approx(*others, band)
                and t_max >= ratio * max(others)):
            return ConstraintLabel("LinearSpringConstraint", {"spring_axis": _line(T[-1])}, "; ".join(notes))
        t_min, others = mags_t[0], mags_t[1:3]
        if (_much_less(t_min, np.mean(mags_t), ratio) and _approx(*others, band)
                and _much_less(t_min, min(others), ratio)):
            return ConstraintLabel("Membrane", {"normal": _line(T[0])["direction"]}, "; ".join(notes))
    return ConstraintLabel("Unknown", diagnostic="; ".join(notes + ["no rule fired"]))


# ---------------------------------------------------------------------------
# eigendata files

FIXTURES = ("line_spring", "flexible_hinge", "membrane")


def screws_from_eigendata(d: dict) -> list:
    """Build axes from ``{"eigenvalues", "pitches", "axes"}``; ``axes`` lists one 6-vector per axis."""
    try:
        lams = [float(x) for x in d["eigenvalues"]]
        axes = np.asarray(d["axes"], dtype=float)
        pitches = d.get("pitches")
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInputError(f"malformed eigendata: {exc}") from None
    if axes.ndim != 2 or axes.shape[1] != 6 or axes.shape[0] != len(lams):
        raise InvalidInputError("axes must be one 6-vector per eigenvalue")
    if pitches is not None and len(pitches) != len(lams):
        raise InvalidInputError("pitches must match eigenvalues in length")
    if not np.all(np.linalg.norm(axes, axis=1) > 0):
        raise InvalidInputError("zero axis")
    return [
        Eigenscrew.from_vector(axes[i], lams[i], "axis", None if pitches is None else float(pitches[i]))
        for i in range(len(lams))
    ]


def load_fixture(name: str) -> dict:
    if name not in FIXTURES:
        raise InvalidInputError(f"unknown fixture {name!r}; expected one of {FIXTURES}")
    text = resources.files("stiffnav").joinpath(f"data/fixtures/{name}.json").read_text()
    return json.loads(text)
